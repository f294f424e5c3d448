#include <CLI11.hpp>

#include "stackdyn/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stackdyn: learning dynamics and equilibrium classification in two-player games"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool has_seed = false;
  };

  auto add_sub = [&](const char* name, const char* desc) {
    auto* sub = app.add_subcommand(name, desc);
    auto args = std::make_shared<SubArgs>();
    sub->add_option("config", args->config, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args->out, "override output_dir");
    sub->add_option("--seed", args->seed, "override root seed")
        ->each([args](const std::string&) { args->has_seed = true; });
    return std::pair{sub, args};
  };

  auto [run_cmd, run_args] = add_sub("run", "execute the config's task");
  auto [field_cmd, field_args] = add_sub("field", "sample a vector field over a grid");
  auto [sweep_cmd, sweep_args] = add_sub("sweep", "run a parameter grid");

  CLI11_PARSE(app, argc, argv);

  auto overrides = [](const SubArgs& a) {
    stackdyn::CliOverrides ov;
    if (!a.out.empty()) ov.out_dir = a.out;
    if (a.has_seed) ov.seed = a.seed;
    return ov;
  };

  if (run_cmd->parsed()) return stackdyn::cli_run(run_args->config, overrides(*run_args));
  if (field_cmd->parsed()) return stackdyn::cli_field(field_args->config, overrides(*field_args));
  if (sweep_cmd->parsed()) return stackdyn::cli_sweep(sweep_args->config, overrides(*sweep_args));
  return stackdyn::kExitConfig;
}

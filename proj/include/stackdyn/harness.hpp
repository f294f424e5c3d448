#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "stackdyn/dynamics.hpp"
#include "stackdyn/equilibria.hpp"
#include "stackdyn/games.hpp"

namespace stackdyn {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

// Experiment document after validation: the raw JSON (for task-specific
// sections), the constructed game, and the run configuration shared by the
// dynamic tasks.
struct ParsedExperiment {
  nlohmann::json doc;
  std::string task;
  GameHandle game;
  RunConfig run;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
};

// Validation errors throw ContractViolation naming the missing or malformed
// field. x0 is required only by tasks that iterate.
ParsedExperiment parse_experiment_json(const nlohmann::json& doc);
ParsedExperiment parse_experiment_file(const std::string& path);

// Serialization helpers shared by tasks and tests. Doubles print with %.17g
// so equal runs produce byte-identical artifacts.
std::string format_double(double v);
void write_trajectory_csv(const std::string& path, const Trajectory& t, BlockDims dims);
nlohmann::json spectrum_to_json(const SpectrumReport& rep);
nlohmann::json classification_to_json(const Classification& c);

struct FieldGridSpec {
  FieldKind kind = FieldKind::sim;
  double eta = 0.0;
  std::array<std::array<double, 2>, 2> box{{{-1.0, 1.0}, {-1.0, 1.0}}};
  std::array<int, 2> resolution{2, 2};
};

// Samples the chosen field over the grid and writes CSV columns x1,x2,u,v.
// Stored values are the descent direction (the negated field); the header
// carries the convention. Only d1 = d2 = 1 games have a 2-d joint space.
void emit_vector_field(const GameOracle& g, const FieldGridSpec& spec, const std::string& path);

// Task dispatch on a parsed experiment; writes artifacts under output_dir.
// Throws on failure (ContractViolation for config problems, runtime errors
// for numerical ones); the CLI wrappers map those to exit codes.
void execute_experiment(const ParsedExperiment& ex);

// CLI entry points: parse, execute, map errors to exit codes 0/2/3 with a
// structured JSON error object on stderr.
int cli_run(const std::string& config_path, const CliOverrides& ov = {});
int cli_field(const std::string& config_path, const CliOverrides& ov = {});
int cli_sweep(const std::string& config_path, const CliOverrides& ov = {});

}  // namespace stackdyn

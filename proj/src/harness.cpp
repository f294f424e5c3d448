#include "stackdyn/harness.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stackdyn/opalg.hpp"
#include "stackdyn/parallel.hpp"
#include "stackdyn/rng.hpp"

namespace stackdyn {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const json& need(const json& j, const char* field, const char* ctx) {
  if (!j.is_object() || !j.contains(field))
    throw ContractViolation(std::string(ctx) + ": missing required field '" + field + "'");
  return j.at(field);
}

VectorXd parse_vector(const json& j, const char* ctx) {
  if (!j.is_array() || j.empty())
    throw ContractViolation(std::string(ctx) + ": expected a nonempty numeric array");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ContractViolation(std::string(ctx) + ": expected a nonempty numeric array");
    v(static_cast<int>(i)) = j[i].get<double>();
  }
  return v;
}

Schedule parse_schedule(const json& j, const char* ctx) {
  const std::string kind = need(j, "kind", ctx).get<std::string>();
  const double gamma = need(j, "gamma", ctx).get<double>();
  if (kind == "constant") return Schedule::constant(gamma);
  if (kind == "polynomial") return Schedule::polynomial(gamma, j.value("p", 1.0));
  if (kind == "exponential") return Schedule::exponential(gamma, need(j, "nu", ctx).get<double>());
  throw ContractViolation(std::string(ctx) + ": unknown schedule kind '" + kind + "'");
}

UpdateRule parse_rule(const json& j) {
  const std::string kind = need(j, "kind", "rule").get<std::string>();
  if (kind == "simgrad") return SimGradRule{};
  if (kind == "stackelberg") {
    StackelbergRule r;
    r.eta = j.value("eta", 0.0);
    r.solve.max_iters = j.value("solve_iters", 5);
    r.solve.tol = j.value("solve_tol", 1e-10);
    return r;
  }
  if (kind == "lola") return LolaRule{};
  if (kind == "best_response") {
    BestResponseRule r;
    r.inner_tol = j.value("inner_tol", r.inner_tol);
    r.inner_max_iters = j.value("inner_max_iters", r.inner_max_iters);
    r.inner_step = j.value("inner_step", r.inner_step);
    return r;
  }
  throw ContractViolation(std::string("rule: unknown rule kind '") + kind + "'");
}

NoiseModel parse_noise(const json& j) {
  NoiseModel n;
  if (j.is_null()) return n;
  if (j.contains("sigma")) {
    const json& s = j.at("sigma");
    if (s.is_number()) {
      n.sigma = {s.get<double>(), s.get<double>()};
    } else if (s.is_array() && s.size() == 2) {
      n.sigma = {s[0].get<double>(), s[1].get<double>()};
    } else {
      throw ContractViolation("noise.sigma: expected a number or a two-entry array");
    }
    if (n.sigma[0] < 0 || n.sigma[1] < 0)
      throw ContractViolation("noise.sigma: standard deviations must be >= 0");
    if (n.sigma[0] > 0 || n.sigma[1] > 0) n.kind = NoiseModel::Kind::gaussian;
  }
  n.seed = j.value("seed", std::uint64_t{0});
  return n;
}

FieldKind parse_field_kind(const json& j, const char* ctx) {
  const std::string k = j.get<std::string>();
  if (k == "sim") return FieldKind::sim;
  if (k == "stackelberg") return FieldKind::stackelberg;
  throw ContractViolation(std::string(ctx) + ": field must be 'sim' or 'stackelberg'");
}

bool task_iterates(const std::string& task) {
  return task == "run" || task == "spectrum_trace" || task == "lockin" || task == "sweep";
}

void atomic_write(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NumericalError("cannot open output file " + tmp.string());
    out << content;
    if (!out.flush()) throw NumericalError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json point_to_json(const JointPoint& x) {
  json a = json::array();
  VectorXd f = x.flat();
  for (int i = 0; i < f.size(); ++i) a.push_back(f(i));
  return a;
}

json verdict_to_json(const DefinitenessVerdict& v) {
  return {{"positive_definite", v.positive_definite},
          {"positive_semidefinite", v.positive_semidefinite},
          {"marginal", v.marginal},
          {"min_eig", v.min_eig},
          {"band", v.band}};
}

json stability_to_json(const StabilityVerdict& v) {
  return {{"stable", v.stable}, {"marginal", v.marginal}, {"min_real", v.min_real}, {"band", v.band}};
}

struct RunOutput {
  Trajectory traj;
  GameHandle* game = nullptr;
};

// Shared by the run task and sweep cells.
Trajectory execute_run(const ParsedExperiment& ex, const std::string& dir) {
  const GameOracle& g = *ex.game.oracle;
  Trajectory t = std::holds_alternative<BestResponseRule>(ex.run.rule)
                     ? run_best_response(ex.run, g)
                     : run(ex.run, g);

  if (ex.game.duopoly) {
    for (auto& rec : t.records) {
      if (!ex.game.duopoly->in_priced_branch(rec.x)) {
        t.warnings.push_back("iterates left the priced branch (q1 + q2 > A) at k = " +
                             std::to_string(rec.k));
        break;
      }
    }
  }

  write_trajectory_csv(dir + "/trajectory.csv", t, g.dims());

  json summary = {{"task", "run"},
                  {"stop_reason", to_string(t.reason)},
                  {"terminal_k", t.terminal_k},
                  {"terminal", point_to_json(t.terminal)},
                  {"terminal_grad_norm", finite_or_null(t.terminal_grad_norm)},
                  {"records", t.records.size()},
                  {"warnings", t.warnings}};
  atomic_write(dir + "/run.json", summary.dump(2) + "\n");
  return t;
}

void execute_classify(const ParsedExperiment& ex) {
  const json& sec = need(ex.doc, "classify", "config");
  const GameOracle& g = *ex.game.oracle;
  JointPoint x = JointPoint::from_flat(g.dims(), parse_vector(need(sec, "point", "classify"),
                                                              "classify.point"));
  ClassifyConfig cc;
  cc.eta = sec.value("eta", 0.0);
  cc.tol_eig = sec.value("tol_eig", 1e-6);
  cc.tol_residual = sec.value("tol_residual", 1e-5);
  Classification c = classify(g, x, cc);
  json out = classification_to_json(c);
  out["task"] = "classify";
  out["point"] = point_to_json(x);
  atomic_write(ex.output_dir + "/classification.json", out.dump(2) + "\n");
}

void execute_find(const ParsedExperiment& ex) {
  const json& sec = need(ex.doc, "find", "config");
  const GameOracle& g = *ex.game.oracle;
  const json& boxj = need(sec, "box", "find");
  if (!boxj.is_array() || boxj.empty())
    throw ContractViolation("find.box: expected an array of [lo, hi] pairs");
  std::vector<std::array<double, 2>> box;
  for (auto& b : boxj) {
    if (!b.is_array() || b.size() != 2)
      throw ContractViolation("find.box: expected an array of [lo, hi] pairs");
    box.push_back({b[0].get<double>(), b[1].get<double>()});
  }
  FindConfig fc;
  if (sec.contains("field")) fc.field = parse_field_kind(sec.at("field"), "find.field");
  fc.eta = sec.value("eta", 0.0);
  fc.n_starts = sec.value("n_starts", 64);
  fc.tol = sec.value("tol", 1e-9);
  fc.seed = ex.seed;

  std::vector<CriticalPoint> pts = find_critical_points(g, box, fc);
  ClassifyConfig cc;
  cc.eta = fc.eta;
  cc.tol_eig = sec.value("tol_eig", 1e-6);
  cc.tol_residual = sec.value("tol_residual", 1e-5);

  int n_dne = 0, n_dse = 0, n_nna = 0;
  json arr = json::array();
  for (auto& p : pts) {
    Classification c = classify(g, p.x, cc);
    n_dne += c.is_dne;
    n_dse += c.is_dse;
    n_nna += c.non_nash_attractor;
    arr.push_back({{"x", point_to_json(p.x)},
                   {"residual_sim", finite_or_null(p.residual_sim)},
                   {"residual_stack", finite_or_null(p.residual_stack)},
                   {"basin_seed", point_to_json(p.basin_seed)},
                   {"classification", classification_to_json(c)}});
  }
  json out = {{"task", "find"},
              {"points", arr},
              {"counts",
               {{"total", pts.size()},
                {"dne", n_dne},
                {"dse", n_dse},
                {"non_nash_attractor", n_nna}}}};
  atomic_write(ex.output_dir + "/critical_points.json", out.dump(2) + "\n");
}

void execute_spectrum_trace(const ParsedExperiment& ex) {
  const GameOracle& g = *ex.game.oracle;
  const json sec = ex.doc.value("trace", json::object());
  FieldKind kind = FieldKind::sim;
  if (sec.contains("field")) kind = parse_field_kind(sec.at("field"), "trace.field");
  const double eta = sec.value("eta", 0.0);
  const int k_each = sec.value("k_each_side", 6);
  if (k_each < 1) throw ContractViolation("trace.k_each_side: must be >= 1");

  Trajectory t = std::holds_alternative<BestResponseRule>(ex.run.rule)
                     ? run_best_response(ex.run, g)
                     : run(ex.run, g);
  write_trajectory_csv(ex.output_dir + "/trajectory.csv", t, g.dims());

  const int d = g.dims().total();
  const int n_lo = std::min(k_each, d);
  const int n_hi = std::min(k_each, d - n_lo);

  std::ostringstream csv;
  csv << "k";
  for (int i = 1; i <= n_lo; ++i) csv << ",small" << i << "_re,small" << i << "_im";
  for (int i = 1; i <= n_hi; ++i) csv << ",large" << i << "_re,large" << i << "_im";
  csv << "\n";
  for (auto& rec : t.records) {
    SpectrumReport rep = kind == FieldKind::sim
                             ? eig_dense(materialize(jacobian_simgrad(g, rec.x)))
                             : eig_dense(jacobian_stackelberg(g, rec.x, eta));
    csv << rec.k;
    for (int i = 0; i < n_lo; ++i)
      csv << ',' << format_double(rep.eigs[i].real()) << ',' << format_double(rep.eigs[i].imag());
    for (int i = 0; i < n_hi; ++i) {
      const auto& e = rep.eigs[rep.eigs.size() - 1 - i];
      csv << ',' << format_double(e.real()) << ',' << format_double(e.imag());
    }
    csv << "\n";
  }
  atomic_write(ex.output_dir + "/spectrum_trace.csv", csv.str());
}

void execute_lockin(const ParsedExperiment& ex) {
  const json& sec = need(ex.doc, "lockin", "config");
  const GameOracle& g = *ex.game.oracle;
  LockInSpec spec;
  spec.target = JointPoint::from_flat(g.dims(), parse_vector(need(sec, "target", "lockin"),
                                                             "lockin.target"));
  spec.q0 = sec.value("q0", 0.1);
  spec.n_bar = sec.value("n_bar", 0L);
  spec.replicas = sec.value("replicas", 100);

  std::vector<double> eps;
  if (sec.contains("epsilons")) {
    for (auto& e : sec.at("epsilons")) eps.push_back(e.get<double>());
  } else if (sec.contains("epsilon")) {
    eps.push_back(sec.at("epsilon").get<double>());
  } else {
    throw ContractViolation("lockin: missing required field 'epsilon' or 'epsilons'");
  }
  for (double e : eps)
    if (!(e > 0)) throw ContractViolation("lockin: epsilon values must be > 0");

  RunConfig rc = ex.run;
  if (rc.x0.dims().total() == 0) rc.x0 = spec.target;

  std::vector<double> sups = lockin_sup_distances(rc, g, spec);
  bool any_finite = false;
  for (double s : sups) any_finite = any_finite || std::isfinite(s);
  if (!any_finite) throw ConditioningFailure("lockin: every replica failed numerically");

  json arr = json::array();
  for (double e : eps) {
    int succ = 0;
    for (double s : sups) succ += s <= e;
    LockInEstimate est = wilson_interval(succ, static_cast<int>(sups.size()));
    arr.push_back({{"epsilon", e},
                   {"p_hat", est.p_hat},
                   {"ci_low", est.ci_low},
                   {"ci_high", est.ci_high},
                   {"successes", est.successes}});
  }
  json out = {{"task", "lockin"},
              {"replicas", spec.replicas},
              {"n_bar", spec.n_bar},
              {"q0", spec.q0},
              {"target", point_to_json(spec.target)},
              {"estimates", arr}};
  atomic_write(ex.output_dir + "/lockin.json", out.dump(2) + "\n");
}

struct SweepRow {
  std::vector<std::string> axis_values;
  std::string stop_reason;
  long terminal_k = 0;
  double terminal_grad_norm = std::numeric_limits<double>::quiet_NaN();
  double dist_to_target = std::numeric_limits<double>::quiet_NaN();
  long iters_to_threshold = -1;
  double sigma_err = std::numeric_limits<double>::quiet_NaN();
  double w_sym_norm = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

std::string json_scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

void execute_sweep(const ParsedExperiment& ex) {
  const json& sec = need(ex.doc, "sweep", "config");
  const json& axesj = need(sec, "axes", "sweep");
  if (!axesj.is_array() || axesj.empty())
    throw ContractViolation("sweep.axes: expected a nonempty array of {path, values}");

  struct Axis {
    std::string path;
    std::vector<json> values;
  };
  std::vector<Axis> axes;
  long n_cells = 1;
  for (auto& a : axesj) {
    Axis ax;
    ax.path = need(a, "path", "sweep.axes").get<std::string>();
    if (ax.path.empty() || ax.path[0] != '/')
      throw ContractViolation("sweep.axes.path: expected a JSON pointer starting with '/'");
    const json& vals = need(a, "values", "sweep.axes");
    if (!vals.is_array() || vals.empty())
      throw ContractViolation("sweep.axes.values: expected a nonempty array");
    for (auto& v : vals) ax.values.push_back(v);
    n_cells *= static_cast<long>(ax.values.size());
    axes.push_back(std::move(ax));
  }

  const json metrics = sec.value("metrics", json::object());
  std::optional<VectorXd> target;
  if (metrics.contains("target")) target = parse_vector(metrics.at("target"), "sweep.metrics.target");
  const double threshold = metrics.value("threshold", 0.0);
  const bool has_threshold = metrics.contains("threshold");

  std::vector<SweepRow> rows(n_cells);
  parallel_for(static_cast<int>(n_cells), [&](int cell) {
    SweepRow& row = rows[cell];
    try {
      json doc = ex.doc;
      doc.erase("sweep");
      doc["task"] = "run";
      long rem = cell;
      for (int a = static_cast<int>(axes.size()) - 1; a >= 0; --a) {
        const long n = static_cast<long>(axes[a].values.size());
        const json& v = axes[a].values[rem % n];
        doc[json::json_pointer(axes[a].path)] = v;
        rem /= n;
      }
      char cellname[32];
      std::snprintf(cellname, sizeof(cellname), "cell_%03d", cell);
      doc["output_dir"] = ex.output_dir + "/" + cellname;
      doc["seed"] = derive_seed(ex.seed, seed_task::kSweepCell, static_cast<std::uint64_t>(cell));

      // Echo the axis values into the row before running, so a failed cell
      // still reports its coordinates.
      long rem2 = cell;
      row.axis_values.resize(axes.size());
      for (int a = static_cast<int>(axes.size()) - 1; a >= 0; --a) {
        const long n = static_cast<long>(axes[a].values.size());
        row.axis_values[a] = json_scalar_to_string(axes[a].values[rem2 % n]);
        rem2 /= n;
      }

      ParsedExperiment cx = parse_experiment_json(doc);
      fs::create_directories(cx.output_dir);
      Trajectory t = execute_run(cx, cx.output_dir);

      row.stop_reason = to_string(t.reason);
      row.terminal_k = t.terminal_k;
      row.terminal_grad_norm = t.terminal_grad_norm;

      auto metric_at = [&](const TrajectoryRecord& rec) -> double {
        if (cx.game.covariance) {
          GanMetrics m = covariance_gan_metrics(*cx.game.covariance, rec.x);
          return std::max(m.sigma_err, m.w_sym_norm);
        }
        if (target) return (rec.x.flat() - *target).norm();
        return std::numeric_limits<double>::quiet_NaN();
      };
      if (!t.records.empty()) {
        const TrajectoryRecord& last = t.records.back();
        if (cx.game.covariance) {
          GanMetrics m = covariance_gan_metrics(*cx.game.covariance, last.x);
          row.sigma_err = m.sigma_err;
          row.w_sym_norm = m.w_sym_norm;
        }
        if (target) row.dist_to_target = (last.x.flat() - *target).norm();
        if (has_threshold) {
          for (auto& rec : t.records) {
            const double m = metric_at(rec);
            if (std::isfinite(m) && m < threshold) {
              row.iters_to_threshold = rec.k;
              break;
            }
          }
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  std::ostringstream csv;
  csv << "cell";
  for (auto& ax : axes) csv << ",axis:" << ax.path;
  csv << ",stop_reason,terminal_k,terminal_grad_norm,dist_to_target,iters_to_threshold,"
         "sigma_err,w_sym_norm,error\n";
  for (long i = 0; i < n_cells; ++i) {
    const SweepRow& r = rows[i];
    csv << i;
    for (auto& v : r.axis_values) csv << ',' << v;
    csv << ',' << r.stop_reason << ',' << r.terminal_k << ','
        << (std::isnan(r.terminal_grad_norm) ? "" : format_double(r.terminal_grad_norm)) << ','
        << (std::isnan(r.dist_to_target) ? "" : format_double(r.dist_to_target)) << ','
        << r.iters_to_threshold << ','
        << (std::isnan(r.sigma_err) ? "" : format_double(r.sigma_err)) << ','
        << (std::isnan(r.w_sym_norm) ? "" : format_double(r.w_sym_norm)) << ',' << r.error << "\n";
  }
  atomic_write(ex.output_dir + "/sweep.csv", csv.str());
}

void emit_error_json(const char* category, const std::string& what) {
  json err = {{"error", {{"category", category}, {"what", what}}}};
  std::cerr << err.dump() << "\n";
}

template <class F>
int guarded(F&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const ContractViolation& e) {
    emit_error_json("config", e.what());
    return kExitConfig;
  } catch (const json::exception& e) {
    emit_error_json("config", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    emit_error_json("numerical", e.what());
    return kExitNumerical;
  }
}

json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("config: cannot read file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("config: invalid JSON: ") + e.what());
  }
  return doc;
}

json apply_overrides(json doc, const CliOverrides& ov) {
  if (ov.out_dir) doc["output_dir"] = *ov.out_dir;
  if (ov.seed) doc["seed"] = *ov.seed;
  return doc;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ParsedExperiment parse_experiment_json(const json& doc) {
  if (!doc.is_object()) throw ContractViolation("config: top level must be a JSON object");
  const int version = doc.value("spec_version", 1);
  if (version != 1) throw ContractViolation("spec_version: unsupported version");

  ParsedExperiment ex;
  ex.doc = doc;
  ex.task = need(doc, "task", "config").get<std::string>();
  static const char* kTasks[] = {"run", "classify", "find", "spectrum_trace", "lockin", "sweep"};
  bool known = false;
  for (auto* t : kTasks) known = known || ex.task == t;
  if (!known) throw ContractViolation("task: unknown task '" + ex.task + "'");

  ex.game = parse_game(need(doc, "game", "config").dump());
  ex.seed = doc.value("seed", std::uint64_t{0});
  ex.output_dir = doc.value("output_dir", std::string("."));

  if (task_iterates(ex.task)) {
    ex.run.rule = parse_rule(need(doc, "rule", "config"));
    const json& sch = need(doc, "schedules", "config");
    ex.run.schedules = {parse_schedule(need(sch, "leader", "schedules"), "schedules.leader"),
                        parse_schedule(need(sch, "follower", "schedules"), "schedules.follower")};
    ex.run.noise = parse_noise(doc.value("noise", json()));
    const json& runj = need(doc, "run", "config");
    ex.run.max_iters = runj.value("max_iters", 1000L);
    ex.run.record_every = runj.value("record_every", 1L);
    ex.run.stop_grad_tol = runj.value("stop_grad_tol", 1e-8);
    ex.run.seed = ex.seed;
    const bool x0_required = ex.task != "lockin";
    if (runj.contains("x0")) {
      ex.run.x0 = JointPoint::from_flat(ex.game.oracle->dims(),
                                        parse_vector(runj.at("x0"), "run.x0"));
    } else if (x0_required) {
      throw ContractViolation("run: missing required field 'x0'");
    }
  }
  return ex;
}

ParsedExperiment parse_experiment_file(const std::string& path) {
  return parse_experiment_json(load_config(path));
}

void write_trajectory_csv(const std::string& path, const Trajectory& t, BlockDims dims) {
  std::ostringstream csv;
  csv << "k";
  for (int i = 0; i < dims.d1; ++i) csv << ",x1_" << i;
  for (int i = 0; i < dims.d2; ++i) csv << ",x2_" << i;
  csv << ",f1,f2,grad_norm,tau\n";
  for (auto& rec : t.records) {
    csv << rec.k;
    for (int i = 0; i < dims.d1; ++i) csv << ',' << format_double(rec.x.x1(i));
    for (int i = 0; i < dims.d2; ++i) csv << ',' << format_double(rec.x.x2(i));
    csv << ',' << format_double(rec.f1) << ',' << format_double(rec.f2) << ','
        << format_double(rec.grad_norm) << ',' << format_double(rec.tau) << "\n";
  }
  atomic_write(path, csv.str());
}

json spectrum_to_json(const SpectrumReport& rep) {
  json eigs = json::array();
  for (std::size_t i = 0; i < rep.eigs.size(); ++i) {
    eigs.push_back({{"re", rep.eigs[i].real()},
                    {"im", rep.eigs[i].imag()},
                    {"residual", i < rep.residuals.size() ? rep.residuals[i] : 0.0}});
  }
  return {{"eigs", eigs}, {"method", rep.method}, {"k", rep.k}, {"converged", rep.converged}};
}

json classification_to_json(const Classification& c) {
  return {{"is_dne", c.is_dne},
          {"is_dse", c.is_dse},
          {"stable_simgrad", c.stable_simgrad},
          {"stable_stackelberg", c.stable_stackelberg},
          {"non_nash_attractor", c.non_nash_attractor},
          {"marginal", c.marginal},
          {"degenerate_stack", c.degenerate_stack},
          {"residual_sim", finite_or_null(c.residual_sim)},
          {"residual_stack", finite_or_null(c.residual_stack)},
          {"tol_eig", c.tol_eig},
          {"tol_residual", c.tol_residual},
          {"spectra",
           {{"jacobian_sim", spectrum_to_json(c.spec_j)},
            {"jacobian_stackelberg", spectrum_to_json(c.spec_js)},
            {"hessian1", spectrum_to_json(c.spec_hess1)},
            {"hessian2", spectrum_to_json(c.spec_hess2)},
            {"schur", spectrum_to_json(c.spec_schur)}}},
          {"verdicts",
           {{"hess1", verdict_to_json(c.hess1)},
            {"hess2", verdict_to_json(c.hess2)},
            {"schur", verdict_to_json(c.schur)},
            {"sim_stability", stability_to_json(c.sim_stability)},
            {"stack_stability", stability_to_json(c.stack_stability)}}}};
}

void emit_vector_field(const GameOracle& g, const FieldGridSpec& spec, const std::string& path) {
  if (g.dims().d1 != 1 || g.dims().d2 != 1)
    throw ContractViolation("emit_vector_field: joint space must be two-dimensional (d1 = d2 = 1)");
  if (spec.resolution[0] < 2 || spec.resolution[1] < 2)
    throw ContractViolation("emit_vector_field: resolution must be >= 2 per axis");

  std::ostringstream csv;
  csv << "# u,v store the descent direction: the negated field at (x1,x2)\n";
  csv << "x1,x2,u,v\n";
  for (int i = 0; i < spec.resolution[0]; ++i) {
    const double x1 = spec.box[0][0] + (spec.box[0][1] - spec.box[0][0]) * i /
                                           (spec.resolution[0] - 1);
    for (int j = 0; j < spec.resolution[1]; ++j) {
      const double x2 = spec.box[1][0] + (spec.box[1][1] - spec.box[1][0]) * j /
                                             (spec.resolution[1] - 1);
      JointPoint x{VectorXd::Constant(1, x1), VectorXd::Constant(1, x2)};
      JointPoint f = spec.kind == FieldKind::sim
                         ? omega(g, x)
                         : omega_stackelberg(g, x, spec.eta, SolveConfig::exact(1));
      csv << format_double(x1) << ',' << format_double(x2) << ',' << format_double(-f.x1(0))
          << ',' << format_double(-f.x2(0)) << "\n";
    }
  }
  atomic_write(path, csv.str());
}

void execute_experiment(const ParsedExperiment& ex) {
  fs::create_directories(ex.output_dir);
  if (ex.task == "run") {
    execute_run(ex, ex.output_dir);
  } else if (ex.task == "classify") {
    execute_classify(ex);
  } else if (ex.task == "find") {
    execute_find(ex);
  } else if (ex.task == "spectrum_trace") {
    execute_spectrum_trace(ex);
  } else if (ex.task == "lockin") {
    execute_lockin(ex);
  } else if (ex.task == "sweep") {
    execute_sweep(ex);
  }
}

int cli_run(const std::string& config_path, const CliOverrides& ov) {
  return guarded([&] {
    ParsedExperiment ex = parse_experiment_json(apply_overrides(load_config(config_path), ov));
    execute_experiment(ex);
  });
}

int cli_field(const std::string& config_path, const CliOverrides& ov) {
  return guarded([&] {
    json doc = apply_overrides(load_config(config_path), ov);
    GameHandle game = parse_game(need(doc, "game", "config").dump());
    FieldGridSpec spec;
    const json& f = need(doc, "field", "config");
    if (f.contains("kind")) spec.kind = parse_field_kind(f.at("kind"), "field.kind");
    spec.eta = f.value("eta", 0.0);
    const json& boxj = need(doc, "box", "config");
    if (!boxj.is_array() || boxj.size() != 2)
      throw ContractViolation("box: expected two [lo, hi] pairs");
    for (int a = 0; a < 2; ++a) {
      if (!boxj[a].is_array() || boxj[a].size() != 2)
        throw ContractViolation("box: expected two [lo, hi] pairs");
      spec.box[a] = {boxj[a][0].get<double>(), boxj[a][1].get<double>()};
    }
    const json& res = need(doc, "resolution", "config");
    if (!res.is_array() || res.size() != 2)
      throw ContractViolation("resolution: expected [nx, ny]");
    spec.resolution = {res[0].get<int>(), res[1].get<int>()};
    const std::string dir = doc.value("output_dir", std::string("."));
    fs::create_directories(dir);
    emit_vector_field(*game.oracle, spec, dir + "/field.csv");
  });
}

int cli_sweep(const std::string& config_path, const CliOverrides& ov) {
  return guarded([&] {
    ParsedExperiment ex = parse_experiment_json(apply_overrides(load_config(config_path), ov));
    if (ex.task != "sweep") throw ContractViolation("task: sweep subcommand requires task = 'sweep'");
    execute_experiment(ex);
  });
}

}  // namespace stackdyn

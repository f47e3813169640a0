#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace iscc::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::vector<std::string>& columns) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# schema_version=" << kOutputSchemaVersion << " manifest=manifest.json\n";
    row(columns);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_json(const fs::path& path, json j) {
  j["schema_version"] = kOutputSchemaVersion;
  if (path.filename() != "manifest.json") j["manifest"] = "manifest.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct Manifest {
  std::string command;
  json input;
  std::uint64_t seed = 0;
  std::string started = utc_now();
  std::vector<std::string> outputs;

  Manifest(std::string cmd, json in, std::uint64_t s)
      : command(std::move(cmd)), input(std::move(in)), seed(s) {}

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    j["input"] = input;
    j["seed"] = seed;
    j["tool_version"] = kToolVersion;
    j["started_utc"] = started;
    j["finished_utc"] = utc_now();
    j["outputs"] = outputs;
    write_json(dir / "manifest.json", j);
  }
};

int exit_for(Termination t) {
  switch (t) {
    case Termination::converged: return kOk;
    case Termination::infeasible: return kInfeasible;
    case Termination::max_iterations:
    case Termination::dual_nonconvergence: return kNonConvergence;
  }
  return kNonConvergence;
}

fs::path resolve_out(const fs::path& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("ISCC_OUT_DIR"); env && *env) return env;
  throw ConfigError("--out", "no output directory (pass --out or set ISCC_OUT_DIR)");
}

void write_solution(const fs::path& dir, const Problem& problem, const SolveReport& rep,
                    Manifest& manifest) {
  {
    CsvFile f(dir / "summary.csv", {"scheme", "termination", "G", "outer_iterations",
                                    "dual_iterations", "alternations", "feasible", "violated"});
    f.row({std::string(to_string(rep.scheme)), std::string(to_string(rep.termination)), num(rep.gain),
           std::to_string(rep.outer_iterations), std::to_string(rep.dual_iterations),
           std::to_string(rep.alternations.size()), rep.feasibility.feasible ? "1" : "0",
           rep.feasibility.violated()});
    manifest.outputs.push_back("summary.csv");
  }
  if (rep.transformed.size() == 0) return;
  {
    CsvFile f(dir / "allocation.csv",
              {"device", "sensing_power_w", "transmit_power_w", "comm_time_s", "quantization_gain",
               "sensing_distortion", "quant_distortion", "comm_energy_j", "alpha", "beta"});
    for (Eigen::Index k = 0; k < rep.transformed.size(); ++k) {
      f.row({std::to_string(k), num(rep.allocation.sensing_power[k]),
             num(rep.allocation.transmit_power[k]), num(rep.allocation.comm_time[k]),
             num(rep.allocation.quantization_gain[k]), num(rep.transformed.sensing_distortion[k]),
             num(rep.transformed.quant_distortion[k]), num(rep.transformed.comm_energy[k]),
             num(rep.duals.alpha[k]), num(rep.duals.beta[k])});
    }
    manifest.outputs.push_back("allocation.csv");
  }
  {
    CsvFile f(dir / "gains.csv",
              {"device", "feature", "class_a", "class_b", "pair_gain", "raw_gain", "denominator"});
    for (std::size_t k = 0; k < rep.gains.terms.size(); ++k) {
      for (const auto& t : rep.gains.terms[k]) {
        f.row({std::to_string(k), std::to_string(t.feature), std::to_string(t.first),
               std::to_string(t.second), num(t.gain), num(t.raw_gain), num(t.denominator)});
      }
    }
    manifest.outputs.push_back("gains.csv");
  }
  {
    CsvFile f(dir / "trace.csv", {"iteration", "G", "fixed_point_residual"});
    for (std::size_t i = 0; i < rep.objective_trace.size(); ++i) {
      f.row({std::to_string(i), num(rep.objective_trace[i]),
             i == 0 ? "" : num(rep.residual_trace[i - 1])});
    }
    manifest.outputs.push_back("trace.csv");
  }
  {
    CsvFile f(dir / "alternations.csv", {"outer", "before", "released", "after", "accepted"});
    for (const auto& a : rep.alternations) {
      f.row({std::to_string(a.outer), num(a.before), num(a.reclaimed), num(a.after),
             a.accepted ? "1" : "0"});
    }
    manifest.outputs.push_back("alternations.csv");
  }
  {
    const auto& fr = rep.feasibility;
    json j;
    j["feasible"] = fr.feasible;
    j["violated"] = fr.violated();
    j["latency_slack_s"] = fr.latency_slack;
    j["capacity_slack_bits"] = std::vector<double>(fr.capacity_slack.data(), fr.capacity_slack.data() + fr.capacity_slack.size());
    j["energy_slack_j"] = std::vector<double>(fr.energy_slack.data(), fr.energy_slack.data() + fr.energy_slack.size());
    j["gain_inert_devices"] = json::array();
    for (std::size_t k = 0; k < problem.num_devices(); ++k) {
      if (problem.gain_inert(k)) j["gain_inert_devices"].push_back(k);
    }
    write_json(dir / "feasibility.json", j);
    manifest.outputs.push_back("feasibility.json");
  }
}

}  // namespace

int cmd_solve(const SolveOptions& opt, std::ostream& out, std::ostream& err) {
  ScenarioConfig cfg;
  fs::path dir;
  try {
    dir = resolve_out(opt.out);
    if (!opt.config.empty()) cfg = load_config(opt.config);
    cfg.validate();
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const std::uint64_t seed = opt.seed.value_or(cfg.seed);
  fs::create_directories(dir);
  Manifest manifest{"solve", json::parse(serialize_config(cfg)), seed};

  std::optional<Problem> problem;
  try {
    problem.emplace(build_scenario(cfg, seed).problem());
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  SolverConfig solver;
  solver.seed = derive_seed(seed, 3);
  const SolveReport rep = solve_scheme(opt.scheme, *problem, solver);
  write_solution(dir, *problem, rep, manifest);
  manifest.write(dir);

  const int code = exit_for(rep.termination);
  if (code == kOk) {
    out << to_string(rep.scheme) << ": G=" << num(rep.gain) << " after " << rep.outer_iterations
        << " outer iterations\n";
  } else {
    err << to_string(rep.termination) << ": " << rep.message << '\n';
  }
  return code;
}

int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  SweepSpec spec;
  fs::path dir;
  try {
    dir = resolve_out(opt.out);
    if (opt.parallel < 1) throw ConfigError("--parallel", "must be >= 1");
    spec = load_sweep_spec(opt.spec);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  fs::create_directories(dir);
  Manifest manifest{"sweep", json::parse(serialize_sweep_spec(spec)), spec.seed};
  SweepResult res;
  try {
    res = run_sweep(spec, opt.parallel, opt.record_timing);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ModelError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const std::string param(to_string(spec.param));
  {
    CsvFile f(dir / "sweep.csv", {"scheme", "swept_param", "value", "repetition", "G", "accuracy",
                                  "feasible", "iters", "wall_ms"});
    for (const auto& r : res.rows) {
      f.row({std::string(to_string(r.scheme)), param, num(r.value), std::to_string(r.repetition),
             num(r.gain), num(r.accuracy), r.feasible ? "1" : "0", std::to_string(r.iterations),
             num(r.wall_ms)});
    }
    manifest.outputs.push_back("sweep.csv");
  }
  {
    CsvFile f(dir / "summary.csv", {"scheme", "swept_param", "value", "count", "mean_G", "se_G",
                                    "mean_accuracy", "se_accuracy", "feasible_rate"});
    for (const auto& c : res.summary) {
      f.row({std::string(to_string(c.scheme)), param, num(c.value), std::to_string(c.count),
             num(c.mean_gain), num(c.se_gain), num(c.mean_accuracy), num(c.se_accuracy),
             num(c.feasible_rate)});
    }
    manifest.outputs.push_back("summary.csv");
  }
  manifest.write(dir);
  int infeasible = 0;
  for (const auto& r : res.rows) infeasible += r.feasible ? 0 : 1;
  out << res.rows.size() << " cells, " << infeasible << " infeasible\n";
  return kOk;
}

ScenarioConfig verify_config(int devices, int classes, int features) {
  ScenarioConfig cfg;
  const double per_device = cfg.system.latency_budget / cfg.devices.count;
  cfg.devices.count = devices;
  cfg.devices.feature_count = features;
  cfg.statistics.num_classes = classes;
  cfg.system.latency_budget = per_device * devices;
  return cfg;
}

VerifyCell verify_cell(int devices, int classes, int features, std::uint64_t seed,
                       const SolverConfig& solver_base, const GridSpec& grid) {
  VerifyCell cell;
  cell.devices = devices;
  cell.classes = classes;
  cell.features = features;
  cell.seed = seed;
  const Problem problem = build_scenario(verify_config(devices, classes, features), seed).problem();
  SolverConfig solver = solver_base;
  solver.seed = derive_seed(seed, 3);
  const SolveReport rep = solve_p2(problem, solver);
  cell.termination = rep.termination;
  cell.solver_gain = rep.gain;
  if (!rep.ok()) {
    cell.note = std::string(to_string(rep.termination)) + ": " + rep.message;
    return cell;
  }
  cell.feasible = rep.feasibility.feasible;
  const OracleResult oracle = grid_optimum(problem, grid);
  if (!oracle.found) {
    cell.note = "oracle: " + oracle.message;
    return cell;
  }
  cell.oracle_gain = oracle.value;
  cell.relative_gap = std::abs(rep.gain - oracle.value) / oracle.value;
  const KktReport kkt = kkt_residual(problem, rep.final_aux, rep.transformed.comm_time, rep.final_p4);
  cell.stationarity = kkt.stationarity_norm;
  cell.slackness = kkt.complementary_slackness;
  std::vector<std::string> why;
  if (cell.relative_gap > 0.01) why.push_back("oracle gap");
  if (!(cell.stationarity <= 1e-4)) why.push_back("stationarity");
  if (!(cell.slackness <= 1e-6)) why.push_back("complementary slackness");
  if (!cell.feasible) why.push_back("infeasible allocation");
  for (const auto& w : why) cell.note += (cell.note.empty() ? "" : "; ") + w;
  cell.pass = why.empty();
  return cell;
}

int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  fs::path dir;
  SolverConfig solver;
  try {
    dir = resolve_out(opt.out);
    if (opt.parallel < 1) throw ConfigError("--parallel", "must be >= 1");
    if (opt.scenarios < 1) throw ConfigError("--scenarios", "must be >= 1");
    if (opt.max_devices < 1) throw ConfigError("--max-devices", "must be >= 1");
    if (opt.max_devices > static_cast<int>(kOracleMaxDevices)) {
      throw OracleGuardError("oracle refused: K=" + std::to_string(opt.max_devices) +
                             " exceeds the cost guard K <= " + std::to_string(kOracleMaxDevices));
    }
    if (opt.step_size) {
      solver.eta_alpha = solver.eta_beta = solver.eta_lambda = solver.eta_time = *opt.step_size;
    }
    solver.validate();
    opt.grid.validate();
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  struct Job { int k, l, n; std::uint64_t seed; };
  std::vector<Job> jobs;
  for (int k = 1; k <= opt.max_devices; ++k) {
    for (int l = 2; l <= kOracleMaxClasses; ++l) {
      for (int n = 1; n <= kOracleMaxFeatures; ++n) {
        for (int s = 0; s < opt.scenarios; ++s) {
          jobs.push_back({k, l, n, derive_seed(opt.seed, static_cast<std::uint64_t>(s))});
        }
      }
    }
  }
  std::vector<VerifyCell> cells(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      cells[i] = verify_cell(jobs[i].k, jobs[i].l, jobs[i].n, jobs[i].seed, solver, opt.grid);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(opt.parallel, static_cast<int>(jobs.size())); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(dir);
  json input{{"max_devices", opt.max_devices}, {"scenarios", opt.scenarios},
             {"grid_points", opt.grid.points}, {"zoom_levels", opt.grid.zoom_levels}};
  if (opt.step_size) input["step_size"] = *opt.step_size;
  Manifest manifest{"verify", input, opt.seed};
  int failed = 0, nonconverged = 0;
  double worst_gap = 0.0, worst_stat = 0.0, worst_slack = 0.0;
  {
    CsvFile f(dir / "verify.csv", {"devices", "classes", "features", "seed", "termination",
                                   "solver_G", "oracle_G", "relative_gap", "stationarity",
                                   "slackness", "feasible", "pass", "note"});
    for (const auto& c : cells) {
      f.row({std::to_string(c.devices), std::to_string(c.classes), std::to_string(c.features),
             std::to_string(c.seed), std::string(to_string(c.termination)), num(c.solver_gain),
             num(c.oracle_gain), num(c.relative_gap), num(c.stationarity), num(c.slackness),
             c.feasible ? "1" : "0", c.pass ? "1" : "0", "\"" + c.note + "\""});
      if (!c.pass) {
        ++failed;
        err << "FAIL K=" << c.devices << " L=" << c.classes << " N=" << c.features
            << " seed=" << c.seed << ": " << c.note << '\n';
      }
      if (c.termination == Termination::dual_nonconvergence ||
          c.termination == Termination::max_iterations) {
        ++nonconverged;
      }
      worst_gap = std::max(worst_gap, c.relative_gap);
      worst_stat = std::max(worst_stat, c.stationarity);
      worst_slack = std::max(worst_slack, c.slackness);
    }
    manifest.outputs.push_back("verify.csv");
  }
  json report{{"cells", cells.size()}, {"failed", failed}, {"nonconverged", nonconverged},
              {"worst_relative_gap", worst_gap}, {"worst_stationarity", worst_stat},
              {"worst_slackness", worst_slack}, {"pass", failed == 0}};
  write_json(dir / "report.json", report);
  manifest.outputs.push_back("report.json");
  manifest.write(dir);
  out << cells.size() << " cells, " << failed << " failed (" << nonconverged
      << " non-converged); worst gap " << num(worst_gap) << ", stationarity " << num(worst_stat)
      << ", slackness " << num(worst_slack) << '\n';
  return failed == 0 ? kOk : kVerificationFailure;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Resource allocation for task-oriented sensing, computation and communication"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SolveOptions so;
  std::string scheme = "optimal";
  std::uint64_t seed = 0;
  auto* solve = app.add_subcommand("solve", "Solve one scenario");
  solve->add_option("--config", so.config, "Scenario configuration (JSON); defaults if omitted");
  auto* seed_opt = solve->add_option("--seed", seed, "Scenario seed (overrides the config seed)");
  solve->add_option("--out", so.out, "Output directory");
  solve->add_option("--scheme", scheme, "optimal, power_aware, time_aware or quantization_aware");

  SweepOptions sw;
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
  sweep->add_option("--spec", sw.spec, "Sweep specification (JSON)")->required();
  sweep->add_option("--out", sw.out, "Output directory");
  sweep->add_option("--parallel", sw.parallel, "Worker threads");
  sweep->add_flag("--record-timing", sw.record_timing, "Fill the wall_ms column");

  VerifyOptions vo;
  auto* verify = app.add_subcommand("verify", "Check the solver against the grid oracle");
  verify->add_option("--out", vo.out, "Output directory");
  verify->add_option("--parallel", vo.parallel, "Worker threads");
  verify->add_option("--max-devices", vo.max_devices, "Largest device count in the matrix");
  verify->add_option("--scenarios", vo.scenarios, "Seeded scenarios per matrix cell");
  verify->add_option("--seed", vo.seed, "Master seed");
  verify->add_option("--step-size", vo.step_size, "Override every dual step scale");
  verify->add_option("--grid-points", vo.grid.points, "Grid points per axis");
  verify->add_option("--zoom-levels", vo.grid.zoom_levels, "Grid refinements");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*solve) {
      try {
        so.scheme = scheme_from_string(scheme);
      } catch (const ModelError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
      }
      if (seed_opt->count() > 0) so.seed = seed;
      return cmd_solve(so, out, err);
    }
    if (*sweep) return cmd_sweep(sw, out, err);
    return cmd_verify(vo, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace iscc::cli

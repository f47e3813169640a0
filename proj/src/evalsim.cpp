#include "iscc/evalsim.hpp"

#include "json_fields.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <limits>
#include <mutex>
#include <thread>

namespace iscc {

namespace {

constexpr std::uint64_t kSolverStream = 3;
constexpr std::uint64_t kSamplingStream = 4;
constexpr std::uint64_t kSharedChannelRep = 0;

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

SampleBatch sample_distorted(const ClassStatistics& stats, const std::vector<DeviceProfile>& devices,
                             const Eigen::VectorXd& sensing_distortion,
                             const Eigen::VectorXd& quant_distortion, int samples,
                             std::uint64_t seed) {
  if (samples < 1) throw ModelError("samples must be >= 1");
  if (stats.num_devices() != devices.size() ||
      sensing_distortion.size() != static_cast<Eigen::Index>(devices.size()) ||
      quant_distortion.size() != static_cast<Eigen::Index>(devices.size())) {
    throw ModelError("statistics, devices and allocation sizes differ");
  }
  if ((sensing_distortion.array() < 0.0).any() || (quant_distortion.array() < 0.0).any()) {
    throw ModelError("distortions must be >= 0");
  }
  Eigen::Index total = 0;
  for (std::size_t k = 0; k < devices.size(); ++k) total += stats.feature_count(k);

  SampleBatch batch;
  batch.seed = seed;
  batch.features.resize(samples, total);
  batch.labels.resize(samples);
  batch.applied.sensing_distortion = sensing_distortion;
  batch.applied.quant_distortion = quant_distortion;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> label(0, stats.num_classes - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    const int l = label(rng);
    batch.labels[i] = l;
    Eigen::Index col = 0;
    for (std::size_t k = 0; k < devices.size(); ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      const double clutter = std::sqrt(devices[k].clutter_variance);
      const double sensing = std::sqrt(sensing_distortion[ki]);
      const double quant = std::sqrt(quant_distortion[ki]);
      const auto& mu = stats.centroids[k];
      const auto& var = stats.variance[k];
      for (Eigen::Index n = 0; n < mu.cols(); ++n) {
        double x = mu(l, n) + std::sqrt(var[n]) * normal(rng);
        x += clutter * normal(rng);
        x += sensing * normal(rng);
        x += quant * normal(rng);
        batch.features(i, col++) = x;
      }
    }
  }
  return batch;
}

SampleBatch sample_features(const ClassStatistics& stats, const std::vector<DeviceProfile>& devices,
                            const SystemParams& sys, const Allocation& alloc, int samples,
                            std::uint64_t seed) {
  const FeasibilityReport rep = check_feasibility(devices, sys, alloc);
  if (!rep.feasible) throw ModelError("allocation violates " + rep.violated());
  const TransformedAllocation t = to_transformed(alloc, devices, sys);
  SampleBatch batch =
      sample_distorted(stats, devices, t.sensing_distortion, t.quant_distortion, samples, seed);
  batch.applied = t;
  return batch;
}

Classification classify_map(const ClassStatistics& stats, const std::vector<DeviceProfile>& devices,
                            const SampleBatch& batch) {
  Eigen::Index total = 0;
  for (std::size_t k = 0; k < devices.size(); ++k) total += stats.feature_count(k);
  if (batch.features.cols() != total || stats.num_devices() != devices.size() ||
      batch.applied.sensing_distortion.size() != static_cast<Eigen::Index>(devices.size())) {
    throw ModelError("batch does not match the statistics");
  }
  const int classes = stats.num_classes;
  Eigen::MatrixXd mu(classes, total);
  Eigen::RowVectorXd inv_var(total);
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < devices.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    const double extra = devices[k].clutter_variance + batch.applied.sensing_distortion[ki] +
                         batch.applied.quant_distortion[ki];
    const auto n = stats.centroids[k].cols();
    mu.middleCols(col, n) = stats.centroids[k];
    inv_var.segment(col, n) = (stats.variance[k].array() + extra).inverse().matrix().transpose();
    col += n;
  }
  Classification out;
  out.predicted.resize(batch.features.rows());
  int correct = 0;
  for (Eigen::Index i = 0; i < batch.features.rows(); ++i) {
    int best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int l = 0; l < classes; ++l) {
      const double score =
          ((batch.features.row(i) - mu.row(l)).array().square() * inv_var.array()).sum();
      if (score < best_score) {
        best_score = score;
        best = l;
      }
    }
    out.predicted[i] = best;
    correct += best == batch.labels[i];
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(batch.features.rows());
  return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ModelError("spearman needs two equal-length series");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<LadderPoint> gain_ladder(const Problem& problem, const TransformedAllocation& base,
                                     const std::vector<double>& factors, int samples,
                                     std::uint64_t seed) {
  std::vector<LadderPoint> out;
  for (double f : factors) {
    if (!(f > 0.0)) throw ModelError("ladder factors must be > 0");
    const Eigen::VectorXd s = base.sensing_distortion * f;
    const Eigen::VectorXd d = base.quant_distortion * f;
    LadderPoint pt{f, problem.gain(s, d), 0.0};
    const SampleBatch batch = sample_distorted(problem.stats(), problem.devices(), s, d, samples, seed);
    pt.accuracy = classify_map(problem.stats(), problem.devices(), batch).accuracy;
    out.push_back(pt);
  }
  return out;
}

std::string_view to_string(SweptParam p) {
  switch (p) {
    case SweptParam::energy_budget: return "energy_budget";
    case SweptParam::latency: return "latency";
    case SweptParam::device_count: return "device_count";
    case SweptParam::forced_gain: return "forced_gain";
  }
  return "unknown";
}

SweptParam swept_param_from_string(std::string_view name) {
  for (auto p : {SweptParam::energy_budget, SweptParam::latency, SweptParam::device_count,
                 SweptParam::forced_gain}) {
    if (name == to_string(p)) return p;
  }
  throw ConfigError("swept_param", "unknown parameter '" + std::string(name) + "'");
}

void SweepSpec::validate() const {
  if (values.empty()) throw ConfigError("values", "must list at least one value");
  if (repetitions < 1) throw ConfigError("repetitions", "must be >= 1");
  if (schemes.empty()) throw ConfigError("schemes", "must list at least one scheme");
  if (accuracy_samples < 0) throw ConfigError("accuracy_samples", "must be >= 0");
  for (double v : values) {
    if (!std::isfinite(v) || !(v > 0.0)) throw ConfigError("values", "entries must be > 0");
    if (param == SweptParam::device_count && v != std::floor(v)) {
      throw ConfigError("values", "device counts must be integers");
    }
  }
  base.validate();
  solver.validate();
}

SweepSpec parse_sweep_spec(const std::string& json_text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("parse error: ") + e.what());
  }
  SweepSpec spec;
  detail::ObjectReader top(j, "", "");
  std::string param;
  top.read("swept_param", param);
  if (param.empty()) throw ConfigError("swept_param", "is required");
  spec.param = swept_param_from_string(param);
  top.read("values", spec.values);
  top.read("repetitions", spec.repetitions);
  std::vector<std::string> schemes;
  top.read("schemes", schemes);
  if (top.has("schemes")) {
    spec.schemes.clear();
    for (const auto& s : schemes) {
      try {
        spec.schemes.push_back(scheme_from_string(s));
      } catch (const ModelError& e) {
        throw ConfigError("schemes", e.what());
      }
    }
  }
  top.read("seed", spec.seed);
  top.read("accuracy_samples", spec.accuracy_samples);
  top.read("resample_channels", spec.resample_channels);
  top.read("scale_latency_with_devices", spec.scale_latency_with_devices);
  if (top.has("base_config") && top.has("base_config_path")) {
    throw ConfigError("base_config", "give either base_config or base_config_path, not both");
  }
  if (top.has("base_config")) {
    spec.base = detail::read_scenario(top.raw("base_config"), "/base_config", "base_config");
  } else {
    std::string path;
    top.read("base_config_path", path);
    if (!path.empty()) {
      std::filesystem::path p(path);
      if (p.is_relative()) p = base_dir / p;
      spec.base = load_config(p);
    }
  }
  top.finish();
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sweep_spec(ss.str(), path.parent_path());
}

std::string serialize_sweep_spec(const SweepSpec& spec) {
  nlohmann::json j;
  j["swept_param"] = std::string(to_string(spec.param));
  j["values"] = spec.values;
  j["repetitions"] = spec.repetitions;
  std::vector<std::string> schemes;
  for (auto s : spec.schemes) schemes.emplace_back(to_string(s));
  j["schemes"] = schemes;
  j["seed"] = spec.seed;
  j["accuracy_samples"] = spec.accuracy_samples;
  j["resample_channels"] = spec.resample_channels;
  j["scale_latency_with_devices"] = spec.scale_latency_with_devices;
  j["base_config"] = detail::scenario_to_json(spec.base);
  return j.dump(2) + "\n";
}

ScenarioConfig sweep_config(const SweepSpec& spec, double value) {
  ScenarioConfig cfg = spec.base;
  switch (spec.param) {
    case SweptParam::energy_budget:
      cfg.devices.energy_budget = value;
      break;
    case SweptParam::latency:
      cfg.system.latency_budget = value;
      break;
    case SweptParam::device_count: {
      const int k = static_cast<int>(value);
      if (spec.scale_latency_with_devices) {
        cfg.system.latency_budget = spec.base.system.latency_budget * k / spec.base.devices.count;
      }
      cfg.devices.count = k;
      break;
    }
    case SweptParam::forced_gain:
      break;
  }
  return cfg;
}

namespace {

SweepRow run_cell(const SweepSpec& spec, double value, Scheme scheme, int rep, bool record_timing) {
  SweepRow row;
  row.scheme = scheme;
  row.value = value;
  row.repetition = rep;
  ScenarioConfig cfg = sweep_config(spec, value);
  const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(rep));
  if (!spec.resample_channels && !cfg.channel.fixed_gains) {
    const Scenario shared = build_scenario(cfg, derive_seed(spec.seed, kSharedChannelRep));
    std::vector<double> gains;
    for (const auto& d : shared.devices) gains.push_back(d.channel_gain);
    cfg.channel.fixed_gains = gains;
  }
  const Scenario sc = build_scenario(cfg, seed);
  const Problem problem = sc.problem();
  SolverConfig solver = spec.solver;
  solver.seed = derive_seed(seed, kSolverStream);

  const auto start = std::chrono::steady_clock::now();
  const SolveReport report = solve_scheme(scheme, problem, solver);
  if (record_timing) {
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  row.termination = report.termination;
  row.iterations = report.outer_iterations;
  const bool has_allocation = report.termination == Termination::converged ||
                              report.termination == Termination::max_iterations;
  row.feasible = has_allocation && report.feasibility.feasible;
  if (!row.feasible) {
    row.gain = 0.0;
    row.accuracy = 1.0 / sc.stats.num_classes;
    return row;
  }
  const double factor = spec.param == SweptParam::forced_gain ? value : 1.0;
  const Eigen::VectorXd s = report.transformed.sensing_distortion * factor;
  const Eigen::VectorXd d = report.transformed.quant_distortion * factor;
  row.gain = problem.gain(s, d);
  if (spec.accuracy_samples > 0) {
    const SampleBatch batch = sample_distorted(sc.stats, sc.devices, s, d, spec.accuracy_samples,
                                               derive_seed(seed, kSamplingStream));
    row.accuracy = classify_map(sc.stats, sc.devices, batch).accuracy;
  }
  return row;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, int threads, bool record_timing) {
  spec.validate();
  const std::size_t n_schemes = spec.schemes.size();
  const std::size_t n_reps = static_cast<std::size_t>(spec.repetitions);
  const std::size_t total = spec.values.size() * n_schemes * n_reps;
  SweepResult res;
  res.param = spec.param;
  res.rows.resize(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t rep = i % n_reps;
      const std::size_t s = (i / n_reps) % n_schemes;
      const std::size_t v = i / (n_reps * n_schemes);
      try {
        res.rows[i] = run_cell(spec, spec.values[v], spec.schemes[s], static_cast<int>(rep), record_timing);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(total)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  res.summary = summarize(res.rows);
  return res;
}

std::vector<CellSummary> summarize(const std::vector<SweepRow>& rows) {
  std::vector<CellSummary> out;
  std::vector<std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary& c) {
      return c.scheme == r.scheme && c.value == r.value;
    });
    if (it == out.end()) {
      out.push_back({r.scheme, r.value});
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[static_cast<std::size_t>(it - out.begin())].push_back(&r);
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto& g = groups[c];
    const double n = static_cast<double>(g.size());
    double sg = 0, sa = 0, sf = 0;
    for (const auto* r : g) {
      sg += r->gain;
      sa += r->accuracy;
      sf += r->feasible ? 1.0 : 0.0;
    }
    out[c].count = static_cast<int>(g.size());
    out[c].mean_gain = sg / n;
    out[c].mean_accuracy = sa / n;
    out[c].feasible_rate = sf / n;
    if (g.size() > 1) {
      double vg = 0, va = 0;
      for (const auto* r : g) {
        vg += (r->gain - out[c].mean_gain) * (r->gain - out[c].mean_gain);
        va += (r->accuracy - out[c].mean_accuracy) * (r->accuracy - out[c].mean_accuracy);
      }
      out[c].se_gain = std::sqrt(vg / (n - 1) / n);
      out[c].se_accuracy = std::sqrt(va / (n - 1) / n);
    }
  }
  return out;
}

double pooled_se(double se_a, double se_b) { return std::sqrt(se_a * se_a + se_b * se_b); }

}  // namespace iscc

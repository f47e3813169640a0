// Synthetic inference evaluation: draw distorted features under an
// allocation, classify them with the Bayes rule of the class-conditional
// Gaussians, and run parameter sweeps over schemes.
#pragma once

#include "iscc/scenarios.hpp"
#include "iscc/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace iscc {

struct SampleBatch {
  Eigen::MatrixXd features;  // samples x (sum of N_k), devices in order
  Eigen::VectorXi labels;
  TransformedAllocation applied;
  std::uint64_t seed = 0;
};

/// Draws `samples` labelled feature vectors. Each element is the class
/// centroid plus independent Gaussian feature, clutter, sensing and
/// quantization noise. Throws ModelError if the allocation is infeasible.
SampleBatch sample_features(const ClassStatistics& stats, const std::vector<DeviceProfile>& devices,
                            const SystemParams& sys, const Allocation& alloc, int samples,
                            std::uint64_t seed);

/// Same draw for arbitrary positive distortions, feasible or not.
SampleBatch sample_distorted(const ClassStatistics& stats, const std::vector<DeviceProfile>& devices,
                             const Eigen::VectorXd& sensing_distortion,
                             const Eigen::VectorXd& quant_distortion, int samples,
                             std::uint64_t seed);

struct Classification {
  Eigen::VectorXi predicted;
  double accuracy = 0.0;
};

/// Nearest centroid in the metric weighted by each element's total variance
/// under the batch's allocation.
Classification classify_map(const ClassStatistics& stats, const std::vector<DeviceProfile>& devices,
                            const SampleBatch& batch);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

inline const std::vector<double> kGainLadderFactors{10, 5, 2, 1, 0.5, 0.2, 0.1};

struct LadderPoint {
  double factor = 1.0;
  double gain = 0.0;
  double accuracy = 0.0;
};

/// Scales (S, D) of `base` jointly by each factor and measures G and
/// accuracy with common random numbers across the ladder.
std::vector<LadderPoint> gain_ladder(const Problem& problem, const TransformedAllocation& base,
                                     const std::vector<double>& factors, int samples,
                                     std::uint64_t seed);

enum class SweptParam { energy_budget, latency, device_count, forced_gain };
std::string_view to_string(SweptParam p);
SweptParam swept_param_from_string(std::string_view name);

struct SweepSpec {
  SweptParam param = SweptParam::energy_budget;
  std::vector<double> values;
  int repetitions = 20;
  std::vector<Scheme> schemes{Scheme::optimal, Scheme::power_aware, Scheme::time_aware,
                              Scheme::quantization_aware};
  std::uint64_t seed = 0;
  int accuracy_samples = 10000;  // 0 skips classification
  bool resample_channels = true;  // false: one channel draw shared by all repetitions
  // Device-count sweeps scale the latency budget with K so each device keeps
  // the base configuration's share of the window.
  bool scale_latency_with_devices = true;
  ScenarioConfig base;
  SolverConfig solver;

  void validate() const;
};

SweepSpec parse_sweep_spec(const std::string& json_text,
                           const std::filesystem::path& base_dir = {});
SweepSpec load_sweep_spec(const std::filesystem::path& path);
std::string serialize_sweep_spec(const SweepSpec& spec);

struct SweepRow {
  Scheme scheme = Scheme::optimal;
  double value = 0.0;
  int repetition = 0;
  double gain = 0.0;
  double accuracy = 0.0;
  bool feasible = false;
  int iterations = 0;
  double wall_ms = 0.0;
  Termination termination = Termination::converged;
};

struct CellSummary {
  Scheme scheme = Scheme::optimal;
  double value = 0.0;
  int count = 0;
  double mean_gain = 0.0;
  double se_gain = 0.0;
  double mean_accuracy = 0.0;
  double se_accuracy = 0.0;
  double feasible_rate = 0.0;
};

struct SweepResult {
  SweptParam param = SweptParam::energy_budget;
  std::vector<SweepRow> rows;  // value-major, then scheme, then repetition
  std::vector<CellSummary> summary;
};

/// Scenario configuration of one sweep value.
ScenarioConfig sweep_config(const SweepSpec& spec, double value);

/// Runs every (value, scheme, repetition) cell. Infeasible cells record
/// G = 0, accuracy 1/L and feasible = false. Results do not depend on
/// `threads`; wall_ms stays 0 unless `record_timing`.
SweepResult run_sweep(const SweepSpec& spec, int threads = 1, bool record_timing = false);

std::vector<CellSummary> summarize(const std::vector<SweepRow>& rows);

/// sqrt(se_a^2 + se_b^2).
double pooled_se(double se_a, double se_b);

}  // namespace iscc

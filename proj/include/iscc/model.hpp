// Domain model for task-oriented sensing/computation/communication allocation:
// class statistics, device profiles, the discriminant-gain objective, the
// quantization overhead and channel capacity formulas, and constraint checks.
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace iscc {

/// Absolute slack (in each constraint's native units) still counted as
/// satisfied.
inline constexpr double kFeasibilityTolerance = 1e-9;

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ground-truth feature statistics of an L-class Gaussian mixture with
/// equal per-element variance across classes. Device k owns an (L x N_k)
/// centroid matrix and an N_k variance vector.
struct ClassStatistics {
  int num_classes = 0;
  std::vector<Eigen::MatrixXd> centroids;
  std::vector<Eigen::VectorXd> variance;

  std::size_t num_devices() const { return centroids.size(); }
  int feature_count(std::size_t k) const { return static_cast<int>(centroids.at(k).cols()); }
  void validate() const;
};

struct DeviceProfile {
  int feature_count = 1;
  double clutter_variance = 0.0;       // sigma_c^2
  double quantization_variance = 1.0;  // delta_k^2
  double sensing_time = 0.0;           // T_r [s]
  double computation_time = 0.0;      // T_m [s]
  double computation_energy = 0.0;    // E_m [J]
  double energy_budget = 0.0;         // E_k [J]
  double channel_gain = 1.0;          // H_c, power gain

  /// Energy left for sensing and transmission once computation is paid.
  double energy_room() const { return energy_budget - computation_energy; }
  void validate() const;
};

struct SystemParams {
  double latency_budget = 1.0;  // T [s]
  double bandwidth = 1.0;       // B [Hz]
  double channel_noise = 1.0;   // delta_c^2 [W]
  double sensing_noise = 1.0;   // sigma_r^2
  void validate() const;
};

/// Decision variables in physical units, one entry per device.
struct Allocation {
  Eigen::VectorXd sensing_power;
  Eigen::VectorXd transmit_power;
  Eigen::VectorXd comm_time;
  Eigen::VectorXd quantization_gain;

  Eigen::Index size() const { return comm_time.size(); }
  bool all_positive() const;
};

/// Decision variables after the substitution S = sigma_r^2/P_r,
/// D = delta^2/Q, E_c = P_c * T_c.
struct TransformedAllocation {
  Eigen::VectorXd sensing_distortion;
  Eigen::VectorXd quant_distortion;
  Eigen::VectorXd comm_energy;
  Eigen::VectorXd comm_time;

  Eigen::Index size() const { return comm_time.size(); }
};

TransformedAllocation to_transformed(const Allocation& alloc,
                                     const std::vector<DeviceProfile>& devices,
                                     const SystemParams& sys);
Allocation to_physical(const TransformedAllocation& t, const std::vector<DeviceProfile>& devices,
                       const SystemParams& sys);

/// One class pair on one feature element of a device. `weight` is the
/// pair's share of G per unit inverse variance, 2(mu_l - mu_l')^2/(L(L-1)),
/// and `base_variance` is sigma_n^2 + sigma_c^2. The pair gain at
/// distortion u = S + D is weight / (base_variance + u).
struct WeightedPair {
  int feature = 0;
  int first = 0;
  int second = 0;
  double weight = 0.0;
  double base_variance = 0.0;
};

/// Every unordered class pair (l < l') for every feature of device k, in
/// feature-major order.
std::vector<WeightedPair> weighted_pairs(const ClassStatistics& stats, std::size_t k,
                                         const DeviceProfile& device);

/// Symmetric-KL discriminant gain of one feature element for one class pair.
double pair_gain(const ClassStatistics& stats, std::size_t k, const DeviceProfile& device,
                 double sensing_distortion, double quant_distortion, int first, int second,
                 int feature);

struct PairTerm {
  int feature = 0;
  int first = 0;
  int second = 0;
  double gain = 0.0;         // pair gain, already averaged over class pairs
  double raw_gain = 0.0;     // (mu_l - mu_l')^2 / variance
  double denominator = 0.0;  // B term; +inf when the centroids coincide
};

struct GainBreakdown {
  std::vector<std::vector<PairTerm>> terms;  // [device][pair]
  Eigen::VectorXd device_total;
  double total = 0.0;
};

/// G summed over devices and features, averaged over the L(L-1)/2 pairs.
GainBreakdown total_gain(const ClassStatistics& stats, const std::vector<DeviceProfile>& devices,
                         const TransformedAllocation& t);

/// Gain of a device's pair list at total distortion u = S + D.
double device_gain(const std::vector<WeightedPair>& pairs, double distortion);

/// Feature payload in bits for quantization gain Q: N log2(1 + Q/delta^2).
double mutual_info_bits(const DeviceProfile& device, double quantization_gain);

/// Same payload expressed through the normalized distortion D = delta^2/Q.
double required_bits(int feature_count, double quant_distortion);

/// T B log2(1 + E H / (T delta_c^2)), bits deliverable in time T with energy E.
double channel_capacity_bits(const SystemParams& sys, const DeviceProfile& device,
                             double comm_time, double comm_energy);

struct FeasibilityReport {
  double latency_slack = 0.0;      // C1 [s]
  Eigen::VectorXd capacity_slack;  // C2 [bits]
  Eigen::VectorXd energy_slack;    // C3 [J]
  bool positive = true;
  bool feasible = true;

  /// Name of the most violated constraint ("C1", "C2[k]", "C3[k]",
  /// "positivity") or an empty string when feasible.
  std::string violated() const;
};

FeasibilityReport check_feasibility(const std::vector<DeviceProfile>& devices,
                                    const SystemParams& sys, const Allocation& alloc,
                                    double tolerance = kFeasibilityTolerance);

}  // namespace iscc

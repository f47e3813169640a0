// Sum-of-ratios allocation solver.
//
// The objective G = sum 1/B(S_k, D_k) is a sum of ratios with unit numerators
// and denominators affine in the transformed distortions. The outer loop
// (solve_p2) fixes auxiliary weights y = 1/B and solves the weighted
// distortion problem (solve_p3), which alternates between a primal-dual power
// and quantization allocation at fixed airtime (solve_p4) and an airtime
// exchange driven by the minimum-time problem (solve_p5_time).
//
// Per device k, with W_k = sum_pairs y^2 dB/dS the weighted distortion slope,
// a_k = sigma_r^2 T_r, and duals alpha_k (capacity) and beta_k (energy):
//
//   S_k   = sqrt(beta_k a_k / W_k)
//   D_k   : D_k (D_k + 1) = alpha_k N_k / (W_k ln 2)
//   E_c,k = max{alpha_k B T_c,k / (beta_k ln 2) - T_c,k delta_c^2 / H_k, 0}
#pragma once

#include "iscc/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iscc {

enum class Scheme { optimal, power_aware, time_aware, quantization_aware };

std::string_view to_string(Scheme scheme);
/// Throws ModelError for unknown names.
Scheme scheme_from_string(std::string_view name);

struct SolverConfig {
  // Dual step scales, applied to Newton-preconditioned multiplier steps.
  double eta_alpha = 1.0;
  double eta_beta = 1.0;
  double eta_lambda = 1.0;
  double eta_time = 1.0;
  // Largest multiplicative change of a multiplier (or airtime) in one step,
  // as a natural-log increment.
  double max_log_step = 1.0;

  int max_outer_iterations = 200;
  int max_alternations = 400;
  int max_dual_iterations = 10000;

  double outer_tolerance = 1e-6;      // max |y B - 1|
  double dual_tolerance = 1e-12;      // relative constraint residual
  double marginal_tolerance = 1e-9;   // relative spread of airtime marginals

  double reclaim_fraction = 0.5;  // airtime share released before each exchange
  double exchange_rate = 1.0;     // initial exponent scale of the exchange weights

  std::optional<double> initial_alpha;
  std::optional<double> initial_beta;
  std::optional<double> initial_lambda;

  std::uint64_t seed = 0;  // randomized baselines only

  /// Use alpha N ln2 / W instead of alpha N / (W ln2) in the quantization
  /// closed form. Only rescales the capacity multiplier; the primal optimum
  /// is unchanged.
  bool literal_quantization_form = false;

  void validate() const;
};

/// Scenario bundle with per-device pair tables precomputed.
class Problem {
 public:
  Problem(ClassStatistics stats, std::vector<DeviceProfile> devices, SystemParams sys);

  const ClassStatistics& stats() const { return stats_; }
  const std::vector<DeviceProfile>& devices() const { return devices_; }
  const DeviceProfile& device(std::size_t k) const { return devices_[k]; }
  const SystemParams& sys() const { return sys_; }
  std::size_t num_devices() const { return devices_.size(); }
  const std::vector<WeightedPair>& pairs(std::size_t k) const { return pairs_[k]; }

  /// T - sum(T_r + T_m): airtime available for feature upload.
  double comm_window() const;
  /// sigma_r^2 T_r: sensing energy times sensing distortion.
  double sensing_coefficient(std::size_t k) const;
  bool gain_inert(std::size_t k) const;

  double gain(const Eigen::VectorXd& sensing_distortion,
              const Eigen::VectorXd& quant_distortion) const;

 private:
  ClassStatistics stats_;
  std::vector<DeviceProfile> devices_;
  SystemParams sys_;
  std::vector<std::vector<WeightedPair>> pairs_;
};

/// Sum-of-ratios auxiliaries, aligned with Problem::pairs(k). The numerator
/// weights x coincide with y, so only y is stored.
struct AuxiliaryVars {
  std::vector<Eigen::VectorXd> y;
};

/// y = 1/B at the given distortions (0 for pairs with coincident centroids).
AuxiliaryVars update_aux(const Problem& problem, const Eigen::VectorXd& sensing_distortion,
                         const Eigen::VectorXd& quant_distortion);

/// max |y B - 1| over pairs with distinct centroids.
double fixed_point_residual(const Problem& problem, const AuxiliaryVars& aux,
                            const Eigen::VectorXd& sensing_distortion,
                            const Eigen::VectorXd& quant_distortion);

/// W_k = sum y^2 dB/dS over device k's pairs.
double gain_weight(const Problem& problem, const AuxiliaryVars& aux, std::size_t k);

/// Weighted distortion objective sum (y - y^2 B) for the given distortions.
double weighted_objective(const Problem& problem, const AuxiliaryVars& aux,
                          const Eigen::VectorXd& sensing_distortion,
                          const Eigen::VectorXd& quant_distortion);

struct DualState {
  Eigen::VectorXd alpha;   // capacity
  Eigen::VectorXd beta;    // energy
  Eigen::VectorXd lambda;  // minimum-time capacity
};

/// Closed-form value; `boundary` marks that the stationarity formula had no
/// finite solution and the value was taken from a constraint boundary.
struct ClosedForm {
  double value = 0.0;
  bool boundary = false;
};

/// Sensing distortion from energy-constraint stationarity. beta = 0 means
/// unbounded sensing power; the result is clamped to the C3 boundary with
/// no transmit energy.
ClosedForm closed_form_S(const Problem& problem, const AuxiliaryVars& aux, std::size_t k,
                         double beta);
/// Quantization distortion from capacity-constraint stationarity.
ClosedForm closed_form_D(const Problem& problem, const AuxiliaryVars& aux, std::size_t k,
                         double alpha, bool literal = false);
/// Water-filling transmit energy. beta = 0 clamps to all remaining energy.
ClosedForm closed_form_Ec(const Problem& problem, std::size_t k, double alpha, double beta,
                          double comm_time);

/// Coordinates held fixed by the baselines.
struct Pins {
  std::optional<Eigen::VectorXd> sensing_distortion;
  std::optional<Eigen::VectorXd> quant_distortion;
  bool fixed_time = false;
};

struct P4Solution {
  Eigen::VectorXd sensing_distortion;
  Eigen::VectorXd quant_distortion;
  Eigen::VectorXd comm_energy;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd weight;  // W_k
  std::vector<bool> gain_inert;
  std::vector<Eigen::VectorXd> denominators;  // B terms
  double objective = 0.0;                     // sum (y - y^2 B)
  int iterations = 0;                         // worst device
  bool converged = true;
  bool feasible = true;
  std::string message;
};

/// Joint power and quantization allocation at fixed airtime: Newton steps on
/// (ln alpha, ln beta) per device with the closed forms as the primal map.
P4Solution solve_p4(const Problem& problem, const AuxiliaryVars& aux,
                    const Eigen::VectorXd& comm_time, const SolverConfig& config,
                    const Pins& pins = {});

/// T_c,k = T*_c,k + gamma_k / sum(gamma) * surplus. Equal split when all
/// gammas vanish.
Eigen::VectorXd redistribute_time(const Eigen::VectorXd& min_time, const Eigen::VectorXd& gamma,
                                  double surplus);

struct TimeUpdate {
  Eigen::VectorXd min_time;  // T*_c,k
  double min_total = 0.0;    // T*, including sensing and computation
  Eigen::VectorXd gamma;
  Eigen::VectorXd lambda;
  Eigen::VectorXd comm_time;  // after redistribution
  bool feasible = true;
  int offending_device = -1;
  int iterations = 0;
  bool converged = true;
};

/// Minimum airtime meeting each device's capacity constraint for the given
/// (D, E_c), found by primal-dual iteration on the minimum-time problem, then
/// the surplus T - T* redistributed. Device k's share weight is
/// gamma_k = T*_k exp(rate (m_k / m_bar - 1)), where m_k is the marginal
/// weighted-distortion value of device k's airtime and m_bar the
/// airtime-weighted mean, so the split is stationary exactly when all
/// marginals agree.
TimeUpdate solve_p5_time(const Problem& problem, const Eigen::VectorXd& quant_distortion,
                         const Eigen::VectorXd& comm_energy, const Eigen::VectorXd& marginal,
                         double exchange_rate, const Eigen::VectorXd& time_hint,
                         const SolverConfig& config);

/// alpha_k dR_k/dT_c: marginal weighted-distortion value of airtime.
Eigen::VectorXd airtime_marginals(const Problem& problem, const P4Solution& p4,
                                  const Eigen::VectorXd& comm_time);

struct AlternationRecord {
  int outer = 0;
  double before = 0.0;     // P3 objective at the previous schedule
  double reclaimed = 0.0;  // at the released schedule handed to the time step
  double after = 0.0;      // at the redistributed schedule
  bool accepted = false;
};

struct P3Result {
  P4Solution p4;
  Eigen::VectorXd comm_time;
  Eigen::VectorXd lambda;  // minimum-time multipliers of the last exchange
  std::vector<AlternationRecord> records;
  int alternations = 0;
  bool converged = true;
};

/// Smallest airtime each device can run on without violating C2 or C3 under
/// the pins (zero unless the quantization distortion is pinned).
Eigen::VectorXd airtime_floor(const Problem& problem, const Pins& pins);

/// Alternates P4 with airtime exchanges. Each exchange releases a share of
/// every device's airtime, re-solves P4, redistributes the window by the
/// airtime marginals and keeps the move only if the objective does not drop.
P3Result solve_p3(const Problem& problem, const AuxiliaryVars& aux,
                  const Eigen::VectorXd& initial_time, const SolverConfig& config,
                  const Pins& pins = {}, int outer_index = 0);

enum class Termination { converged, max_iterations, infeasible, dual_nonconvergence };
std::string_view to_string(Termination t);

struct SolveReport {
  Scheme scheme = Scheme::optimal;
  Termination termination = Termination::converged;
  std::string message;
  Allocation allocation;
  TransformedAllocation transformed;
  GainBreakdown gains;
  double gain = 0.0;
  std::vector<double> objective_trace;  // G, starting point first
  std::vector<double> residual_trace;   // max |y B - 1| per outer iteration
  std::vector<AlternationRecord> alternations;
  DualState duals;
  P4Solution final_p4;
  AuxiliaryVars final_aux;
  FeasibilityReport feasibility;
  int outer_iterations = 0;
  int dual_iterations = 0;

  bool ok() const { return termination == Termination::converged; }
};

/// Starting point: equal airtime split, half the energy room for sensing,
/// twice the minimum quantization distortion the link supports.
TransformedAllocation initial_point(const Problem& problem, const Pins& pins = {});

/// Sum-of-ratios outer loop for the full problem.
SolveReport solve_p2(const Problem& problem, const SolverConfig& config);

/// Outer loop with some coordinates held fixed.
SolveReport solve_pinned(const Problem& problem, const SolverConfig& config, const Pins& pins,
                         Scheme scheme);

/// Pinned values of a baseline scheme. Power-aware draws the sensing power
/// uniformly in (0, (E_k - E_m)/T_r] from config.seed.
Pins baseline_pins(Scheme kind, const Problem& problem, const SolverConfig& config);

SolveReport baseline(Scheme kind, const Problem& problem, const SolverConfig& config);

/// Dispatches to solve_p2 or baseline.
SolveReport solve_scheme(Scheme scheme, const Problem& problem, const SolverConfig& config);

}  // namespace iscc

// Brute-force and numerical certificates for the solver on small instances.
//
// The grid search does not enumerate every variable. For fixed sensing
// distortion S_k and airtime T_c,k, the gain only improves when D_k shrinks
// and D_k is limited only by C2, which loosens as E_c,k grows; so at any
// optimum E_c,k takes all energy left after sensing and D_k sits on the C2
// boundary. The grid therefore covers S_k per device (log-spaced) and, for
// two devices, the airtime ratio T_c,1/T_c,0 (log-spaced).
#pragma once

#include "iscc/solver.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace iscc {

/// Instance too large for exhaustive search.
class OracleGuardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GridSpec {
  int points = 15;            // per axis and level
  int zoom_levels = 3;        // refinements after the initial grid
  double sensing_span = 1e4;  // S_max / S_min per device
  double ratio_span = 1e4;    // airtime ratio covers [1/span, span]
  double zoom_halfwidth = 2;  // refined window, in grid steps of the previous level

  void validate() const;
};

inline constexpr std::size_t kOracleMaxDevices = 2;
inline constexpr int kOracleMaxFeatures = 2;
inline constexpr int kOracleMaxClasses = 3;

/// Throws OracleGuardError when the instance exceeds the guard limits.
void check_oracle_guard(const Problem& problem);

struct OracleResult {
  bool found = false;
  TransformedAllocation best;
  double value = 0.0;               // best objective
  std::vector<double> level_best;   // incumbent after each level
  long evaluated = 0;
  long feasible_points = 0;
  std::string message;
};

/// Maximizes the discriminant gain G over the reduced grid.
OracleResult grid_optimum(const Problem& problem, const GridSpec& grid = {});

/// Maximizes the weighted distortion objective sum (y - y^2 B) for fixed
/// auxiliaries. With `comm_time` given the airtime is held fixed.
OracleResult grid_optimum_weighted(const Problem& problem, const AuxiliaryVars& aux,
                                   const GridSpec& grid = {},
                                   const std::optional<Eigen::VectorXd>& comm_time = std::nullopt);

struct KktReport {
  Eigen::VectorXd stationarity;  // per device, 2-norm of relative components
  double stationarity_norm = 0.0;          // max over devices
  double absolute_stationarity = 0.0;      // 2-norm of the raw gradient
  double complementary_slackness = 0.0;    // max |alpha C2 slack|, |beta C3 slack|
  double primal_violation = 0.0;           // max negative C2/C3 slack
  double dual_violation = 0.0;             // max negative multiplier
};

/// Finite-difference check of the P4 Lagrangian
///   -sum (y - y^2 B) + alpha (bits(D) - R(T, E)) + beta (a/S + E_m + E - E_k)
/// at `solution` for fixed airtime. Each gradient component is divided by the
/// larger magnitude of its objective and constraint parts. Pinned coordinates
/// and gain-inert devices are skipped.
KktReport kkt_residual(const Problem& problem, const AuxiliaryVars& aux,
                       const Eigen::VectorXd& comm_time, const P4Solution& solution,
                       const Pins& pins = {});

}  // namespace iscc

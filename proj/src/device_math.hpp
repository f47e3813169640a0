// Scalar link and quantization relations shared by the solver stages.
#pragma once

#include <cmath>
#include <numbers>

namespace iscc::detail {

inline constexpr double kLn2 = std::numbers::ln2;

/// Link of one device: capacity(T, E) = T B log2(1 + E g / T), g = H / delta_c^2.
struct Link {
  double bandwidth;
  double gain_to_noise;

  double capacity(double time, double energy) const {
    return time * bandwidth * std::log1p(energy * gain_to_noise / time) / kLn2;
  }
  /// d capacity / d energy.
  double capacity_energy_slope(double time, double energy) const {
    return time * bandwidth * gain_to_noise / ((time + energy * gain_to_noise) * kLn2);
  }
  /// d capacity / d time.
  double capacity_time_slope(double time, double energy) const {
    const double x = energy * gain_to_noise / time;
    // log1p(x) - x/(1+x) cancels for small x; use its series there.
    const double h = x < 1e-3 ? x * x * (0.5 - x * (2.0 / 3.0 - x * (0.75 - 0.8 * x)))
                              : std::log1p(x) - x / (1.0 + x);
    return bandwidth * h / kLn2;
  }
  /// d^2 capacity / d time^2 (negative).
  double capacity_time_curvature(double time, double energy) const {
    const double xe = energy * gain_to_noise;
    return -bandwidth * xe * xe / (time * (time + xe) * (time + xe) * kLn2);
  }
  /// Supremum of capacity over time for fixed energy.
  double capacity_limit(double energy) const {
    return bandwidth * energy * gain_to_noise / kLn2;
  }
  /// Least energy delivering `bits` in `time`.
  double min_energy(double time, double bits) const {
    return time / gain_to_noise * std::expm1(bits * kLn2 / (time * bandwidth));
  }
};

inline double payload_bits(int features, double distortion) {
  return features * std::log1p(1.0 / distortion) / kLn2;
}

/// Smallest quantization distortion whose payload fits in `bits`.
inline double min_distortion(int features, double bits) {
  return 1.0 / std::expm1(bits * kLn2 / features);
}

/// Positive root of D (D + 1) = q, stable for small q.
inline double distortion_root(double q) {
  return q / (std::sqrt(0.25 + q) + 0.5);
}

}  // namespace iscc::detail

// Small hand-built instances shared by the unit tests.
#pragma once

#include "iscc/solver.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace iscc::testing {

/// Single device, two classes, one feature with centroids 0 and `gap`.
inline ClassStatistics two_class_stats(double gap, double variance = 1.0) {
  ClassStatistics s;
  s.num_classes = 2;
  Eigen::MatrixXd mu(2, 1);
  mu << 0.0, gap;
  s.centroids = {mu};
  s.variance = {Eigen::VectorXd::Constant(1, variance)};
  return s;
}

/// Default device with the given channel gain.
inline DeviceProfile table_device(double channel_gain, int features = 50, double clutter = 1.0) {
  DeviceProfile d;
  d.feature_count = features;
  d.clutter_variance = clutter;
  d.quantization_variance = 1.0;
  d.sensing_time = 0.5;
  d.computation_time = 0.1;
  d.computation_energy = 0.01;
  d.energy_budget = 0.15;
  d.channel_gain = channel_gain;
  return d;
}

inline SystemParams table_system(double latency = 1.85) { return {latency, 200.0, 1e-12, 1.0}; }

/// Random statistics with L classes and N features on each of K devices.
inline ClassStatistics random_stats(std::mt19937_64& rng, int devices, int classes, int features) {
  std::uniform_real_distribution<double> mu(-1.0, 1.0), var(0.5, 1.5);
  ClassStatistics s;
  s.num_classes = classes;
  for (int k = 0; k < devices; ++k) {
    Eigen::MatrixXd c(classes, features);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = mu(rng);
    Eigen::VectorXd v(features);
    for (auto& x : v) x = var(rng);
    s.centroids.push_back(c);
    s.variance.push_back(v);
  }
  return s;
}

/// Small random instance with a generous latency budget and channel gains
/// around 1e-10 so that neither energy nor airtime dominates.
inline Problem random_problem(std::uint64_t seed, int devices, int classes, int features) {
  std::mt19937_64 rng(seed);
  ClassStatistics stats = random_stats(rng, devices, classes, features);
  std::uniform_real_distribution<double> log_gain(-11.5, -9.5);
  std::vector<DeviceProfile> devs;
  for (int k = 0; k < devices; ++k) {
    devs.push_back(table_device(std::pow(10.0, log_gain(rng)), features, 0.1 + 0.4 * k));
  }
  return Problem(stats, devs, table_system(0.6 * devices + 0.05));
}

}  // namespace iscc::testing

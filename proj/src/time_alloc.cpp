// Airtime allocation: minimum feasible airtime per device and the exchange
// of the remaining window.
#include "iscc/solver.hpp"

#include "device_math.hpp"

#include <algorithm>
#include <cmath>

namespace iscc {

namespace {

struct MinTime {
  double time = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  bool converged = false;
  bool feasible = true;
};

// Airtime at which lambda * dR/dT = 1, by Newton on ln T.
double stationary_time(const detail::Link& link, double energy, double log_lambda, double ln_t,
                       double max_step) {
  for (int it = 0; it < 200; ++it) {
    const double t = std::exp(ln_t);
    const double slope = link.capacity_time_slope(t, energy);
    const double phi = log_lambda + std::log(slope);
    const double dphi = t * link.capacity_time_curvature(t, energy) / slope;
    const double step = std::clamp(-phi / dphi, -max_step, max_step);
    ln_t += step;
    if (std::abs(step) < 1e-15) break;
  }
  return std::exp(ln_t);
}

// min T subject to bits <= R(T, energy), through its multiplier lambda.
MinTime min_airtime(const detail::Link& link, double bits, double energy, double hint,
                    const SolverConfig& config) {
  MinTime out;
  if (!(energy > 0.0) || !(bits < link.capacity_limit(energy))) {
    out.feasible = false;
    return out;
  }
  const double t0 = hint > 0.0 ? hint : 1.0;
  double ln_t = std::log(t0);
  double ll = std::log(config.initial_lambda.value_or(1.0 / link.capacity_time_slope(t0, energy)));
  for (int it = 1; it <= config.max_dual_iterations; ++it) {
    out.iterations = it;
    ln_t = std::log(stationary_time(link, energy, ll, ln_t, config.max_log_step));
    const double t = std::exp(ln_t);
    const double g = bits - link.capacity(t, energy);
    if (std::abs(g) <= config.dual_tolerance * bits) {
      out.converged = true;
      break;
    }
    const double slope = link.capacity_time_slope(t, energy);
    const double dg = slope * slope / link.capacity_time_curvature(t, energy);
    const double step = std::clamp(-config.eta_lambda * g / dg, -config.max_log_step,
                                   config.max_log_step);
    ll += step;
    if (!std::isfinite(ll)) break;
  }
  out.time = std::exp(ln_t);
  out.lambda = std::exp(ll);
  return out;
}

}  // namespace

Eigen::VectorXd redistribute_time(const Eigen::VectorXd& min_time, const Eigen::VectorXd& gamma,
                                  double surplus) {
  if (min_time.size() != gamma.size()) throw ModelError("min_time and gamma lengths differ");
  const double total = gamma.sum();
  if (!(total > 0.0)) {
    return min_time.array() + surplus / static_cast<double>(min_time.size());
  }
  return min_time + gamma * (surplus / total);
}

Eigen::VectorXd airtime_marginals(const Problem& problem, const P4Solution& p4,
                                  const Eigen::VectorXd& comm_time) {
  const auto n = comm_time.size();
  Eigen::VectorXd m(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& dev = problem.device(static_cast<std::size_t>(i));
    const detail::Link link{problem.sys().bandwidth, dev.channel_gain / problem.sys().channel_noise};
    m[i] = p4.alpha[i] * link.capacity_time_slope(comm_time[i], p4.comm_energy[i]);
  }
  return m;
}

TimeUpdate solve_p5_time(const Problem& problem, const Eigen::VectorXd& quant_distortion,
                         const Eigen::VectorXd& comm_energy, const Eigen::VectorXd& marginal,
                         double exchange_rate, const Eigen::VectorXd& time_hint,
                         const SolverConfig& config) {
  const auto n = static_cast<Eigen::Index>(problem.num_devices());
  TimeUpdate up;
  up.min_time.resize(n);
  up.lambda.resize(n);
  up.gamma.resize(n);
  double fixed = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& dev = problem.device(static_cast<std::size_t>(i));
    fixed += dev.sensing_time + dev.computation_time;
    const detail::Link link{problem.sys().bandwidth, dev.channel_gain / problem.sys().channel_noise};
    const double bits = detail::payload_bits(dev.feature_count, quant_distortion[i]);
    const MinTime mt = min_airtime(link, bits, comm_energy[i], time_hint[i], config);
    if (!mt.feasible) {
      up.feasible = false;
      up.offending_device = static_cast<int>(i);
      return up;
    }
    up.min_time[i] = mt.time;
    up.lambda[i] = mt.lambda;
    up.iterations = std::max(up.iterations, mt.iterations);
    up.converged = up.converged && mt.converged;
  }
  up.min_total = fixed + up.min_time.sum();
  const double surplus = problem.sys().latency_budget - up.min_total;
  if (surplus < 0.0) {
    up.feasible = false;
    return up;
  }

  // Airtime-weighted mean over devices whose airtime carries value.
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (marginal[i] > 0.0) {
      num += up.min_time[i] * marginal[i];
      den += up.min_time[i];
    }
  }
  const double mean = den > 0.0 ? num / den : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rel = mean > 0.0 ? marginal[i] / mean - 1.0 : 0.0;
    up.gamma[i] = up.min_time[i] * std::exp(std::clamp(exchange_rate * rel, -50.0, 50.0));
  }
  up.comm_time = redistribute_time(up.min_time, up.gamma, surplus);
  return up;
}

}  // namespace iscc

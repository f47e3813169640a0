// Power and quantization allocation at fixed airtime. The problem decouples
// across devices; each device runs Newton steps on (ln alpha, ln beta) with
// the closed forms as the primal map.
#include "iscc/solver.hpp"

#include "device_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace iscc {

namespace {

struct DeviceInput {
  double weight;  // W_k
  double a;       // sigma_r^2 T_r
  double room;    // E_k - E_m
  int features;
  double time;
  detail::Link link;
  std::optional<double> s_pin;
  std::optional<double> d_pin;
  bool literal;
};

struct DeviceOutput {
  double s = 0.0, d = 0.0, e = 0.0;
  double alpha = 0.0, beta = 0.0;
  int iterations = 0;
  bool converged = true;
  bool feasible = true;
  std::string message;
};

struct Primal {
  double s, d, e;
  bool e_clamped;
};

double clamp_step(double v, double limit) { return std::clamp(v, -limit, limit); }

// Energy for transmission at the starting point: half the room, or midway
// between the pinned-payload minimum and the room.
double start_energy(const DeviceInput& in) {
  if (in.s_pin) return in.room - in.a / *in.s_pin;
  if (in.d_pin) {
    const double need = in.link.min_energy(in.time, detail::payload_bits(in.features, *in.d_pin));
    return 0.5 * (need + in.room);
  }
  return 0.5 * in.room;
}

DeviceOutput solve_device(const DeviceInput& in, const SolverConfig& config) {
  DeviceOutput out;
  const double noise_energy = in.time / in.link.gain_to_noise;
  const double ln2 = detail::kLn2;

  if (in.room <= 0.0) {
    out.feasible = false;
    out.message = "energy budget does not cover computation";
    return out;
  }
  if (in.s_pin && in.a / *in.s_pin >= in.room) {
    out.feasible = false;
    out.message = "pinned sensing power exhausts the energy budget";
    return out;
  }
  if (in.d_pin) {
    const double need = in.link.min_energy(in.time, detail::payload_bits(in.features, *in.d_pin));
    const double spare = in.s_pin ? in.room - in.a / *in.s_pin : in.room;
    if (!(need < spare)) {
      out.feasible = false;
      out.message = "pinned quantization payload exceeds the link budget";
      return out;
    }
  }

  const double e0 = start_energy(in);

  if (in.weight <= 0.0) {
    // No gain depends on this device: any feasible point is optimal.
    out.e = e0;
    out.s = in.s_pin ? *in.s_pin : in.a / (in.room - e0);
    out.d = in.d_pin ? *in.d_pin
                     : detail::min_distortion(in.features, in.link.capacity(in.time, e0));
    return out;
  }

  const double d_scale = in.literal ? in.features * ln2 / in.weight : in.features / (in.weight * ln2);
  auto primal = [&](double la, double lb) {
    Primal p{};
    p.s = in.s_pin ? *in.s_pin : std::sqrt(std::exp(lb) * in.a / in.weight);
    p.d = in.d_pin ? *in.d_pin : detail::distortion_root(std::exp(la) * d_scale);
    const double level = std::exp(la - lb) * in.link.bandwidth * in.time / ln2;
    p.e = level - noise_energy;
    p.e_clamped = p.e <= 0.0;
    if (p.e_clamped) p.e = 0.0;
    return p;
  };

  // Multipliers consistent with a primal starting point.
  const double s0 = in.s_pin ? *in.s_pin : in.a / (in.room - e0);
  const double d0 = in.d_pin ? *in.d_pin
                             : detail::min_distortion(in.features, in.link.capacity(in.time, e0));
  const double slope0 = in.link.capacity_energy_slope(in.time, e0);
  double alpha0, beta0;
  if (!in.s_pin) {
    beta0 = in.weight * s0 * s0 / in.a;
    alpha0 = in.d_pin ? beta0 / slope0 : d0 * (d0 + 1.0) / d_scale;
  } else {
    alpha0 = in.d_pin ? 1.0 : d0 * (d0 + 1.0) / d_scale;
    beta0 = alpha0 * slope0;
  }
  double la = std::log(config.initial_alpha.value_or(alpha0));
  double lb = std::log(config.initial_beta.value_or(beta0));

  const double tol = config.dual_tolerance;
  out.converged = false;
  Primal p{};
  for (int it = 1; it <= config.max_dual_iterations; ++it) {
    out.iterations = it;
    p = primal(la, lb);
    if (p.e_clamped) {
      // Zero transmit energy leaves the capacity residual blind to alpha;
      // move beta so that the water level sits at a positive energy.
      lb = la + std::log(in.link.bandwidth * in.time / (ln2 * (noise_energy + e0)));
      continue;
    }
    const double bits = detail::payload_bits(in.features, p.d);
    const double cap = in.link.capacity(in.time, p.e);
    const double ga = bits - cap;
    const double gb = in.a / p.s + p.e - in.room;
    if (std::abs(ga) <= tol * std::max(bits, cap) && std::abs(gb) <= tol * in.room) {
      out.converged = true;
      break;
    }
    const double n1 = in.d_pin ? 0.0 : in.features / (ln2 * (2.0 * p.d + 1.0));
    const double m = in.link.bandwidth * in.time / ln2;
    const double e = p.e + noise_energy;
    const double s = in.s_pin ? 0.0 : in.a / (2.0 * p.s);
    Eigen::Matrix2d jac;
    jac << -n1 - m, m, e, -s - e;
    const Eigen::Vector2d step = jac.partialPivLu().solve(Eigen::Vector2d(-ga, -gb));
    if (!step.allFinite()) break;
    la += clamp_step(config.eta_alpha * step[0], config.max_log_step);
    lb += clamp_step(config.eta_beta * step[1], config.max_log_step);
    if (!std::isfinite(la) || !std::isfinite(lb)) break;
  }
  p = primal(la, lb);
  out.s = p.s;
  out.d = p.d;
  out.e = p.e;
  out.alpha = std::exp(la);
  out.beta = std::exp(lb);
  if (!out.converged) out.message = "multiplier iteration did not converge";
  return out;
}

}  // namespace

P4Solution solve_p4(const Problem& problem, const AuxiliaryVars& aux,
                    const Eigen::VectorXd& comm_time, const SolverConfig& config,
                    const Pins& pins) {
  const auto n = static_cast<Eigen::Index>(problem.num_devices());
  if (comm_time.size() != n) throw ModelError("comm_time has the wrong length");
  P4Solution sol;
  sol.sensing_distortion.resize(n);
  sol.quant_distortion.resize(n);
  sol.comm_energy.resize(n);
  sol.alpha.resize(n);
  sol.beta.resize(n);
  sol.weight.resize(n);
  sol.gain_inert.assign(problem.num_devices(), false);
  sol.denominators.resize(problem.num_devices());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto& dev = problem.device(k);
    if (!(comm_time[i] > 0.0)) {
      sol.feasible = false;
      sol.converged = false;
      sol.message = "device " + std::to_string(k) + ": no airtime";
      return sol;
    }
    DeviceInput in{gain_weight(problem, aux, k),
                   problem.sensing_coefficient(k),
                   dev.energy_room(),
                   dev.feature_count,
                   comm_time[i],
                   {problem.sys().bandwidth, dev.channel_gain / problem.sys().channel_noise},
                   std::nullopt,
                   std::nullopt,
                   config.literal_quantization_form};
    if (pins.sensing_distortion) in.s_pin = (*pins.sensing_distortion)[i];
    if (pins.quant_distortion) in.d_pin = (*pins.quant_distortion)[i];
    const DeviceOutput out = solve_device(in, config);
    sol.weight[i] = in.weight;
    sol.gain_inert[k] = in.weight <= 0.0;
    sol.iterations = std::max(sol.iterations, out.iterations);
    if (!out.feasible || !out.converged) {
      if (sol.message.empty()) sol.message = "device " + std::to_string(k) + ": " + out.message;
      sol.feasible = sol.feasible && out.feasible;
      sol.converged = false;
      if (!out.feasible) return sol;
    }
    sol.sensing_distortion[i] = out.s;
    sol.quant_distortion[i] = out.d;
    sol.comm_energy[i] = out.e;
    sol.alpha[i] = out.alpha;
    sol.beta[i] = out.beta;
    const double u = out.s + out.d;
    const auto& pairs = problem.pairs(k);
    sol.denominators[k].resize(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      sol.denominators[k][static_cast<Eigen::Index>(j)] =
          pairs[j].weight > 0.0 ? (pairs[j].base_variance + u) / pairs[j].weight
                                : std::numeric_limits<double>::infinity();
    }
  }
  sol.objective = weighted_objective(problem, aux, sol.sensing_distortion, sol.quant_distortion);
  return sol;
}

}  // namespace iscc

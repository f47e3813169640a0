#include "iscc/solver.hpp"

#include "device_math.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace iscc {

namespace {

detail::Link link_of(const Problem& problem, std::size_t k) {
  return {problem.sys().bandwidth,
          problem.device(k).channel_gain / problem.sys().channel_noise};
}

// Energy left for transmission once a pinned sensing power is paid.
double spare_energy(const Problem& problem, const Pins& pins, std::size_t k) {
  double room = problem.device(k).energy_room();
  if (pins.sensing_distortion) {
    room -= problem.sensing_coefficient(k) / (*pins.sensing_distortion)[static_cast<Eigen::Index>(k)];
  }
  return room;
}

// Reason the problem cannot be solved at all, or empty.
std::string infeasibility(const Problem& problem, const Pins& pins) {
  if (!(problem.comm_window() > 0.0)) return "C1: sensing and computation use the whole latency budget";
  for (std::size_t k = 0; k < problem.num_devices(); ++k) {
    if (!(problem.device(k).energy_room() > 0.0)) {
      return "C3[" + std::to_string(k) + "]: computation energy exceeds the budget";
    }
    if (!(spare_energy(problem, pins, k) > 0.0)) {
      return "C3[" + std::to_string(k) + "]: pinned sensing power exceeds the budget";
    }
  }
  if (pins.quant_distortion) {
    for (std::size_t k = 0; k < problem.num_devices(); ++k) {
      const double bits = detail::payload_bits(problem.device(k).feature_count,
                                               (*pins.quant_distortion)[static_cast<Eigen::Index>(k)]);
      const double limit = link_of(problem, k).capacity_limit(spare_energy(problem, pins, k));
      if (!(bits < limit)) {
        return "C2[" + std::to_string(k) + "]: pinned payload of " + std::to_string(bits) +
               " bits exceeds the " + std::to_string(limit) + "-bit link limit";
      }
    }
    if (!(airtime_floor(problem, pins).sum() < problem.comm_window())) {
      return "C1: pinned payloads need more airtime than the window";
    }
  }
  return {};
}

// m_k / m_bar - 1 with m_bar the airtime-weighted mean over devices whose
// airtime has value; zero for the rest.
Eigen::VectorXd relative_deviation(const Eigen::VectorXd& m, const Eigen::VectorXd& time) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m[i] > 0.0) {
      num += time[i] * m[i];
      den += time[i];
    }
  }
  Eigen::VectorXd dev = Eigen::VectorXd::Zero(m.size());
  if (!(den > 0.0)) return dev;
  const double mean = num / den;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m[i] > 0.0) dev[i] = m[i] / mean - 1.0;
  }
  return dev;
}

}  // namespace

Eigen::VectorXd airtime_floor(const Problem& problem, const Pins& pins) {
  const auto n = static_cast<Eigen::Index>(problem.num_devices());
  Eigen::VectorXd floor = Eigen::VectorXd::Zero(n);
  if (!pins.quant_distortion) return floor;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto link = link_of(problem, k);
    const double bits = detail::payload_bits(problem.device(k).feature_count, (*pins.quant_distortion)[i]);
    const double energy = spare_energy(problem, pins, k);
    if (!(bits < link.capacity_limit(energy))) {
      floor[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    // capacity(T, E) increases in T: bisect on ln T.
    double lo = std::log(bits / link.bandwidth) - 1.0;
    while (link.capacity(std::exp(lo), energy) > bits) lo -= 1.0;
    double hi = lo + 1.0;
    while (link.capacity(std::exp(hi), energy) < bits) hi += 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (link.capacity(std::exp(mid), energy) < bits ? lo : hi) = mid;
    }
    floor[i] = std::exp(hi);
  }
  return floor;
}

TransformedAllocation initial_point(const Problem& problem, const Pins& pins) {
  const auto n = static_cast<Eigen::Index>(problem.num_devices());
  const Eigen::VectorXd floor = airtime_floor(problem, pins);
  const double share = (problem.comm_window() - floor.sum()) / static_cast<double>(n);
  TransformedAllocation x;
  x.comm_time = floor.array() + share;
  x.sensing_distortion.resize(n);
  x.quant_distortion.resize(n);
  x.comm_energy.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto link = link_of(problem, k);
    const double room = problem.device(k).energy_room();
    const double a = problem.sensing_coefficient(k);
    double e;
    if (pins.sensing_distortion) {
      e = spare_energy(problem, pins, k);
    } else if (pins.quant_distortion) {
      const double bits = detail::payload_bits(problem.device(k).feature_count, (*pins.quant_distortion)[i]);
      e = 0.5 * (link.min_energy(x.comm_time[i], bits) + room);
    } else {
      e = 0.5 * room;
    }
    x.comm_energy[i] = e;
    x.sensing_distortion[i] = pins.sensing_distortion ? (*pins.sensing_distortion)[i] : a / (room - e);
    x.quant_distortion[i] =
        pins.quant_distortion
            ? (*pins.quant_distortion)[i]
            : 2.0 * detail::min_distortion(problem.device(k).feature_count,
                                           link.capacity(x.comm_time[i], e));
  }
  return x;
}

P3Result solve_p3(const Problem& problem, const AuxiliaryVars& aux,
                  const Eigen::VectorXd& initial_time, const SolverConfig& config,
                  const Pins& pins, int outer_index) {
  const auto n = static_cast<Eigen::Index>(problem.num_devices());
  P3Result res;
  res.comm_time = initial_time;
  res.lambda = Eigen::VectorXd::Zero(n);
  res.p4 = solve_p4(problem, aux, res.comm_time, config, pins);
  if (!res.p4.converged) {
    res.converged = false;
    return res;
  }
  if (pins.fixed_time || n == 1) return res;

  const Eigen::VectorXd floor = airtime_floor(problem, pins);
  const double theta = config.reclaim_fraction;
  double rate = config.exchange_rate;
  Eigen::VectorXd m = airtime_marginals(problem, res.p4, res.comm_time);
  Eigen::VectorXd dev = relative_deviation(m, res.comm_time);
  res.converged = false;
  for (int it = 0; it < config.max_alternations; ++it) {
    if (dev.cwiseAbs().maxCoeff() <= config.marginal_tolerance) {
      res.converged = true;
      break;
    }

    const Eigen::VectorXd released = floor + (1.0 - theta) * (res.comm_time - floor);
    const P4Solution at_released = solve_p4(problem, aux, released, config, pins);
    if (!at_released.converged) break;
    const TimeUpdate up = solve_p5_time(problem, at_released.quant_distortion,
                                        at_released.comm_energy, m, rate, released, config);
    if (!up.feasible) break;
    P4Solution next = solve_p4(problem, aux, up.comm_time, config, pins);

    AlternationRecord rec{outer_index, res.p4.objective, at_released.objective, next.objective, false};
    const double slack = 1e-12 * std::max(1.0, std::abs(res.p4.objective));
    rec.accepted = next.converged && next.objective >= res.p4.objective - slack;
    res.records.push_back(rec);
    ++res.alternations;
    if (!rec.accepted) {
      rate *= 0.5;
      if (rate < 1e-10) {
        // No exchange improves the objective beyond rounding.
        res.converged = true;
        break;
      }
      continue;
    }
    const Eigen::VectorXd m_next = airtime_marginals(problem, next, up.comm_time);
    const Eigen::VectorXd dev_next = relative_deviation(m_next, up.comm_time);
    // Deviations shrink roughly by (1 - c rate); aim the next step at c rate = 1.
    const double shrink = dev_next.dot(dev) / dev.squaredNorm();
    const double c = (1.0 - shrink) / rate;
    rate = c > 0.0 ? std::clamp(1.0 / c, 0.1 * rate, 10.0 * rate) : 2.0 * rate;
    res.p4 = std::move(next);
    res.comm_time = up.comm_time;
    res.lambda = up.lambda;
    m = m_next;
    dev = dev_next;
  }
  return res;
}

SolveReport solve_pinned(const Problem& problem, const SolverConfig& config, const Pins& pins,
                         Scheme scheme) {
  config.validate();
  SolveReport rep;
  rep.scheme = scheme;
  if (const std::string why = infeasibility(problem, pins); !why.empty()) {
    rep.termination = Termination::infeasible;
    rep.message = why;
    return rep;
  }

  const TransformedAllocation x0 = initial_point(problem, pins);
  AuxiliaryVars aux = update_aux(problem, x0.sensing_distortion, x0.quant_distortion);
  rep.objective_trace.push_back(problem.gain(x0.sensing_distortion, x0.quant_distortion));
  Eigen::VectorXd time = x0.comm_time;
  std::optional<P3Result> last;
  rep.termination = Termination::max_iterations;
  for (int t = 1; t <= config.max_outer_iterations; ++t) {
    P3Result p3 = solve_p3(problem, aux, time, config, pins, t);
    rep.alternations.insert(rep.alternations.end(), p3.records.begin(), p3.records.end());
    rep.dual_iterations = std::max(rep.dual_iterations, p3.p4.iterations);
    if (!p3.p4.feasible) {
      rep.termination = Termination::infeasible;
      rep.message = p3.p4.message;
      break;
    }
    if (!p3.p4.converged) {
      rep.termination = Termination::dual_nonconvergence;
      rep.message = p3.p4.message;
      break;
    }
    const auto& s = p3.p4.sensing_distortion;
    const auto& d = p3.p4.quant_distortion;
    rep.objective_trace.push_back(problem.gain(s, d));
    const double residual = fixed_point_residual(problem, aux, s, d);
    rep.residual_trace.push_back(residual);
    rep.final_aux = aux;
    rep.outer_iterations = t;
    aux = update_aux(problem, s, d);
    time = p3.comm_time;
    last = std::move(p3);
    if (residual < config.outer_tolerance) {
      rep.termination = Termination::converged;
      break;
    }
  }
  if (rep.termination == Termination::max_iterations) {
    rep.message = "outer loop hit " + std::to_string(config.max_outer_iterations) + " iterations";
  }
  if (!last) return rep;

  rep.final_p4 = last->p4;
  rep.transformed = {last->p4.sensing_distortion, last->p4.quant_distortion, last->p4.comm_energy,
                     last->comm_time};
  rep.allocation = to_physical(rep.transformed, problem.devices(), problem.sys());
  rep.gains = total_gain(problem.stats(), problem.devices(), rep.transformed);
  rep.gain = rep.gains.total;
  rep.duals = {last->p4.alpha, last->p4.beta, last->lambda};
  rep.feasibility = check_feasibility(problem.devices(), problem.sys(), rep.allocation);
  if (!rep.feasibility.feasible && rep.termination == Termination::converged) {
    rep.termination = Termination::infeasible;
    rep.message = "solution violates " + rep.feasibility.violated();
  }
  return rep;
}

SolveReport solve_p2(const Problem& problem, const SolverConfig& config) {
  return solve_pinned(problem, config, {}, Scheme::optimal);
}

Pins baseline_pins(Scheme kind, const Problem& problem, const SolverConfig& config) {
  const auto n = static_cast<Eigen::Index>(problem.num_devices());
  Pins pins;
  switch (kind) {
    case Scheme::optimal:
      break;
    case Scheme::power_aware: {
      std::mt19937_64 rng(config.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      Eigen::VectorXd s(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double share = 1.0 - unit(rng);  // (0, 1]
        s[i] = problem.sensing_coefficient(k) / (share * problem.device(k).energy_room());
      }
      pins.sensing_distortion = s;
      break;
    }
    case Scheme::time_aware:
      pins.fixed_time = true;
      break;
    case Scheme::quantization_aware:
      pins.quant_distortion = Eigen::VectorXd::Constant(n, 1.0 / 65535.0);
      break;
  }
  return pins;
}

SolveReport baseline(Scheme kind, const Problem& problem, const SolverConfig& config) {
  return solve_pinned(problem, config, baseline_pins(kind, problem, config), kind);
}

SolveReport solve_scheme(Scheme scheme, const Problem& problem, const SolverConfig& config) {
  return scheme == Scheme::optimal ? solve_p2(problem, config) : baseline(scheme, problem, config);
}

}  // namespace iscc

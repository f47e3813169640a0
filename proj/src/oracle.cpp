#include "iscc/oracle.hpp"

#include "device_math.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace iscc {

namespace {

struct Axis {
  double lo;  // natural-log bounds
  double hi;
  double floor;  // lower bound no zoom may cross
  double step(int points) const { return (hi - lo) / (points - 1); }
  double at(int i, int points) const { return lo + step(points) * i; }
};

// Objective of a feasible candidate allocation.
using Evaluator = std::function<double(const TransformedAllocation&)>;

// Completes an allocation from per-device S and airtime: transmit energy takes
// what sensing leaves, quantization distortion sits on the capacity boundary.
bool complete_point(const Problem& problem, TransformedAllocation& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto& dev = problem.device(k);
    const double e = dev.energy_room() - problem.sensing_coefficient(k) / x.sensing_distortion[i];
    if (!(e > 0.0) || !(x.comm_time[i] > 0.0)) return false;
    const detail::Link link{problem.sys().bandwidth, dev.channel_gain / problem.sys().channel_noise};
    const double bits = link.capacity(x.comm_time[i], e);
    if (!(bits > 0.0)) return false;
    x.comm_energy[i] = e;
    x.quant_distortion[i] = detail::min_distortion(dev.feature_count, bits);
    if (!std::isfinite(x.quant_distortion[i]) || !(x.quant_distortion[i] > 0.0)) return false;
  }
  const Allocation phys = to_physical(x, problem.devices(), problem.sys());
  return check_feasibility(problem.devices(), problem.sys(), phys).feasible;
}

OracleResult search(const Problem& problem, const GridSpec& grid,
                    const std::optional<Eigen::VectorXd>& comm_time, const Evaluator& value) {
  grid.validate();
  check_oracle_guard(problem);
  const auto n = static_cast<Eigen::Index>(problem.num_devices());
  OracleResult res;
  const double window = problem.comm_window();
  if (!(window > 0.0)) {
    res.message = "no feasible point: sensing and computation exceed the latency budget";
    return res;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(problem.device(static_cast<std::size_t>(i)).energy_room() > 0.0)) {
      res.message = "no feasible point: device " + std::to_string(i) + " has no energy room";
      return res;
    }
  }
  if (comm_time && comm_time->size() != n) throw ModelError("comm_time has the wrong length");

  std::vector<Axis> axes;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double lo = std::log(problem.sensing_coefficient(k) / problem.device(k).energy_room()) + 1e-9;
    axes.push_back({lo, lo + std::log(grid.sensing_span), lo});
  }
  const bool split_time = !comm_time && n == 2;
  if (split_time) {
    const double r = std::log(grid.ratio_span);
    axes.push_back({-r, r, -std::numeric_limits<double>::infinity()});
  }

  const auto dims = axes.size();
  std::vector<double> best_coord(dims, 0.0);
  TransformedAllocation x;
  x.sensing_distortion.resize(n);
  x.quant_distortion.resize(n);
  x.comm_energy.resize(n);
  x.comm_time.resize(n);
  for (int level = 0; level <= grid.zoom_levels; ++level) {
    std::vector<int> idx(dims, 0);
    while (true) {
      std::vector<double> coord(dims);
      for (std::size_t d = 0; d < dims; ++d) coord[d] = axes[d].at(idx[d], grid.points);
      for (Eigen::Index i = 0; i < n; ++i) x.sensing_distortion[i] = std::exp(coord[static_cast<std::size_t>(i)]);
      if (comm_time) {
        x.comm_time = *comm_time;
      } else if (split_time) {
        const double ratio = std::exp(coord[dims - 1]);
        x.comm_time[0] = window / (1.0 + ratio);
        x.comm_time[1] = window - x.comm_time[0];
      } else {
        x.comm_time[0] = window;
      }
      ++res.evaluated;
      if (complete_point(problem, x)) {
        ++res.feasible_points;
        const double v = value(x);
        if (!res.found || v > res.value) {
          res.found = true;
          res.value = v;
          res.best = x;
          best_coord = coord;
        }
      }
      std::size_t d = 0;
      while (d < dims && ++idx[d] == grid.points) idx[d++] = 0;
      if (d == dims) break;
    }
    if (!res.found) {
      res.message = "no feasible grid point";
      return res;
    }
    res.level_best.push_back(res.value);
    for (std::size_t d = 0; d < dims; ++d) {
      const double half = grid.zoom_halfwidth * axes[d].step(grid.points);
      axes[d].lo = std::max(best_coord[d] - half, axes[d].floor);
      axes[d].hi = best_coord[d] + half;
    }
  }
  return res;
}

}  // namespace

void GridSpec::validate() const {
  if (points < 3) throw ModelError("grid points must be >= 3");
  if (zoom_levels < 0) throw ModelError("zoom_levels must be >= 0");
  if (!(sensing_span > 1.0) || !(ratio_span > 1.0)) throw ModelError("grid spans must be > 1");
  if (!(zoom_halfwidth > 0.0)) throw ModelError("zoom_halfwidth must be > 0");
}

void check_oracle_guard(const Problem& problem) {
  const auto& stats = problem.stats();
  if (problem.num_devices() > kOracleMaxDevices) {
    throw OracleGuardError("oracle refused: K=" + std::to_string(problem.num_devices()) +
                           " exceeds the cost guard K <= " + std::to_string(kOracleMaxDevices));
  }
  if (stats.num_classes > kOracleMaxClasses) {
    throw OracleGuardError("oracle refused: L=" + std::to_string(stats.num_classes) +
                           " exceeds the cost guard L <= " + std::to_string(kOracleMaxClasses));
  }
  for (std::size_t k = 0; k < problem.num_devices(); ++k) {
    if (problem.device(k).feature_count > kOracleMaxFeatures) {
      throw OracleGuardError("oracle refused: N=" + std::to_string(problem.device(k).feature_count) +
                             " exceeds the cost guard N <= " + std::to_string(kOracleMaxFeatures));
    }
  }
}

OracleResult grid_optimum(const Problem& problem, const GridSpec& grid) {
  return search(problem, grid, std::nullopt, [&](const TransformedAllocation& x) {
    return problem.gain(x.sensing_distortion, x.quant_distortion);
  });
}

OracleResult grid_optimum_weighted(const Problem& problem, const AuxiliaryVars& aux,
                                   const GridSpec& grid,
                                   const std::optional<Eigen::VectorXd>& comm_time) {
  return search(problem, grid, comm_time, [&](const TransformedAllocation& x) {
    return weighted_objective(problem, aux, x.sensing_distortion, x.quant_distortion);
  });
}

KktReport kkt_residual(const Problem& problem, const AuxiliaryVars& aux,
                       const Eigen::VectorXd& comm_time, const P4Solution& solution,
                       const Pins& pins) {
  const auto n = static_cast<Eigen::Index>(problem.num_devices());
  KktReport rep;
  rep.stationarity = Eigen::VectorXd::Zero(n);
  double abs_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto& dev = problem.device(k);
    const auto& pairs = problem.pairs(k);
    const detail::Link link{problem.sys().bandwidth, dev.channel_gain / problem.sys().channel_noise};
    const double a = problem.sensing_coefficient(k);
    const double t = comm_time[i];
    const double alpha = solution.alpha[i];
    const double beta = solution.beta[i];
    const double s = solution.sensing_distortion[i];
    const double d = solution.quant_distortion[i];
    const double e = solution.comm_energy[i];

    const double cap_slack = link.capacity(t, e) - detail::payload_bits(dev.feature_count, d);
    const double energy_slack = dev.energy_room() - a / s - e;
    rep.complementary_slackness = std::max(
        {rep.complementary_slackness, std::abs(alpha * cap_slack), std::abs(beta * energy_slack)});
    rep.primal_violation = std::max({rep.primal_violation, -cap_slack, -energy_slack});
    rep.dual_violation = std::max({rep.dual_violation, -alpha, -beta});

    if (problem.gain_inert(k)) continue;

    // Lagrangian terms, each a function of (S, D, E).
    const std::vector<std::function<double(double, double, double)>> terms = {
        [&](double sv, double dv, double) {
          double f = 0.0;
          for (std::size_t j = 0; j < pairs.size(); ++j) {
            if (pairs[j].weight <= 0.0) continue;
            const double y = aux.y[k][static_cast<Eigen::Index>(j)];
            f -= y - y * y * (pairs[j].base_variance + sv + dv) / pairs[j].weight;
          }
          return f;
        },
        [&](double, double dv, double) {
          return alpha * detail::payload_bits(dev.feature_count, dv);
        },
        [&](double, double, double ev) { return -alpha * link.capacity(t, ev); },
        [&](double sv, double, double) { return beta * a / sv; },
        [&](double, double, double ev) { return beta * ev; },
    };
    const double x0[3] = {s, d, e};
    const bool skip[3] = {pins.sensing_distortion.has_value(), pins.quant_distortion.has_value(),
                          false};
    double rel_sq = 0.0;
    for (int c = 0; c < 3; ++c) {
      if (skip[c] || !(x0[c] > 0.0)) continue;
      const double h = 1e-6 * std::abs(x0[c]);
      double plus = 0.0, minus = 0.0, total = 0.0;
      for (const auto& term : terms) {
        double xp[3] = {s, d, e};
        double xm[3] = {s, d, e};
        xp[c] += h;
        xm[c] -= h;
        const double g = (term(xp[0], xp[1], xp[2]) - term(xm[0], xm[1], xm[2])) / (2.0 * h);
        total += g;
        (g > 0.0 ? plus : minus) += std::abs(g);
      }
      const double scale = std::max(plus, minus);
      const double rel = scale > 0.0 ? total / scale : 0.0;
      rel_sq += rel * rel;
      abs_sq += total * total;
    }
    rep.stationarity[i] = std::sqrt(rel_sq);
  }
  rep.stationarity_norm = n > 0 ? rep.stationarity.maxCoeff() : 0.0;
  rep.absolute_stationarity = std::sqrt(abs_sq);
  return rep;
}

}  // namespace iscc

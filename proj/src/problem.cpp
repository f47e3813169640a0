#include "iscc/solver.hpp"

#include "device_math.hpp"

#include <cmath>
#include <limits>

namespace iscc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ModelError(what);
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::optimal: return "optimal";
    case Scheme::power_aware: return "power_aware";
    case Scheme::time_aware: return "time_aware";
    case Scheme::quantization_aware: return "quantization_aware";
  }
  return "unknown";
}

Scheme scheme_from_string(std::string_view name) {
  for (Scheme s : {Scheme::optimal, Scheme::power_aware, Scheme::time_aware,
                   Scheme::quantization_aware}) {
    if (name == to_string(s)) return s;
  }
  throw ModelError("unknown scheme '" + std::string(name) + "'");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iterations: return "max_iterations";
    case Termination::infeasible: return "infeasible";
    case Termination::dual_nonconvergence: return "dual_nonconvergence";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  require(eta_alpha > 0 && eta_beta > 0 && eta_lambda > 0 && eta_time > 0,
          "step sizes must be > 0");
  require(max_log_step > 0, "max_log_step must be > 0");
  require(max_outer_iterations >= 1 && max_alternations >= 1 && max_dual_iterations >= 1,
          "iteration limits must be >= 1");
  require(outer_tolerance > 0 && dual_tolerance > 0 && marginal_tolerance > 0,
          "tolerances must be > 0");
  require(reclaim_fraction > 0 && reclaim_fraction < 1, "reclaim_fraction must be in (0, 1)");
  require(exchange_rate > 0, "exchange_rate must be > 0");
  require(!initial_alpha || *initial_alpha > 0, "initial_alpha must be > 0");
  require(!initial_beta || *initial_beta > 0, "initial_beta must be > 0");
  require(!initial_lambda || *initial_lambda > 0, "initial_lambda must be > 0");
}

Problem::Problem(ClassStatistics stats, std::vector<DeviceProfile> devices, SystemParams sys)
    : stats_(std::move(stats)), devices_(std::move(devices)), sys_(sys) {
  stats_.validate();
  sys_.validate();
  require(!devices_.empty(), "at least one device is required");
  require(stats_.num_devices() == devices_.size(),
          "statistics cover " + std::to_string(stats_.num_devices()) + " devices, profiles " +
              std::to_string(devices_.size()));
  pairs_.reserve(devices_.size());
  for (std::size_t k = 0; k < devices_.size(); ++k) {
    devices_[k].validate();
    require(devices_[k].sensing_time > 0.0, "device " + std::to_string(k) + " sensing_time must be > 0");
    require(stats_.feature_count(k) == devices_[k].feature_count,
            "device " + std::to_string(k) + " feature count disagrees with statistics");
    pairs_.push_back(weighted_pairs(stats_, k, devices_[k]));
  }
}

double Problem::comm_window() const {
  double fixed = 0.0;
  for (const auto& d : devices_) fixed += d.sensing_time + d.computation_time;
  return sys_.latency_budget - fixed;
}

double Problem::sensing_coefficient(std::size_t k) const {
  return sys_.sensing_noise * devices_[k].sensing_time;
}

bool Problem::gain_inert(std::size_t k) const {
  for (const auto& p : pairs_[k]) {
    if (p.weight > 0.0) return false;
  }
  return true;
}

double Problem::gain(const Eigen::VectorXd& sensing_distortion,
                     const Eigen::VectorXd& quant_distortion) const {
  double g = 0.0;
  for (std::size_t k = 0; k < devices_.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    g += device_gain(pairs_[k], sensing_distortion[i] + quant_distortion[i]);
  }
  return g;
}

AuxiliaryVars update_aux(const Problem& problem, const Eigen::VectorXd& sensing_distortion,
                         const Eigen::VectorXd& quant_distortion) {
  AuxiliaryVars aux;
  aux.y.resize(problem.num_devices());
  for (std::size_t k = 0; k < problem.num_devices(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double u = sensing_distortion[i] + quant_distortion[i];
    const auto& pairs = problem.pairs(k);
    aux.y[k].resize(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      aux.y[k][static_cast<Eigen::Index>(j)] = pairs[j].weight / (pairs[j].base_variance + u);
    }
  }
  return aux;
}

double fixed_point_residual(const Problem& problem, const AuxiliaryVars& aux,
                            const Eigen::VectorXd& sensing_distortion,
                            const Eigen::VectorXd& quant_distortion) {
  double worst = 0.0;
  for (std::size_t k = 0; k < problem.num_devices(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double u = sensing_distortion[i] + quant_distortion[i];
    const auto& pairs = problem.pairs(k);
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      if (pairs[j].weight <= 0.0) continue;
      const double b = (pairs[j].base_variance + u) / pairs[j].weight;
      worst = std::max(worst, std::abs(aux.y[k][static_cast<Eigen::Index>(j)] * b - 1.0));
    }
  }
  return worst;
}

double gain_weight(const Problem& problem, const AuxiliaryVars& aux, std::size_t k) {
  const auto& pairs = problem.pairs(k);
  double w = 0.0;
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    if (pairs[j].weight <= 0.0) continue;
    const double y = aux.y[k][static_cast<Eigen::Index>(j)];
    w += y * y / pairs[j].weight;
  }
  return w;
}

double weighted_objective(const Problem& problem, const AuxiliaryVars& aux,
                          const Eigen::VectorXd& sensing_distortion,
                          const Eigen::VectorXd& quant_distortion) {
  double total = 0.0;
  for (std::size_t k = 0; k < problem.num_devices(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double u = sensing_distortion[i] + quant_distortion[i];
    const auto& pairs = problem.pairs(k);
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      if (pairs[j].weight <= 0.0) continue;
      const double y = aux.y[k][static_cast<Eigen::Index>(j)];
      total += y - y * y * (pairs[j].base_variance + u) / pairs[j].weight;
    }
  }
  return total;
}

ClosedForm closed_form_S(const Problem& problem, const AuxiliaryVars& aux, std::size_t k,
                         double beta) {
  require(beta >= 0.0, "beta must be >= 0");
  const double w = gain_weight(problem, aux, k);
  require(w > 0.0, "device " + std::to_string(k) + " has zero gain weight");
  const double a = problem.sensing_coefficient(k);
  if (beta == 0.0) return {a / problem.device(k).energy_room(), true};
  return {std::sqrt(beta * a / w), false};
}

ClosedForm closed_form_D(const Problem& problem, const AuxiliaryVars& aux, std::size_t k,
                         double alpha, bool literal) {
  require(alpha >= 0.0, "alpha must be >= 0");
  const double w = gain_weight(problem, aux, k);
  require(w > 0.0, "device " + std::to_string(k) + " has zero gain weight");
  const double n = problem.device(k).feature_count;
  const double q = literal ? alpha * n * detail::kLn2 / w : alpha * n / (w * detail::kLn2);
  return {detail::distortion_root(q), false};
}

ClosedForm closed_form_Ec(const Problem& problem, std::size_t k, double alpha, double beta,
                          double comm_time) {
  require(alpha >= 0.0 && beta >= 0.0, "multipliers must be >= 0");
  require(comm_time > 0.0, "communication time must be > 0");
  const auto& dev = problem.device(k);
  if (alpha == 0.0) return {0.0, false};
  if (beta == 0.0) return {dev.energy_room(), true};
  const double noise_energy = comm_time * problem.sys().channel_noise / dev.channel_gain;
  const double level = alpha * problem.sys().bandwidth * comm_time / (beta * detail::kLn2);
  return {std::max(level - noise_energy, 0.0), false};
}

}  // namespace iscc

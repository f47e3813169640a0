#include "helpers.hpp"

#include "iscc/oracle.hpp"
#include "iscc/scenarios.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace iscc;
using iscc::testing::random_problem;
using iscc::testing::table_device;
using iscc::testing::table_system;
using iscc::testing::two_class_stats;

namespace {

Problem unit_problem(double gap = 2.0) {
  DeviceProfile dev = table_device(1e-10, 1, 0.0);
  dev.sensing_time = 1.0;
  return Problem(two_class_stats(gap), {dev}, {2.0, 200.0, 1e-12, 1.0});
}

AuxiliaryVars constant_aux(const Problem& p, double y) {
  AuxiliaryVars aux;
  for (std::size_t k = 0; k < p.num_devices(); ++k) {
    aux.y.push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.pairs(k).size()), y));
  }
  return aux;
}

Problem table_problem(std::uint64_t seed) { return build_scenario(ScenarioConfig{}, seed).problem(); }

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("sensing distortion closed form") {
  const Problem p = unit_problem();
  // W = y^2 L(L-1) / (2 gap^2) = 1/4, a = sigma_r^2 T_r = 1, so S = sqrt(beta a / W).
  CHECK(closed_form_S(p, constant_aux(p, 1.0), 0, 1.0).value == doctest::Approx(2.0));
  CHECK(closed_form_S(p, constant_aux(p, 1.0), 0, 4.0).value == doctest::Approx(4.0));
  const double s1 = closed_form_S(p, constant_aux(p, 1.0), 0, 1.0).value;
  const double s3 = closed_form_S(p, constant_aux(p, 3.0), 0, 1.0).value;
  CHECK(1.0 / s3 == doctest::Approx(3.0 / s1));
}

TEST_CASE("sensing closed form satisfies its stationarity condition") {
  const Problem p = random_problem(3, 1, 3, 2);
  const AuxiliaryVars aux = constant_aux(p, 0.7);
  const double beta = 0.37;
  const double S = closed_form_S(p, aux, 0, beta).value;
  const double D = 0.2, a = p.sensing_coefficient(0), h = 1e-6 * S;
  auto lagrangian = [&](double s) {
    return -weighted_objective(p, aux, Eigen::VectorXd::Constant(1, s),
                               Eigen::VectorXd::Constant(1, D)) + beta * a / s;
  };
  const double grad = (lagrangian(S + h) - lagrangian(S - h)) / (2 * h);
  CHECK(std::abs(grad) <= 1e-6 * beta * a / (S * S));
}

TEST_CASE("quantization distortion closed form") {
  const Problem p = unit_problem();
  const AuxiliaryVars aux = constant_aux(p, 1.0);
  CHECK(closed_form_D(p, aux, 0, 0.0).value == 0.0);
  // alpha N / (ln2 W) = 2 gives D (D + 1) = 2.
  const double alpha = 2.0 * std::numbers::ln2 * gain_weight(p, aux, 0);
  CHECK(closed_form_D(p, aux, 0, alpha).value == doctest::Approx(1.0));
  const Problem wide = unit_problem(4.0);
  CHECK(closed_form_D(wide, aux, 0, alpha).value > closed_form_D(p, aux, 0, alpha).value);
}

TEST_CASE("communication energy closed form") {
  DeviceProfile dev = table_device(1e-12 / 10.0, 1, 0.0);  // noise over gain = 10
  const Problem p(two_class_stats(1.0), {dev}, {2.0, 200.0, 1e-12, 1.0});
  CHECK(closed_form_Ec(p, 0, 0.0, 1.0, 0.1).value == 0.0);
  CHECK(closed_form_Ec(p, 0, std::numbers::ln2, 1.0, 0.1).value == doctest::Approx(19.0));
  // Water level exactly at the noise floor.
  const double alpha = 10.0 * std::numbers::ln2 / 200.0;
  CHECK(closed_form_Ec(p, 0, alpha, 1.0, 0.1).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("airtime redistribution") {
  const Eigen::Vector3d t(0.1, 0.2, 0.3);
  CHECK(redistribute_time(t, Eigen::Vector3d(2, 1, 1), 0.0).isApprox(t));
  const Eigen::VectorXd eq = redistribute_time(t, Eigen::Vector3d::Constant(5), 0.3);
  CHECK((eq - t).isApprox(Eigen::Vector3d::Constant(0.1)));
  const Eigen::VectorXd r = redistribute_time(Eigen::Vector3d::Zero(), Eigen::Vector3d(2, 1, 1), 0.4);
  CHECK(r.isApprox(Eigen::Vector3d(0.2, 0.1, 0.1)));
  const Eigen::VectorXd z = redistribute_time(t, Eigen::Vector3d::Zero(), 0.3);
  CHECK((z - t).isApprox(Eigen::Vector3d::Constant(0.1)));
}

TEST_CASE("initial point is feasible") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Problem p = table_problem(seed);
    const TransformedAllocation x = initial_point(p);
    const auto r = check_feasibility(p.devices(), p.sys(), to_physical(x, p.devices(), p.sys()));
    CHECK(r.feasible);
  }
}

TEST_CASE("identical devices get identical allocations") {
  ClassStatistics s = iscc::testing::two_class_stats(1.5);
  s.centroids.push_back(s.centroids[0]);
  s.variance.push_back(s.variance[0]);
  const DeviceProfile dev = table_device(1e-10, 1, 0.5);
  const Problem p(s, {dev, dev}, table_system(1.25));
  const SolveReport rep = solve_p2(p, SolverConfig{});
  REQUIRE(rep.ok());
  const auto& t = rep.transformed;
  CHECK(t.sensing_distortion[0] == doctest::Approx(t.sensing_distortion[1]).epsilon(1e-8));
  CHECK(t.quant_distortion[0] == doctest::Approx(t.quant_distortion[1]).epsilon(1e-8));
  CHECK(t.comm_energy[0] == doctest::Approx(t.comm_energy[1]).epsilon(1e-8));
  CHECK(t.comm_time[0] == doctest::Approx(t.comm_time[1]).epsilon(1e-8));
}

TEST_CASE("sensing distortion does not grow with the energy budget") {
  const Problem base = random_problem(11, 1, 2, 1);
  double previous = std::numeric_limits<double>::infinity();
  for (double budget : {0.05, 0.1, 0.2, 0.5, 1.0, 5.0}) {
    std::vector<DeviceProfile> devs = base.devices();
    devs[0].energy_budget = budget;
    const Problem p(base.stats(), devs, base.sys());
    const TransformedAllocation x = initial_point(p);
    const auto aux = update_aux(p, x.sensing_distortion, x.quant_distortion);
    const P4Solution s = solve_p4(p, aux, x.comm_time, SolverConfig{});
    REQUIRE(s.converged);
    CHECK(s.sensing_distortion[0] <= previous * (1 + 1e-9));
    previous = s.sensing_distortion[0];
  }
}

TEST_CASE("fixed-airtime subproblem matches the weighted grid oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = random_problem(100 + seed, 1, 2, 1);
    const TransformedAllocation x = initial_point(p);
    const auto aux = update_aux(p, x.sensing_distortion, x.quant_distortion);
    const P4Solution s = solve_p4(p, aux, x.comm_time, SolverConfig{});
    REQUIRE(s.converged);
    const OracleResult o = grid_optimum_weighted(p, aux, GridSpec{}, x.comm_time);
    REQUIRE(o.found);
    CHECK(s.objective >= o.value - 0.01 * std::abs(o.value));
  }
}

TEST_CASE("airtime subproblem matches the weighted grid oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem p = random_problem(200 + seed, 2, 2, 1);
    const TransformedAllocation x = initial_point(p);
    const auto aux = update_aux(p, x.sensing_distortion, x.quant_distortion);
    const P3Result r = solve_p3(p, aux, x.comm_time, SolverConfig{});
    REQUIRE(r.converged);
    const OracleResult o = grid_optimum_weighted(p, aux);
    REQUIRE(o.found);
    CHECK(r.p4.objective >= o.value - 0.01 * std::abs(o.value));
  }
}

TEST_CASE("single device settles within a few exchanges") {
  const Problem p = random_problem(7, 1, 3, 2);
  const TransformedAllocation x = initial_point(p);
  const auto aux = update_aux(p, x.sensing_distortion, x.quant_distortion);
  const P3Result r = solve_p3(p, aux, x.comm_time, SolverConfig{});
  CHECK(r.converged);
  CHECK(r.alternations <= 3);
}

TEST_CASE("tighter latency never raises the airtime objective") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Problem loose = table_problem(seed);
    SystemParams sys = loose.sys();
    sys.latency_budget = 1.8 + 0.9 * (sys.latency_budget - 1.8);
    const Problem tight(loose.stats(), loose.devices(), sys);
    const TransformedAllocation x = initial_point(tight);
    const auto aux = update_aux(tight, x.sensing_distortion, x.quant_distortion);
    const P3Result a = solve_p3(loose, aux, initial_point(loose).comm_time, SolverConfig{});
    const P3Result b = solve_p3(tight, aux, x.comm_time, SolverConfig{});
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(b.p4.objective <= a.p4.objective + 1e-9 * std::abs(a.p4.objective));
  }
}

TEST_CASE("outer loop reaches the fixed point with a monotone trace") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Problem p = table_problem(seed);
    const SolveReport rep = solve_p2(p, SolverConfig{});
    REQUIRE(rep.ok());
    CHECK(fixed_point_residual(p, rep.final_aux, rep.transformed.sensing_distortion,
                               rep.transformed.quant_distortion) < 1e-6);
    CHECK(rep.residual_trace.back() < 1e-6);
    for (std::size_t i = 1; i < rep.objective_trace.size(); ++i) {
      CHECK(rep.objective_trace[i] >= rep.objective_trace[i - 1] * (1 - 1e-6));
    }
    for (const auto& a : rep.alternations) {
      if (a.accepted) CHECK(a.after >= a.before - 1e-8);
    }
    CHECK(rep.feasibility.feasible);
  }
}

TEST_CASE("time-aware equals optimal for one device") {
  ScenarioConfig cfg;
  cfg.devices.count = 1;
  cfg.system.latency_budget = 0.65;
  const Problem p = build_scenario(cfg, 4).problem();
  const SolveReport opt = solve_p2(p, SolverConfig{});
  const SolveReport ta = baseline(Scheme::time_aware, p, SolverConfig{});
  REQUIRE(opt.ok());
  REQUIRE(ta.ok());
  CHECK(ta.gain == doctest::Approx(opt.gain).epsilon(1e-9));
}

TEST_CASE("optimal dominates every baseline") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Problem p = table_problem(seed);
    SolverConfig cfg;
    cfg.seed = seed;
    const double g = solve_p2(p, cfg).gain;
    for (Scheme s : {Scheme::power_aware, Scheme::time_aware, Scheme::quantization_aware}) {
      const SolveReport b = baseline(s, p, cfg);
      if (b.ok()) CHECK(g >= b.gain * (1 - 1e-6));
    }
  }
}

TEST_CASE("sixteen-bit quantization is infeasible at the default scale") {
  const SolveReport rep = baseline(Scheme::quantization_aware, table_problem(0), SolverConfig{});
  CHECK(rep.termination == Termination::infeasible);
  CHECK(rep.message.find("C2") != std::string::npos);
}

TEST_CASE("latency below the sensing and computation floor is infeasible") {
  ScenarioConfig cfg;
  cfg.system.latency_budget = 1.79;
  const SolveReport rep = solve_p2(build_scenario(cfg, 0).problem(), SolverConfig{});
  CHECK(rep.termination == Termination::infeasible);
  CHECK(rep.message.rfind("C1", 0) == 0);
}

TEST_CASE("oversized dual steps are reported as non-convergence") {
  SolverConfig cfg;
  cfg.eta_alpha = cfg.eta_beta = cfg.eta_lambda = cfg.eta_time = 1e3;
  const SolveReport rep = solve_p2(table_problem(0), cfg);
  CHECK(rep.termination == Termination::dual_nonconvergence);
}

TEST_CASE("gain-inert device is left at a boundary") {
  std::mt19937_64 rng(41);
  ClassStatistics s = iscc::testing::random_stats(rng, 2, 3, 2);
  s.centroids[1].setConstant(0.3);
  const Problem p(s, {table_device(1e-10, 2), table_device(1e-10, 2)}, table_system(1.25));
  CHECK(p.gain_inert(1));
  const SolveReport rep = solve_p2(p, SolverConfig{});
  REQUIRE(rep.ok());
  CHECK(rep.gains.device_total[1] == 0.0);
  CHECK(rep.gains.device_total[0] > 0.0);
  CHECK(rep.feasibility.feasible);
}

TEST_CASE("solver configuration validation") {
  SolverConfig cfg;
  cfg.eta_alpha = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = SolverConfig{};
  cfg.max_outer_iterations = 0;
  CHECK_THROWS(cfg.validate());
  CHECK(scheme_from_string(to_string(Scheme::power_aware)) == Scheme::power_aware);
  CHECK_THROWS(scheme_from_string("greedy"));
}

}  // TEST_SUITE

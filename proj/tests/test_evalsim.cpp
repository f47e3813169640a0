#include "helpers.hpp"

#include "iscc/evalsim.hpp"

#include <doctest.h>

#include <cmath>

using namespace iscc;
using iscc::testing::table_device;

namespace {

struct Fixture {
  ClassStatistics stats;
  std::vector<DeviceProfile> devices;
};

Fixture three_class(double spread) {
  Fixture f;
  f.stats.num_classes = 3;
  Eigen::MatrixXd mu(3, 2);
  mu << 0.0, 0.0, spread, -spread, -spread, 2.0 * spread;
  f.stats.centroids = {mu};
  f.stats.variance = {Eigen::Vector2d(1.0, 0.5)};
  f.devices = {table_device(1e-10, 2, 0.25)};
  return f;
}

Eigen::VectorXd one(double v) { return Eigen::VectorXd::Constant(1, v); }

}  // namespace

TEST_SUITE("evalsim") {

TEST_CASE("per-element variance is feature plus clutter plus distortion") {
  const Fixture f = three_class(1.0);
  const int n = 100000;
  for (const auto& [S, D] : {std::pair{1e-12, 1e-12}, std::pair{0.4, 0.3}}) {
    const SampleBatch b = sample_distorted(f.stats, f.devices, one(S), one(D), n, 3);
    for (int feature = 0; feature < 2; ++feature) {
      const double expect = f.stats.variance[0][feature] + 0.25 + S + D;
      // Residual around the true class centroid.
      double sq = 0.0, quad = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = b.features(i, feature) - f.stats.centroids[0](b.labels[i], feature);
        sq += r * r;
        quad += r * r * r * r;
      }
      const double var = sq / n;
      const double se = std::sqrt((quad / n - var * var) / n);
      CHECK(std::abs(var - expect) < 3.0 * se);
    }
  }
}

TEST_CASE("per-class means match the centroids") {
  const Fixture f = three_class(1.0);
  const int n = 100000;
  const SampleBatch b = sample_distorted(f.stats, f.devices, one(0.2), one(0.1), n, 11);
  for (int l = 0; l < 3; ++l) {
    for (int feature = 0; feature < 2; ++feature) {
      double sum = 0.0;
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (b.labels[i] != l) continue;
        sum += b.features(i, feature);
        ++count;
      }
      const double sd = std::sqrt(f.stats.variance[0][feature] + 0.25 + 0.3);
      CHECK(std::abs(sum / count - f.stats.centroids[0](l, feature)) < 3.0 * sd / std::sqrt(count));
    }
  }
}

TEST_CASE("sampling is seeded") {
  const Fixture f = three_class(1.0);
  const SampleBatch a = sample_distorted(f.stats, f.devices, one(0.2), one(0.1), 500, 4);
  const SampleBatch b = sample_distorted(f.stats, f.devices, one(0.2), one(0.1), 500, 4);
  const SampleBatch c = sample_distorted(f.stats, f.devices, one(0.2), one(0.1), 500, 5);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.features != c.features);
  CHECK((a.labels.array() >= 0).all());
  CHECK((a.labels.array() < 3).all());
}

TEST_CASE("infeasible allocations are refused") {
  const Fixture f = three_class(1.0);
  Allocation a;
  a.sensing_power = one(10.0);  // 5 J of sensing against a 0.15 J budget
  a.transmit_power = one(0.01);
  a.comm_time = one(0.1);
  a.quantization_gain = one(1.0);
  CHECK_THROWS_AS(sample_features(f.stats, f.devices, iscc::testing::table_system(), a, 10, 1),
                  ModelError);
}

TEST_CASE("accuracy approaches one as classes separate") {
  double previous = 0.0;
  for (double spread : {0.5, 2.0, 8.0, 40.0}) {
    const Fixture f = three_class(spread);
    const SampleBatch b = sample_distorted(f.stats, f.devices, one(1e-9), one(1e-9), 10000, 2);
    const double acc = classify_map(f.stats, f.devices, b).accuracy;
    CHECK(acc >= previous - 0.01);
    previous = acc;
  }
  CHECK(previous > 0.999);
}

TEST_CASE("identical centroids give chance accuracy") {
  const Fixture f = three_class(0.0);
  const int n = 10000;
  const SampleBatch b = sample_distorted(f.stats, f.devices, one(0.1), one(0.1), n, 8);
  const double acc = classify_map(f.stats, f.devices, b).accuracy;
  CHECK(std::abs(acc - 1.0 / 3.0) < 3.0 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n));
}

TEST_CASE("accuracy never falls far below chance") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Problem p = iscc::testing::random_problem(seed, 2, 3, 2);
    const int n = 2000;
    const SampleBatch b = sample_distorted(p.stats(), p.devices(), Eigen::Vector2d(5.0, 9.0),
                                           Eigen::Vector2d(7.0, 3.0), n, seed);
    const double acc = classify_map(p.stats(), p.devices(), b).accuracy;
    const double chance = 1.0 / 3.0;
    CHECK(acc >= chance - 3.0 * std::sqrt(chance * (1 - chance) / n));
  }
}

TEST_CASE("spearman correlation") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Ranks with ties: x = (1, 2.5, 2.5, 4), y = (1, 2, 3, 4).
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)));
  CHECK_THROWS(spearman({1, 2}, {1, 2, 3}));
}

TEST_CASE("accuracy rises with the forced gain") {
  const Problem p = build_scenario(ScenarioConfig{}, 1).problem();
  const SolveReport rep = solve_p2(p, SolverConfig{});
  REQUIRE(rep.ok());
  const auto ladder = gain_ladder(p, rep.transformed, kGainLadderFactors, 10000, 3);
  REQUIRE(ladder.size() == kGainLadderFactors.size());
  std::vector<double> g, acc;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    g.push_back(ladder[i].gain);
    acc.push_back(ladder[i].accuracy);
    if (i > 0) CHECK(ladder[i].gain > ladder[i - 1].gain);
  }
  CHECK(spearman(g, acc) > 0.95);
}

TEST_CASE("sweep spec parsing") {
  const SweepSpec s = parse_sweep_spec(R"({
    "swept_param": "latency", "values": [1.9, 2.0], "repetitions": 2,
    "schemes": ["optimal", "power_aware"], "seed": 9, "accuracy_samples": 0,
    "base_config": {"devices": {"energy_budget_j": 0.2}}})");
  CHECK(s.param == SweptParam::latency);
  CHECK(s.values == std::vector<double>{1.9, 2.0});
  CHECK(s.schemes == std::vector<Scheme>{Scheme::optimal, Scheme::power_aware});
  CHECK(s.base.devices.energy_budget == 0.2);
  CHECK(parse_sweep_spec(serialize_sweep_spec(s)).values == s.values);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"values": [1]})"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"swept_param": "device_count", "values": [1.5]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"swept_param": "latency", "values": [2], "extra": 1})"),
                  ConfigError);
}

TEST_CASE("sweep rows do not depend on the thread count") {
  SweepSpec s;
  s.param = SweptParam::energy_budget;
  s.values = {0.1, 0.2};
  s.repetitions = 3;
  s.accuracy_samples = 300;
  s.seed = 5;
  const SweepResult a = run_sweep(s, 1);
  const SweepResult b = run_sweep(s, 3);
  REQUIRE(a.rows.size() == 2 * 4 * 3);
  REQUIRE(b.rows.size() == a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].gain == b.rows[i].gain);
    CHECK(a.rows[i].accuracy == b.rows[i].accuracy);
    CHECK(a.rows[i].wall_ms == 0.0);
  }
  for (const auto& r : a.rows) {
    if (r.scheme == Scheme::quantization_aware) {
      CHECK_FALSE(r.feasible);
      CHECK(r.gain == 0.0);
      CHECK(r.accuracy == doctest::Approx(0.25));
    }
  }
  CHECK(a.summary.size() == 2 * 4);
}

TEST_CASE("device-count sweep keeps each device's share of the window") {
  SweepSpec s;
  s.param = SweptParam::device_count;
  s.values = {4};
  const ScenarioConfig c = sweep_config(s, 4);
  CHECK(c.devices.count == 4);
  CHECK(c.system.latency_budget == doctest::Approx(1.85 * 4 / 3));
  s.scale_latency_with_devices = false;
  CHECK(sweep_config(s, 4).system.latency_budget == 1.85);
}

TEST_CASE("pooled standard error") {
  CHECK(pooled_se(3.0, 4.0) == doctest::Approx(5.0));
}

}  // TEST_SUITE

#include "iscc/scenarios.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace iscc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kChannelStream = 1;
constexpr std::uint64_t kStatisticsStream = 2;

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return schema_version == o.schema_version && seed == o.seed && devices == o.devices &&
         system.latency_budget == o.system.latency_budget &&
         system.bandwidth == o.system.bandwidth && system.channel_noise == o.system.channel_noise &&
         system.sensing_noise == o.system.sensing_noise && channel == o.channel &&
         statistics == o.statistics;
}

void ScenarioConfig::validate() const {
  require(schema_version == kConfigSchemaVersion, "schema_version",
          "unsupported version " + std::to_string(schema_version));
  const auto& d = devices;
  require(d.count >= 1, "devices.count", "must be >= 1");
  require(d.feature_count >= 1, "devices.feature_count", "must be >= 1");
  require(d.quantization_variance > 0, "devices.quantization_variance", "must be > 0");
  require(d.sensing_time > 0, "devices.sensing_time_s", "must be > 0");
  require(d.computation_time >= 0, "devices.computation_time_s", "must be >= 0");
  require(d.computation_energy >= 0, "devices.computation_energy_j", "must be >= 0");
  require(d.energy_budget >= 0, "devices.energy_budget_j", "must be >= 0");
  require(!d.clutter_variances.empty(), "devices.clutter_variances", "must not be empty");
  for (double c : d.clutter_variances) {
    require(c >= 0 && std::isfinite(c), "devices.clutter_variances", "entries must be >= 0");
  }
  require(system.latency_budget > 0, "system.latency_budget_s", "must be > 0");
  require(system.bandwidth > 0, "system.bandwidth_hz", "must be > 0");
  require(system.channel_noise > 0, "system.channel_noise_w", "must be > 0");
  require(system.sensing_noise > 0, "system.sensing_noise", "must be > 0");

  const auto& c = channel;
  require(c.cell_radius >= 0, "channel.cell_radius_m", "must be >= 0");
  require(c.center_distance > c.cell_radius, "channel.center_distance_m",
          "must exceed the cell radius so every device is at positive distance");
  require(c.shadowing_variance_db >= 0, "channel.shadowing_variance_db", "must be >= 0");
  if (c.fixed_gains) {
    require(c.fixed_gains->size() >= static_cast<std::size_t>(d.count), "channel.fixed_gains",
            "needs one gain per device");
    for (double h : *c.fixed_gains) require(h > 0 && std::isfinite(h), "channel.fixed_gains", "gains must be > 0");
  }

  const auto& s = statistics;
  require(s.num_classes >= 2, "statistics.num_classes", "must be >= 2");
  if (s.source == StatisticsSource::synthetic) {
    require(s.centroid_spread >= 0, "statistics.centroid_spread", "must be >= 0");
    require(s.variance_min >= 0, "statistics.variance_min", "must be >= 0");
    require(s.variance_max >= s.variance_min, "statistics.variance_max", "must be >= variance_min");
  } else {
    require(s.centroids.size() >= static_cast<std::size_t>(d.count), "statistics.centroids",
            "needs one centroid table per device");
    require(s.variances.size() == s.centroids.size(), "statistics.variances",
            "needs one variance vector per centroid table");
    for (std::size_t k = 0; k < s.centroids.size(); ++k) {
      const std::string where = "statistics.centroids[" + std::to_string(k) + "]";
      require(s.centroids[k].size() == static_cast<std::size_t>(s.num_classes), where,
              "needs one row per class");
      for (const auto& row : s.centroids[k]) {
        require(row.size() == s.variances[k].size() && !row.empty(), where,
                "rows must match the variance vector length");
      }
      for (double v : s.variances[k]) {
        require(v >= 0 && std::isfinite(v), "statistics.variances[" + std::to_string(k) + "]",
                "entries must be >= 0");
      }
    }
  }
}

double path_loss_db(const ChannelConfig& channel, double distance_m) {
  return channel.path_loss_intercept_db + channel.path_loss_slope_db * std::log10(distance_m / 1000.0);
}

Eigen::VectorXd generate_channels(const ScenarioConfig& config, std::uint64_t seed) {
  const int k_count = config.devices.count;
  Eigen::VectorXd h(k_count);
  const auto& ch = config.channel;
  if (ch.fixed_gains) {
    for (int k = 0; k < k_count; ++k) h[k] = (*ch.fixed_gains)[static_cast<std::size_t>(k)];
    return h;
  }
  const double shadow_std = std::sqrt(ch.shadowing_variance_db);
  for (int k = 0; k < k_count; ++k) {
    // One stream per device so the first K draws do not depend on the count.
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double r = ch.cell_radius * std::sqrt(unit(rng));
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    const double x = ch.center_distance + r * std::cos(theta);
    const double y = r * std::sin(theta);
    const double dist = std::hypot(x, y);
    const double shadow = shadow_std * normal(rng);
    const double re = normal(rng), im = normal(rng);
    const double fading = 0.5 * (re * re + im * im);
    h[k] = std::pow(10.0, (shadow - path_loss_db(ch, dist)) / 10.0) * fading;
  }
  return h;
}

ClassStatistics synthesize_statistics(const ScenarioConfig& config, std::uint64_t seed) {
  const auto& s = config.statistics;
  ClassStatistics stats;
  stats.num_classes = s.num_classes;
  const int k_count = config.devices.count;
  if (s.source == StatisticsSource::explicit_values) {
    for (int k = 0; k < k_count; ++k) {
      const auto& table = s.centroids[static_cast<std::size_t>(k)];
      const auto& var = s.variances[static_cast<std::size_t>(k)];
      Eigen::MatrixXd mu(s.num_classes, static_cast<Eigen::Index>(var.size()));
      for (int l = 0; l < s.num_classes; ++l) {
        for (std::size_t n = 0; n < var.size(); ++n) mu(l, static_cast<Eigen::Index>(n)) = table[l][n];
      }
      stats.centroids.push_back(mu);
      stats.variance.push_back(Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size())));
    }
    stats.validate();
    return stats;
  }
  const int n_count = config.devices.feature_count;
  for (int k = 0; k < k_count; ++k) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    std::uniform_real_distribution<double> centroid(-s.centroid_spread, s.centroid_spread);
    std::uniform_real_distribution<double> variance(s.variance_min, s.variance_max);
    Eigen::MatrixXd mu(s.num_classes, n_count);
    Eigen::VectorXd var(n_count);
    for (int n = 0; n < n_count; ++n) {
      for (int l = 0; l < s.num_classes; ++l) mu(l, n) = s.centroid_spread > 0 ? centroid(rng) : 0.0;
      var[n] = s.variance_max > s.variance_min ? variance(rng) : s.variance_min;
    }
    stats.centroids.push_back(mu);
    stats.variance.push_back(var);
  }
  return stats;
}

Scenario build_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  Scenario sc;
  sc.sys = config.system;
  sc.stats = synthesize_statistics(
      config, config.statistics.seed.value_or(derive_seed(seed, kStatisticsStream)));
  const Eigen::VectorXd gains = generate_channels(config, derive_seed(seed, kChannelStream));
  const auto& d = config.devices;
  for (int k = 0; k < d.count; ++k) {
    DeviceProfile p;
    p.feature_count = sc.stats.feature_count(static_cast<std::size_t>(k));
    p.clutter_variance = d.clutter_variances[static_cast<std::size_t>(k) % d.clutter_variances.size()];
    p.quantization_variance = d.quantization_variance;
    p.sensing_time = d.sensing_time;
    p.computation_time = d.computation_time;
    p.computation_energy = d.computation_energy;
    p.energy_budget = d.energy_budget;
    p.channel_gain = gains[k];
    sc.devices.push_back(p);
  }
  return sc;
}

}  // namespace iscc

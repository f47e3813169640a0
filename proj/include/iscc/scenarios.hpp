// Scenario construction: channel draws, synthetic class statistics, default
// parameters and the JSON configuration schema.
#pragma once

#include "iscc/model.hpp"
#include "iscc/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace iscc {

inline constexpr int kConfigSchemaVersion = 1;

/// Invalid or unparsable configuration. `field` is a dotted path such as
/// "system.bandwidth_hz", or a JSON pointer for unknown keys.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class StatisticsSource { synthetic, explicit_values };

struct DeviceDefaults {
  int count = 3;
  int feature_count = 50;
  double quantization_variance = 1.0;
  double sensing_time = 0.5;        // s
  double computation_time = 0.1;    // s
  double computation_energy = 0.01; // J
  double energy_budget = 0.15;      // J
  std::vector<double> clutter_variances{1.0, 0.1, 0.5};  // cycled over devices

  bool operator==(const DeviceDefaults&) const = default;
};

struct ChannelConfig {
  double cell_radius = 50.0;       // m, devices uniform in this disk
  double center_distance = 450.0;  // m, disk center to server
  double shadowing_variance_db = 8.0;
  double path_loss_intercept_db = 128.1;
  double path_loss_slope_db = 37.6;  // per decade of distance in km
  std::optional<std::vector<double>> fixed_gains;

  bool operator==(const ChannelConfig&) const = default;
};

struct StatisticsConfig {
  StatisticsSource source = StatisticsSource::synthetic;
  int num_classes = 4;
  double centroid_spread = 1.0;  // centroids uniform in [-spread, spread]
  double variance_min = 0.5;
  double variance_max = 1.5;
  std::optional<std::uint64_t> seed;  // defaults to one derived from the scenario seed
  // Explicit values: centroids[device][class][feature], variances[device][feature].
  std::vector<std::vector<std::vector<double>>> centroids;
  std::vector<std::vector<double>> variances;

  bool operator==(const StatisticsConfig&) const = default;
};

struct ScenarioConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;
  DeviceDefaults devices;
  SystemParams system{1.85, 200.0, 1e-12, 1.0};
  ChannelConfig channel;
  StatisticsConfig statistics;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  bool operator==(const ScenarioConfig& other) const;
};

/// Independent stream seed derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// 128.1 + 37.6 log10(d_km) with the configured coefficients.
double path_loss_db(const ChannelConfig& channel, double distance_m);

/// Power gain per device: path loss with log-normal shadowing times Rayleigh
/// fading |h|^2, h ~ CN(0, 1). Returns config.channel.fixed_gains if set.
Eigen::VectorXd generate_channels(const ScenarioConfig& config, std::uint64_t seed);

ClassStatistics synthesize_statistics(const ScenarioConfig& config, std::uint64_t seed);

struct Scenario {
  ClassStatistics stats;
  std::vector<DeviceProfile> devices;
  SystemParams sys;

  Problem problem() const { return Problem(stats, devices, sys); }
};

/// Full scenario for `seed`: channels and (unless explicit) statistics are
/// drawn from streams derived from it.
Scenario build_scenario(const ScenarioConfig& config, std::uint64_t seed);

ScenarioConfig parse_config(const std::string& json_text);
std::string serialize_config(const ScenarioConfig& config);
ScenarioConfig load_config(const std::filesystem::path& path);
void save_config(const ScenarioConfig& config, const std::filesystem::path& path);

}  // namespace iscc

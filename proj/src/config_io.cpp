#include "iscc/scenarios.hpp"

#include "json_fields.hpp"

#include <fstream>
#include <sstream>

namespace iscc {

namespace detail {

namespace {

StatisticsSource source_from(const std::string& name, const std::string& field) {
  if (name == "synthetic" || name == "table-default") return StatisticsSource::synthetic;
  if (name == "explicit") return StatisticsSource::explicit_values;
  throw ConfigError(field, "unknown source '" + name + "' (expected table-default, synthetic or explicit)");
}

}  // namespace

ScenarioConfig read_scenario(const json& j, const std::string& pointer, const std::string& dotted) {
  ScenarioConfig c;
  ObjectReader top(j, pointer, dotted);
  top.read("schema_version", c.schema_version);
  top.read("seed", c.seed);

  auto dev = top.child("devices");
  dev.read("count", c.devices.count);
  dev.read("feature_count", c.devices.feature_count);
  dev.read("quantization_variance", c.devices.quantization_variance);
  dev.read("sensing_time_s", c.devices.sensing_time);
  dev.read("computation_time_s", c.devices.computation_time);
  dev.read("computation_energy_j", c.devices.computation_energy);
  dev.read("energy_budget_j", c.devices.energy_budget);
  dev.read("clutter_variances", c.devices.clutter_variances);
  dev.finish();

  auto sys = top.child("system");
  sys.read("latency_budget_s", c.system.latency_budget);
  sys.read("bandwidth_hz", c.system.bandwidth);
  sys.read("channel_noise_w", c.system.channel_noise);
  sys.read("sensing_noise", c.system.sensing_noise);
  sys.finish();

  auto ch = top.child("channel");
  ch.read("cell_radius_m", c.channel.cell_radius);
  ch.read("center_distance_m", c.channel.center_distance);
  ch.read("shadowing_variance_db", c.channel.shadowing_variance_db);
  ch.read("path_loss_intercept_db", c.channel.path_loss_intercept_db);
  ch.read("path_loss_slope_db", c.channel.path_loss_slope_db);
  ch.read("fixed_gains", c.channel.fixed_gains);
  ch.finish();

  auto st = top.child("statistics");
  std::string source = "synthetic";
  st.read("source", source);
  c.statistics.source = source_from(source, st.name("source"));
  st.read("num_classes", c.statistics.num_classes);
  st.read("centroid_spread", c.statistics.centroid_spread);
  st.read("variance_min", c.statistics.variance_min);
  st.read("variance_max", c.statistics.variance_max);
  st.read("seed", c.statistics.seed);
  st.read("centroids", c.statistics.centroids);
  st.read("variances", c.statistics.variances);
  st.finish();
  top.finish();

  c.validate();
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["devices"] = {
      {"count", c.devices.count},
      {"feature_count", c.devices.feature_count},
      {"quantization_variance", c.devices.quantization_variance},
      {"sensing_time_s", c.devices.sensing_time},
      {"computation_time_s", c.devices.computation_time},
      {"computation_energy_j", c.devices.computation_energy},
      {"energy_budget_j", c.devices.energy_budget},
      {"clutter_variances", c.devices.clutter_variances},
  };
  j["system"] = {
      {"latency_budget_s", c.system.latency_budget},
      {"bandwidth_hz", c.system.bandwidth},
      {"channel_noise_w", c.system.channel_noise},
      {"sensing_noise", c.system.sensing_noise},
  };
  j["channel"] = {
      {"cell_radius_m", c.channel.cell_radius},
      {"center_distance_m", c.channel.center_distance},
      {"shadowing_variance_db", c.channel.shadowing_variance_db},
      {"path_loss_intercept_db", c.channel.path_loss_intercept_db},
      {"path_loss_slope_db", c.channel.path_loss_slope_db},
  };
  if (c.channel.fixed_gains) j["channel"]["fixed_gains"] = *c.channel.fixed_gains;
  auto& st = j["statistics"];
  const auto& s = c.statistics;
  st["source"] = s.source == StatisticsSource::synthetic ? "synthetic" : "explicit";
  st["num_classes"] = s.num_classes;
  st["centroid_spread"] = s.centroid_spread;
  st["variance_min"] = s.variance_min;
  st["variance_max"] = s.variance_max;
  if (s.seed) st["seed"] = *s.seed;
  if (!s.centroids.empty()) st["centroids"] = s.centroids;
  if (!s.variances.empty()) st["variances"] = s.variances;
  return j;
}

}  // namespace detail

ScenarioConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("parse error: ") + e.what());
  }
  return detail::read_scenario(j, "", "");
}

std::string serialize_config(const ScenarioConfig& config) {
  return detail::scenario_to_json(config).dump(2) + "\n";
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const ScenarioConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("", "cannot write " + path.string());
  out << serialize_config(config);
}

}  // namespace iscc

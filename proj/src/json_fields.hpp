// Strict JSON object reading: typed field access, dotted field names in
// errors, and rejection of keys nobody asked for.
#pragma once

#include "iscc/scenarios.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace iscc::detail {

using nlohmann::json;

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string pointer, std::string dotted)
      : j_(j), pointer_(std::move(pointer)), dotted_(std::move(dotted)) {
    if (!j_.is_object()) throw ConfigError(dotted_.empty() ? "(root)" : dotted_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    out = convert<T>(j_.at(key), name(key));
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!has(key)) return;
    out = convert<T>(j_.at(key), name(key));
  }

  ObjectReader child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return ObjectReader(has(key) ? j_.at(key) : empty, pointer_ + "/" + key, name(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string name(const std::string& key) const { return dotted_.empty() ? key : dotted_ + "." + key; }

  /// Throws for keys that were never read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(pointer_ + "/" + it.key(), "unknown key");
      }
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw ConfigError(field, "expected a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field, "expected a number");
      return v.get<T>();
    } else {
      if (!v.is_array()) throw ConfigError(field, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], field + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }

 private:
  const json& j_;
  std::string pointer_;
  std::string dotted_;
  std::set<std::string> seen_;
};

/// Reads a scenario object; `pointer` and `dotted` locate it in the document.
ScenarioConfig read_scenario(const json& j, const std::string& pointer, const std::string& dotted);
json scenario_to_json(const ScenarioConfig& config);

}  // namespace iscc::detail

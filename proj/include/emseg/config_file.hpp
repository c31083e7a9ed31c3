#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace emseg {

// Flat key/value run configuration. The native format is a TOML subset:
// `key = value` lines with string, bool, integer, float and single-line
// numeric-array values, optional [section] headers (keys become
// "section.key") and # comments. A JSON object (nested objects flattened
// with dots) is accepted as an alternative.
using ConfigValue = std::variant<bool, long long, double, std::string, std::vector<double>>;

class ConfigMap {
 public:
  ConfigMap() = default;
  explicit ConfigMap(std::string source_name) : source_(std::move(source_name)) {}

  void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_double_array(const std::string& key,
                                       const std::vector<double>& fallback) const;

  // Throws listing any key outside `allowed` (typo protection).
  void ensure_known(const std::set<std::string>& allowed) const;

  const std::map<std::string, ConfigValue>& values() const { return values_; }
  const std::string& source() const { return source_; }

 private:
  [[noreturn]] void type_error(const std::string& key, const std::string& want) const;
  std::string source_;
  std::map<std::string, ConfigValue> values_;
};

ConfigMap parse_toml_subset(const std::string& text, const std::string& source_name);
ConfigMap parse_json_config(const std::string& text, const std::string& source_name);

// Dispatches on extension (.json) or a leading '{'.
ConfigMap load_config(const std::string& path);

}  // namespace emseg

#include "emseg/config_file.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <stdexcept>

#include <json.hpp>

#include "emseg/dataset_io.hpp"

namespace emseg {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_error(const std::string& source, size_t line, const std::string& msg) {
  throw std::runtime_error(source + ":" + std::to_string(line) + ": " + msg);
}

// Strips a # comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool parse_number(const std::string& text, ConfigValue& out) {
  errno = 0;
  char* end = nullptr;
  const long long as_int = std::strtoll(text.c_str(), &end, 10);
  if (errno == 0 && end && *end == '\0') {
    out = as_int;
    return true;
  }
  errno = 0;
  const double as_double = std::strtod(text.c_str(), &end);
  if (errno == 0 && end && *end == '\0') {
    out = as_double;
    return true;
  }
  return false;
}

ConfigValue parse_scalar(const std::string& source, size_t line_no, const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) parse_error(source, line_no, "missing value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"')
      parse_error(source, line_no, "unterminated string");
    std::string out;
    for (size_t i = 1; i + 1 < text.size(); ++i) {
      if (text[i] == '\\' && i + 2 < text.size()) {
        ++i;
        switch (text[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: parse_error(source, line_no, "unsupported escape");
        }
      } else {
        out += text[i];
      }
    }
    return out;
  }
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.front() == '[') {
    if (text.back() != ']') parse_error(source, line_no, "arrays must close on the same line");
    std::vector<double> values;
    std::string body = text.substr(1, text.size() - 2);
    size_t pos = 0;
    while (pos < body.size()) {
      size_t comma = body.find(',', pos);
      const std::string item = trim(body.substr(pos, comma == std::string::npos
                                                          ? std::string::npos
                                                          : comma - pos));
      if (!item.empty()) {
        ConfigValue v;
        if (!parse_number(item, v)) parse_error(source, line_no, "array entries must be numbers");
        values.push_back(std::holds_alternative<long long>(v)
                             ? static_cast<double>(std::get<long long>(v))
                             : std::get<double>(v));
      } else if (comma != std::string::npos) {
        parse_error(source, line_no, "empty array entry");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return values;
  }
  ConfigValue v;
  if (!parse_number(text, v)) parse_error(source, line_no, "cannot parse value '" + text + "'");
  return v;
}

void flatten_json(const json& obj, const std::string& prefix, ConfigMap& out,
                  const std::string& source) {
  for (const auto& [key, value] : obj.items()) {
    const std::string full = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten_json(value, full, out, source);
    } else if (value.is_boolean()) {
      out.set(full, value.get<bool>());
    } else if (value.is_number_integer() || value.is_number_unsigned()) {
      out.set(full, value.get<long long>());
    } else if (value.is_number_float()) {
      out.set(full, value.get<double>());
    } else if (value.is_string()) {
      out.set(full, value.get<std::string>());
    } else if (value.is_array()) {
      std::vector<double> arr;
      for (const auto& item : value) {
        if (!item.is_number())
          throw std::runtime_error(source + ": key '" + full + "': only numeric arrays supported");
        arr.push_back(item.get<double>());
      }
      out.set(full, std::move(arr));
    } else {
      throw std::runtime_error(source + ": key '" + full + "': unsupported value type");
    }
  }
}

}  // namespace

void ConfigMap::type_error(const std::string& key, const std::string& want) const {
  throw std::runtime_error(source_ + ": key '" + key + "' is not " + want);
}

long long ConfigMap::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<long long>(&it->second)) return *v;
  if (const auto* d = std::get_if<double>(&it->second)) {
    if (*d == static_cast<long long>(*d)) return static_cast<long long>(*d);
  }
  type_error(key, "an integer");
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<double>(&it->second)) return *v;
  if (const auto* i = std::get_if<long long>(&it->second)) return static_cast<double>(*i);
  type_error(key, "a number");
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<bool>(&it->second)) return *v;
  type_error(key, "a boolean");
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<std::string>(&it->second)) return *v;
  type_error(key, "a string");
}

std::vector<double> ConfigMap::get_double_array(const std::string& key,
                                                const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (const auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
  if (const auto* d = std::get_if<double>(&it->second)) return {*d};
  if (const auto* i = std::get_if<long long>(&it->second)) return {static_cast<double>(*i)};
  type_error(key, "a numeric array");
}

void ConfigMap::ensure_known(const std::set<std::string>& allowed) const {
  std::string unknown;
  for (const auto& [key, value] : values_)
    if (!allowed.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty())
    throw std::runtime_error(source_ + ": unknown config keys: " + unknown);
}

ConfigMap parse_toml_subset(const std::string& text, const std::string& source_name) {
  ConfigMap out(source_name);
  std::string section;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    ++line_no;
    std::string line = trim(strip_comment(text.substr(pos, eol - pos)));
    pos = eol + 1;
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') parse_error(source_name, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) parse_error(source_name, line_no, "empty section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) parse_error(source_name, line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) parse_error(source_name, line_no, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    out.set(full, parse_scalar(source_name, line_no, line.substr(eq + 1)));
  }
  return out;
}

ConfigMap parse_json_config(const std::string& text, const std::string& source_name) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(source_name + ": invalid JSON: " + e.what());
  }
  if (!obj.is_object()) throw std::runtime_error(source_name + ": config must be an object");
  ConfigMap out(source_name);
  flatten_json(obj, "", out, source_name);
  return out;
}

ConfigMap load_config(const std::string& path) {
  const std::string text = read_file(path);
  const size_t first = text.find_first_not_of(" \t\r\n");
  const bool looks_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (looks_json || (first != std::string::npos && text[first] == '{'))
    return parse_json_config(text, path);
  return parse_toml_subset(text, path);
}

}  // namespace emseg

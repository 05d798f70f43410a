#include "emos/kv_config.hpp"

#include <fstream>
#include <sstream>

#include "emos/csv.hpp"
#include "emos/error.hpp"

namespace emos {

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = csv::trim(line);
    if (stripped.empty() || stripped == "\r") continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.set(csv::trim(stripped.substr(0, eq)), csv::trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("empty config key");
  std::string v = value;
  if (!v.empty() && v.back() == '\r') v.pop_back();
  entries_[key] = v;
}

void KeyValueConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' must be key=value");
  set(csv::trim(assignment.substr(0, eq)), csv::trim(assignment.substr(eq + 1)));
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

const std::string& KeyValueConfig::require(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? parse_real_or_fraction(*v, key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    return csv::parse_int(*v, key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  const auto v = get(key);
  if (!v || csv::trim(*v).empty()) return out;
  for (const auto& field : csv::split(*v)) out.push_back(parse_real_or_fraction(csv::trim(field), key));
  return out;
}

std::vector<long long> KeyValueConfig::get_int_list(const std::string& key) const {
  std::vector<long long> out;
  const auto v = get(key);
  if (!v || csv::trim(*v).empty()) return out;
  try {
    for (const auto& field : csv::split(*v)) out.push_back(csv::parse_int(field, key));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return out;
}

double parse_real_or_fraction(const std::string& text, const std::string& key) {
  try {
    const auto slash = text.find('/');
    if (slash == std::string::npos) return csv::parse_double(text, key);
    const double num = csv::parse_double(text.substr(0, slash), key);
    const double den = csv::parse_double(text.substr(slash + 1), key);
    if (den == 0.0) throw ConfigError("zero denominator for config key '" + key + "'");
    return num / den;
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

} // namespace emos

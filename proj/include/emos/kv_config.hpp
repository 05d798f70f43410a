#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emos {

// Flat `key = value` configuration. `#` starts a comment; blank lines are
// ignored. Later assignments override earlier ones.
class KeyValueConfig {
public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::filesystem::path& path);
  static KeyValueConfig from_string(const std::string& text);

  // Applies a `key=value` override.
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const;
  const std::string& require(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Comma-separated list of numbers; empty if absent.
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<long long> get_int_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

private:
  std::map<std::string, std::string> entries_;
};

// Parses a real that may be written as a fraction, e.g. `2/53`.
double parse_real_or_fraction(const std::string& text, const std::string& key);

} // namespace emos

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace prefrobust {

/// Flat `key = value` text config. `#` starts a comment; keys may carry dotted
/// section prefixes such as `train.method`. Duplicate keys are rejected.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;

  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::uint64_t get_uint(std::string_view key, std::uint64_t fallback) const;

  std::string require_string(std::string_view key) const;
  double require_double(std::string_view key) const;
  std::uint64_t require_uint(std::string_view key) const;

  /// Comma-separated list of doubles.
  std::vector<double> get_double_list(std::string_view key, std::vector<double> fallback) const;

  void set(std::string key, std::string value);

  /// Throws InputError naming the first key that is not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  /// Entries whose key starts with `prefix`, with the prefix stripped.
  KeyValueConfig section(std::string_view prefix) const;

  const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return entries_; }

  /// Canonical `key=value\n` text, sorted by key.
  std::string to_string() const;

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_uint(std::string_view text, std::string_view what);

}  // namespace prefrobust

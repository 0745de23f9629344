#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace lipspline {

/// Flat "key = value" settings. Lines starting with '#' and blank lines are
/// ignored; keys are [A-Za-z0-9_.]+; a repeated key is an error.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "config");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  long long get_int(const std::string& key, long long fallback);
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback);
  std::string require_string(const std::string& key);

  /// Throws ConfigError naming every key not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  /// Throws ConfigError naming every given key that no getter has read.
  void reject_unused() const;

  /// Every key read so far with the value in effect (given or default), one per line, sorted.
  std::string resolved() const;

 private:
  std::string lookup(const std::string& key, const std::string& fallback);
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> used_;
  std::string origin_;
};

}  // namespace lipspline

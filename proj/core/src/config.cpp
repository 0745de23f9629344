#include "lipspline/config.hpp"

#include <charconv>
#include <sstream>

#include "lipspline/error.hpp"
#include "lipspline/io.hpp"

namespace lipspline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': cannot parse '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    if (c.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'");
  values_[key] = value;
}

std::string Config::lookup(const std::string& key, const std::string& fallback) {
  auto it = values_.find(key);
  const std::string v = it == values_.end() ? fallback : it->second;
  used_[key] = v;
  return v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) { return lookup(key, fallback); }

double Config::get_double(const std::string& key, double fallback) {
  return parse_number<double>(key, lookup(key, format_double(fallback)));
}

long long Config::get_int(const std::string& key, long long fallback) {
  return parse_number<long long>(key, lookup(key, std::to_string(fallback)));
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) {
  return parse_number<std::uint64_t>(key, lookup(key, std::to_string(fallback)));
}

bool Config::get_bool(const std::string& key, bool fallback) {
  const std::string v = lookup(key, fallback ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) {
  std::string def;
  for (std::size_t i = 0; i < fallback.size(); ++i) def += (i ? ", " : "") + format_double(fallback[i]);
  std::vector<double> out;
  for (const auto& item : split_list(lookup(key, def))) out.push_back(parse_number<double>(key, item));
  return out;
}

std::vector<std::size_t> Config::get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) {
  std::string def;
  for (std::size_t i = 0; i < fallback.size(); ++i) def += (i ? ", " : "") + std::to_string(fallback[i]);
  std::vector<std::size_t> out;
  for (const auto& item : split_list(lookup(key, def))) out.push_back(parse_number<std::size_t>(key, item));
  return out;
}

std::string Config::require_string(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  used_[key] = it->second;
  return it->second;
}

void Config::reject_unknown(const std::set<std::string>& allowed) const {
  std::string bad;
  for (const auto& [k, v] : values_) {
    if (!allowed.count(k)) bad += (bad.empty() ? "" : ", ") + k;
  }
  if (!bad.empty()) throw ConfigError(origin_ + ": unknown key(s): " + bad);
}

void Config::reject_unused() const {
  std::set<std::string> used;
  for (const auto& [k, v] : used_) used.insert(k);
  reject_unknown(used);
}

std::string Config::resolved() const {
  std::string out;
  for (const auto& [k, v] : used_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace lipspline

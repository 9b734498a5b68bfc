#pragma once

// Scenario files use a small TOML subset:
//
//   # comment
//   key = value
//   [table]
//   key = value
//
// Values are double-quoted strings, numbers, true/false, or arrays of values
// (arrays may nest and span lines). Keys are stored flat as "table.key" with
// their raw text; typed getters parse on access and every key must be read by
// someone, so typos surface as errors.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace csar {

struct ConfigParseError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

inline bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  return k.front() != '.' && k.back() != '.';
}

inline int bracket_balance(std::string_view s) {
  int depth = 0;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') quoted = !quoted;
    if (quoted) continue;
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

// Splits the inside of "[a, [b, c], d]" at top-level commas.
inline std::vector<std::string> split_array(std::string_view text) {
  const auto t = trim(text);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']')
    throw ConfigParseError("expected an array, got '" + std::string(t) + "'");
  std::vector<std::string> items;
  std::string cur;
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const char c = t[i];
    if (c == '"') quoted = !quoted;
    if (!quoted && c == '[') ++depth;
    if (!quoted && c == ']') --depth;
    if (!quoted && depth == 0 && c == ',') {
      items.emplace_back(trim(cur));
      cur.clear();
      continue;
    }
    cur += c;
  }
  const auto last = trim(cur);
  if (!last.empty()) items.emplace_back(last);
  for (const auto& it : items)
    if (it.empty()) throw ConfigParseError("empty element in array '" + std::string(t) + "'");
  return items;
}

}  // namespace detail

class Config {
 public:
  static Config parse(std::string_view text, const std::string& origin = "<config>") {
    Config cfg;
    std::string table;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const int start_line = lineno;
      std::string body = detail::strip_comment(line);
      auto t = detail::trim(body);
      if (t.empty()) continue;
      auto fail = [&](const std::string& why) {
        throw ConfigParseError(origin + ":" + std::to_string(start_line) + ": " + why);
      };
      if (t.front() == '[' && t.find('=') == std::string_view::npos) {
        if (t.back() != ']' || t.size() < 3) fail("malformed table header");
        const auto name = detail::trim(t.substr(1, t.size() - 2));
        if (!detail::valid_key(name)) fail("invalid table name '" + std::string(name) + "'");
        table = std::string(name);
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string_view::npos) fail("expected key = value");
      const auto key = detail::trim(t.substr(0, eq));
      if (!detail::valid_key(key)) fail("invalid key '" + std::string(key) + "'");
      std::string value(detail::trim(t.substr(eq + 1)));
      while (detail::bracket_balance(value) > 0) {
        if (!std::getline(in, line)) fail("unterminated array");
        ++lineno;
        value += ' ';
        value += detail::trim(detail::strip_comment(line));
      }
      if (value.empty()) fail("missing value for '" + std::string(key) + "'");
      if (detail::bracket_balance(value) != 0) fail("unbalanced brackets");
      const std::string full = table.empty() ? std::string(key) : table + "." + std::string(key);
      if (cfg.values_.count(full)) fail("duplicate key '" + full + "'");
      cfg.values_[full] = value;
    }
    return cfg;
  }

  // "table.key=value"; replaces or adds.
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
      throw ConfigParseError("override '" + std::string(assignment) + "' is not key=value");
    const auto key = detail::trim(assignment.substr(0, eq));
    const auto value = detail::trim(assignment.substr(eq + 1));
    if (!detail::valid_key(key) || value.empty() || detail::bracket_balance(value) != 0)
      throw ConfigParseError("malformed override '" + std::string(assignment) + "'");
    std::string v(value);
    // Bare words on the command line are taken as strings.
    const bool bare = std::isalpha(static_cast<unsigned char>(v.front())) && v != "true" &&
                      v != "false" && v.find_first_of("\" []") == std::string::npos;
    if (bare) v = '"' + v + '"';
    values_[std::string(key)] = v;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigParseError("missing key '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key) const { return to_double(raw(key), key); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }
  std::int64_t get_int(const std::string& key) const { return to_int(raw(key), key); }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
  }
  bool get_bool(const std::string& key) const {
    const auto& v = raw(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigParseError("'" + key + "' must be true or false, got '" + v + "'");
  }
  bool get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
  }
  std::string get_string(const std::string& key) const { return to_string_value(raw(key), key); }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  std::vector<double> get_double_array(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : detail::split_array(raw(key))) out.push_back(to_double(item, key));
    return out;
  }
  std::vector<std::int64_t> get_int_array(const std::string& key) const {
    std::vector<std::int64_t> out;
    for (const auto& item : detail::split_array(raw(key))) out.push_back(to_int(item, key));
    return out;
  }
  std::vector<std::vector<double>> get_nested_double_array(const std::string& key) const {
    std::vector<std::vector<double>> out;
    for (const auto& item : detail::split_array(raw(key))) {
      std::vector<double> row;
      for (const auto& v : detail::split_array(item)) row.push_back(to_double(v, key));
      out.push_back(std::move(row));
    }
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  void require_all_used() const {
    const auto unused = unused_keys();
    if (unused.empty()) return;
    std::string msg = "unknown key(s):";
    for (const auto& k : unused) msg += " " + k;
    throw ConfigParseError(msg);
  }

 private:
  static double to_double(const std::string& v, const std::string& key) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    const char* begin = v.data();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end)
      throw ConfigParseError("'" + key + "' expects a number, got '" + v + "'");
    return out;
  }

  static std::int64_t to_int(const std::string& v, const std::string& key) {
    std::int64_t out = 0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end)
      throw ConfigParseError("'" + key + "' expects an integer, got '" + v + "'");
    return out;
  }

  static std::string to_string_value(const std::string& v, const std::string& key) {
    if (v.size() < 2 || v.front() != '"' || v.back() != '"')
      throw ConfigParseError("'" + key + "' expects a quoted string, got '" + v + "'");
    const std::string inner = v.substr(1, v.size() - 2);
    if (inner.find('"') != std::string::npos)
      throw ConfigParseError("'" + key + "': embedded quotes are not supported");
    return inner;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace csar

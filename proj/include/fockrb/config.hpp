#pragma once

// Experiment configuration: `key = value` lines grouped under [section]
// headers, '#' or ';' comments, one level only.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fockrb/numeric.hpp"
#include "fockrb/weightlab.hpp"

namespace fockrb {

struct ConfigError : Error {
  int line;  // 0 when the problem is not tied to one line
  ConfigError(const std::string& where, int l, const std::string& what)
      : Error(where + (l > 0 ? ":" + std::to_string(l) : "") + ": " + what), line(l) {}
};

inline constexpr const char* kVersion = "0.1.0";

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline const std::vector<std::string>& study_names() {
  static const std::vector<std::string> names{"t1-obstruction", "t2-chain", "t3-suite", "circulant",
                                              "moments",        "gram",     "convexity"};
  return names;
}

class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(const std::string& text, const std::string& source = "<config>") {
    static const std::set<std::string> sections{"study", "weight", "size", "tolerance", "output"};
    Config c;
    c.source_ = source;
    c.hash_ = fnv1a64(text);
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string s = trim(raw);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(source, line, "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (!sections.count(section)) throw ConfigError(source, line, "unknown section [" + section + "]");
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(source, line, "expected key = value");
      if (section.empty()) throw ConfigError(source, line, "key outside any section");
      std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
      if (key.empty()) throw ConfigError(source, line, "empty key");
      auto full = section + "." + key;
      if (c.entries_.count(full)) throw ConfigError(source, line, "duplicate key " + full);
      c.entries_[full] = {value, line};
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(path, 0, "cannot open config file");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::uint64_t hash() const { return hash_; }
  const std::string& source() const { return source_; }

  std::string str(const std::string& key, const std::string& def) const {
    used_.insert(key);
    auto it = entries_.find(key);
    return it == entries_.end() ? def : it->second.value;
  }
  std::string required(const std::string& key) const {
    used_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.value.empty())
      throw ConfigError(source_, 0, "missing required field " + key);
    return it->second.value;
  }
  double real(const std::string& key, double def) const {
    used_.insert(key);
    auto it = entries_.find(key);
    return it == entries_.end() ? def : to_real(it->first, it->second);
  }
  int integer(const std::string& key, int def) const {
    used_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    double v = to_real(it->first, it->second);
    if (v != std::floor(v) || std::fabs(v) > 1e9)
      throw ConfigError(source_, it->second.line, it->first + " must be an integer");
    return static_cast<int>(v);
  }
  double tolerance(const std::string& key, double def) const {
    double v = real(key, def);
    if (!(v > 0 && v < 1)) {
      auto it = entries_.find(key);
      throw ConfigError(source_, it == entries_.end() ? 0 : it->second.line,
                        key + " must lie in (0, 1)");
    }
    return v;
  }
  std::vector<double> reals(const std::string& key, std::vector<double> def) const {
    used_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    std::vector<double> out;
    std::string item;
    std::istringstream in(it->second.value);
    while (std::getline(in, item, ',')) out.push_back(to_real(it->first, {trim(item), it->second.line}));
    if (out.empty()) throw ConfigError(source_, it->second.line, key + " is an empty list");
    return out;
  }
  std::vector<int> integers(const std::string& key, std::vector<int> def) const {
    std::vector<double> d(def.begin(), def.end());
    auto v = reals(key, d);
    std::vector<int> out;
    for (double x : v) {
      if (x != std::floor(x)) throw ConfigError(source_, line_of(key), key + " must hold integers");
      out.push_back(static_cast<int>(x));
    }
    return out;
  }

  /// Keys present in the file that no accessor asked for.
  std::vector<std::pair<std::string, int>> unused() const {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& [k, e] : entries_)
      if (!used_.count(k)) out.emplace_back(k, e.line);
    return out;
  }
  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  double to_real(const std::string& key, const Entry& e) const {
    try {
      std::size_t pos = 0;
      double v = std::stod(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(source_, e.line, key + ": '" + e.value + "' is not a number");
    }
  }

  std::string source_;
  std::uint64_t hash_ = 0;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

/// [weight] family = power | log-power | square | theorem3, with `param`
/// (beta for power, alpha for log-power) or `depth` (theorem3 with squaring
/// radii from R_1 = 2).
inline Weight weight_from_config(const Config& c, const std::string& def_family, double def_param) {
  const std::string fam = c.str("weight.family", def_family);
  if (fam == "power") return Weight::power_exponent(c.real("weight.param", def_param));
  if (fam == "log-power") return Weight::log_power(c.real("weight.param", def_param));
  if (fam == "square") return Weight::square();
  if (fam == "theorem3") return Weight::theorem3(LacunarySequence::squaring(c.integer("weight.depth", 5)));
  throw ConfigError(c.source(), c.line_of("weight.family"),
                    "unknown weight family '" + fam + "' (expected power, log-power, square, theorem3)");
}

}  // namespace fockrb

#pragma once

// Run configuration: a flat TOML subset ([section] headers, key = value with
// numbers, strings, booleans and nested numeric arrays, '#' comments) and the
// validated SimConfig built from it.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "msflow.hpp"
#include "refgeom.hpp"

namespace mssim {

struct TomlValue {
  std::variant<double, std::string, bool, std::vector<TomlValue>> v;
  bool is_integer = false;
};

using TomlTable = std::map<std::string, TomlValue>;  // keys "section.key"

namespace detail {

class TomlParser {
 public:
  explicit TomlParser(std::string text) : s_(std::move(text)) {}

  TomlTable parse() {
    TomlTable out;
    std::string section;
    while (skip_blank_lines(), pos_ < s_.size()) {
      if (s_[pos_] == '[') {
        ++pos_;
        section = read_key();
        expect(']');
        end_of_line();
        continue;
      }
      const std::string key = read_key();
      skip_ws();
      expect('=');
      skip_ws();
      const std::string path = section.empty() ? key : section + "." + key;
      if (out.count(path)) fail("duplicate key '" + path + "'");
      out[path] = read_value();
      end_of_line();
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i) line += s_[i] == '\n';
    throw ConfigError("<syntax>", "line " + std::to_string(line) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }
  void skip_comment() {
    if (pos_ < s_.size() && s_[pos_] == '#')
      while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
  }
  void skip_blank_lines() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (pos_ < s_.size() && s_[pos_] == '\n') {
        ++pos_;
        continue;
      }
      return;
    }
  }
  // whitespace, comments and newlines inside arrays
  void skip_array_space() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (pos_ < s_.size() && s_[pos_] == '\n') {
        ++pos_;
        continue;
      }
      return;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (pos_ < s_.size() && s_[pos_] != '\n') fail("unexpected trailing characters");
    if (pos_ < s_.size()) ++pos_;
  }
  void expect(char c) {
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string read_key() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                s_[pos_] == '-' || s_[pos_] == '.'))
      ++pos_;
    if (pos_ == start) fail("expected a key");
    std::string k = s_.substr(start, pos_ - start);
    skip_ws();
    return k;
  }
  TomlValue read_value() {
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') {
      ++pos_;
      std::string str;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        if (s_[pos_] == '\n') fail("unterminated string");
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
        str += s_[pos_++];
      }
      expect('"');
      return {str, false};
    }
    if (c == '[') {
      ++pos_;
      std::vector<TomlValue> arr;
      skip_array_space();
      while (pos_ < s_.size() && s_[pos_] != ']') {
        arr.push_back(read_value());
        skip_array_space();
        if (pos_ < s_.size() && s_[pos_] == ',') {
          ++pos_;
          skip_array_space();
        } else {
          break;
        }
      }
      expect(']');
      return {arr, false};
    }
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return {true, false};
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return {false, false};
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '+' ||
                                s_[pos_] == '-' || s_[pos_] == '.' || s_[pos_] == '_'))
      ++pos_;
    std::string tok = s_.substr(start, pos_ - start);
    std::erase(tok, '_');
    if (tok.empty()) fail("expected a value");
    const char* first = tok.data();
    if (*first == '+') ++first;
    double d = 0.0;
    auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), d);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("malformed number '" + tok + "'");
    const bool integer = tok.find_first_of(".eEn") == std::string::npos;
    return {d, integer};
  }

  std::string s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline TomlTable parse_toml(const std::string& text) { return detail::TomlParser(text).parse(); }

struct DiscretizationConfig {
  std::size_t n_theta = 64;
  int n_r_inner = 32;
  int n_r_outer = 32;
  std::optional<double> dt;  // default: 0.1 / (largest retained discrete symbol)
  double t_end = 1.0;
  Scheme scheme = Scheme::imex2;
};

struct InitialConfig {
  std::vector<std::array<double, 3>> modes;        // (k, amp_cos, amp_sin)
  std::optional<std::array<double, 3>> equilibrium;  // (y0, y1, y2)
};

struct OutputConfig {
  long cadence = 10;         // record every `cadence` steps
  long snapshot_every = 0;   // 0: only the final snapshot
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
  std::size_t k_max = 8;
};

struct SimConfig {
  GeometryParams geometry;
  PhysParams physics;
  DiscretizationConfig discretization;
  InitialConfig initial;
  OutputConfig output;

  PotentialResolution resolution() const {
    PotentialResolution r;
    r.n_r_inner = discretization.n_r_inner;
    r.n_r_outer = discretization.n_r_outer;
    return r;
  }

  RunOptions run_options() const {
    RunOptions o;
    o.scheme = discretization.scheme;
    o.dt = discretization.dt.value_or(0.0);
    o.t_end = discretization.t_end;
    o.record_every = output.cadence;
    o.snapshot_every = output.snapshot_every;
    o.k_max = output.k_max;
    return o;
  }

  HeightField initial_height() const {
    const std::size_t n = discretization.n_theta;
    if (initial.equilibrium) {
      const auto& y = *initial.equilibrium;
      try {
        return equilibrium_height(y[0], y[1], y[2], geometry, n);
      } catch (const InadmissibleHeight& e) {
        throw ConfigError("initial.equilibrium", e.what());
      }
    }
    auto h = HeightField::sample(n, [&](double th) {
      double v = 0.0;
      for (const auto& m : initial.modes) v += m[1] * std::cos(m[0] * th) + m[2] * std::sin(m[0] * th);
      return v;
    });
    if (!(h.sup_norm() <= geometry.max_height()))
      throw ConfigError("initial.modes", "initial height exceeds the admissible band a - eps");
    return h;
  }

  void validate() const {
    geometry.validate();
    physics.validate();
    const auto& d = discretization;
    if (!is_power_of_two(d.n_theta) || d.n_theta < 8)
      throw ConfigError("discretization.n_theta", "must be a power of two >= 8");
    if (d.n_r_inner < 4) throw ConfigError("discretization.n_r_inner", "must be at least 4");
    if (d.n_r_outer < 4) throw ConfigError("discretization.n_r_outer", "must be at least 4");
    if (d.dt && !(*d.dt > 0.0)) throw ConfigError("discretization.dt", "must be positive");
    if (!(d.t_end > 0.0)) throw ConfigError("discretization.t_end", "must be positive");
    if (output.cadence < 1) throw ConfigError("output.cadence", "must be at least 1");
    if (output.snapshot_every < 0) throw ConfigError("output.snapshot_every", "must be nonnegative");
    if (output.directory.empty()) throw ConfigError("output.directory", "must not be empty");
    for (const auto& f : output.formats)
      if (f != "csv" && f != "json") throw ConfigError("output.formats", "unknown format '" + f + "'");
    if (initial.equilibrium && !initial.modes.empty())
      throw ConfigError("initial", "give either modes or equilibrium, not both");
    for (const auto& m : initial.modes)
      if (m[0] < 0.0 || m[0] != std::floor(m[0]) || m[0] > static_cast<double>(d.n_theta / 3))
        throw ConfigError("initial.modes", "mode numbers must be integers in [0, n_theta/3]");
    (void)initial_height();
  }
};

namespace detail {

inline double as_number(const TomlValue& v, const std::string& path) {
  if (const auto* d = std::get_if<double>(&v.v)) return *d;
  throw ConfigError(path, "expected a number");
}

inline long as_integer(const TomlValue& v, const std::string& path) {
  const double d = as_number(v, path);
  if (!v.is_integer || d != std::floor(d)) throw ConfigError(path, "expected an integer");
  return static_cast<long>(d);
}

inline std::string as_string(const TomlValue& v, const std::string& path) {
  if (const auto* s = std::get_if<std::string>(&v.v)) return *s;
  throw ConfigError(path, "expected a string");
}

inline std::vector<double> as_numbers(const TomlValue& v, const std::string& path) {
  const auto* arr = std::get_if<std::vector<TomlValue>>(&v.v);
  if (!arr) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : *arr) out.push_back(as_number(e, path));
  return out;
}

}  // namespace detail

/// Builds and validates a SimConfig. Unknown keys are rejected by path.
inline SimConfig config_from_table(const TomlTable& t) {
  using namespace detail;
  SimConfig c;
  for (const auto& [path, val] : t) {
    if (path == "geometry.R") c.geometry.R = as_number(val, path);
    else if (path == "geometry.R_outer") c.geometry.R_outer = as_number(val, path);
    else if (path == "geometry.a") c.geometry.a = as_number(val, path);
    else if (path == "physics.sigma") c.physics.sigma = as_number(val, path);
    else if (path == "physics.m") c.physics.m = as_number(val, path);
    else if (path == "physics.mu_plus") c.physics.mu_plus = as_number(val, path);
    else if (path == "physics.mu_minus") c.physics.mu_minus = as_number(val, path);
    else if (path == "discretization.n_theta") {
      const long n = as_integer(val, path);
      if (n <= 0) throw ConfigError(path, "must be a power of two >= 8");
      c.discretization.n_theta = static_cast<std::size_t>(n);
    } else if (path == "discretization.n_r_inner") c.discretization.n_r_inner = static_cast<int>(as_integer(val, path));
    else if (path == "discretization.n_r_outer") c.discretization.n_r_outer = static_cast<int>(as_integer(val, path));
    else if (path == "discretization.dt") c.discretization.dt = as_number(val, path);
    else if (path == "discretization.t_end") c.discretization.t_end = as_number(val, path);
    else if (path == "discretization.scheme") {
      const auto s = as_string(val, path);
      if (s == "imex1") c.discretization.scheme = Scheme::imex1;
      else if (s == "imex2") c.discretization.scheme = Scheme::imex2;
      else throw ConfigError(path, "must be \"imex1\" or \"imex2\"");
    } else if (path == "initial.modes") {
      const auto* arr = std::get_if<std::vector<TomlValue>>(&val.v);
      if (!arr) throw ConfigError(path, "expected an array of [k, amp_cos, amp_sin] triples");
      for (const auto& e : *arr) {
        const auto m = as_numbers(e, path);
        if (m.size() != 3) throw ConfigError(path, "each mode is [k, amp_cos, amp_sin]");
        c.initial.modes.push_back({m[0], m[1], m[2]});
      }
    } else if (path == "initial.equilibrium") {
      const auto y = as_numbers(val, path);
      if (y.size() != 3) throw ConfigError(path, "expected [y0, y1, y2]");
      c.initial.equilibrium = std::array<double, 3>{y[0], y[1], y[2]};
    } else if (path == "output.cadence") c.output.cadence = as_integer(val, path);
    else if (path == "output.snapshot_every") c.output.snapshot_every = as_integer(val, path);
    else if (path == "output.directory") c.output.directory = as_string(val, path);
    else if (path == "output.k_max") {
      const long k = as_integer(val, path);
      if (k < 1) throw ConfigError(path, "must be at least 1");
      c.output.k_max = static_cast<std::size_t>(k);
    } else if (path == "output.formats") {
      const auto* arr = std::get_if<std::vector<TomlValue>>(&val.v);
      if (!arr) throw ConfigError(path, "expected an array of strings");
      c.output.formats.clear();
      for (const auto& e : *arr) c.output.formats.push_back(as_string(e, path));
    } else {
      throw ConfigError(path, "unknown key");
    }
  }
  c.validate();
  return c;
}

inline SimConfig parse_config(const std::string& text) { return config_from_table(parse_toml(text)); }

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace mssim

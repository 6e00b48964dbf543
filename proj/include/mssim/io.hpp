#pragma once

// Persistence: snapshots with exact binary64 round trip (hex-float strings),
// time series CSV in shortest round-trip decimal, run reports and spectra as JSON.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "config.hpp"
#include "linstab.hpp"
#include "msflow.hpp"

namespace mssim {

struct SnapshotError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest decimal string that parses back to the same double.
inline std::string format_shortest(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

/// Hexadecimal float literal ("0x1.8p+1"), exact for every finite double.
inline std::string format_hex(double x) {
  if (!std::isfinite(x)) throw std::domain_error("format_hex: non-finite value");
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, std::abs(x), std::chars_format::hex);
  return std::string(std::signbit(x) ? "-0x" : "0x") + std::string(buf, p);
}

inline double parse_hex(const std::string& s) {
  if (s.size() < 3 || (s.rfind("0x", 0) != 0 && s.rfind("-0x", 0) != 0))
    throw SnapshotError("snapshot: expected a hex-float string, got '" + s + "'");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw SnapshotError("snapshot: malformed hex-float '" + s + "'");
  return v;
}

inline nlohmann::json snapshot_json(const SimState& s, const GeometryParams& g) {
  nlohmann::json j;
  j["time"] = format_hex(s.t);
  j["R"] = format_hex(g.R);
  j["R_outer"] = format_hex(g.R_outer);
  j["n_theta"] = s.h.size();
  j["step"] = s.step;
  j["dt"] = format_hex(s.dt);
  auto& c = j["coeffs"] = nlohmann::json::array();
  for (const auto& z : s.h.coeffs()) c.push_back({format_hex(z.real()), format_hex(z.imag())});
  return j;
}

inline void write_snapshot(const std::filesystem::path& path, const SimState& s, const GeometryParams& g) {
  std::ofstream out(path);
  if (!out) throw SnapshotError("snapshot: cannot write '" + path.string() + "'");
  out << snapshot_json(s, g).dump(1) << '\n';
}

/// Parses a snapshot; checks the schema, the geometry against `g` and admissibility.
inline SimState snapshot_from_json(const nlohmann::json& j, const GeometryParams& g) {
  auto field = [&](const char* name) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(name)) throw SnapshotError(std::string("snapshot: missing field '") + name + "'");
    return j.at(name);
  };
  auto hex = [&](const nlohmann::json& v, const char* name) {
    if (!v.is_string()) throw SnapshotError(std::string("snapshot: field '") + name + "' must be a hex-float string");
    return parse_hex(v.get<std::string>());
  };
  SimState s;
  s.t = hex(field("time"), "time");
  const double R = hex(field("R"), "R");
  const double Ro = hex(field("R_outer"), "R_outer");
  if (R != g.R || Ro != g.R_outer) throw SnapshotError("snapshot: geometry differs from the configuration");
  const auto& nt = field("n_theta");
  if (!nt.is_number_unsigned()) throw SnapshotError("snapshot: n_theta must be a positive integer");
  const std::size_t n = nt.get<std::size_t>();
  if (!is_power_of_two(n)) throw SnapshotError("snapshot: n_theta must be a power of two");
  const auto& st = field("step");
  if (!st.is_number_integer()) throw SnapshotError("snapshot: step must be an integer");
  s.step = st.get<long>();
  s.dt = hex(field("dt"), "dt");
  const auto& c = field("coeffs");
  if (!c.is_array() || c.size() != n / 2 + 1) throw SnapshotError("snapshot: coeffs must hold n_theta/2 + 1 pairs");
  std::vector<cplx> coeffs;
  for (const auto& z : c) {
    if (!z.is_array() || z.size() != 2) throw SnapshotError("snapshot: each coefficient is [re, im]");
    coeffs.emplace_back(hex(z[0], "coeffs"), hex(z[1], "coeffs"));
  }
  s.h = HeightField::from_coeffs(std::move(coeffs), n);
  if (!(s.h.sup_norm() <= g.max_height())) throw SnapshotError("snapshot: height is not admissible");
  return s;
}

inline SimState read_snapshot(const std::filesystem::path& path, const GeometryParams& g) {
  std::ifstream in(path);
  if (!in) throw SnapshotError("snapshot: cannot read '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SnapshotError(std::string("snapshot: ") + e.what());
  }
  return snapshot_from_json(j, g);
}

inline void write_timeseries_csv(std::ostream& out, const TimeSeries& ts, bool header = true) {
  if (header) {
    out << "t,area,perimeter,h_linf";
    for (std::size_t k = 0; k <= ts.k_max; ++k) out << ",re_" << k << ",im_" << k;
    out << '\n';
  }
  for (const auto& r : ts.records) {
    out << format_shortest(r.t) << ',' << format_shortest(r.area) << ',' << format_shortest(r.perimeter) << ','
        << format_shortest(r.h_linf);
    for (const auto& z : r.modes) out << ',' << format_shortest(z.real()) << ',' << format_shortest(z.imag());
    out << '\n';
  }
}

struct ModeRate {
  std::size_t k = 0;
  DecayFit fit;
  double t0 = 0.0, t1 = 0.0;
};

/// Late-window decay rates: for each mode, fit the second half of the span where
/// the amplitude stays above max(1e-10, 1e-8 * its peak).
inline std::vector<ModeRate> fitted_rates(const TimeSeries& ts) {
  std::vector<ModeRate> out;
  for (std::size_t k = 2; k <= ts.k_max; ++k) {
    double peak = 0.0;
    for (const auto& r : ts.records) peak = std::max(peak, std::abs(r.modes[k]));
    const double floor = std::max(1e-10, 1e-8 * peak);
    if (peak <= floor) continue;
    double t_first = ts.records.front().t, t_last = t_first;
    for (const auto& r : ts.records) {
      if (std::abs(r.modes[k]) < floor) break;
      t_last = r.t;
    }
    const double t0 = 0.5 * (t_first + t_last);
    try {
      out.push_back({k, fit_decay_rate(ts, k, t0, t_last), t0, t_last});
    } catch (const std::domain_error&) {
    }
  }
  return out;
}

inline nlohmann::json run_report_json(const RunResult& r, const SimConfig& cfg, const HeightField& h0,
                                      const FlowContext& ctx) {
  nlohmann::json j;
  j["halt_reason"] = r.halt_reason;
  j["completed"] = r.completed;
  j["t_final"] = r.final_state.t;
  j["steps"] = r.final_state.step;
  j["dt_final"] = r.final_state.dt;
  j["dt_halvings"] = r.dt_halvings;
  j["area_drift"] = r.area_drift;
  j["max_drift"] = r.max_drift;
  j["max_perimeter_increase"] = std::isfinite(r.max_perimeter_increase) ? r.max_perimeter_increase : 0.0;
  auto& rates = j["decay_rates"] = nlohmann::json::array();
  for (const auto& m : fitted_rates(r.series)) {
    rates.push_back({{"k", m.k},
                     {"rate", m.fit.rate},
                     {"r_squared", m.fit.r_squared},
                     {"window", {m.t0, m.t1}},
                     {"ms_symbol", ms_symbol(static_cast<int>(m.k), cfg.geometry, cfg.physics)},
                     {"discrete_symbol", ctx.discrete_symbol(static_cast<int>(m.k))}});
  }
  const auto lim = predicted_limit(h0, r.final_state.h, cfg.geometry);
  j["predicted_limit"] = {{"y", {lim.y[0], lim.y[1], lim.y[2]}}, {"distance", lim.distance}, {"converged", lim.converged}};
  return j;
}

inline nlohmann::json spectrum_json(const SpectrumResult& s) {
  nlohmann::json j;
  auto& arr = j["eigenvalues"] = nlohmann::json::array();
  for (const auto& p : s.pairs)
    arr.push_back({{"k", p.k},
                   {"re", p.lambda.real()},
                   {"im", p.lambda.imag()},
                   {"multiplicity", p.multiplicity},
                   {"qb4_residual", p.qb4_residual},
                   {"classification", to_string(p.classification)}});
  j["kernel"] = s.kernel_count;
  j["gap"] = s.gap;
  j["gap_mode"] = s.gap_mode;
  j["kernel_tolerance"] = s.kernel_tolerance;
  j["anomalous"] = s.anomalous_count;
  j["failures"] = s.failures;
  return j;
}

}  // namespace mssim

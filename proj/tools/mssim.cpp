// mssim: simulate, resume, spectrum and check commands.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <string>

#include <CLI11.hpp>

#include "checks.hpp"
#include "mssim/mssim.hpp"

namespace fs = std::filesystem;
using namespace mssim;

namespace {

constexpr int kExitConfig = 2;

int write_run_outputs(const fs::path& dir, const SimConfig& cfg, const RunResult& r, const HeightField& h0,
                      const FlowContext& ctx) {
  const auto& f = cfg.output.formats;
  if (std::find(f.begin(), f.end(), "csv") != f.end()) {
    std::ofstream csv(dir / "timeseries.csv");
    write_timeseries_csv(csv, r.series);
  }
  write_snapshot(dir / ("snapshot_" + std::to_string(r.final_state.step) + ".json"), r.final_state, cfg.geometry);
  if (std::find(f.begin(), f.end(), "json") != f.end()) {
    std::ofstream rep(dir / "report.json");
    rep << run_report_json(r, cfg, h0, ctx).dump(2) << '\n';
  }
  std::printf("halt=%s t=%.6g steps=%ld area_drift=%.3e max_drift=%.3e\n", r.halt_reason.c_str(), r.final_state.t,
              r.final_state.step, r.area_drift, r.max_drift);
  return r.completed ? 0 : 1;
}

int simulate_from(const SimConfig& cfg, SimState start, const HeightField& h0, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const FlowContext ctx(cfg.geometry, cfg.physics, cfg.discretization.n_theta, cfg.resolution());
  const auto result = run(ctx, std::move(start), cfg.run_options(),
                          [&](const SimState& s) {
                            write_snapshot(out_dir / ("snapshot_" + std::to_string(s.step) + ".json"), s, cfg.geometry);
                          });
  return write_run_outputs(out_dir, cfg, result, h0, ctx);
}

std::pair<int, int> parse_modes(const std::string& s) {
  static const std::regex re(R"(^\s*(\d+)\s*\.\.\s*(\d+)\s*$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw ConfigError("--modes", "expected a..b with 0 <= a <= b");
  const int a = std::stoi(m[1]), b = std::stoi(m[2]);
  if (a > b) throw ConfigError("--modes", "expected a..b with 0 <= a <= b");
  return {a, b};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mullins-Sekerka interface flow and coupled linear stability"};
  app.require_subcommand(1);

  std::string config_path, out_dir, snapshot_path;
  auto* sim = app.add_subcommand("simulate", "integrate the interface flow from a configuration");
  sim->add_option("--config", config_path, "TOML configuration")->required();
  sim->add_option("--out", out_dir, "output directory (default: output.directory)");

  auto* resume = app.add_subcommand("resume", "continue a run from a snapshot");
  resume->add_option("--snapshot", snapshot_path, "snapshot JSON")->required();
  resume->add_option("--config", config_path, "TOML configuration")->required();
  resume->add_option("--out", out_dir, "output directory (default: output.directory)");

  GeometryParams sg;
  PhysParams sp;
  std::string modes = "0..8", spec_out, spec_config;
  int n_r = 32, n_report = 10;
  auto* spec = app.add_subcommand("spectrum", "eigenvalues of the linearized coupled operator");
  spec->add_option("--config", spec_config, "TOML with [geometry], [physics] and optional [spectrum] modes/n_r");
  spec->add_option("--R", sg.R, "reference radius");
  spec->add_option("--R-outer", sg.R_outer, "outer radius");
  spec->add_option("--sigma", sp.sigma, "surface tension");
  spec->add_option("--m", sp.m, "mobility");
  spec->add_option("--mu-plus", sp.mu_plus, "inner viscosity");
  spec->add_option("--mu-minus", sp.mu_minus, "outer viscosity");
  spec->add_option("--modes", modes, "mode range a..b");
  spec->add_option("--n-r", n_r, "Chebyshev intervals per phase");
  spec->add_option("--n-report", n_report, "eigenvalues reported per mode");
  spec->add_option("--out", spec_out, "spectrum JSON path");

  std::string suite;
  auto* check = app.add_subcommand("check", "run oracle suites: curvature, dk0, symbols, potential, all");
  check->add_option("suite", suite, "suite name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim) {
      const auto cfg = load_config(config_path);
      SimState s;
      s.h = cfg.initial_height();
      return simulate_from(cfg, s, s.h, out_dir.empty() ? cfg.output.directory : out_dir);
    }
    if (*resume) {
      const auto cfg = load_config(config_path);
      auto s = read_snapshot(snapshot_path, cfg.geometry);
      if (s.h.size() != cfg.discretization.n_theta)
        throw ConfigError("discretization.n_theta", "differs from the snapshot resolution");
      return simulate_from(cfg, s, cfg.initial_height(), out_dir.empty() ? cfg.output.directory : out_dir);
    }
    if (*spec) {
      if (!spec_config.empty()) {
        std::ifstream in(spec_config);
        if (!in) throw ConfigError("--config", "cannot read '" + spec_config + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        auto table = parse_toml(ss.str());
        for (auto it = table.begin(); it != table.end();) {
          if (it->first.rfind("spectrum.", 0) != 0) {
            ++it;
            continue;
          }
          if (it->first == "spectrum.modes") modes = detail::as_string(it->second, it->first);
          else if (it->first == "spectrum.n_r") n_r = static_cast<int>(detail::as_integer(it->second, it->first));
          else if (it->first == "spectrum.n_report") n_report = static_cast<int>(detail::as_integer(it->second, it->first));
          else if (it->first == "spectrum.out") spec_out = spec_out.empty() ? detail::as_string(it->second, it->first) : spec_out;
          else throw ConfigError(it->first, "unknown key");
          it = table.erase(it);
        }
        const auto cfg = config_from_table(table);
        // explicit flags override the file
        auto pick = [&](const char* flag, double flag_value, double file_value) {
          return spec->count(flag) ? flag_value : file_value;
        };
        sg = {pick("--R", sg.R, cfg.geometry.R), pick("--R-outer", sg.R_outer, cfg.geometry.R_outer), cfg.geometry.a};
        sp = {pick("--sigma", sp.sigma, cfg.physics.sigma), pick("--m", sp.m, cfg.physics.m),
              pick("--mu-plus", sp.mu_plus, cfg.physics.mu_plus), pick("--mu-minus", sp.mu_minus, cfg.physics.mu_minus)};
      }
      sg.a = std::min(sg.R_outer - sg.R, sg.R) / 4.0;
      sg.validate();
      sp.validate();
      if (n_r < 32) throw ConfigError("--n-r", "must be at least 32");
      const auto [ka, kb] = parse_modes(modes);
      const auto s = spectrum(sg, sp, ka, kb, n_r, n_report);
      std::printf("%4s %22s %22s %4s %10s  %s\n", "k", "re", "im", "mult", "qb4", "class");
      for (const auto& p : s.pairs)
        std::printf("%4d %22.14g %22.14g %4d %10.2e  %s\n", p.k, p.lambda.real(), p.lambda.imag(), p.multiplicity,
                    p.qb4_residual, to_string(p.classification));
      for (const auto& f : s.failures) std::fprintf(stderr, "eigensolve failure: %s\n", f.c_str());
      std::printf("kernel=%d gap=%s\n", s.kernel_count, format_shortest(s.gap).c_str());
      if (!spec_out.empty()) {
        std::ofstream out(spec_out);
        if (!out) throw ConfigError("--out", "cannot write '" + spec_out + "'");
        out << spectrum_json(s).dump(2) << '\n';
      }
      return s.failures.empty() ? 0 : 1;
    }
    if (*check) return cli::run_checks(suite);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const SnapshotError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

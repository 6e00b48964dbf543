#pragma once

// Oracle suites behind `mssim check <suite>`.

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mssim/mssim.hpp"

namespace mssim::cli {

struct CheckLine {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline CheckLine below(std::string name, double measured, double tol) {
  return {std::move(name), measured, tol, measured <= tol};
}

/// Random real field with modes 1..k_max, amplitudes ~ 1/k^2, scaled to sup = target.
inline HeightField random_band_limited(std::mt19937_64& rng, std::size_t n, std::size_t k_max, double target) {
  std::normal_distribution<double> nd;
  std::vector<cplx> c(n / 2 + 1, 0.0);
  for (std::size_t k = 1; k <= k_max; ++k) c[k] = cplx(nd(rng), nd(rng)) / static_cast<double>(k * k);
  const auto h = HeightField::from_coeffs(c, n);
  return (target / h.sup_norm()) * h;
}

inline std::vector<CheckLine> check_curvature() {
  const GeometryParams g;
  std::mt19937_64 rng(20240611);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = random_band_limited(rng, 256, 24, 0.3 * g.a);
    const auto cd = curvature_decomposition(h, g);
    const auto K = cd.assemble(h);
    const auto d1 = h.derivative(1), d2 = h.derivative(2);
    for (std::size_t j = 0; j < h.size(); ++j) {
      const double r = g.R + h[j];
      const double polar = (r * r + 2.0 * d1[j] * d1[j] - r * d2[j]) / std::pow(r * r + d1[j] * d1[j], 1.5);
      worst = std::max(worst, std::abs(K[j] - polar) / std::abs(polar));
    }
  }
  return {below("curvature: decomposition vs polar formula (rel sup)", worst, 1e-10)};
}

inline std::vector<CheckLine> check_dk0() {
  const GeometryParams g;
  double worst = 0.0;
  for (int k = 0; k <= 16; ++k) {
    const auto dir = HeightField::sample(128, [k](double t) { return std::cos(k * t); });
    const auto fd = dk0_apply_fd(dir, g, 1e-5);
    const double sym = dk0_symbol(k, g);
    const double scale = std::max(std::abs(sym), 1.0 / (g.R * g.R));
    for (std::size_t j = 0; j < fd.size(); ++j) worst = std::max(worst, std::abs(fd[j] - sym * dir[j]) / scale);
  }
  return {below("dk0: finite-difference Jacobian vs (k^2-1)/R^2 (rel)", worst, 1e-6)};
}

inline std::vector<CheckLine> check_symbols() {
  const GeometryParams g;
  const PhysParams p;
  PotentialResolution res;
  res.n_r_inner = res.n_r_outer = 1024;
  const FlowContext ctx(g, p, 64, res);
  double worst = 0.0;
  for (int k = 2; k <= 8; ++k)
    worst = std::max(worst, std::abs(ctx.discrete_symbol(k) - ms_symbol(k, g, p)) / ms_symbol(k, g, p));
  return {below("symbols: discrete B S DK vs closed form, n_r=1024 (rel)", worst, 1e-4),
          below("symbols: lambda_2 = 192/17", std::abs(ms_symbol(2, g, p) - 192.0 / 17.0), 1e-12)};
}

inline std::vector<CheckLine> check_potential() {
  const GeometryParams g;
  std::vector<CheckLine> out;
  PotentialResolution res;
  res.n_r_inner = res.n_r_outer = 256;
  const PotentialSolver solver(g, 32, res);
  const auto zero = HeightField::zero(32);
  double worst = 0.0;
  for (int k = 1; k <= 8; ++k) {
    std::vector<double> d(32);
    for (std::size_t j = 0; j < 32; ++j) d[j] = std::cos(k * zero.theta(j));
    const auto eta = solver.solve(zero, d);
    const double alpha = 1.0 / (1.0 + std::pow(g.R_outer, 2.0 * k));
    for (int i = 0; i <= solver.inner_grid().n; ++i) {
      const double r = solver.inner_grid().rho[i];
      for (std::size_t j = 0; j < 32; ++j) worst = std::max(worst, std::abs(eta.inner[i * 32 + j] - std::pow(r, k) * d[j]));
    }
    for (int i = 0; i <= solver.outer_grid().n; ++i) {
      const double r = solver.outer_grid().rho[i];
      const double ex = alpha * (std::pow(r, k) + std::pow(g.R_outer, 2.0 * k) * std::pow(r, -k));
      for (std::size_t j = 0; j < 32; ++j) worst = std::max(worst, std::abs(eta.outer[i * 32 + j] - ex * d[j]));
    }
  }
  out.push_back(below("potential: disk/annulus harmonics k<=8, n_r=256 (abs, unit data)", worst, 1e-4));

  std::mt19937_64 rng(7);
  const auto h = random_band_limited(rng, 32, 6, 0.5 * g.a);
  std::vector<double> c(32, 0.37);
  const auto eta_c = solver.solve(h, c);
  double dev = 0.0;
  for (double v : eta_c.inner) dev = std::max(dev, std::abs(v - 0.37));
  for (double v : eta_c.outer) dev = std::max(dev, std::abs(v - 0.37));
  out.push_back(below("potential: constant reproduction", dev, 1e-14));

  std::vector<double> d(32);
  for (std::size_t j = 0; j < 32; ++j) d[j] = std::sin(3.0 * h.theta(j)) + 0.2 * std::cos(h.theta(j));
  const auto eta = solver.solve(h, d);
  const auto jf = solver.jump_flux(h, eta, 1.0);
  const auto ds = arclength_density(h, g);
  double net = 0.0, mag = 0.0;
  for (std::size_t j = 0; j < 32; ++j) {
    net += jf[j] * ds[j];
    mag += std::abs(jf[j] * ds[j]);
  }
  out.push_back(below("potential: flux neutrality (rel)", std::abs(net) / mag, 1e-8));
  return out;
}

inline int run_checks(const std::string& suite) {
  std::vector<CheckLine> lines;
  const bool all = suite == "all";
  bool known = all;
  auto add = [&](const char* name, const std::function<std::vector<CheckLine>()>& f) {
    if (all || suite == name) {
      known = true;
      for (auto& l : f()) lines.push_back(std::move(l));
    }
  };
  add("curvature", check_curvature);
  add("dk0", check_dk0);
  add("symbols", check_symbols);
  add("potential", check_potential);
  if (!known) {
    std::fprintf(stderr, "unknown suite '%s' (curvature, dk0, symbols, potential, all)\n", suite.c_str());
    return 2;
  }
  bool ok = true;
  for (const auto& l : lines) {
    std::printf("%s  %-62s measured=%.3e tol=%.1e\n", l.pass ? "PASS" : "FAIL", l.name.c_str(), l.measured,
                l.tolerance);
    ok = ok && l.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace mssim::cli

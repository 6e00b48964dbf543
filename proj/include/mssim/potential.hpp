#pragma once

// Two-phase chemical potential on the fixed reference domains: the
// transformed Laplace problem Delta_h eta = 0 on the disk r < R and the
// annulus R < r < R_outer with Dirichlet data on S_R and a homogeneous
// Neumann condition on the outer boundary, and the flux jump across S_R.
//
// The Hanzawa map is radial, Theta_h(rho, theta) = F(rho, theta) e_r(theta)
// with F = rho + chi((rho - R)/4a) h(theta). In the reference coordinates
// (rho, theta) the transformed operator is
//   J Delta_h eta = d_rho(a eta_rho + b eta_theta) + d_theta(b eta_rho + c eta_theta),
//   a = (F_theta^2 + F^2)/(F_rho F),  b = -F_theta/F,  c = F_rho/F,
// which is discretized in conservative form: second-order finite volumes on a
// smoothly stretched radial grid and Fourier collocation in theta.

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "curvature.hpp"
#include "errors.hpp"
#include "fourier.hpp"
#include "gmres.hpp"
#include "refgeom.hpp"

namespace mssim {

struct PotentialResolution {
  int n_r_inner = 48;  // radial cells in the disk
  int n_r_outer = 48;  // radial cells in the annulus
  double rel_tol = 1e-12;
};

/// Radial grid of one phase. Node positions rho(xi) with xi uniform; the map
/// clusters nodes toward S_R with a max/min spacing ratio of 3.
///  inner: xi_i = (i + 1/2) dxi, i = 0..n, node n on S_R, zero flux through rho = 0
///  outer: xi_i = i dxi,        i = 0..n, node 0 on S_R, Neumann node n at R_outer
struct RadialGrid {
  bool inner = true;
  int n = 0;
  double dxi = 0.0;
  std::vector<double> rho, rho_xi;            // nodes 0..n
  std::vector<double> rho_half, rho_xi_half;  // half point between node i and i+1, i = 0..n-1

  int first_unknown() const { return inner ? 0 : 1; }
  int last_unknown() const { return inner ? n - 1 : n; }
  int unknown_rows() const { return n; }
  int interface_node() const { return inner ? n : 0; }

  static RadialGrid make(bool inner, int n, const GeometryParams& g) {
    if (n < 4) throw std::invalid_argument("RadialGrid: need at least 4 radial cells");
    RadialGrid gr;
    gr.inner = inner;
    gr.n = n;
    const double pi = std::numbers::pi;
    auto map = [&](double xi) -> std::array<double, 2> {
      if (inner) return {g.R * (xi + std::sin(pi * xi) / (2.0 * pi)), g.R * (1.0 + 0.5 * std::cos(pi * xi))};
      const double L = g.R_outer - g.R;
      return {g.R + L * (xi - std::sin(pi * xi) / (2.0 * pi)), L * (1.0 - 0.5 * std::cos(pi * xi))};
    };
    gr.dxi = inner ? 1.0 / (n + 0.5) : 1.0 / n;
    const double off = inner ? 0.5 : 0.0;
    for (int i = 0; i <= n; ++i) {
      auto [r, rx] = map((i + off) * gr.dxi);
      gr.rho.push_back(r);
      gr.rho_xi.push_back(rx);
    }
    // pin the interface and boundary nodes exactly
    if (inner) gr.rho[n] = g.R;
    else {
      gr.rho[0] = g.R;
      gr.rho[n] = g.R_outer;
    }
    for (int i = 0; i < n; ++i) {
      auto [r, rx] = map((i + off + 0.5) * gr.dxi);
      gr.rho_half.push_back(r);
      gr.rho_xi_half.push_back(rx);
    }
    return gr;
  }
};

using Mat2 = std::array<std::array<double, 2>, 2>;

/// Nodal metric of the transform for one phase; arrays are row-major (radial node, theta node).
struct PhaseMetric {
  std::vector<double> a_half, b_half;  // conservative coefficients at half points
  std::vector<double> b_node, c_node;  // at nodes
  std::vector<double> jac_det;         // det D Theta_h at nodes
  std::vector<Mat2> jacobian;          // D Theta_h (Cartesian) at nodes
  std::vector<Mat2> a_matrix;          // A(h) = D Theta_h^{-T} at nodes
};

struct TransformedMetric {
  GeometryParams geometry;
  std::size_t n_theta = 0;
  std::vector<double> h, dh;  // nodal h and h' the metric was built for
  RadialGrid inner_grid, outer_grid;
  PhaseMetric inner, outer;
  std::vector<Vec2> normal;  // nu_h on S_R (unit)
};

/// Scalar field on both phase grids, sharing the theta grid of the height field.
struct TwoPhaseField {
  std::size_t n_theta = 0;
  std::vector<double> inner, outer;  // (n+1) x n_theta row-major
  std::shared_ptr<const TransformedMetric> metric;
  bool underresolved = false;
  int iterations = 0;
  double relative_residual = 0.0;

  std::span<const double> inner_row(int i) const {
    return {inner.data() + static_cast<std::size_t>(i) * n_theta, n_theta};
  }
  std::span<const double> outer_row(int i) const {
    return {outer.data() + static_cast<std::size_t>(i) * n_theta, n_theta};
  }
  std::span<const double> trace_in() const { return inner_row(metric->inner_grid.n); }
  std::span<const double> trace_out() const { return outer_row(0); }
};

namespace detail {

struct CutoffSamples {
  std::vector<double> chi_node, dchi_node, chi_half, dchi_half;  // dchi = d chi / d rho
};

inline CutoffSamples sample_cutoff(const RadialGrid& gr, const GeometryParams& g) {
  CutoffSamples cs;
  const double scale = 4.0 * g.a;
  for (double r : gr.rho) {
    cs.chi_node.push_back(CutoffProfile::value((r - g.R) / scale));
    cs.dchi_node.push_back(CutoffProfile::derivative((r - g.R) / scale) / scale);
  }
  for (double r : gr.rho_half) {
    cs.chi_half.push_back(CutoffProfile::value((r - g.R) / scale));
    cs.dchi_half.push_back(CutoffProfile::derivative((r - g.R) / scale) / scale);
  }
  return cs;
}

struct MapValues {
  double F, F_rho, F_theta;
};

inline MapValues radial_map(double rho, double chi, double dchi, double h, double dh) {
  return {rho + chi * h, 1.0 + dchi * h, chi * dh};
}

inline PhaseMetric build_phase_metric(const RadialGrid& gr, const CutoffSamples& cs, std::span<const double> h,
                                      std::span<const double> dh) {
  const std::size_t nt = h.size();
  PhaseMetric pm;
  const std::size_t nodes = static_cast<std::size_t>(gr.n + 1) * nt;
  const std::size_t halves = static_cast<std::size_t>(gr.n) * nt;
  pm.a_half.resize(halves);
  pm.b_half.resize(halves);
  pm.b_node.resize(nodes);
  pm.c_node.resize(nodes);
  pm.jac_det.resize(nodes);
  pm.jacobian.resize(nodes);
  pm.a_matrix.resize(nodes);

  for (int i = 0; i < gr.n; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      const auto mv = radial_map(gr.rho_half[i], cs.chi_half[i], cs.dchi_half[i], h[j], dh[j]);
      const std::size_t idx = static_cast<std::size_t>(i) * nt + j;
      pm.a_half[idx] = (mv.F_theta * mv.F_theta + mv.F * mv.F) / (mv.F_rho * mv.F);
      pm.b_half[idx] = -mv.F_theta / mv.F;
    }
  }
  for (int i = 0; i <= gr.n; ++i) {
    const double rho = gr.rho[i];
    for (std::size_t j = 0; j < nt; ++j) {
      const auto mv = radial_map(rho, cs.chi_node[i], cs.dchi_node[i], h[j], dh[j]);
      const std::size_t idx = static_cast<std::size_t>(i) * nt + j;
      pm.b_node[idx] = -mv.F_theta / mv.F;
      pm.c_node[idx] = mv.F_rho / mv.F;
      const double det = mv.F_rho * mv.F / rho;
      pm.jac_det[idx] = det;
      const double th = HeightField::node(j, nt);
      const double c = std::cos(th), s = std::sin(th);
      // D Theta = F_rho e_r e_r^T + (F_theta/rho) e_r e_theta^T + (F/rho) e_theta e_theta^T
      const Vec2 er{c, s}, et{-s, c};
      Mat2 D{};
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q)
          D[p][q] = mv.F_rho * er[p] * er[q] + (mv.F_theta / rho) * er[p] * et[q] + (mv.F / rho) * et[p] * et[q];
      pm.jacobian[idx] = D;
      const double dd = D[0][0] * D[1][1] - D[0][1] * D[1][0];
      // inverse transpose
      pm.a_matrix[idx] = Mat2{{{D[1][1] / dd, -D[1][0] / dd}, {-D[0][1] / dd, D[0][0] / dd}}};
    }
  }
  return pm;
}

}  // namespace detail

/// Assembles the transformed metric of Theta_h on both phase grids.
inline TransformedMetric build_metric(const HeightField& h, const GeometryParams& g,
                                      const PotentialResolution& res = {}) {
  require_admissible(h, g);
  TransformedMetric tm;
  tm.geometry = g;
  tm.n_theta = h.size();
  tm.h = h.values();
  tm.dh = h.derivative(1);
  tm.inner_grid = RadialGrid::make(true, res.n_r_inner, g);
  tm.outer_grid = RadialGrid::make(false, res.n_r_outer, g);
  tm.inner = detail::build_phase_metric(tm.inner_grid, detail::sample_cutoff(tm.inner_grid, g), tm.h, tm.dh);
  tm.outer = detail::build_phase_metric(tm.outer_grid, detail::sample_cutoff(tm.outer_grid, g), tm.h, tm.dh);
  for (const auto* pm : {&tm.inner, &tm.outer})
    for (double d : pm->jac_det)
      if (!(d > 0.0)) throw InadmissibleHeight("build_metric: det D Theta_h <= 0", h.sup_norm());
  tm.normal = interface_normal(h, g);
  return tm;
}

/// Solver for the transformed two-phase potential problem at fixed
/// geometry and resolution. Caches grids, cutoff samples and the
/// per-mode factorizations of the h = 0 operator used as preconditioner.
class PotentialSolver {
 public:
  PotentialSolver(const GeometryParams& g, std::size_t n_theta, PotentialResolution res = {})
      : g_(g), nt_(n_theta), res_(res) {
    g_.validate();
    if (!is_power_of_two(n_theta)) throw std::invalid_argument("PotentialSolver: n_theta must be a power of two");
    phases_[0].grid = RadialGrid::make(true, res.n_r_inner, g);
    phases_[1].grid = RadialGrid::make(false, res.n_r_outer, g);
    for (auto& ph : phases_) {
      ph.cutoff = detail::sample_cutoff(ph.grid, g_);
      factor_modes(ph);
    }
  }

  const GeometryParams& geometry() const { return g_; }
  std::size_t n_theta() const { return nt_; }
  const PotentialResolution& resolution() const { return res_; }
  const RadialGrid& inner_grid() const { return phases_[0].grid; }
  const RadialGrid& outer_grid() const { return phases_[1].grid; }

  std::shared_ptr<const TransformedMetric> metric(const HeightField& h) const {
    require_admissible(h, g_);
    if (h.size() != nt_) throw std::invalid_argument("PotentialSolver: theta resolution mismatch");
    auto tm = std::make_shared<TransformedMetric>();
    tm->geometry = g_;
    tm->n_theta = nt_;
    tm->h = h.values();
    tm->dh = h.derivative(1);
    tm->inner_grid = phases_[0].grid;
    tm->outer_grid = phases_[1].grid;
    tm->inner = detail::build_phase_metric(phases_[0].grid, phases_[0].cutoff, tm->h, tm->dh);
    tm->outer = detail::build_phase_metric(phases_[1].grid, phases_[1].cutoff, tm->h, tm->dh);
    for (const auto* pm : {&tm->inner, &tm->outer})
      for (double d : pm->jac_det)
        if (!(d > 0.0)) throw InadmissibleHeight("build_metric: det D Theta_h <= 0", h.sup_norm());
    tm->normal = interface_normal(h, g_);
    return tm;
  }

  /// Solves Delta_h eta = 0 in both phases with eta = dirichlet on S_R.
  TwoPhaseField solve(const HeightField& h, std::span<const double> dirichlet) const {
    return solve(metric(h), dirichlet, spectrally_underresolved(h));
  }

  TwoPhaseField solve(std::shared_ptr<const TransformedMetric> tm, std::span<const double> dirichlet,
                      bool underresolved = false) const {
    if (dirichlet.size() != nt_) throw std::invalid_argument("solve_potential: dirichlet size mismatch");
    TwoPhaseField out;
    out.n_theta = nt_;
    out.metric = tm;
    out.underresolved = underresolved;
    for (int p = 0; p < 2; ++p) {
      const auto& ph = phases_[p];
      const auto& pm = p == 0 ? tm->inner : tm->outer;
      auto& field = p == 0 ? out.inner : out.outer;
      const auto rep = solve_phase(ph, pm, dirichlet, field);
      out.iterations += rep.iterations;
      out.relative_residual = std::max(out.relative_residual, rep.relative_residual);
    }
    return out;
  }

  /// Conservative radial fluxes G = J grad(rho).grad(eta) through S_R from
  /// each side, per unit theta: G = (nu_h . grad mu) |Gamma_h'|.
  std::array<std::vector<double>, 2> interface_fluxes(const TwoPhaseField& eta) const {
    std::array<std::vector<double>, 2> out;
    for (int p = 0; p < 2; ++p) {
      const auto& pm = p == 0 ? eta.metric->inner : eta.metric->outer;
      const auto& field = p == 0 ? eta.inner : eta.outer;
      out[p] = boundary_flux(phases_[p], pm, field);
    }
    return out;
  }

  /// m [[nu_h . grad_h eta]] on S_R (outside minus inside), per unit arclength.
  std::vector<double> jump_flux(const HeightField& h, const TwoPhaseField& eta, double m) const {
    check_pairing(h, eta);
    const auto G = interface_fluxes(eta);
    const auto ds = arclength_density(h, g_);
    std::vector<double> out(nt_);
    for (std::size_t j = 0; j < nt_; ++j) out[j] = m * (G[1][j] - G[0][j]) / ds[j];
    return out;
  }

  /// Flux jump m (G_out - G_in) per unit theta.
  std::vector<double> flux_jump_per_angle(const HeightField& h, const TwoPhaseField& eta, double m) const {
    check_pairing(h, eta);
    const auto G = interface_fluxes(eta);
    std::vector<double> out(nt_);
    for (std::size_t j = 0; j < nt_; ++j) out[j] = m * (G[1][j] - G[0][j]);
    return out;
  }

  /// Max-norm residual of the discrete equations, both phases.
  double residual_norm(const TwoPhaseField& eta) const {
    double r = 0.0;
    for (int p = 0; p < 2; ++p) {
      const auto& pm = p == 0 ? eta.metric->inner : eta.metric->outer;
      const auto& field = p == 0 ? eta.inner : eta.outer;
      const auto res = apply_operator(phases_[p], pm, field);
      for (double v : res) r = std::max(r, std::abs(v));
    }
    return r;
  }

  /// Flux jump per unit theta of the h = 0 solution with Dirichlet data cos(k theta),
  /// computed mode-wise with the exact h = 0 discrete operator.
  double reference_flux_jump(int k) const {
    double G[2];
    for (int p = 0; p < 2; ++p) {
      const auto& ph = phases_[p];
      const auto& gr = ph.grid;
      const auto prof = solve_mode_with_boundary(ph, k, 1.0);
      const double k2 = effective_k2(k);
      const int b = gr.interface_node();
      // d_theta(c rho_xi d_theta eta) at the interface node for h = 0
      const double dH = -k2 * gr.rho_xi[b] / gr.rho[b] * prof[b];
      if (gr.inner) {
        const int n = gr.n;
        const double Gh = gr.rho_half[n - 1] * (prof[n] - prof[n - 1]) / (gr.dxi * gr.rho_xi_half[n - 1]);
        G[p] = Gh - 0.5 * gr.dxi * dH;
      } else {
        const double Gh = gr.rho_half[0] * (prof[1] - prof[0]) / (gr.dxi * gr.rho_xi_half[0]);
        G[p] = Gh + 0.5 * gr.dxi * dH;
      }
    }
    return G[1] - G[0];
  }

 private:
  struct Tridiag {
    std::vector<double> lower, diag, upper;  // factored (Thomas) form: diag holds pivots, lower multipliers
  };
  struct Phase {
    RadialGrid grid;
    detail::CutoffSamples cutoff;
    std::vector<Tridiag> modes;  // indexed by |k| = 0..n_theta/2
  };

  double effective_k2(int k) const {
    const auto ak = static_cast<std::size_t>(std::abs(k));
    return ak == nt_ / 2 ? 0.0 : static_cast<double>(k) * static_cast<double>(k);
  }

  void check_pairing(const HeightField& h, const TwoPhaseField& eta) const {
    if (!eta.metric || eta.metric->h != h.values())
      throw std::invalid_argument("jump_flux: potential was not solved for this height field");
  }

  // Rows of the h = 0 operator for mode k on the unknown nodes (boundary node excluded).
  void mode_rows(const Phase& ph, int k, std::vector<double>& lo, std::vector<double>& di,
                 std::vector<double>& up) const {
    const auto& gr = ph.grid;
    const int nu = gr.unknown_rows();
    const double k2 = effective_k2(k);
    lo.assign(nu, 0.0);
    di.assign(nu, 0.0);
    up.assign(nu, 0.0);
    const double dx = gr.dxi;
    for (int r = 0; r < nu; ++r) {
      const int i = gr.first_unknown() + r;
      const double react = -k2 * gr.rho_xi[i] / gr.rho[i];
      if (gr.inner) {
        const double cp = gr.rho_half[i] / (dx * gr.rho_xi_half[i]) / dx;
        const double cm = i > 0 ? gr.rho_half[i - 1] / (dx * gr.rho_xi_half[i - 1]) / dx : 0.0;
        di[r] = -cp - cm + react;
        up[r] = cp;  // last row: coupling to the boundary node, dropped by the solver
        lo[r] = cm;
      } else if (i < gr.n) {
        const double cp = gr.rho_half[i] / (dx * gr.rho_xi_half[i]) / dx;
        const double cm = gr.rho_half[i - 1] / (dx * gr.rho_xi_half[i - 1]) / dx;
        di[r] = -cp - cm + react;
        up[r] = cp;
        lo[r] = cm;  // first row: coupling to the boundary node
      } else {
        const double cm = gr.rho_half[i - 1] / (dx * gr.rho_xi_half[i - 1]) / (0.5 * dx);
        di[r] = -cm + react;
        lo[r] = cm;
      }
    }
  }

  void factor_modes(Phase& ph) const {
    ph.modes.resize(nt_ / 2 + 1);
    for (std::size_t k = 0; k <= nt_ / 2; ++k) {
      Tridiag t;
      mode_rows(ph, static_cast<int>(k), t.lower, t.diag, t.upper);
      const int n = static_cast<int>(t.diag.size());
      // drop couplings to the Dirichlet node
      if (ph.grid.inner) t.upper[n - 1] = 0.0;
      else t.lower[0] = 0.0;
      for (int r = 1; r < n; ++r) {
        const double mlt = t.lower[r] / t.diag[r - 1];
        t.lower[r] = mlt;
        t.diag[r] -= mlt * t.upper[r - 1];
      }
      ph.modes[k] = std::move(t);
    }
  }

  template <class T>
  static void tridiag_solve(const Tridiag& t, std::vector<T>& x) {
    const int n = static_cast<int>(x.size());
    for (int r = 1; r < n; ++r) x[r] -= t.lower[r] * x[r - 1];
    x[n - 1] /= t.diag[n - 1];
    for (int r = n - 2; r >= 0; --r) x[r] = (x[r] - t.upper[r] * x[r + 1]) / t.diag[r];
  }

  // Radial profile (all nodes) of the h = 0 solution of mode k with boundary value `bv`.
  std::vector<double> solve_mode_with_boundary(const Phase& ph, int k, double bv) const {
    const auto& gr = ph.grid;
    std::vector<double> lo, di, up;
    mode_rows(ph, k, lo, di, up);
    const int nu = gr.unknown_rows();
    std::vector<double> rhs(nu, 0.0);
    if (gr.inner) rhs[nu - 1] = -up[nu - 1] * bv;
    else rhs[0] = -lo[0] * bv;
    tridiag_solve(ph.modes[static_cast<std::size_t>(std::abs(k))], rhs);
    std::vector<double> prof(gr.n + 1);
    prof[gr.interface_node()] = bv;
    for (int r = 0; r < nu; ++r) prof[gr.first_unknown() + r] = rhs[r];
    return prof;
  }

  // Discrete residual d_xi G + d_theta H at the unknown nodes, for a full field.
  std::vector<double> apply_operator(const Phase& ph, const PhaseMetric& pm, const std::vector<double>& eta) const {
    std::vector<double> G, H;
    return apply_operator(ph, pm, eta, G, H);
  }

  std::vector<double> apply_operator(const Phase& ph, const PhaseMetric& pm, const std::vector<double>& eta,
                                     std::vector<double>& G, std::vector<double>& dH) const {
    const auto& gr = ph.grid;
    const std::size_t nt = nt_;
    const int n = gr.n;
    const double dx = gr.dxi;
    auto row = [&](const std::vector<double>& f, int i) {
      return std::span<const double>(f.data() + static_cast<std::size_t>(i) * nt, nt);
    };

    std::vector<double> eta_t(eta.size());
    for (int i = 0; i <= n; ++i) {
      auto d = spectral_derivative(row(eta, i), 1);
      std::copy(d.begin(), d.end(), eta_t.begin() + static_cast<std::ptrdiff_t>(i * nt));
    }
    G.assign(static_cast<std::size_t>(n) * nt, 0.0);
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t ih = static_cast<std::size_t>(i) * nt + j;
        const std::size_t i0 = ih, i1 = ih + nt;
        G[ih] = pm.a_half[ih] * (eta[i1] - eta[i0]) / (dx * gr.rho_xi_half[i]) +
                pm.b_half[ih] * 0.5 * (eta_t[i0] + eta_t[i1]);
      }
    dH.assign(eta.size(), 0.0);
    std::vector<double> H(nt);
    for (int i = 0; i <= n; ++i) {
      for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t id = static_cast<std::size_t>(i) * nt + j;
        double exi;
        if (i == 0) exi = (-3.0 * eta[id] + 4.0 * eta[id + nt] - eta[id + 2 * nt]) / (2.0 * dx);
        else if (i == n) exi = (3.0 * eta[id] - 4.0 * eta[id - nt] + eta[id - 2 * nt]) / (2.0 * dx);
        else exi = (eta[id + nt] - eta[id - nt]) / (2.0 * dx);
        H[j] = pm.b_node[id] * exi + pm.c_node[id] * gr.rho_xi[i] * eta_t[id];
      }
      auto d = spectral_derivative(H, 1);
      std::copy(d.begin(), d.end(), dH.begin() + static_cast<std::ptrdiff_t>(i * nt));
    }

    std::vector<double> res(static_cast<std::size_t>(gr.unknown_rows()) * nt);
    for (int r = 0; r < gr.unknown_rows(); ++r) {
      const int i = gr.first_unknown() + r;
      for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t id = static_cast<std::size_t>(i) * nt + j;
        const double gp = i < n ? G[static_cast<std::size_t>(i) * nt + j] : 0.0;
        const double gm = i > 0 ? G[static_cast<std::size_t>(i - 1) * nt + j] : 0.0;
        const double vol = (!gr.inner && i == n) ? 0.5 * dx : dx;
        res[static_cast<std::size_t>(r) * nt + j] = (gp - gm) / vol + dH[id];
      }
    }
    return res;
  }

  std::vector<double> boundary_flux(const Phase& ph, const PhaseMetric& pm, const std::vector<double>& eta) const {
    std::vector<double> G, dH;
    apply_operator(ph, pm, eta, G, dH);
    const auto& gr = ph.grid;
    const std::size_t nt = nt_;
    std::vector<double> out(nt);
    for (std::size_t j = 0; j < nt; ++j) {
      if (gr.inner) {
        const int n = gr.n;
        out[j] = G[static_cast<std::size_t>(n - 1) * nt + j] - 0.5 * gr.dxi * dH[static_cast<std::size_t>(n) * nt + j];
      } else {
        out[j] = G[j] + 0.5 * gr.dxi * dH[j];
      }
    }
    return out;
  }

  Eigen::VectorXd precondition(const Phase& ph, const Eigen::VectorXd& v) const {
    const auto& gr = ph.grid;
    const int nu = gr.unknown_rows();
    const std::size_t nt = nt_;
    std::vector<std::vector<cplx>> spec(nu);
    for (int r = 0; r < nu; ++r)
      spec[r] = detail::forward(std::span<const double>(v.data() + static_cast<std::ptrdiff_t>(r * nt), nt));
    std::vector<cplx> col(nu);
    for (std::size_t idx = 0; idx < nt; ++idx) {
      const int k = wavenumber(idx, nt);
      for (int r = 0; r < nu; ++r) col[r] = spec[r][idx];
      tridiag_solve(ph.modes[static_cast<std::size_t>(std::abs(k))], col);
      for (int r = 0; r < nu; ++r) spec[r][idx] = col[r];
    }
    Eigen::VectorXd out(v.size());
    for (int r = 0; r < nu; ++r) {
      auto x = detail::inverse_real(spec[r]);
      for (std::size_t j = 0; j < nt; ++j) out(static_cast<Eigen::Index>(r * nt + j)) = x[j];
    }
    return out;
  }

  GmresReport solve_phase(const Phase& ph, const PhaseMetric& pm, std::span<const double> dirichlet,
                          std::vector<double>& field) const {
    const auto& gr = ph.grid;
    const std::size_t nt = nt_;
    const int nu = gr.unknown_rows();
    const std::size_t rows = static_cast<std::size_t>(gr.n + 1);
    double mean = 0.0;
    for (double d : dirichlet) mean += d;
    mean /= static_cast<double>(nt);

    field.assign(rows * nt, mean);
    const std::size_t b0 = static_cast<std::size_t>(gr.interface_node()) * nt;
    for (std::size_t j = 0; j < nt; ++j) field[b0 + j] = dirichlet[j];

    auto embed = [&](const Eigen::VectorXd& x, bool with_boundary) {
      std::vector<double> f(rows * nt, 0.0);
      if (with_boundary) f = field;
      for (int r = 0; r < nu; ++r)
        for (std::size_t j = 0; j < nt; ++j)
          f[static_cast<std::size_t>(gr.first_unknown() + r) * nt + j] = x(static_cast<Eigen::Index>(r * nt + j));
      return f;
    };
    auto apply = [&](const Eigen::VectorXd& x) {
      const auto res = apply_operator(ph, pm, embed(x, false));
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(res.data(), static_cast<Eigen::Index>(res.size())));
    };
    const auto r0 = apply_operator(ph, pm, field);
    Eigen::VectorXd b = -Eigen::Map<const Eigen::VectorXd>(r0.data(), static_cast<Eigen::Index>(r0.size()));

    double data_norm = 0.0;
    for (double d : dirichlet) data_norm = std::max(data_norm, std::abs(d));
    // residual scale of a unit boundary layer, so the tolerance is relative to the data
    const double scale = data_norm * gr.rho_half[gr.inner ? gr.n - 1 : 0] /
                         (gr.dxi * gr.dxi * gr.rho_xi_half[gr.inner ? gr.n - 1 : 0]);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nu * nt));
    GmresReport rep;
    if (b.lpNorm<Eigen::Infinity>() > 1e-15 * scale) {
      rep = gmres(apply, [&](const Eigen::VectorXd& v) { return precondition(ph, v); }, b, x, res_.rel_tol);
      if (!rep.converged) {
        std::ostringstream os;
        os << "solve_potential: GMRES stalled at relative residual " << rep.relative_residual << " after "
           << rep.iterations << " iterations";
        throw SolverError(os.str(), 1.0 / std::max(rep.relative_residual, 1e-300));
      }
    } else {
      rep.converged = true;
    }
    for (int r = 0; r < nu; ++r)
      for (std::size_t j = 0; j < nt; ++j)
        field[static_cast<std::size_t>(gr.first_unknown() + r) * nt + j] += x(static_cast<Eigen::Index>(r * nt + j));
    return rep;
  }

  GeometryParams g_;
  std::size_t nt_;
  PotentialResolution res_;
  std::array<Phase, 2> phases_;
};

/// Free-function form: solves the transformed potential problem for (h, dirichlet).
inline TwoPhaseField solve_potential(const HeightField& h, std::span<const double> dirichlet,
                                     const GeometryParams& g, const PotentialResolution& res = {}) {
  return PotentialSolver(g, h.size(), res).solve(h, dirichlet);
}

inline std::vector<double> jump_flux(const HeightField& h, const TwoPhaseField& eta, double m,
                                     const GeometryParams& g) {
  if (!eta.metric) throw std::invalid_argument("jump_flux: potential carries no metric");
  PotentialResolution res;
  res.n_r_inner = eta.metric->inner_grid.n;
  res.n_r_outer = eta.metric->outer_grid.n;
  return PotentialSolver(g, h.size(), res).jump_flux(h, eta, m);
}

/// Decay rate of mode k for the flow linearized at the circle:
/// m sigma (2k/R) (k^2 - 1)/R^2 / (1 + (R/R_outer)^{2k}); zero for k = 0, 1.
inline double ms_symbol(int k, const GeometryParams& g, const PhysParams& phys) {
  if (k < 0) k = -k;
  if (k <= 1) return 0.0;
  const double kk = static_cast<double>(k);
  const double dtn = (2.0 * kk / g.R) / (1.0 + std::pow(g.R / g.R_outer, 2.0 * kk));
  return phys.m * phys.sigma * dtn * (kk * kk - 1.0) / (g.R * g.R);
}

/// Analytic jump factor of the two-phase harmonic extension of cos(k theta):
/// [[d_r eta]] = -(2k/R)/(1 + (R/R_outer)^{2k}) cos(k theta).
inline double dtn_jump_factor(int k, const GeometryParams& g) {
  const double kk = static_cast<double>(std::abs(k));
  return -(2.0 * kk / g.R) / (1.0 + std::pow(g.R / g.R_outer, 2.0 * kk));
}

}  // namespace mssim

#pragma once

// Linearized two-phase Stokes / Mullins-Sekerka operator around the circle,
// one Fourier mode at a time, as the decay-form pencil  lambda M z = L z.
//
// Modal ansatz: u_r = U(r) cos k theta, u_theta = V(r) sin k theta,
// q = Q(r) cos k theta, h = H cos k theta, in each phase. Unknowns are nodal
// values on Chebyshev grids (inner phase: parity-folded grid on [0, R];
// outer phase: Gauss-Lobatto grid on [R, R_outer]) and the height amplitude H.
// The potential is eliminated through the two-phase Dirichlet-to-Neumann
// jump of the Gibbs-Thomson datum eta = sigma (k^2 - 1)/R^2 H.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "refgeom.hpp"

namespace mssim {

namespace detail {

// Chebyshev-Gauss-Lobatto points x_j = cos(pi j / N) and the differentiation matrix.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> chebyshev(int N) {
  Eigen::VectorXd x(N + 1);
  for (int j = 0; j <= N; ++j) x(j) = std::cos(std::numbers::pi * j / N);
  Eigen::VectorXd c(N + 1);
  for (int j = 0; j <= N; ++j) c(j) = ((j == 0 || j == N) ? 2.0 : 1.0) * ((j % 2) ? -1.0 : 1.0);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j)
      if (i != j) D(i, j) = (c(i) / c(j)) / (x(i) - x(j));
  for (int i = 0; i <= N; ++i) D(i, i) = -D.row(i).sum();  // negative sum trick
  return {D, x};
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double p = std::legendre(n, z);
      const double pm = std::legendre(n - 1, z);
      dp = n * (z * p - pm) / (z * z - 1.0);
      const double dz = p / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double p = std::legendre(n, z), pm = std::legendre(n - 1, z);
    dp = n * (z * p - pm) / (z * z - 1.0);
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

// Barycentric interpolation from Chebyshev-Lobatto nodes x_j = cos(pi j/N).
template <class Vec>
inline auto barycentric(const Eigen::VectorXd& xn, const Vec& f, double x) {
  using T = std::decay_t<decltype(f(0))>;
  const Eigen::Index N = xn.size() - 1;
  T num{};
  double den = 0.0;
  for (Eigen::Index j = 0; j <= N; ++j) {
    const double d = x - xn(j);
    if (d == 0.0) return T(f(j));
    double wj = (j % 2) ? -1.0 : 1.0;
    if (j == 0 || j == N) wj *= 0.5;
    num += (wj / d) * f(j);
    den += wj / d;
  }
  return T(num / den);
}

}  // namespace detail

/// Index layout of the modal unknown vector.
struct ModalLayout {
  int n_in = 0, n_out_nodes = 0;  // inner nodes (incl. r = R), outer nodes (incl. both ends)
  int iU = 0, iV = 0, iQ = 0, oU = 0, oV = 0, oQ = 0, iH = 0, size = 0;
};

struct ModalOperatorBlock {
  int k = 0;
  GeometryParams geometry;
  PhysParams physics;
  int n_r = 0;
  ModalLayout layout;
  Eigen::VectorXd x_full;   // inner Chebyshev points on [-1, 1] (unfolded)
  Eigen::MatrixXd D_full;   // inner d/dr on the unfolded grid r = R x
  Eigen::VectorXd x_out;    // outer Chebyshev points, r = R + (R_outer - R)(1 - x)/2
  Eigen::MatrixXd D_out;    // outer d/dr
  Eigen::VectorXd r_in, r_out;
  Eigen::MatrixXd L, M;
  std::vector<std::string> row_labels;

  /// Rows with a nonzero mass entry (dynamic); the rest are constraints.
  std::vector<bool> dynamic_rows() const {
    std::vector<bool> d(static_cast<std::size_t>(M.rows()));
    for (Eigen::Index i = 0; i < M.rows(); ++i) d[static_cast<std::size_t>(i)] = M.row(i).cwiseAbs().sum() > 0.0;
    return d;
  }
  int parity_velocity() const { return (k % 2 == 0) ? -1 : 1; }  // (-1)^{k+1}
  int parity_pressure() const { return (k % 2 == 0) ? 1 : -1; }  // (-1)^k
};

/// Closed-form jump factor of the two-phase harmonic extension (annulus Neumann at R_outer).
inline double modal_dtn(int k, const GeometryParams& g) {
  const double kk = static_cast<double>(k);
  return (2.0 * kk / g.R) / (1.0 + std::pow(g.R / g.R_outer, 2.0 * kk));
}

/// Assembles the decay-form pencil of mode k with n_r Chebyshev intervals per phase.
inline ModalOperatorBlock assemble_modal(int k, const GeometryParams& g, const PhysParams& phys, int n_r = 32) {
  if (k < 0) throw std::invalid_argument("assemble_modal: k must be nonnegative");
  if (n_r < 32) throw std::invalid_argument("assemble_modal: n_r must be at least 32");
  g.validate();
  phys.validate();
  ModalOperatorBlock b;
  b.k = k;
  b.geometry = g;
  b.physics = phys;
  b.n_r = n_r;
  const double R = g.R, Ro = g.R_outer;
  const double kk = static_cast<double>(k);

  // inner: unfolded grid of 2n - 1 intervals on [-R, R]; keep the n nodes with x > 0
  const int ni = n_r;
  const int Nc = 2 * ni - 1;
  auto [Dc, xc] = detail::chebyshev(Nc);
  b.x_full = xc;
  b.D_full = Dc / R;
  const Eigen::MatrixXd D2c = b.D_full * b.D_full;
  auto fold = [&](const Eigen::MatrixXd& A, int p) {
    Eigen::MatrixXd F(ni, ni);
    for (int i = 0; i < ni; ++i)
      for (int j = 0; j < ni; ++j) F(i, j) = A(i, j) + p * A(i, Nc - j);
    return F;
  };
  const Eigen::MatrixXd Di_u = fold(b.D_full, b.parity_velocity());
  const Eigen::MatrixXd D2i_u = fold(D2c, b.parity_velocity());
  const Eigen::MatrixXd Di_q = fold(b.D_full, b.parity_pressure());
  b.r_in = R * xc.head(ni);

  const int no = n_r;
  auto [Do0, xo] = detail::chebyshev(no);
  b.x_out = xo;
  b.D_out = Do0 * (-2.0 / (Ro - R));
  const Eigen::MatrixXd D2o = b.D_out * b.D_out;
  b.r_out = (R + (Ro - R) * (1.0 - xo.array()) / 2.0).matrix();
  const int n1 = no + 1;

  ModalLayout& lay = b.layout;
  lay.n_in = ni;
  lay.n_out_nodes = n1;
  lay.iU = 0;
  lay.iV = ni;
  lay.iQ = 2 * ni;
  lay.oU = 3 * ni;
  lay.oV = 3 * ni + n1;
  lay.oQ = 3 * ni + 2 * n1;
  lay.iH = 3 * ni + 3 * n1;
  lay.size = lay.iH + 1;
  const int N = lay.size;
  b.L = Eigen::MatrixXd::Zero(N, N);
  b.M = Eigen::MatrixXd::Zero(N, N);
  auto& L = b.L;
  auto& M = b.M;
  int row = 0;
  auto next = [&](std::string label) {
    b.row_labels.push_back(std::move(label));
    return row++;
  };

  auto phase = [&](const Eigen::VectorXd& r, const Eigen::MatrixXd& Du, const Eigen::MatrixXd& D2u,
                   const Eigen::MatrixXd& Dq, double mu, int U, int V, int Q, int first, int last, bool outer,
                   const char* name) {
    const int n = static_cast<int>(r.size());
    Eigen::MatrixXd lap = D2u;
    for (int i = 0; i < n; ++i) {
      lap.row(i) += Du.row(i) / r(i);
      lap(i, i) -= kk * kk / (r(i) * r(i));
    }
    // vector Laplacian components: (Delta_k - 1/r^2) U - (2k/r^2) V and (Delta_k - 1/r^2) V - (2k/r^2) U
    auto momentum_r = [&](int a, int i) {
      L.block(a, U, 1, n) += -mu * lap.row(i);
      L(a, U + i) += mu / (r(i) * r(i));
      L(a, V + i) += mu * 2.0 * kk / (r(i) * r(i));
      L.block(a, Q, 1, n) += Dq.row(i);
    };
    for (int i = first; i <= last; ++i) {
      const int a = next(std::string(name) + " radial momentum @" + std::to_string(i));
      M(a, U + i) = 1.0;
      momentum_r(a, i);
      const int c = next(std::string(name) + " azimuthal momentum @" + std::to_string(i));
      M(c, V + i) = 1.0;
      L.block(c, V, 1, n) += -mu * lap.row(i);
      L(c, V + i) += mu / (r(i) * r(i));
      L(c, U + i) += mu * 2.0 * kk / (r(i) * r(i));
      L(c, Q + i) += -kk / r(i);
    }
    for (int i = 0; i < n; ++i) {
      if (outer && k == 0 && i == n - 1) {
        // k = 0: the outer pressure is defined up to a constant
        const int a = next(std::string(name) + " pressure gauge");
        L(a, Q + i) = 1.0;
        continue;
      }
      if (outer && k == 0 && i == 0) {
        // k = 0: divergence at r = R is implied by the others; impose radial momentum at R_outer
        const int a = next(std::string(name) + " radial momentum @wall");
        momentum_r(a, n - 1);
        continue;
      }
      const int a = next(std::string(name) + " divergence @" + std::to_string(i));
      L.block(a, U, 1, n) += Du.row(i);
      L(a, U + i) += 1.0 / r(i);
      L(a, V + i) += kk / r(i);
    }
  };

  phase(b.r_in, Di_u, D2i_u, Di_q, phys.mu_plus, lay.iU, lay.iV, lay.iQ, 1, ni - 1, false, "inner");
  phase(b.r_out, b.D_out, D2o, b.D_out, phys.mu_minus, lay.oU, lay.oV, lay.oQ, 1, n1 - 2, true, "outer");

  const double mup = phys.mu_plus, mum = phys.mu_minus;
  int a = next("no-slip u_r @R_outer");
  L(a, lay.oU + n1 - 1) = 1.0;
  a = next("no-slip u_theta @R_outer");
  L(a, lay.oV + n1 - 1) = 1.0;
  a = next("continuity u_r");
  L(a, lay.iU) = 1.0;
  L(a, lay.oU) = -1.0;
  a = next("continuity u_theta");
  L(a, lay.iV) = 1.0;
  L(a, lay.oV) = -1.0;
  // tangential stress mu (V' - V/r - k U/r) continuous
  a = next("tangential stress");
  L.block(a, lay.oV, 1, n1) += mum * b.D_out.row(0);
  L(a, lay.oV) -= mum / R;
  L(a, lay.oU) -= mum * kk / R;
  L.block(a, lay.iV, 1, ni) -= mup * Di_u.row(0);
  L(a, lay.iV) += mup / R;
  L(a, lay.iU) += mup * kk / R;
  // normal stress: [[2 mu U' - Q]] + sigma A_k H = 0, A_k = (1 - k^2)/R^2
  const double Ak = (1.0 - kk * kk) / (R * R);
  a = next("normal stress");
  L.block(a, lay.oU, 1, n1) += 2.0 * mum * b.D_out.row(0);
  L(a, lay.oQ) -= 1.0;
  L.block(a, lay.iU, 1, ni) -= 2.0 * mup * Di_u.row(0);
  L(a, lay.iQ) += 1.0;
  L(a, lay.iH) = phys.sigma * Ak;
  // height: lambda H = -U(R) + m sigma D_k (k^2 - 1)/R^2 H
  a = next("height");
  M(a, lay.iH) = 1.0;
  L(a, lay.iU) = -1.0;
  L(a, lay.iH) = phys.m * phys.sigma * modal_dtn(k, g) * (kk * kk - 1.0) / (R * R);

  if (row != N) throw std::logic_error("assemble_modal: row count mismatch");

  // reject zero or duplicate rows
  Eigen::MatrixXd LM(N, 2 * N);
  LM << L, M;
  std::vector<Eigen::VectorXd> normalized;
  for (int i = 0; i < N; ++i) {
    const double nr = LM.row(i).norm();
    if (nr == 0.0) throw SolverError("assemble_modal: empty row '" + b.row_labels[static_cast<std::size_t>(i)] + "'", 0.0);
    normalized.push_back(LM.row(i).transpose() / nr);
  }
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      const double d = std::min((normalized[i] - normalized[j]).norm(), (normalized[i] + normalized[j]).norm());
      if (d < 1e-13) {
        std::ostringstream os;
        os << "assemble_modal: duplicate rows '" << b.row_labels[static_cast<std::size_t>(i)] << "' and '"
           << b.row_labels[static_cast<std::size_t>(j)] << "' at k = " << k;
        throw SolverError(os.str(), std::numeric_limits<double>::infinity());
      }
    }
  return b;
}

/// Energy identity for an eigenpair of the decay pencil:
///   lambda ||u||^2 - 2 ||sqrt(mu) D u||^2 - m ||grad eta||^2 - sigma conj(lambda) (A h, h) = 0.
/// Returns |sum| over the largest term, floored by the natural scale of the pair.
struct Qb4Terms {
  std::complex<double> kinetic, viscous, potential, surface;
  double residual = 0.0;
};

inline Qb4Terms qb4_terms(const ModalOperatorBlock& b, std::complex<double> lambda, const Eigen::VectorXcd& z) {
  using C = std::complex<double>;
  const auto& lay = b.layout;
  const auto& g = b.geometry;
  const auto& ph = b.physics;
  const double R = g.R, Ro = g.R_outer, kk = static_cast<double>(b.k);
  const int ni = lay.n_in, n1 = lay.n_out_nodes;
  const int Nc = static_cast<int>(b.x_full.size()) - 1;
  const int pu = b.parity_velocity();

  auto unfold = [&](int off) {
    Eigen::VectorXcd f(Nc + 1);
    for (int j = 0; j < ni; ++j) {
      f(j) = z(off + j);
      f(Nc - j) = static_cast<double>(pu) * z(off + j);
    }
    return f;
  };
  const Eigen::VectorXcd Uf = unfold(lay.iU), Vf = unfold(lay.iV);
  const Eigen::VectorXcd dUf = b.D_full * Uf, dVf = b.D_full * Vf;
  const Eigen::VectorXcd Uo = z.segment(lay.oU, n1), Vo = z.segment(lay.oV, n1);
  const Eigen::VectorXcd dUo = b.D_out * Uo, dVo = b.D_out * Vo;

  const int nq = 3 * b.n_r;
  const auto [gx, gw] = detail::gauss_legendre(nq);
  double uu = 0.0, du_in = 0.0, du_out = 0.0;
  auto accumulate = [&](double r, double w, C U, C V, C dU, C dV, double& du) {
    const C Drr = dU, Dtt = (kk * V + U) / r, Drt = 0.5 * (dV - V / r - kk * U / r);
    uu += w * r * (std::norm(U) + std::norm(V));
    du += w * r * (std::norm(Drr) + std::norm(Dtt) + 2.0 * std::norm(Drt));
  };
  for (int q = 0; q < nq; ++q) {
    // inner: r = R x, x in (0, 1)
    const double x = 0.5 * (gx[q] + 1.0), w = 0.5 * gw[q] * R, r = R * x;
    auto at = [&](const Eigen::VectorXcd& f) { return detail::barycentric(b.x_full, [&](Eigen::Index j) { return f(j); }, x); };
    accumulate(r, w, at(Uf), at(Vf), at(dUf), at(dVf), du_in);
  }
  for (int q = 0; q < nq; ++q) {
    const double r = R + (Ro - R) * 0.5 * (gx[q] + 1.0), w = 0.5 * gw[q] * (Ro - R);
    const double x = 1.0 - 2.0 * (r - R) / (Ro - R);
    auto at = [&](const Eigen::VectorXcd& f) { return detail::barycentric(b.x_out, [&](Eigen::Index j) { return f(j); }, x); };
    accumulate(r, w, at(Uo), at(Vo), at(dUo), at(dVo), du_out);
  }
  const double viscous = ph.mu_plus * du_in + ph.mu_minus * du_out;
  const C H = z(lay.iH);
  const double Ak = (1.0 - kk * kk) / (R * R);
  const double eta2 = std::norm(-ph.sigma * Ak * H);
  const double grad_eta = R * modal_dtn(b.k, g) * eta2;
  const double ah = R * Ak * std::norm(H);

  Qb4Terms t;
  t.kinetic = lambda * uu;
  t.viscous = -2.0 * viscous;
  t.potential = -ph.m * grad_eta;
  t.surface = -ph.sigma * std::conj(lambda) * ah;
  const double largest = std::max({std::abs(t.kinetic), std::abs(t.viscous), std::abs(t.potential), std::abs(t.surface)});
  const double omega = std::max(ph.mu_plus, ph.mu_minus) / (R * R) + ph.sigma * ph.m / (R * R * R);
  const double scale = std::max(largest, (uu + R * std::norm(H)) * omega);
  const double sum = std::abs(t.kinetic + t.viscous + t.potential + t.surface);
  t.residual = scale > 0.0 ? sum / scale : 0.0;
  return t;
}

inline double qb4_residual(const ModalOperatorBlock& b, std::complex<double> lambda, const Eigen::VectorXcd& z) {
  return qb4_terms(b, lambda, z).residual;
}

enum class EigenClass { kernel, stable, anomalous };

inline const char* to_string(EigenClass c) {
  switch (c) {
    case EigenClass::kernel: return "kernel";
    case EigenClass::stable: return "stable";
    default: return "anomalous";
  }
}

struct Eigenpair {
  int k = 0;
  std::complex<double> lambda;
  Eigen::VectorXcd vector;
  double qb4_residual = 0.0;
  double velocity_norm = 0.0;  // max |u| nodal, for a vector normalized to unit max-norm
  int multiplicity = 1;        // 2 for k >= 1 (cos and sin components)
  EigenClass classification = EigenClass::stable;
};

enum class EigenRoute { retained_pressure, eliminated };

/// Finite eigenvalues |lambda| <= 1e8 of one block, sorted by (Re, Im).
/// retained_pressure: dense QZ on (L, M). eliminated: constraints removed by null-space
/// projection and the reduced regular pencil solved; eigenvalues only.
inline std::vector<std::complex<double>> block_eigenvalues(const ModalOperatorBlock& b, EigenRoute route);
inline double rate_scale(const GeometryParams& g, const PhysParams& p);

namespace detail {

inline Eigen::MatrixXd null_space(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(A.rows(), A.cols())) * std::numeric_limits<double>::epsilon() *
                     (s.size() ? s(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++rank;
  return svd.matrixV().rightCols(A.cols() - rank);
}

// Row equilibration of the pencil (same factor on L and M); eigenpairs are unchanged.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> equilibrated(const Eigen::MatrixXd& L, const Eigen::MatrixXd& M) {
  Eigen::MatrixXd Ls = L, Ms = M;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double n = L.row(i).norm();
    Ls.row(i) /= n;
    Ms.row(i) /= n;
  }
  return {Ls, Ms};
}

// Equilibrated pencil (L - shift M, M) on which real QZ converges; its eigenvalues are
// lambda - shift. The probe runs values-only QZ, whose iteration is the one the full
// solver repeats, so success here means success there.
struct ShiftedPencil {
  Eigen::MatrixXd L, M;
  double shift = 0.0;
};

inline ShiftedPencil convergent_pencil(const Eigen::MatrixXd& L, const Eigen::MatrixXd& M, double scale, int k) {
  for (double f : {0.0, 0.37, -1.3, 2.9}) {
    auto [Ls, Ms] = equilibrated(L - (f * scale) * M, M);
    Eigen::RealQZ<Eigen::MatrixXd> qz(Ls.rows());
    qz.compute(Ls, Ms, false);
    if (qz.info() == Eigen::Success) return {std::move(Ls), std::move(Ms), f * scale};
  }
  throw SolverError("eigen: QZ did not converge at k = " + std::to_string(k) + " for any trial shift", 0.0);
}

inline bool finite_eigenvalue(std::complex<double> l) {
  return std::isfinite(l.real()) && std::isfinite(l.imag()) && std::abs(l) <= 1e8;
}

inline void sort_spectrum(std::vector<std::complex<double>>& v) {
  std::sort(v.begin(), v.end(), [](auto a, auto b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
}

}  // namespace detail

inline std::vector<std::complex<double>> block_eigenvalues(const ModalOperatorBlock& b, EigenRoute route) {
  std::vector<std::complex<double>> out;
  if (route == EigenRoute::retained_pressure) {
    const auto pen = detail::convergent_pencil(b.L, b.M, rate_scale(b.geometry, b.physics), b.k);
    Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(pen.L, pen.M, false);
    const auto al = ges.alphas();
    const auto be = ges.betas();
    for (Eigen::Index i = 0; i < al.size(); ++i) {
      if (be(i) == 0.0) continue;
      const std::complex<double> l = al(i) / be(i) + pen.shift;
      if (detail::finite_eigenvalue(l)) out.push_back(l);
    }
  } else {
    const auto dyn = b.dynamic_rows();
    std::vector<Eigen::Index> di, ci;
    for (std::size_t i = 0; i < dyn.size(); ++i) (dyn[i] ? di : ci).push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd C(static_cast<Eigen::Index>(ci.size()), b.L.cols());
    for (std::size_t i = 0; i < ci.size(); ++i) C.row(static_cast<Eigen::Index>(i)) = b.L.row(ci[i]) / b.L.row(ci[i]).norm();
    const Eigen::MatrixXd Z = detail::null_space(C);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(di.size()), Z.cols()), B(A.rows(), Z.cols());
    for (std::size_t i = 0; i < di.size(); ++i) {
      A.row(static_cast<Eigen::Index>(i)) = b.L.row(di[i]) * Z;
      B.row(static_cast<Eigen::Index>(i)) = b.M.row(di[i]) * Z;
    }
    const Eigen::MatrixXd NB = detail::null_space(B);
    Eigen::MatrixXd A2 = A, B2 = B;
    if (NB.cols() > 0) {
      const Eigen::MatrixXd Y = detail::null_space((A * NB).transpose());
      const Eigen::MatrixXd V1 = detail::null_space(NB.transpose());
      A2 = Y.transpose() * A * V1;
      B2 = Y.transpose() * B * V1;
    }
    if (A2.rows() != A2.cols())
      throw SolverError("eigen: eliminated pencil is not square at k = " + std::to_string(b.k), 0.0);
    Eigen::EigenSolver<Eigen::MatrixXd> es(B2.fullPivLu().solve(A2), false);
    if (es.info() != Eigen::Success) throw SolverError("eigen: reduced eigensolve failed at k = " + std::to_string(b.k), 0.0);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const auto l = es.eigenvalues()(i);
      if (detail::finite_eigenvalue(l)) out.push_back(l);
    }
  }
  detail::sort_spectrum(out);
  return out;
}

/// Natural rate scale of the problem, used for relative thresholds.
inline double rate_scale(const GeometryParams& g, const PhysParams& p) {
  return std::max(p.mu_plus, p.mu_minus) / (g.R * g.R) + p.sigma * p.m / (g.R * g.R * g.R);
}

/// Leading eigenpairs of one block (at most n_report, extended to keep conjugate pairs).
inline std::vector<Eigenpair> eigen(const ModalOperatorBlock& b, int n_report = 10) {
  const auto pen = detail::convergent_pencil(b.L, b.M, rate_scale(b.geometry, b.physics), b.k);
  Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(pen.L, pen.M, true);
  const auto al = ges.alphas();
  const auto be = ges.betas();
  const Eigen::MatrixXcd vecs = ges.eigenvectors();
  std::vector<Eigenpair> all;
  for (Eigen::Index i = 0; i < al.size(); ++i) {
    if (be(i) == 0.0) continue;
    const std::complex<double> l = al(i) / be(i) + pen.shift;
    if (!detail::finite_eigenvalue(l)) continue;
    Eigenpair e;
    e.k = b.k;
    e.lambda = l;
    e.vector = vecs.col(i);
    all.push_back(std::move(e));
  }
  std::sort(all.begin(), all.end(), [](const Eigenpair& a, const Eigenpair& c) {
    return a.lambda.real() != c.lambda.real() ? a.lambda.real() < c.lambda.real() : a.lambda.imag() < c.lambda.imag();
  });
  std::size_t keep = std::min<std::size_t>(all.size(), static_cast<std::size_t>(std::max(n_report, 0)));
  while (keep < all.size() && keep > 0 && all[keep - 1].lambda.imag() != 0.0 &&
         std::abs(all[keep].lambda - std::conj(all[keep - 1].lambda)) <= 1e-8 * std::abs(all[keep].lambda))
    ++keep;
  all.resize(keep);

  const auto& lay = b.layout;
  for (auto& e : all) {
    // unit max-norm with a real largest entry
    Eigen::Index imax = 0;
    e.vector.cwiseAbs().maxCoeff(&imax);
    e.vector /= e.vector(imax);
    e.qb4_residual = qb4_residual(b, e.lambda, e.vector);
    double vn = 0.0;
    for (int j = 0; j < lay.n_in; ++j) vn = std::max({vn, std::abs(e.vector(lay.iU + j)), std::abs(e.vector(lay.iV + j))});
    for (int j = 0; j < lay.n_out_nodes; ++j)
      vn = std::max({vn, std::abs(e.vector(lay.oU + j)), std::abs(e.vector(lay.oV + j))});
    e.velocity_norm = vn;
    e.multiplicity = b.k == 0 ? 1 : 2;
  }
  return all;
}

struct SpectrumResult {
  std::vector<Eigenpair> pairs;     // sorted by (k, Re, Im)
  double gap = 0.0;                 // smallest Re lambda among non-kernel eigenvalues
  int gap_mode = -1;
  double kernel_tolerance = 0.0;    // 1e-6 gap
  double kernel_floor = 0.0;        // |lambda| below this is not a gap candidate
  int kernel_count = 0;             // with multiplicity
  int anomalous_count = 0;
  std::vector<std::string> failures;  // per-mode eigensolve failures
};

/// Coupled spectrum over modes k_min..k_max with classification.
inline SpectrumResult spectrum(const GeometryParams& g, const PhysParams& phys, int k_min, int k_max, int n_r = 32,
                               int n_report = 10) {
  SpectrumResult out;
  out.kernel_floor = 1e-8 * rate_scale(g, phys);
  for (int k = k_min; k <= k_max; ++k) {
    try {
      auto pairs = eigen(assemble_modal(k, g, phys, n_r), n_report);
      for (auto& p : pairs) out.pairs.push_back(std::move(p));
    } catch (const std::exception& e) {
      out.failures.push_back("k=" + std::to_string(k) + ": " + e.what());
    }
  }
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& p : out.pairs)
    if (std::abs(p.lambda) > out.kernel_floor && p.lambda.real() < gap) {
      gap = p.lambda.real();
      out.gap_mode = p.k;
    }
  out.gap = gap;
  out.kernel_tolerance = 1e-6 * gap;
  for (auto& p : out.pairs) {
    if (std::abs(p.lambda) <= out.kernel_tolerance) {
      p.classification = EigenClass::kernel;
      out.kernel_count += p.multiplicity;
    } else if (p.lambda.real() > 0.0) {
      p.classification = EigenClass::stable;
    } else {
      p.classification = EigenClass::anomalous;
      out.anomalous_count += p.multiplicity;
    }
  }
  return out;
}

struct GapResult {
  double rate = 0.0;
  int mode = -1;
};

/// Smallest positive real part over k = 0..k_max.
inline GapResult spectral_gap(const GeometryParams& g, const PhysParams& phys, int k_max, int n_r = 32) {
  if (k_max < 2) throw std::invalid_argument("spectral_gap: k_max must be at least 2");
  const auto s = spectrum(g, phys, 0, k_max, n_r, 4);
  return {s.gap, s.gap_mode};
}

struct SemisimplicityReport {
  int k = 0;
  int algebraic = 0;        // eigenvalues with |lambda| <= tolerance
  int geometric = 0;        // dim ker L
  double min_abs_lambda = 0.0;
  double jordan_residual = 0.0;  // min over kernel vectors of min_z |L z - M z0| / |M z0|
  bool semisimple = false;
};

/// Zero-eigenvalue structure of one block: multiplicities and the solvability of
/// L z = M z0 for kernel vectors z0 (a solution would be a Jordan chain).
inline SemisimplicityReport semisimplicity_check(const ModalOperatorBlock& b, double tolerance,
                                                 double jordan_threshold = 1e-9) {
  SemisimplicityReport rep;
  rep.k = b.k;
  const auto ev = block_eigenvalues(b, EigenRoute::retained_pressure);
  rep.min_abs_lambda = std::numeric_limits<double>::infinity();
  for (auto l : ev) {
    rep.min_abs_lambda = std::min(rep.min_abs_lambda, std::abs(l));
    if (std::abs(l) <= tolerance) ++rep.algebraic;
  }
  Eigen::MatrixXd Ln = b.L;
  for (Eigen::Index i = 0; i < Ln.rows(); ++i) Ln.row(i) /= Ln.row(i).norm();
  const Eigen::MatrixXd ker = detail::null_space(Ln);
  rep.geometric = static_cast<int>(ker.cols());
  rep.jordan_residual = std::numeric_limits<double>::infinity();
  if (ker.cols() > 0) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Ln);
    for (Eigen::Index c = 0; c < ker.cols(); ++c) {
      Eigen::VectorXd rhs = b.M * ker.col(c);
      for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs(i) /= b.L.row(i).norm();
      const double nr = rhs.norm();
      if (nr == 0.0) continue;
      const Eigen::VectorXd z = cod.solve(rhs);
      rep.jordan_residual = std::min(rep.jordan_residual, (Ln * z - rhs).norm() / nr);
    }
  }
  rep.semisimple = rep.algebraic == rep.geometric && (rep.geometric == 0 || rep.jordan_residual >= jordan_threshold);
  return rep;
}

struct LimitPrediction {
  std::array<double, 3> y{};  // radius change, center
  double distance = 0.0;      // ||h_terminal - d(y)||_inf
  bool converged = false;
};

/// Equilibrium predicted for a run: radius from the initial enclosed area, center
/// from the centroid of the terminal interface. Flags runs not within `tol` of it.
inline LimitPrediction predicted_limit(const HeightField& h0, const HeightField& h_terminal, const GeometryParams& g,
                                       double tol = 1e-6) {
  LimitPrediction p;
  p.y[0] = std::sqrt(enclosed_area(h0, g) / std::numbers::pi) - g.R;
  const auto c = enclosed_centroid(h_terminal, g);
  p.y[1] = c[0];
  p.y[2] = c[1];
  try {
    const auto eq = equilibrium_height(p.y[0], p.y[1], p.y[2], g, h_terminal.size());
    p.distance = (h_terminal - eq).sup_norm();
  } catch (const InadmissibleHeight&) {
    p.distance = std::numeric_limits<double>::infinity();
  }
  p.converged = p.distance <= tol;
  return p;
}

}  // namespace mssim

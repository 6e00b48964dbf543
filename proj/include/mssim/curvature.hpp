#pragma once

// Curvature of the graph interface Gamma_h over S_R and its quasilinear
// splitting K(h) = P(h) h + Q(h), built from the local-coordinate metric of
// the parametrization X(theta, r) = (R + r)(cos theta, sin theta).

#include <cmath>
#include <vector>

#include "fourier.hpp"
#include "refgeom.hpp"

namespace mssim {

struct CurvatureField {
  std::vector<double> values;
  bool underresolved = false;  // spectral tail above n/3 carries more than 1e-10 of the energy
};

/// True when the modes |k| > n/3 hold more than `rel` of the (non-mean) energy of h.
inline bool spectrally_underresolved(const HeightField& h, double rel = 1e-10) {
  const auto& c = h.coeffs();
  const std::size_t n = h.size();
  double total = 0.0, tail = 0.0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    const double e = std::norm(c[k]);
    total += e;
    if (3 * k > n) tail += e;
  }
  return total > 0.0 && tail > rel * total;
}

/// Mean curvature H_h o theta_h, positive for the circle (K(0) = 1/R).
/// Evaluated from the Cartesian curve theta -> (R + h)(cos, sin).
inline CurvatureField curvature(const HeightField& h, const GeometryParams& g) {
  require_admissible(h, g);
  const auto d1 = h.derivative(1);
  const auto d2 = h.derivative(2);
  CurvatureField out;
  out.values.resize(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double th = h.theta(j);
    const double c = std::cos(th), s = std::sin(th);
    const double r = g.R + h[j];
    const double xp = d1[j] * c - r * s;
    const double yp = d1[j] * s + r * c;
    const double xpp = d2[j] * c - 2.0 * d1[j] * s - r * c;
    const double ypp = d2[j] * s + 2.0 * d1[j] * c - r * s;
    out.values[j] = (xp * ypp - yp * xpp) / std::pow(xp * xp + yp * yp, 1.5);
  }
  out.underresolved = spectrally_underresolved(h);
  return out;
}

/// Coefficient fields of K(rho) = P(rho) rho + Q(rho) with one surface coordinate.
/// P(rho) v = p11 v'' + p1 v',  Q(rho) = q.
struct CurvatureDecomposition {
  std::vector<double> w11;       // metric w_11 = X_theta . X_theta
  std::vector<double> w11_inv;   // w^11
  std::vector<double> l_rho;     // sqrt(1 + w^11 rho'^2)
  std::vector<double> gamma_1_11;  // Christoffel Gamma^1_11
  std::vector<double> gamma_n_11;  // Gamma^n_11 = X_thth . X_r
  std::vector<double> gamma_1_n1;  // Gamma^1_n1 = w^11 X_thr . X_theta
  std::vector<double> p11, p1, q;
  bool underresolved = false;

  std::vector<double> apply_P(const HeightField& v) const {
    const auto d1 = v.derivative(1);
    const auto d2 = v.derivative(2);
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = p11[j] * d2[j] + p1[j] * d1[j];
    return out;
  }

  /// P(h) h + Q(h), nodally.
  std::vector<double> assemble(const HeightField& h) const {
    auto out = apply_P(h);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += q[j];
    return out;
  }
};

namespace detail {

// Partial derivatives of X(theta, r) = (R + r)(cos theta, sin theta).
struct PolarChart {
  double R;
  Vec2 d_theta(double th, double r) const { return {-(R + r) * std::sin(th), (R + r) * std::cos(th)}; }
  Vec2 d_r(double th, double) const { return {std::cos(th), std::sin(th)}; }
  Vec2 d_theta_theta(double th, double r) const { return {-(R + r) * std::cos(th), -(R + r) * std::sin(th)}; }
  Vec2 d_theta_r(double th, double) const { return {-std::sin(th), std::cos(th)}; }
};

inline double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

}  // namespace detail

inline CurvatureDecomposition curvature_decomposition(const HeightField& h, const GeometryParams& g) {
  require_admissible(h, g);
  const detail::PolarChart X{g.R};
  const auto dh = h.derivative(1);
  const std::size_t n = h.size();
  CurvatureDecomposition cd;
  for (auto* f : {&cd.w11, &cd.w11_inv, &cd.l_rho, &cd.gamma_1_11, &cd.gamma_n_11, &cd.gamma_1_n1, &cd.p11,
                  &cd.p1, &cd.q})
    f->resize(n);

  for (std::size_t j = 0; j < n; ++j) {
    const double th = h.theta(j), r = h[j], rp = dh[j];
    const Vec2 xt = X.d_theta(th, r), xr = X.d_r(th, r);
    const Vec2 xtt = X.d_theta_theta(th, r), xtr = X.d_theta_r(th, r);

    const double w = detail::dot(xt, xt);
    const double wi = 1.0 / w;
    const double g1_11 = wi * detail::dot(xtt, xt);
    const double gn_11 = detail::dot(xtt, xr);
    const double g1_n1 = wi * detail::dot(xtr, xt);
    const double l = std::sqrt(1.0 + wi * rp * rp);
    const double l2 = l * l, l3 = l2 * l;

    cd.w11[j] = w;
    cd.w11_inv[j] = wi;
    cd.l_rho[j] = l;
    cd.gamma_1_11[j] = g1_11;
    cd.gamma_n_11[j] = gn_11;
    cd.gamma_1_n1[j] = g1_n1;
    cd.p11[j] = (-l2 * wi + wi * wi * rp * rp) / l3;
    cd.p1[j] = (l2 * wi * g1_11 + wi * wi * gn_11 * rp + 2.0 * wi * g1_n1 * rp - wi * wi * g1_11 * rp * rp) / l3;
    cd.q[j] = -wi * gn_11 / l;
  }
  cd.underresolved = spectrally_underresolved(h);
  return cd;
}

/// Symbol of DK(0) on the Fourier mode k: (k^2 - 1)/R^2.
inline double dk0_symbol(int k, const GeometryParams& g) {
  const double kk = static_cast<double>(k);
  return (kk * kk - 1.0) / (g.R * g.R);
}

/// Central-difference directional derivative of the curvature at h = 0.
inline std::vector<double> dk0_apply_fd(const HeightField& dir, const GeometryParams& g, double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw std::invalid_argument("dk0_apply_fd: step outside [1e-7, 1e-3]");
  const auto plus = curvature(step * dir, g).values;
  const auto minus = curvature((-step) * dir, g).values;
  std::vector<double> out(dir.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (plus[j] - minus[j]) / (2.0 * step);
  return out;
}

}  // namespace mssim

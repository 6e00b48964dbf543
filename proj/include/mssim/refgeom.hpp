#pragma once

// Reference geometry: concentric disk/annulus around the circle S_R, the
// cutoff profile, the Hanzawa transform and interface measurements.

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "errors.hpp"
#include "fourier.hpp"

namespace mssim {

using Vec2 = std::array<double, 2>;

struct GeometryParams {
  double R = 1.0;        // reference circle radius
  double R_outer = 2.0;  // outer boundary radius
  double a = 0.3;        // admissible height band

  /// Operations accept heights with sup-norm up to a - margin().
  double margin() const noexcept { return 1e-3 * a; }
  double max_height() const noexcept { return a - margin(); }

  void validate() const {
    if (!(R > 0.0)) throw ConfigError("geometry.R", "must be positive");
    if (!(R_outer > R)) throw ConfigError("geometry.R_outer", "must exceed R");
    if (!(a > 0.0)) throw ConfigError("geometry.a", "must be positive");
    if (!(3.0 * a < std::min(R_outer - R, R)))
      throw ConfigError("geometry.a", "band constraint 3a < min(R_outer - R, R) violated");
  }
};

struct PhysParams {
  double sigma = 1.0;     // surface tension
  double m = 1.0;         // mobility
  double mu_plus = 1.0;   // viscosity of the inner phase
  double mu_minus = 2.0;  // viscosity of the outer phase

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("physics.sigma", "must be positive");
    if (!(m > 0.0)) throw ConfigError("physics.m", "must be positive");
    if (!(mu_plus > 0.0)) throw ConfigError("physics.mu_plus", "must be positive");
    if (!(mu_minus > 0.0)) throw ConfigError("physics.mu_minus", "must be positive");
  }
};

inline void require_admissible(const HeightField& h, const GeometryParams& g) {
  const double sup = h.sup_norm();
  if (!(sup <= g.max_height())) {
    std::ostringstream os;
    os << "inadmissible height: sup|h| = " << sup << " exceeds a - eps = " << g.max_height();
    throw InadmissibleHeight(os.str(), sup);
  }
}

/// Smooth cutoff chi: 1 on |s| < 1/3, 0 on |s| > 2/3, |chi'| <= 3.75.
/// The transition is the normalized integral of a plateau bump whose ramps
/// are the classical exp(-1/x) smooth step.
class CutoffProfile {
 public:
  static constexpr double ramp = 0.2;  // ramp width of the bump, in transition units

  static double value(double s) {
    const double t = 2.0 - 3.0 * std::abs(s);  // 0 at |s| = 2/3, 1 at |s| = 1/3
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return transition(t);
  }

  static double derivative(double s) {
    const double t = 2.0 - 3.0 * std::abs(s);
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double sign = s > 0.0 ? -1.0 : 1.0;
    return sign * 3.0 * bump(t) / (1.0 - ramp);
  }

 private:
  static double smooth_step(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double f0 = std::exp(-1.0 / x);
    const double f1 = std::exp(-1.0 / (1.0 - x));
    return f0 / (f0 + f1);
  }

  static double bump(double t) { return smooth_step(t / ramp) * smooth_step((1.0 - t) / ramp); }

  // int_0^x smooth_step
  static double step_integral(double x) {
    if (x <= 0.0) return 0.0;
    const double upper = std::min(x, 1.0);
    const double half = 0.5 * upper;
    auto f = [](double y) { return smooth_step(y); };
    double v = boost::math::quadrature::gauss<double, 30>::integrate(f, 0.0, half) +
               boost::math::quadrature::gauss<double, 30>::integrate(f, half, upper);
    if (x > 1.0) v += x - 1.0;
    return v;
  }

  // normalized int_0^t bump; total mass of the bump is 1 - ramp
  static double transition(double t) {
    double v;
    if (t <= ramp) {
      v = ramp * step_integral(t / ramp);
    } else if (t <= 1.0 - ramp) {
      v = 0.5 * ramp + (t - ramp);
    } else {
      v = (1.0 - ramp) - ramp * step_integral((1.0 - t) / ramp);
    }
    return v / (1.0 - ramp);
  }
};

/// Theta_h(x) = x + chi(d(x)/(4a)) h(Pi(x)) nu(Pi(x)).
inline Vec2 hanzawa_map(const HeightField& h, const GeometryParams& g, const Vec2& x) {
  require_admissible(h, g);
  const double rho = std::hypot(x[0], x[1]);
  if (rho > g.R_outer * (1.0 + 1e-14)) throw std::domain_error("hanzawa_map: point outside the domain");
  if (rho == 0.0) return x;
  const double chi = CutoffProfile::value((rho - g.R) / (4.0 * g.a));
  if (chi == 0.0) return x;
  const double theta = std::atan2(x[1], x[0]);
  const double shift = chi * h.evaluate(theta);
  return {x[0] + shift * x[0] / rho, x[1] + shift * x[1] / rho};
}

/// theta_h on the reference circle: the interface point over node j.
inline Vec2 interface_point(const HeightField& h, const GeometryParams& g, std::size_t j) {
  const double r = g.R + h[j];
  return {r * std::cos(h.theta(j)), r * std::sin(h.theta(j))};
}

/// |d Gamma_h / d theta| at the nodes.
inline std::vector<double> arclength_density(const HeightField& h, const GeometryParams& g) {
  const auto dh = h.derivative(1);
  std::vector<double> out(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) out[j] = std::hypot(g.R + h[j], dh[j]);
  return out;
}

/// Unit outward normal of Gamma_h at each node.
inline std::vector<Vec2> interface_normal(const HeightField& h, const GeometryParams& g) {
  require_admissible(h, g);
  const auto dh = h.derivative(1);
  std::vector<Vec2> nu(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double r = g.R + h[j];
    const double c = std::cos(h.theta(j));
    const double s = std::sin(h.theta(j));
    // r e_r - r' e_theta, normalized
    const double nx = r * c + dh[j] * s;
    const double ny = r * s - dh[j] * c;
    const double len = std::hypot(nx, ny);
    nu[j] = {nx / len, ny / len};
  }
  return nu;
}

inline double enclosed_area(const HeightField& h, const GeometryParams& g) {
  require_admissible(h, g);
  double s = 0.0;
  for (double v : h.values()) s += (g.R + v) * (g.R + v);
  return 0.5 * s * 2.0 * std::numbers::pi / static_cast<double>(h.size());
}

inline double perimeter(const HeightField& h, const GeometryParams& g) {
  require_admissible(h, g);
  double s = 0.0;
  for (double v : arclength_density(h, g)) s += v;
  return s * 2.0 * std::numbers::pi / static_cast<double>(h.size());
}

/// Centroid of the region enclosed by Gamma_h.
inline Vec2 enclosed_centroid(const HeightField& h, const GeometryParams& g) {
  const double area = enclosed_area(h, g);
  double mx = 0.0, my = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double r3 = std::pow(g.R + h[j], 3) / 3.0;
    mx += r3 * std::cos(h.theta(j));
    my += r3 * std::sin(h.theta(j));
  }
  const double w = 2.0 * std::numbers::pi / static_cast<double>(h.size());
  return {mx * w / area, my * w / area};
}

/// Exact height over S_R of the circle with center (y1, y2) and radius R + y0.
inline HeightField equilibrium_height(double y0, double y1, double y2, const GeometryParams& g,
                                      std::size_t n_theta) {
  const double rad = g.R + y0;
  auto h = HeightField::sample(n_theta, [&](double th) {
    const double proj = y1 * std::cos(th) + y2 * std::sin(th);
    return proj - g.R + std::sqrt(proj * proj + rad * rad - y1 * y1 - y2 * y2);
  });
  const double sup = h.sup_norm();
  if (!(sup <= g.max_height())) {
    std::ostringstream os;
    os << "equilibrium_height: attained sup|d(y)| = " << sup << " exceeds a - eps = " << g.max_height();
    throw InadmissibleHeight(os.str(), sup);
  }
  return h;
}

/// Y_0 = 1, Y_1 = cos, Y_2 = sin: tangent directions of the circle manifold at S_R.
inline std::array<HeightField, 3> tangent_basis_kernel(const GeometryParams&, std::size_t n_theta) {
  return {HeightField::sample(n_theta, [](double) { return 1.0; }),
          HeightField::sample(n_theta, [](double t) { return std::cos(t); }),
          HeightField::sample(n_theta, [](double t) { return std::sin(t); })};
}

/// Discrete L2(Sigma) inner product (arclength R dtheta).
inline double inner_product(const HeightField& u, const HeightField& v, const GeometryParams& g) {
  double s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) s += u[j] * v[j];
  return s * g.R * 2.0 * std::numbers::pi / static_cast<double>(u.size());
}

}  // namespace mssim

#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <random>

#include "mssim/linstab.hpp"
#include "mssim/potential.hpp"

using namespace mssim;

namespace {

PhysParams viscous_limit(double factor) {
  PhysParams p;
  p.mu_plus *= factor;
  p.mu_minus *= factor;
  return p;
}

std::complex<double> leading(const ModalOperatorBlock& b) {
  const auto pairs = eigen(b, 6);
  for (const auto& e : pairs)
    if (std::abs(e.lambda) > 1e-8 * rate_scale(b.geometry, b.physics)) return e.lambda;
  return {};
}

std::vector<std::complex<double>> smallest(std::vector<std::complex<double>> v, std::size_t n) {
  std::sort(v.begin(), v.end(), [](auto a, auto b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  v.resize(std::min(n, v.size()));
  return v;
}

}  // namespace

TEST(Chebyshev, DifferentiatesPolynomialsExactly) {
  const auto [D, x] = detail::chebyshev(12);
  Eigen::VectorXd f(13), df(13);
  for (int j = 0; j <= 12; ++j) {
    f(j) = std::pow(x(j), 7) - 2 * x(j) * x(j);
    df(j) = 7 * std::pow(x(j), 6) - 4 * x(j);
  }
  EXPECT_LT((D * f - df).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(GaussLegendre, AgreesWithAReferenceRule) {
  const auto [x, w] = detail::gauss_legendre(20);
  auto f = [](double t) { return std::exp(t) * std::cos(3 * t); };
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(x[i]);
  const double ref = boost::math::quadrature::gauss<double, 30>::integrate(f, -1.0, 1.0);
  EXPECT_NEAR(s, ref, 1e-14);
  double p = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) p += w[i] * std::pow(x[i], 38);
  EXPECT_NEAR(p, 2.0 / 39.0, 1e-14);
}

TEST(Barycentric, InterpolatesPolynomials) {
  const auto [D, x] = detail::chebyshev(10);
  Eigen::VectorXd f(11);
  for (int j = 0; j <= 10; ++j) f(j) = std::pow(x(j), 5) + x(j);
  for (double t : {-0.77, 0.1, 0.93}) {
    const double v = detail::barycentric(x, [&](Eigen::Index j) { return f(j); }, t);
    EXPECT_NEAR(v, std::pow(t, 5) + t, 1e-13);
  }
}

TEST(Assembly, ShapesAndGuards) {
  const GeometryParams g;
  const PhysParams p;
  const auto b = assemble_modal(3, g, p, 32);
  EXPECT_EQ(b.L.rows(), b.L.cols());
  EXPECT_EQ(b.M.rows(), b.L.rows());
  EXPECT_EQ(static_cast<Eigen::Index>(b.row_labels.size()), b.L.rows());
  EXPECT_EQ(b.layout.size, b.L.rows());
  EXPECT_THROW(assemble_modal(3, g, p, 16), std::invalid_argument);
  EXPECT_THROW(assemble_modal(-1, g, p, 32), std::invalid_argument);
}

TEST(Eigen, ConjugateClosure) {
  const GeometryParams g;
  const PhysParams p;
  const auto pairs = eigen(assemble_modal(5, g, p, 32), 12);
  for (const auto& e : pairs) {
    if (e.lambda.imag() == 0.0) continue;
    bool found = false;
    for (const auto& f : pairs) found = found || std::abs(f.lambda - std::conj(e.lambda)) <= 1e-8 * std::abs(e.lambda);
    EXPECT_TRUE(found) << e.lambda;
  }
}

TEST(Eigen, RoutesAgree) {
  const GeometryParams g;
  const PhysParams p;
  for (int k = 0; k <= 4; ++k) {
    const auto b = assemble_modal(k, g, p, 32);
    const auto a = smallest(block_eigenvalues(b, EigenRoute::retained_pressure), 6);
    const auto c = smallest(block_eigenvalues(b, EigenRoute::eliminated), 6);
    ASSERT_EQ(a.size(), c.size());
    const double scale = rate_scale(g, p);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(std::abs(a[i] - c[i]), 1e-8 * std::max(scale, std::abs(a[i]))) << k;
  }
}

TEST(Eigen, Qb4HoldsForReportedPairsAndFailsForRandomVectors) {
  const GeometryParams g;
  const PhysParams p;
  for (int k = 0; k <= 6; ++k) {
    const auto b = assemble_modal(k, g, p, 32);
    const auto pairs = eigen(b, 10);
    for (const auto& e : pairs) EXPECT_LE(e.qb4_residual, 1e-8) << "k=" << k << " lambda=" << e.lambda;
    std::mt19937_64 rng(k + 1);
    std::normal_distribution<double> nd;
    Eigen::VectorXcd z(b.L.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = {nd(rng), nd(rng)};
    EXPECT_GE(qb4_residual(b, pairs.back().lambda, z), 1e-2);
  }
}

TEST(Spectrum, KernelAndGapAtDefaults) {
  const GeometryParams g;
  const PhysParams p;
  const auto s = spectrum(g, p, 0, 8, 32, 10);
  EXPECT_TRUE(s.failures.empty());
  EXPECT_EQ(s.kernel_count, 3);
  EXPECT_EQ(s.anomalous_count, 0);
  EXPECT_GT(s.gap, 0.0);
  double min_re = 1e300;
  for (const auto& e : s.pairs)
    if (e.classification != EigenClass::kernel) min_re = std::min(min_re, e.lambda.real());
  EXPECT_EQ(s.gap, min_re);
  for (const auto& e : s.pairs)
    if (e.classification == EigenClass::kernel) {
      EXPECT_LE(e.k, 1);
      EXPECT_LE(e.velocity_norm, 1e-10);
    }
  const auto gap = spectral_gap(g, p, 8, 32);
  EXPECT_NEAR(gap.rate, s.gap, 1e-10 * s.gap);
  EXPECT_THROW(spectral_gap(g, p, 1), std::invalid_argument);
}

TEST(Spectrum, InterfaceModeApproachesTheSymbolAsViscosityGrows) {
  const GeometryParams g;
  for (int k = 2; k <= 4; ++k) {
    double prev = 1e300;
    for (double f : {1e2, 1e3, 1e4}) {
      const auto p = viscous_limit(f);
      const double err = std::abs(leading(assemble_modal(k, g, p, 32)).real() - ms_symbol(k, g, p));
      EXPECT_LT(err, prev) << "k=" << k << " factor=" << f;
      prev = err;
    }
  }
}

TEST(Spectrum, LargeViscosityRecoversTheInterfaceSymbol) {
  const GeometryParams g;
  const auto p = viscous_limit(1e4);
  for (int k = 2; k <= 6; ++k) {
    const auto l = leading(assemble_modal(k, g, p, 32));
    EXPECT_NEAR(l.real() / ms_symbol(k, g, p), 1.0, 0.01) << k;
    EXPECT_NEAR(l.imag(), 0.0, 1e-6 * l.real());
  }
}

TEST(Spectrum, RefinementStable) {
  const GeometryParams g;
  const PhysParams p;
  for (int k : {2, 3}) {
    const auto a = eigen(assemble_modal(k, g, p, 64), 3);
    const auto c = eigen(assemble_modal(k, g, p, 128), 3);
    for (std::size_t i = 0; i < 3; ++i)
      EXPECT_LE(std::abs(a[i].lambda - c[i].lambda), 1e-4 * std::abs(c[i].lambda)) << k;
  }
}

TEST(Semisimplicity, ZeroEigenvaluesHaveNoJordanChains) {
  const GeometryParams g;
  const PhysParams p;
  const double tol = 1e-6 * spectral_gap(g, p, 8, 32).rate;
  for (int k : {0, 1}) {
    const auto rep = semisimplicity_check(assemble_modal(k, g, p, 32), tol);
    EXPECT_EQ(rep.algebraic, 1) << k;
    EXPECT_EQ(rep.geometric, 1) << k;
    EXPECT_TRUE(rep.semisimple) << k;
  }
  const auto rep = semisimplicity_check(assemble_modal(2, g, p, 32), tol);
  EXPECT_EQ(rep.algebraic, 0);
  EXPECT_EQ(rep.geometric, 0);
  EXPECT_TRUE(rep.semisimple);
}

TEST(Limit, EquilibriaPredictThemselves) {
  const GeometryParams g;
  const auto h = equilibrium_height(0.03, 0.02, -0.01, g, 64);
  const auto lp = predicted_limit(h, h, g);
  EXPECT_NEAR(lp.y[0], 0.03, 1e-12);
  EXPECT_NEAR(lp.y[1], 0.02, 1e-12);
  EXPECT_NEAR(lp.y[2], -0.01, 1e-12);
  EXPECT_LT(lp.distance, 1e-12);
  EXPECT_TRUE(lp.converged);
  const auto off = HeightField::sample(64, [](double t) { return 0.01 * std::cos(2 * t); });
  EXPECT_FALSE(predicted_limit(off, off, g).converged);
}

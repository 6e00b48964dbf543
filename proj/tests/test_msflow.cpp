#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mssim/msflow.hpp"

using namespace mssim;

namespace {

PotentialResolution resolution(int n) {
  PotentialResolution r;
  r.n_r_inner = r.n_r_outer = n;
  return r;
}

HeightField mode(std::size_t n, int k, double amp) {
  return HeightField::sample(n, [=](double t) { return amp * std::cos(k * t); });
}

SimState state_of(const HeightField& h) {
  SimState s;
  s.h = h;
  return s;
}

double sup(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

HeightField advance(Scheme scheme, HeightField h, double dt, int steps, const FlowContext& ctx) {
  SimState s = state_of(h);
  for (int i = 0; i < steps; ++i) {
    auto r = step(scheme, s, dt, ctx);
    EXPECT_EQ(r.status, StepStatus::ok) << r.message;
    s = std::move(r.state);
  }
  return s.h;
}

}  // namespace

TEST(Rhs, VanishesOnCircles) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(32));
  EXPECT_LT(sup(rhs(HeightField::zero(32), ctx)), 1e-12);
  EXPECT_LT(sup(rhs(equilibrium_height(0.0, 0.1, 0.0, g, 32), ctx)), 1e-8);
}

TEST(Rhs, EquilibriumStationarityAcrossTheManifold) {
  const GeometryParams g;
  const PhysParams p{2.0, 0.5, 1.0, 2.0};
  const FlowContext ctx(g, p, 64, resolution(32));
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  for (int trial = 0; trial < 5; ++trial) {
    const auto h = equilibrium_height(u(rng), u(rng), u(rng), g, 64);
    EXPECT_LE(sup(rhs(h, ctx)), 1e-7 * p.sigma * p.m / std::pow(g.R, 3));
  }
}

TEST(Rhs, LinearizationAtTheCircle) {
  const GeometryParams g;
  const PhysParams p;
  const double eps = 1e-4;
  const auto h = mode(32, 2, eps);
  const auto r = rhs(h, p, g, resolution(64));
  const double lam = ms_symbol(2, g, p);
  for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(r[j], -lam * h[j], 1e-3 * lam * eps);
}

TEST(Rhs, SplitSumsToTheFullRightHandSide) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(24));
  const auto h = HeightField::sample(32, [](double t) { return 0.05 * std::cos(3 * t) - 0.02 * std::sin(2 * t); });
  const auto split = rhs_split(h, ctx);
  const auto full = rhs(h, ctx);
  for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(split.principal[j] + split.lower_order[j], full[j], 1e-10);
}

TEST(Step, ZeroHeightIsAFixedPoint) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(16));
  for (auto scheme : {Scheme::imex1, Scheme::imex2})
    for (double dt : {1e-4, 1.0, 100.0}) {
      const auto r = step(scheme, state_of(HeightField::zero(32)), dt, ctx);
      ASSERT_EQ(r.status, StepStatus::ok);
      EXPECT_LT(r.state.h.sup_norm(), 1e-12);
      EXPECT_DOUBLE_EQ(r.state.t, dt);
      EXPECT_EQ(r.state.step, 1);
    }
}

TEST(Step, Imex1MatchesItsLinearAmplification) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(32));
  const double dt = 1e-3, eps = 1e-6;
  const auto h = advance(Scheme::imex1, mode(32, 3, eps), dt, 100, ctx);
  const double ratio = h.coeff(3).real() / (0.5 * eps);
  const double expected = std::pow(1.0 + dt * ctx.discrete_symbol(3), -100);
  EXPECT_NEAR(ratio / expected, 1.0, 1e-6);
}

TEST(Step, Imex2MatchesTheExponentialDecay) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(128));
  const double eps = 1e-6;
  const auto h = advance(Scheme::imex2, mode(32, 3, eps), 1e-3, 100, ctx);
  const double ratio = h.coeff(3).real() / (0.5 * eps);
  EXPECT_NEAR(ratio / std::exp(-ms_symbol(3, g, p) * 0.1), 1.0, 1e-3);
}

TEST(Step, Imex2SelfConvergesAtSecondOrder) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(32));
  const auto h0 = mode(32, 3, 0.05);
  const double t = 0.04;
  const auto ref = advance(Scheme::imex2, h0, 4e-3 / 8, 80, ctx);
  std::vector<double> err;
  for (int steps : {10, 20}) err.push_back((advance(Scheme::imex2, h0, t / steps, steps, ctx) - ref).sup_norm());
  EXPECT_GE(std::log2(err[0] / err[1]), 1.9);
}

TEST(Step, SchemesAgreeToLocalOrderOnOneStep) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(32));
  const auto s = state_of(mode(32, 3, 0.05));
  std::vector<double> diff;
  for (double dt : {2e-3, 1e-3, 5e-4}) {
    const auto a = step_imex(s, dt, ctx).state.h, b = step_imex2(s, dt, ctx).state.h;
    diff.push_back((a - b).sup_norm());
    EXPECT_LE(diff.back(), 0.05 * dt * ctx.discrete_symbol(3));
  }
  EXPECT_GT(diff[0] / diff[1], 3.0);
  EXPECT_GT(diff[1] / diff[2], 3.0);
}

TEST(Step, RotationEquivariance) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(24));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  std::vector<cplx> c(17, 0.0);
  for (int k = 1; k <= 6; ++k) c[k] = 0.01 * cplx(nd(rng), nd(rng)) / double(k);
  const auto h = HeightField::from_coeffs(c, 32);
  const int shift = 3;
  const auto hr = h.rotated(shift * 2 * std::numbers::pi / 32);
  for (auto scheme : {Scheme::imex1, Scheme::imex2}) {
    const auto a = step(scheme, state_of(h), 2e-3, ctx).state.h;
    const auto b = step(scheme, state_of(hr), 2e-3, ctx).state.h;
    for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(b[(j + shift) % 32], a[j], 1e-12);
  }
}

TEST(Step, RejectsOversizedSteps) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(16));
  const auto r = step_imex(state_of(mode(32, 5, 0.2)), 50.0, ctx);
  EXPECT_EQ(r.status, StepStatus::dt_rejected);
  EXPECT_GT(r.remainder_sup * 50.0, 0.1 * g.a);
}

TEST(Run, EquilibriumHoldsForAThousandSteps) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(32));
  RunOptions opt;
  opt.scheme = Scheme::imex1;
  opt.dt = 1e-3;
  opt.t_end = 1.0;
  opt.record_every = 100;
  const auto r = run(ctx, state_of(equilibrium_height(0.05, 0.02, 0.0, g, 32)), opt);
  ASSERT_TRUE(r.completed) << r.halt_reason;
  EXPECT_EQ(r.final_state.step, 1000);
  EXPECT_LE(r.max_drift, 1e-6);
}

TEST(Run, DissipatesPerimeterAndConservesArea) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(32));
  RunOptions opt;
  opt.dt = 1e-3;
  opt.t_end = 0.3;
  const auto r = run(ctx, state_of(mode(32, 3, 0.05)), opt);
  ASSERT_TRUE(r.completed);
  EXPECT_EQ(r.dt_halvings, 0);
  EXPECT_LE(r.max_perimeter_increase, 1e-12 * g.R);
  EXPECT_LE(r.area_drift, 1e-6);
  for (std::size_t i = 1; i < r.series.records.size(); ++i)
    EXPECT_LE(r.series.records[i].perimeter, r.series.records[i - 1].perimeter + 1e-12);
  EXPECT_NEAR(r.final_state.t, 0.3, 1e-14);
  const auto fit = fit_decay_rate(r.series, 3, 0.15, 0.3);
  EXPECT_NEAR(fit.rate, ms_symbol(3, g, p), 0.15 * ms_symbol(3, g, p));
}

TEST(Run, LinearizedRatesRealizeTheSymbol) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 32, resolution(64));
  for (int k = 2; k <= 6; ++k) {
    const double lam = ms_symbol(k, g, p);
    RunOptions opt;
    opt.dt = 0.05 / lam;
    opt.t_end = 100 * opt.dt;
    opt.k_max = 8;
    opt.record_every = 5;
    const auto r = run(ctx, state_of(mode(32, k, 1e-5)), opt);
    ASSERT_TRUE(r.completed);
    const auto fit = fit_decay_rate(r.series, k, 0.0, opt.t_end);
    EXPECT_NEAR(fit.rate / lam, 1.0, 0.01) << k;
    EXPECT_GT(fit.r_squared, 0.999999);
  }
}

TEST(Run, RejectsInadmissibleInitialData) {
  const GeometryParams g;
  const PhysParams p;
  const FlowContext ctx(g, p, 16, resolution(8));
  EXPECT_THROW(run(ctx, state_of(mode(16, 2, 0.3)), RunOptions{}), InadmissibleHeight);
}

TEST(Fit, RecoversAnExactExponential) {
  TimeSeries ts;
  ts.k_max = 2;
  for (int i = 0; i <= 50; ++i) {
    FlowRecord r;
    r.t = 0.02 * i;
    r.modes = {0.0, 0.0, cplx(0.3 * std::exp(-5.0 * r.t), 0.1 * std::exp(-5.0 * r.t))};
    ts.records.push_back(r);
  }
  const auto f = fit_decay_rate(ts, 2, 0.0, 1.0);
  EXPECT_NEAR(f.rate, 5.0, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_EQ(f.samples, 51u);
  EXPECT_THROW(fit_decay_rate(ts, 2, 0.5, 0.52), std::domain_error);
  EXPECT_THROW(fit_decay_rate(ts, 1, 0.0, 1.0), std::domain_error);
  EXPECT_THROW(fit_decay_rate(ts, 3, 0.0, 1.0), std::invalid_argument);
}

#pragma once

// Mullins-Sekerka interface evolution h_t = m [[d_nu eta]] (r-normalized so
// that the enclosed area changes by the net flux), eta = sigma K(h), with a
// semi-implicit splitting: the h = 0 symbol is implicit, the remainder explicit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "curvature.hpp"
#include "potential.hpp"

namespace mssim {

enum class Scheme { imex1, imex2 };

inline const char* to_string(Scheme s) { return s == Scheme::imex1 ? "imex1" : "imex2"; }

/// Solver, parameters and the discrete implicit symbol for one (geometry, physics, resolution).
class FlowContext {
 public:
  FlowContext(const GeometryParams& g, const PhysParams& phys, std::size_t n_theta, PotentialResolution res = {})
      : g_(g), phys_(phys), solver_(g, n_theta, res) {
    phys_.validate();
    symbol_.resize(n_theta / 2 + 1);
    for (std::size_t k = 0; k < symbol_.size(); ++k) {
      const int kk = static_cast<int>(k);
      // linearization of rhs at h = 0 is -symbol_k on mode k
      symbol_[k] = -phys_.m * phys_.sigma * dk0_symbol(kk, g_) * solver_.reference_flux_jump(kk) / g_.R;
      if (k <= 1) symbol_[k] = 0.0;
    }
  }

  const GeometryParams& geometry() const { return g_; }
  const PhysParams& physics() const { return phys_; }
  const PotentialSolver& solver() const { return solver_; }
  std::size_t n_theta() const { return solver_.n_theta(); }

  /// Discrete counterpart of ms_symbol(k) at the configured radial resolution.
  double discrete_symbol(int k) const { return symbol_.at(static_cast<std::size_t>(std::abs(k))); }

  /// Highest retained mode of the explicit remainder.
  std::size_t dealias_limit() const { return n_theta() / 3; }

 private:
  GeometryParams g_;
  PhysParams phys_;
  PotentialSolver solver_;
  std::vector<double> symbol_;
};

/// Discrete symbol from the h = 0 solver, exposed standalone.
inline double discrete_symbol(int k, const GeometryParams& g, const PhysParams& phys, PotentialResolution res = {},
                              std::size_t n_theta = 64) {
  return FlowContext(g, phys, n_theta, res).discrete_symbol(k);
}

struct SimState {
  double t = 0.0;
  HeightField h;
  long step = 0;
  double dt = 0.0;  // current step size; halvings persist
  std::shared_ptr<const TransformedMetric> metric;  // metric of h, if cached
  std::optional<TwoPhaseField> potential;            // last potential solve for h
};

struct RhsEval {
  std::vector<double> values;  // h_t at the nodes
  TwoPhaseField eta;
  double area_rate = 0.0;      // d/dt of the discrete enclosed area
  bool underresolved = false;
};

/// h_t = m (G_out - G_in)/(R + h): outward normal velocity of the graph
/// scaled by |Gamma'|/(R + h) so the enclosed area moves by the net flux.
inline RhsEval evaluate_rhs(const HeightField& h, const FlowContext& ctx,
                            std::shared_ptr<const TransformedMetric> metric = nullptr) {
  const auto& g = ctx.geometry();
  if (!metric) metric = ctx.solver().metric(h);
  const auto K = curvature(h, g);
  std::vector<double> data(K.values);
  for (double& v : data) v *= ctx.physics().sigma;
  RhsEval out{{}, ctx.solver().solve(metric, data, K.underresolved), 0.0, K.underresolved};
  const auto jump = ctx.solver().flux_jump_per_angle(h, out.eta, ctx.physics().m);
  out.values.resize(h.size());
  const double w = 2.0 * std::numbers::pi / static_cast<double>(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    out.values[j] = jump[j] / (g.R + h[j]);
    out.area_rate += jump[j] * w;
  }
  return out;
}

inline std::vector<double> rhs(const HeightField& h, const FlowContext& ctx) { return evaluate_rhs(h, ctx).values; }

/// Convenience overload building a context at the given resolution.
inline std::vector<double> rhs(const HeightField& h, const PhysParams& phys, const GeometryParams& g,
                               PotentialResolution res = {}) {
  return rhs(h, FlowContext(g, phys, h.size(), res));
}

/// Split evaluation: principal part from the data sigma P(h) h and the lower-order
/// part from sigma Q(h); the two sum to rhs(h) since the solve is linear in the data.
struct RhsSplit {
  std::vector<double> principal, lower_order;
};

inline RhsSplit rhs_split(const HeightField& h, const FlowContext& ctx) {
  const auto& g = ctx.geometry();
  const auto metric = ctx.solver().metric(h);
  const auto cd = curvature_decomposition(h, g);
  auto ph = cd.apply_P(h);
  auto q = cd.q;
  for (double& v : ph) v *= ctx.physics().sigma;
  for (double& v : q) v *= ctx.physics().sigma;
  RhsSplit out;
  for (auto* pair : {&ph, &q}) {
    const auto eta = ctx.solver().solve(metric, *pair);
    const auto jump = ctx.solver().flux_jump_per_angle(h, eta, ctx.physics().m);
    std::vector<double> v(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) v[j] = jump[j] / (g.R + h[j]);
    (pair == &ph ? out.principal : out.lower_order) = std::move(v);
  }
  return out;
}

enum class StepStatus { ok, inadmissible, dt_rejected };

struct StepResult {
  SimState state;
  StepStatus status = StepStatus::ok;
  std::string message;
  double remainder_sup = 0.0;
};

namespace detail {

// Explicit remainder N = rhs + Lambda h, truncated to |k| <= dealias limit, as half-spectrum.
inline std::vector<cplx> remainder_modes(const HeightField& h, const RhsEval& r, const FlowContext& ctx) {
  const auto rh = HeightField::from_values(r.values);
  std::vector<cplx> out(h.coeffs().size(), 0.0);
  const std::size_t kmax = ctx.dealias_limit();
  for (std::size_t k = 1; k < out.size() && k <= kmax; ++k)
    out[k] = rh.coeffs()[k] + ctx.discrete_symbol(static_cast<int>(k)) * h.coeffs()[k];
  return out;
}

inline double sup_of_modes(const std::vector<cplx>& c, std::size_t n) {
  return HeightField::from_coeffs(c, n).sup_norm();
}

// Sets mode 0 of `c` (zero-mean part given) so the discrete enclosed area equals `area`.
inline bool fix_mean_for_area(std::vector<cplx>& c, std::size_t n, double area, const GeometryParams& g) {
  c[0] = 0.0;
  const auto tilde = HeightField::from_coeffs(c, n);
  double s2 = 0.0;
  for (double v : tilde.values()) s2 += v * v;
  const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
  const double r2 = (area - 0.5 * s2 * w) / std::numbers::pi;
  if (!(r2 > 0.0)) return false;
  c[0] = std::sqrt(r2) - g.R;
  return true;
}

inline StepResult finish_step(const SimState& s, double dt, std::vector<cplx> c, double area,
                              const FlowContext& ctx, double remainder_sup) {
  StepResult res;
  res.remainder_sup = remainder_sup;
  res.state = s;
  res.state.metric.reset();
  res.state.potential.reset();
  const std::size_t n = s.h.size();
  const auto& g = ctx.geometry();
  if (!fix_mean_for_area(c, n, area, g)) {
    res.status = StepStatus::inadmissible;
    res.message = "area update produced a degenerate interface";
    return res;
  }
  auto hn = HeightField::from_coeffs(std::move(c), n);
  if (!(hn.sup_norm() <= g.max_height())) {
    res.status = StepStatus::inadmissible;
    res.message = "admissibility lost: sup|h| = " + std::to_string(hn.sup_norm()) + " >= a - eps";
    return res;
  }
  res.state.h = std::move(hn);
  res.state.t = s.t + dt;
  res.state.step = s.step + 1;
  return res;
}

inline bool remainder_too_large(double dt, double sup, const GeometryParams& g) { return dt * sup > 0.1 * g.a; }

}  // namespace detail

/// First-order IMEX step: (1 + dt Lambda) h^{n+1} = h^n + dt N(h^n), mode by mode.
inline StepResult step_imex(const SimState& s, double dt, const FlowContext& ctx) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_imex: dt must be positive");
  const auto& g = ctx.geometry();
  const auto r = evaluate_rhs(s.h, ctx, s.metric);
  const auto N = detail::remainder_modes(s.h, r, ctx);
  const double nsup = detail::sup_of_modes(N, s.h.size());
  if (detail::remainder_too_large(dt, nsup, g)) {
    StepResult res{s, StepStatus::dt_rejected, "explicit remainder too large for dt", nsup};
    return res;
  }
  std::vector<cplx> c(s.h.coeffs().size(), 0.0);
  for (std::size_t k = 1; k < c.size(); ++k) {
    const double lam = ctx.discrete_symbol(static_cast<int>(k));
    c[k] = (s.h.coeffs()[k] + dt * N[k]) / (1.0 + dt * lam);
  }
  const double area = enclosed_area(s.h, g) + dt * r.area_rate;
  return detail::finish_step(s, dt, std::move(c), area, ctx, nsup);
}

/// Second-order IMEX step: IMEX1 predictor h*, then
/// (1 + dt Lambda/2) h^{n+1} = (1 - dt Lambda/2) h^n + dt/2 (N(h^n) + N(h*)).
inline StepResult step_imex2(const SimState& s, double dt, const FlowContext& ctx) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_imex2: dt must be positive");
  const auto& g = ctx.geometry();
  const auto r0 = evaluate_rhs(s.h, ctx, s.metric);
  const auto N0 = detail::remainder_modes(s.h, r0, ctx);
  const double nsup = detail::sup_of_modes(N0, s.h.size());
  if (detail::remainder_too_large(dt, nsup, g)) return {s, StepStatus::dt_rejected, "explicit remainder too large for dt", nsup};

  const std::size_t nc = s.h.coeffs().size();
  std::vector<cplx> cp(nc, 0.0);
  for (std::size_t k = 1; k < nc; ++k)
    cp[k] = (s.h.coeffs()[k] + dt * N0[k]) / (1.0 + dt * ctx.discrete_symbol(static_cast<int>(k)));
  const double area0 = enclosed_area(s.h, g);
  if (!detail::fix_mean_for_area(cp, s.h.size(), area0 + dt * r0.area_rate, g))
    return {s, StepStatus::inadmissible, "predictor produced a degenerate interface", nsup};
  const auto hp = HeightField::from_coeffs(cp, s.h.size());
  if (!(hp.sup_norm() <= g.max_height()))
    return {s, StepStatus::inadmissible, "admissibility lost in predictor stage", nsup};

  const auto r1 = evaluate_rhs(hp, ctx);
  const auto N1 = detail::remainder_modes(hp, r1, ctx);
  std::vector<cplx> c(nc, 0.0);
  for (std::size_t k = 1; k < nc; ++k) {
    const double half = 0.5 * dt * ctx.discrete_symbol(static_cast<int>(k));
    c[k] = ((1.0 - half) * s.h.coeffs()[k] + 0.5 * dt * (N0[k] + N1[k])) / (1.0 + half);
  }
  const double area = area0 + 0.5 * dt * (r0.area_rate + r1.area_rate);
  return detail::finish_step(s, dt, std::move(c), area, ctx, nsup);
}

inline StepResult step(Scheme scheme, const SimState& s, double dt, const FlowContext& ctx) {
  return scheme == Scheme::imex1 ? step_imex(s, dt, ctx) : step_imex2(s, dt, ctx);
}

struct FlowRecord {
  double t = 0.0;
  double area = 0.0;
  double perimeter = 0.0;
  double h_linf = 0.0;
  std::vector<cplx> modes;  // c_k, k = 0..k_max
};

struct TimeSeries {
  std::size_t k_max = 0;
  std::vector<FlowRecord> records;
};

inline FlowRecord make_record(const SimState& s, const GeometryParams& g, std::size_t k_max) {
  FlowRecord r;
  r.t = s.t;
  r.area = enclosed_area(s.h, g);
  r.perimeter = perimeter(s.h, g);
  r.h_linf = s.h.sup_norm();
  for (std::size_t k = 0; k <= k_max; ++k) r.modes.push_back(s.h.coeff(static_cast<int>(k)));
  return r;
}

struct RunOptions {
  Scheme scheme = Scheme::imex2;
  double dt = 0.0;  // <= 0: default 0.1 / symbol(k_dealias)
  double t_end = 1.0;
  long record_every = 1;
  long snapshot_every = 0;  // 0: no snapshots
  std::size_t k_max = 8;    // recorded modes
  int max_halvings = 30;
};

struct RunResult {
  TimeSeries series;
  SimState final_state;
  std::string halt_reason;  // "t_end", or the failure
  bool completed = false;
  int dt_halvings = 0;
  double max_perimeter_increase = -std::numeric_limits<double>::infinity();
  double area_drift = 0.0;  // max |A(t) - A(0)| / A(0) over the run
  double max_drift = 0.0;   // max ||h(t) - h(0)||_inf over the run
};

inline double default_dt(const FlowContext& ctx) {
  return 0.1 / ctx.discrete_symbol(static_cast<int>(ctx.dealias_limit()));
}

/// Integrates from `initial` (which carries t, step and dt) to options.t_end.
/// The step size is halved, persistently, whenever the perimeter grows by more
/// than 1e-12 R in a step or the explicit remainder heuristic rejects the step.
inline RunResult run(const FlowContext& ctx, SimState initial, const RunOptions& opt,
                     const std::function<void(const SimState&)>& on_snapshot = {}) {
  const auto& g = ctx.geometry();
  require_admissible(initial.h, g);
  if (initial.dt <= 0.0) initial.dt = opt.dt > 0.0 ? opt.dt : default_dt(ctx);
  const std::size_t kmax = std::min(opt.k_max, initial.h.size() / 2);

  RunResult out;
  out.series.k_max = kmax;
  SimState s = std::move(initial);
  const auto h_start = s.h;
  const double area0 = enclosed_area(s.h, g);
  double perim = perimeter(s.h, g);
  out.series.records.push_back(make_record(s, g, kmax));
  const double tiny = 1e-12 * std::max(1.0, std::abs(opt.t_end));

  while (s.t < opt.t_end - tiny) {
    const double dt = std::min(s.dt, opt.t_end - s.t);
    auto res = step(opt.scheme, s, dt, ctx);
    if (res.status == StepStatus::ok) {
      const double p = perimeter(res.state.h, g);
      out.max_perimeter_increase = std::max(out.max_perimeter_increase, p - perim);
      if (p - perim > 1e-12 * g.R) {
        res.status = StepStatus::dt_rejected;
        res.message = "perimeter increase";
      } else {
        perim = p;
      }
    }
    if (res.status == StepStatus::dt_rejected) {
      if (out.dt_halvings >= opt.max_halvings) {
        out.halt_reason = "dt underflow after repeated halving (" + res.message + ")";
        break;
      }
      ++out.dt_halvings;
      s.dt *= 0.5;
      continue;
    }
    if (res.status == StepStatus::inadmissible) {
      out.halt_reason = res.message;
      break;
    }
    s = std::move(res.state);
    out.area_drift = std::max(out.area_drift, std::abs(enclosed_area(s.h, g) - area0) / area0);
    out.max_drift = std::max(out.max_drift, (s.h - h_start).sup_norm());
    if (opt.record_every > 0 && s.step % opt.record_every == 0) out.series.records.push_back(make_record(s, g, kmax));
    if (on_snapshot && opt.snapshot_every > 0 && s.step % opt.snapshot_every == 0) on_snapshot(s);
  }
  if (out.halt_reason.empty()) {
    out.halt_reason = "t_end";
    out.completed = true;
  }
  if (out.series.records.back().t != s.t) out.series.records.push_back(make_record(s, g, kmax));
  out.final_state = std::move(s);
  return out;
}

struct DecayFit {
  double rate = 0.0;  // -d/dt log|c_k|
  double r_squared = 0.0;
  std::size_t samples = 0;
};

/// Least-squares slope of log|c_k(t)| over records with t in [t0, t1].
inline DecayFit fit_decay_rate(const TimeSeries& series, std::size_t k, double t0, double t1) {
  if (k > series.k_max) throw std::invalid_argument("fit_decay_rate: mode not recorded");
  std::vector<double> ts, ys;
  for (const auto& r : series.records) {
    if (r.t < t0 || r.t > t1) continue;
    const double amp = std::abs(r.modes[k]);
    if (!(amp > 1e-12)) throw std::domain_error("fit_decay_rate: amplitude below 1e-12 inside the window");
    ts.push_back(r.t);
    ys.push_back(std::log(amp));
  }
  if (ts.size() < 3) throw std::domain_error("fit_decay_rate: fewer than 3 samples in the window");
  const double n = static_cast<double>(ts.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    my += ys[i];
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    sty += (ts[i] - mt) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(stt > 0.0)) throw std::domain_error("fit_decay_rate: degenerate time window");
  DecayFit f;
  const double slope = sty / stt;
  f.rate = -slope;
  f.r_squared = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
  f.samples = ts.size();
  return f;
}

}  // namespace mssim

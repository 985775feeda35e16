#pragma once

// Cost-model abstraction: user-supplied running/terminal costs with their
// gradients, plus the two local solvers every equilibrium computation needs:
// the Legendre-transform argmax (-D_pH) and the control-consistency fixed
// points over a population of (state, costate) pairs.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mfgc/errors.hpp"
#include "mfgc/lq.hpp"
#include "mfgc/rng.hpp"

#include "json.hpp"

namespace mfgc {

// View over the other players' states/controls; `skip` is the index of the
// player owning the cost, excluded with empirical weight 1/(N-1). The *_sum
// fields optionally carry the full-span totals so population sweeps stay
// linear; they are an evaluation cache, not part of the measure.
struct OtherPlayers {
  std::span<const double> positions;
  std::span<const double> controls;
  int skip = -1;
  double positions_sum = std::numeric_limits<double>::quiet_NaN();
  double controls_sum = std::numeric_limits<double>::quiet_NaN();
};

// Empirical joint (state, control) measure with uniform weights 1/N_p,
// self included.
struct EmpiricalPairMeasure {
  std::span<const double> positions;
  std::span<const double> controls;
  double positions_sum = std::numeric_limits<double>::quiet_NaN();
  double controls_sum = std::numeric_limits<double>::quiet_NaN();
};

using Context = std::variant<OtherPlayers, EmpiricalPairMeasure>;

inline std::size_t ctx_count(const Context& ctx) {
  if (const auto* o = std::get_if<OtherPlayers>(&ctx))
    return o->positions.size() - (o->skip >= 0 ? 1 : 0);
  return std::get<EmpiricalPairMeasure>(ctx).positions.size();
}

namespace detail {
inline double span_sum(std::span<const double> v, double cached) {
  if (!std::isnan(cached)) return cached;
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}
inline double mean_skip(std::span<const double> v, int skip, double cached) {
  const double s = span_sum(v, cached);
  if (skip >= 0)
    return (s - v[static_cast<std::size_t>(skip)]) / static_cast<double>(v.size() - 1);
  return s / static_cast<double>(v.size());
}
}  // namespace detail

inline double ctx_mean_control(const Context& ctx) {
  if (const auto* o = std::get_if<OtherPlayers>(&ctx))
    return detail::mean_skip(o->controls, o->skip, o->controls_sum);
  const auto& m = std::get<EmpiricalPairMeasure>(ctx);
  return detail::mean_skip(m.controls, -1, m.controls_sum);
}

inline double ctx_mean_state(const Context& ctx) {
  if (const auto* o = std::get_if<OtherPlayers>(&ctx))
    return detail::mean_skip(o->positions, o->skip, o->positions_sum);
  const auto& m = std::get<EmpiricalPairMeasure>(ctx);
  return detail::mean_skip(m.positions, -1, m.positions_sum);
}

struct CostModel {
  std::string name;
  std::function<double(double x, double a, const Context&)> running_cost;   // L
  std::function<double(double x, double a, const Context&)> grad_a;         // D_a L
  std::function<double(double x, double a, const Context&)> grad_x;         // D_x L
  std::function<double(double x, const Context&)> terminal_cost;            // g
  std::function<double(double x, const Context&)> terminal_grad;            // D_x g
  std::function<double(double x, double a, const Context&)> hess_aa;        // optional

  struct Metadata {
    double lambda_min = 1.0;
    double lambda_max = 1.0;
    double coupling_norm = 0.0;     // sum_j |D^2_{A^j a} L| resp. |D_m^a D_a L|
    double lip_grad_a = 0.0;
    double lip_grad_x = 0.0;
    double lip_terminal_grad = 0.0;
    double control_bound = 1e8;     // coercivity cap on Newton iterates
    double c_la = 0.0, c_lx = 0.0, c_g = 0.0;  // declared semimonotonicity constants
  } meta;

  void validate() const {
    if (!(meta.lambda_min > 0.0))
      throw std::invalid_argument("CostModel: lambda_min must be > 0");
    if (meta.lambda_min > meta.lambda_max)
      throw std::invalid_argument("CostModel: lambda_min > lambda_max");
    if (!running_cost || !grad_a || !grad_x || !terminal_cost || !terminal_grad)
      throw std::invalid_argument("CostModel: all cost callbacks must be set");
  }

  // Lipschitz constant of D_pH in the others'-controls variable; < 1 is the
  // contraction condition for the consistency fixed point.
  double contraction_ratio() const { return meta.coupling_norm / meta.lambda_min; }
};

// ---------------------------------------------------------------------------
// Legendre transform
// ---------------------------------------------------------------------------

struct ArgmaxOptions {
  double tol = 1e-12;
  int max_iters = 60;
  double fd_scale = 1.0;
};

// Solves -p - D_aL(x, a*, ctx) = 0 by damped Newton; a* = -D_pH(x, p, ctx).
// The residual tolerance is relative to the costate scale, so transiently
// huge iterates of an outer loop cannot stall on rounding noise.
inline double legendre_argmax(const CostModel& model, double x, double p, const Context& ctx,
                              const ArgmaxOptions& opts = {}) {
  const double fd_h = std::cbrt(std::numeric_limits<double>::epsilon());
  const double tol = opts.tol * std::max(1.0, std::abs(p));
  double a = 0.0;
  double f = p + model.grad_a(x, a, ctx);
  if (!std::isfinite(f)) throw CallbackError("legendre_argmax: non-finite gradient");
  for (int it = 0; it < opts.max_iters; ++it) {
    if (std::abs(f) <= tol) return a;
    double jac;
    if (model.hess_aa) {
      jac = model.hess_aa(x, a, ctx);
    } else {
      const double h = fd_h * std::max(opts.fd_scale, std::abs(a));
      jac = (model.grad_a(x, a + h, ctx) - model.grad_a(x, a - h, ctx)) / (2.0 * h);
    }
    if (!std::isfinite(jac) || std::abs(jac) < 1e-300)
      throw NonConvergence("legendre_argmax: singular Jacobian", std::abs(f), it);
    double step = -f / jac;
    double lam = 1.0;
    for (int bt = 0; bt < 40; ++bt) {
      const double cand = a + lam * step;
      const double fc = p + model.grad_a(x, cand, ctx);
      if (!std::isfinite(fc)) throw CallbackError("legendre_argmax: non-finite gradient");
      if (std::abs(fc) < std::abs(f) || std::abs(fc) <= tol) {
        a = cand;
        f = fc;
        break;
      }
      lam *= 0.5;
      if (bt == 39)
        throw NonConvergence("legendre_argmax: stagnated line search", std::abs(f), it);
    }
    if (std::abs(a) > model.meta.control_bound)
      throw CoercivityViolation("legendre_argmax: iterate exceeded control bound", std::abs(a));
  }
  if (std::abs(f) <= tol) return a;
  throw NonConvergence("legendre_argmax: max iterations", std::abs(f), opts.max_iters);
}

// H(x, p, ctx) = -p a* - L(x, a*, ctx) with a* from legendre_argmax.
inline double hamiltonian_value(const CostModel& model, double x, double p, const Context& ctx,
                                const ArgmaxOptions& opts = {}) {
  const double a = legendre_argmax(model, x, p, ctx, opts);
  return -p * a - model.running_cost(x, a, ctx);
}

// ---------------------------------------------------------------------------
// Consistency fixed points
// ---------------------------------------------------------------------------

struct ConsistencyConfig {
  double tol = 1e-10;
  int max_iters = 200;
  double relaxation = 0.0;  // 0 => auto: plain Picard below estimate 0.9, else 0.5
  int stall_window = 5;
  double blowup_factor = 1e6;
  ArgmaxOptions argmax;
};

struct ConsistencyResult {
  std::vector<double> controls;
  int iterations = 0;
  double factor_estimate = 0.0;  // ratio of successive update norms
  double final_update = 0.0;
};

namespace detail {

template <class MakeCtx>
ConsistencyResult consistency_iterate(std::span<const double> xs, std::span<const double> ps,
                                      const CostModel& model, const ConsistencyConfig& cfg,
                                      std::span<const double> warm, MakeCtx make_ctx) {
  const std::size_t n = xs.size();
  ConsistencyResult res;
  res.controls.assign(n, 0.0);
  if (!warm.empty()) res.controls.assign(warm.begin(), warm.end());
  std::vector<double> next(n, 0.0);
  double sum_x = 0.0;
  for (double x : xs) sum_x += x;
  // Update tolerance relative to the costate scale: controls scale with the
  // costates, and outer loops may pass through transiently large iterates.
  double p_scale = 1.0;
  for (double p : ps) p_scale = std::max(p_scale, std::abs(p));
  const double tol = cfg.tol * p_scale;

  double theta = cfg.relaxation;
  int max_iters = cfg.max_iters;
  if (theta <= 0.0) {
    const double ratio = model.contraction_ratio();
    theta = ratio < 0.9 ? 1.0 : 0.5;
    if (ratio >= 0.9 && ratio < 1.0) {
      // Slow but certified contraction: budget iterations for the damped
      // rate instead of failing early.
      const double damped = std::min(0.9999, 1.0 - theta + theta * ratio);
      max_iters = std::max(max_iters,
                           std::min(20000, static_cast<int>(std::log(1e-13) / std::log(damped)) + 50));
    }
  }

  double prev_update = -1.0, first_update = -1.0;
  int stalled = 0;
  for (int it = 1; it <= max_iters; ++it) {
    double sum_a = 0.0;
    for (double a : res.controls) sum_a += a;
    for (std::size_t i = 0; i < n; ++i)
      next[i] = legendre_argmax(model, xs[i], ps[i], make_ctx(i, res.controls, sum_x, sum_a),
                                cfg.argmax);
    double update = 0.0;
    for (std::size_t i = 0; i < n; ++i) update = std::max(update, std::abs(next[i] - res.controls[i]));
    for (std::size_t i = 0; i < n; ++i)
      res.controls[i] = (1.0 - theta) * res.controls[i] + theta * next[i];
    res.iterations = it;
    res.final_update = update;
    if (prev_update > 0.0 && update > 0.0) res.factor_estimate = update / prev_update;
    if (update <= tol) return res;

    if (first_update < 0.0) first_update = update;
    if (prev_update > 0.0) {
      if (update >= prev_update * (1.0 - 1e-9))
        ++stalled;
      else
        stalled = 0;
      if (stalled >= cfg.stall_window)
        throw NonContraction("consistency fixed point: stalled or growing updates",
                             res.factor_estimate, it);
    }
    if (first_update > 0.0 && update > cfg.blowup_factor * first_update)
      throw NonContraction("consistency fixed point: diverging updates", res.factor_estimate, it);
    prev_update = update;
  }
  throw NonConvergence("consistency fixed point: max iterations", res.final_update, max_iters);
}

}  // namespace detail

// a^i <- argmax with the other players' (x, a) as context (self excluded).
inline ConsistencyResult consistency_fixed_point_nplayer(std::span<const double> xs,
                                                         std::span<const double> ps,
                                                         const CostModel& model,
                                                         const ConsistencyConfig& cfg = {},
                                                         std::span<const double> warm = {}) {
  if (xs.size() != ps.size() || xs.size() < 2)
    throw std::invalid_argument("consistency_fixed_point_nplayer: need N >= 2 matching spans");
  return detail::consistency_iterate(
      xs, ps, model, cfg, warm,
      [&](std::size_t i, const std::vector<double>& a, double sum_x, double sum_a) {
        return Context(
            OtherPlayers{xs, std::span<const double>(a), static_cast<int>(i), sum_x, sum_a});
      });
}

// a_k <- argmax against the empirical pair measure including self (1/N_p).
inline ConsistencyResult consistency_fixed_point_mf(std::span<const double> xs,
                                                    std::span<const double> ps,
                                                    const CostModel& model,
                                                    const ConsistencyConfig& cfg = {},
                                                    std::span<const double> warm = {}) {
  if (xs.size() != ps.size() || xs.empty())
    throw std::invalid_argument("consistency_fixed_point_mf: need N_p >= 1 matching spans");
  return detail::consistency_iterate(
      xs, ps, model, cfg, warm,
      [&](std::size_t, const std::vector<double>& a, double sum_x, double sum_a) {
        return Context(EmpiricalPairMeasure{xs, std::span<const double>(a), sum_x, sum_a});
      });
}

// ---------------------------------------------------------------------------
// Semimonotonicity probe
// ---------------------------------------------------------------------------

enum class ProbeMode { NPlayer, MeanField };

struct SemimonConstants {
  double c_la = 0.0, c_lx = 0.0, c_g = 0.0;
};

struct SemimonGaps {
  double running = 0.0;
  double terminal = 0.0;
};

// Gap of the declared monotonicity inequalities at one pair of population
// configurations; negative values falsify the declared constants.
inline SemimonGaps semimon_gap_pair(const CostModel& model, const SemimonConstants& c,
                                    std::span<const double> xs, std::span<const double> as,
                                    std::span<const double> xbars, std::span<const double> abars,
                                    ProbeMode mode) {
  const std::size_t n = xs.size();
  double lhs = 0.0, lhs_g = 0.0, da2 = 0.0, dx2 = 0.0;
  const bool mf = mode == ProbeMode::MeanField;
  for (std::size_t i = 0; i < n; ++i) {
    Context ctx = mf ? Context(EmpiricalPairMeasure{xs, as})
                     : Context(OtherPlayers{xs, as, static_cast<int>(i)});
    Context ctxb = mf ? Context(EmpiricalPairMeasure{xbars, abars})
                      : Context(OtherPlayers{xbars, abars, static_cast<int>(i)});
    const double dga = model.grad_a(xs[i], as[i], ctx) - model.grad_a(xbars[i], abars[i], ctxb);
    const double dgx = model.grad_x(xs[i], as[i], ctx) - model.grad_x(xbars[i], abars[i], ctxb);
    const double dgg = model.terminal_grad(xs[i], ctx) - model.terminal_grad(xbars[i], ctxb);
    lhs += dga * (as[i] - abars[i]) + dgx * (xs[i] - xbars[i]);
    lhs_g += dgg * (xs[i] - xbars[i]);
    da2 += (as[i] - abars[i]) * (as[i] - abars[i]);
    dx2 += (xs[i] - xbars[i]) * (xs[i] - xbars[i]);
  }
  if (mf) {
    // L^2(Omega) form: everything per sample.
    lhs /= n; lhs_g /= n; da2 /= n; dx2 /= n;
  }
  return {lhs - c.c_la * da2 + c.c_lx * dx2, lhs_g + c.c_g * dx2};
}

struct SemimonProbeReport {
  double min_gap_running = 0.0, mean_gap_running = 0.0;
  double min_gap_terminal = 0.0, mean_gap_terminal = 0.0;
  int trials = 0;
  bool falsified(double tol = 1e-9) const {
    return min_gap_running < -tol || min_gap_terminal < -tol;
  }
};

inline SemimonProbeReport semimon_probe(const CostModel& model, const SemimonConstants& c,
                                        int trials, std::uint64_t seed, ProbeMode mode,
                                        int population, double spread = 2.0) {
  Rng rng(seed);
  std::vector<double> xs(population), as(population), xb(population), ab(population);
  SemimonProbeReport rep;
  rep.trials = trials;
  rep.min_gap_running = rep.min_gap_terminal = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < population; ++i) {
      xs[i] = spread * rng.normal();
      as[i] = spread * rng.normal();
      xb[i] = spread * rng.normal();
      ab[i] = spread * rng.normal();
    }
    const SemimonGaps g = semimon_gap_pair(model, c, xs, as, xb, ab, mode);
    rep.min_gap_running = std::min(rep.min_gap_running, g.running);
    rep.min_gap_terminal = std::min(rep.min_gap_terminal, g.terminal);
    rep.mean_gap_running += g.running / trials;
    rep.mean_gap_terminal += g.terminal / trials;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient audit (model-registration check)
// ---------------------------------------------------------------------------

struct GradientAuditReport {
  double max_rel_err_a = 0.0, max_rel_err_x = 0.0, max_rel_err_g = 0.0;
  int points = 0;
  bool passed(double tol = 1e-5) const {
    return max_rel_err_a <= tol && max_rel_err_x <= tol && max_rel_err_g <= tol;
  }
};

// Sanity audit of the declared convexity metadata: the finite-difference
// second derivative of the running cost in the control must stay inside
// [lambda_min, lambda_max] at random probe points. An audit, not a proof.
struct MetadataAuditReport {
  double min_hess = 0.0, max_hess = 0.0;
  int points = 0;
  bool consistent(double lambda_min, double lambda_max, double tol = 1e-4) const {
    return min_hess >= lambda_min - tol && max_hess <= lambda_max + tol;
  }
};

inline MetadataAuditReport audit_metadata(const CostModel& model, std::uint64_t seed,
                                          int points = 100) {
  Rng rng(seed);
  MetadataAuditReport rep;
  rep.points = points;
  rep.min_hess = std::numeric_limits<double>::infinity();
  rep.max_hess = -std::numeric_limits<double>::infinity();
  const double h = std::sqrt(std::cbrt(std::numeric_limits<double>::epsilon()));
  const int nc = 4;
  std::vector<double> cx(nc), ca(nc);
  for (int k = 0; k < points; ++k) {
    for (int i = 0; i < nc; ++i) {
      cx[i] = 2.0 * rng.normal();
      ca[i] = 2.0 * rng.normal();
    }
    const Context ctx = (k % 2 == 0) ? Context(OtherPlayers{cx, ca, 0})
                                     : Context(EmpiricalPairMeasure{cx, ca});
    const double x = 2.0 * rng.normal(), a = 2.0 * rng.normal();
    const double hess =
        (model.grad_a(x, a + h, ctx) - model.grad_a(x, a - h, ctx)) / (2.0 * h);
    rep.min_hess = std::min(rep.min_hess, hess);
    rep.max_hess = std::max(rep.max_hess, hess);
  }
  return rep;
}

inline GradientAuditReport audit_gradients(const CostModel& model, std::uint64_t seed,
                                           int points = 100) {
  Rng rng(seed);
  GradientAuditReport rep;
  rep.points = points;
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  const int nc = 4;
  std::vector<double> cx(nc), ca(nc);
  for (int k = 0; k < points; ++k) {
    for (int i = 0; i < nc; ++i) {
      cx[i] = 2.0 * rng.normal();
      ca[i] = 2.0 * rng.normal();
    }
    const Context ctx = (k % 2 == 0) ? Context(OtherPlayers{cx, ca, 0})
                                     : Context(EmpiricalPairMeasure{cx, ca});
    const double x = 2.0 * rng.normal(), a = 2.0 * rng.normal();
    const double hx = h0 * std::max(1.0, std::abs(x)), ha = h0 * std::max(1.0, std::abs(a));
    const auto rel = [](double got, double want) {
      return std::abs(got - want) / std::max(1.0, std::abs(want));
    };
    const double fd_a = (model.running_cost(x, a + ha, ctx) - model.running_cost(x, a - ha, ctx)) / (2 * ha);
    const double fd_x = (model.running_cost(x + hx, a, ctx) - model.running_cost(x - hx, a, ctx)) / (2 * hx);
    const double fd_g = (model.terminal_cost(x + hx, ctx) - model.terminal_cost(x - hx, ctx)) / (2 * hx);
    rep.max_rel_err_a = std::max(rep.max_rel_err_a, rel(fd_a, model.grad_a(x, a, ctx)));
    rep.max_rel_err_x = std::max(rep.max_rel_err_x, rel(fd_x, model.grad_x(x, a, ctx)));
    rep.max_rel_err_g = std::max(rep.max_rel_err_g, rel(fd_g, model.terminal_grad(x, ctx)));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Built-in models and registry
// ---------------------------------------------------------------------------

// Cost pair of the control-mean / terminal-mean game; kappa = 0 is allowed
// here (decoupled exercises), unlike in the closed-form solvers.
inline CostModel make_lq_cost_model(double kappa, double rho, double gamma,
                                    int n_players_hint = 0) {
  CostModel m;
  m.name = "lq";
  m.running_cost = [kappa, gamma](double, double a, const Context& ctx) {
    const double d = a + kappa * ctx_mean_control(ctx);
    return 0.5 * d * d + 0.5 * gamma * a * a;
  };
  m.grad_a = [kappa, gamma](double, double a, const Context& ctx) {
    return a + kappa * ctx_mean_control(ctx) + gamma * a;
  };
  m.grad_x = [](double, double, const Context&) { return 0.0; };
  m.terminal_cost = [rho](double x, const Context& ctx) {
    const double d = x + rho * ctx_mean_state(ctx);
    return 0.5 * d * d;
  };
  m.terminal_grad = [rho](double x, const Context& ctx) {
    return x + rho * ctx_mean_state(ctx);
  };
  m.hess_aa = [gamma](double, double, const Context&) { return 1.0 + gamma; };
  m.meta.lambda_min = m.meta.lambda_max = 1.0 + gamma;
  m.meta.coupling_norm = std::abs(kappa);
  m.meta.lip_grad_a = 1.0 + gamma + std::abs(kappa);
  m.meta.lip_grad_x = 0.0;
  m.meta.lip_terminal_grad = 1.0 + std::abs(rho);
  if (n_players_hint >= 2) {
    const double n1 = n_players_hint - 1.0;
    m.meta.c_la = std::min(1.0 + gamma + (1.0 - 1.0 / n1) * kappa, 1.0 + gamma - kappa / n1);
    m.meta.c_g = -std::min(1.0 + gamma + (1.0 - 1.0 / n1) * rho, 1.0 + gamma - rho / n1);
  } else {
    m.meta.c_la = 1.0 + gamma + std::min(kappa, 0.0);
    m.meta.c_g = std::max(0.0, -(1.0 + std::min(rho, 0.0)));
  }
  m.meta.c_lx = 0.0;
  return m;
}

inline CostModel make_lq_cost_model(const LqParams& p) {
  return make_lq_cost_model(p.kappa, p.rho, p.gamma,
                            p.mode == LqMode::NPlayer ? p.n_players() : 0);
}

struct QuadraticPotentialParams {
  double control_weight = 1.0;   // coefficient of a^2/2
  double control_couple = 0.25;  // a * mean-control coupling
  double potential_scale = 1.0;  // smooth convex potential v0*(sqrt(1+x^2)-1)
  double terminal_rho = 0.5;     // terminal mean-position coupling
};

// Control-weighted quadratic plus a smooth potential in the state; the
// potential keeps D_xL bounded while making the problem genuinely non-LQ.
inline CostModel make_quadratic_potential_model(const QuadraticPotentialParams& p = {}) {
  if (!(p.control_weight > 0.0))
    throw std::invalid_argument("quadratic-plus-potential: control_weight must be > 0");
  CostModel m;
  m.name = "quadratic-plus-potential";
  const double w = p.control_weight, c = p.control_couple, v0 = p.potential_scale,
               rho = p.terminal_rho;
  m.running_cost = [w, c, v0](double x, double a, const Context& ctx) {
    return 0.5 * w * a * a + c * a * ctx_mean_control(ctx) + v0 * (std::sqrt(1.0 + x * x) - 1.0);
  };
  m.grad_a = [w, c](double, double a, const Context& ctx) {
    return w * a + c * ctx_mean_control(ctx);
  };
  m.grad_x = [v0](double x, double, const Context&) { return v0 * x / std::sqrt(1.0 + x * x); };
  m.terminal_cost = [rho](double x, const Context& ctx) {
    const double d = x + rho * ctx_mean_state(ctx);
    return 0.5 * d * d;
  };
  m.terminal_grad = [rho](double x, const Context& ctx) {
    return x + rho * ctx_mean_state(ctx);
  };
  m.hess_aa = [w](double, double, const Context&) { return w; };
  m.meta.lambda_min = m.meta.lambda_max = w;
  m.meta.coupling_norm = std::abs(c);
  m.meta.lip_grad_a = w + std::abs(c);
  m.meta.lip_grad_x = v0;
  m.meta.lip_terminal_grad = 1.0 + std::abs(rho);
  m.meta.c_la = w - std::abs(c);
  m.meta.c_lx = 0.0;
  m.meta.c_g = std::max(0.0, std::abs(rho) - 1.0);
  return m;
}

using ModelFactory = std::function<CostModel(const nlohmann::json&)>;

inline const std::map<std::string, ModelFactory>& model_registry() {
  static const std::map<std::string, ModelFactory> registry = {
      {"lq",
       [](const nlohmann::json& j) {
         return make_lq_cost_model(j.value("kappa", 1.0), j.value("rho", 0.0),
                                   j.value("gamma", 1.0), j.value("n_players", 0));
       }},
      {"quadratic-plus-potential",
       [](const nlohmann::json& j) {
         QuadraticPotentialParams p;
         p.control_weight = j.value("control_weight", 1.0);
         p.control_couple = j.value("control_couple", 0.25);
         p.potential_scale = j.value("potential_scale", 1.0);
         p.terminal_rho = j.value("terminal_rho", 0.5);
         return make_quadratic_potential_model(p);
       }},
  };
  return registry;
}

inline CostModel make_model(const std::string& name, const nlohmann::json& params) {
  const auto& reg = model_registry();
  const auto it = reg.find(name);
  if (it == reg.end()) throw ConfigError("unknown model: " + name);
  return it->second(params);
}

}  // namespace mfgc

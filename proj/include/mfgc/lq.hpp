#pragma once

// Closed-form machinery for the one-dimensional linear-quadratic game in
// which players pay for deviating from (a multiple of) the mean control of
// the others and, at the terminal time, from the mean position of the others:
//
//   running cost   0.5*(a + kappa*avg_others(A))^2 + 0.5*gamma*a^2
//   terminal cost  0.5*(x + rho*avg_others(y))^2
//
// and its mean-field limit, where the averages run over the joint law of
// states and controls. Both admit affine feedbacks K(t)x + C(t) and quadratic
// value functions 0.5*r(t)x^2 + p(t)x + q(t); this header computes them,
// classifies the parameter degeneracies, and evaluates the semimonotonicity /
// contraction diagnostics used throughout the experiments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "mfgc/csv.hpp"
#include "mfgc/errors.hpp"
#include "mfgc/time_grid.hpp"

namespace mfgc {

enum class LqMode { NPlayer, MeanField };

struct GaussianInit {
  double mean = 0.0;
  double inv_width = 1.0;  // s(0); density ~ s/sqrt(pi) * exp(-(s(x-mean))^2)
  double stddev() const { return 1.0 / (inv_width * std::sqrt(2.0)); }
};

struct LqParams {
  LqMode mode = LqMode::NPlayer;
  double kappa = 1.0;
  double rho = 0.0;
  double gamma = 1.0;
  double horizon = 1.0;
  double beta = 0.0;
  std::vector<double> initial_positions;  // N-player mode
  GaussianInit init;                      // mean-field mode

  int n_players() const { return static_cast<int>(initial_positions.size()); }

  void validate() const {
    if (!(gamma >= 0.0)) throw std::invalid_argument("LqParams: gamma must be >= 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("LqParams: horizon must be > 0");
    if (kappa == 0.0) throw std::invalid_argument("LqParams: kappa must be nonzero");
    if (!(beta >= 0.0)) throw std::invalid_argument("LqParams: beta must be >= 0");
    if (mode == LqMode::NPlayer) {
      if (n_players() < 2)
        throw std::invalid_argument("LqParams: N-player mode needs >= 2 players");
    } else {
      if (!(init.inv_width > 0.0))
        throw std::invalid_argument("LqParams: initial inverse width must be > 0");
    }
  }

  static LqParams nplayer(double kappa, double rho, double gamma, double horizon,
                          std::vector<double> z, double beta = 0.0) {
    LqParams p;
    p.mode = LqMode::NPlayer;
    p.kappa = kappa;
    p.rho = rho;
    p.gamma = gamma;
    p.horizon = horizon;
    p.beta = beta;
    p.initial_positions = std::move(z);
    p.validate();
    return p;
  }
  static LqParams mean_field(double kappa, double rho, double gamma, double horizon,
                             double mean0, double inv_width0, double beta = 0.0) {
    LqParams p;
    p.mode = LqMode::MeanField;
    p.kappa = kappa;
    p.rho = rho;
    p.gamma = gamma;
    p.horizon = horizon;
    p.beta = beta;
    p.init = GaussianInit{mean0, inv_width0};
    p.validate();
    return p;
  }
};

// r(t) = (gamma+1)/(T+gamma+1-t): quadratic value coefficient, common to the
// N-player and mean-field problems. Strictly increasing, r(T) = 1.
inline double riccati_r(double t, const LqParams& params) {
  if (!(t >= 0.0) || !(t <= params.horizon))
    throw std::domain_error("riccati_r: t outside [0, T]");
  return (params.gamma + 1.0) / (params.horizon + params.gamma + 1.0 - t);
}

// Feedback gain K(t) = -r(t)/(gamma+1) = -1/(T+gamma+1-t).
inline double riccati_gain(double t, const LqParams& params) {
  return -riccati_r(t, params) / (params.gamma + 1.0);
}

// ---------------------------------------------------------------------------
// Degeneracy classification
// ---------------------------------------------------------------------------

enum class LqClassification {
  Regular,
  NoQuadraticSolution,  // consistency system singular: kappa on a forbidden line
  NonUniqueFamily,      // constant system singular with mu(0)=0
  InconsistentSystem,   // constant system singular with mu(0)!=0
};

inline const char* to_string(LqClassification c) {
  switch (c) {
    case LqClassification::Regular: return "Regular";
    case LqClassification::NoQuadraticSolution: return "NoQuadraticSolution";
    case LqClassification::NonUniqueFamily: return "NonUniqueFamily";
    case LqClassification::InconsistentSystem: return "InconsistentSystem";
  }
  return "?";
}

struct DegeneracyReport {
  LqClassification classification = LqClassification::Regular;
  std::string violated_condition;  // empty when Regular
  double determinant = 0.0;        // determinant of the mean-field constant system
};

struct DegeneracyError : SolverError {
  explicit DegeneracyError(DegeneracyReport r)
      : SolverError(std::string("degenerate LQ parameters: ") + r.violated_condition),
        report(std::move(r)) {}
  DegeneracyReport report;
};

namespace detail {
constexpr double kDegeneracyRelTol = 1e-12;

inline bool near_zero(double value, double scale) {
  return std::abs(value) <= kDegeneracyRelTol * std::max(1.0, scale);
}
}  // namespace detail

// Determinant of the 2x2 constant system for (B, D); equals
// (1+kappa+gamma+T(1+rho))/kappa.
inline double mfg_constant_determinant(const LqParams& p) {
  const double S = p.horizon + p.gamma + 1.0;
  const double a11 = 1.0, a12 = -S / p.kappa;
  const double a21 = -1.0 - p.rho;
  const double a22 = (2.0 * S + p.rho * (2.0 * p.horizon + p.gamma + 1.0)) / p.kappa + 1.0;
  return a11 * a22 - a12 * a21;
}

inline DegeneracyReport classify_degeneracy(const LqParams& params) {
  DegeneracyReport rep;
  rep.determinant = mfg_constant_determinant(params);
  const double g1 = params.gamma + 1.0;
  const double scale = std::max({1.0, std::abs(params.kappa), g1});

  if (detail::near_zero(params.kappa + g1, scale)) {
    rep.classification = LqClassification::NoQuadraticSolution;
    rep.violated_condition = "kappa = -(1+gamma)";
    return rep;
  }
  if (params.mode == LqMode::NPlayer) {
    const double line = g1 * (params.n_players() - 1);
    if (detail::near_zero(params.kappa - line, std::max(scale, std::abs(line)))) {
      rep.classification = LqClassification::NoQuadraticSolution;
      rep.violated_condition = "kappa = (gamma+1)(N-1)";
      return rep;
    }
  }

  // Singular constant system: 1+kappa+gamma+T(1+rho) = 0.
  const double cond = 1.0 + params.kappa + params.gamma + params.horizon * (1.0 + params.rho);
  const double cond_scale = std::max({1.0, std::abs(params.kappa), std::abs(params.gamma),
                                      params.horizon * (1.0 + std::abs(params.rho))});
  if (detail::near_zero(cond, cond_scale)) {
    const double mu0 = params.mode == LqMode::MeanField
                           ? params.init.mean
                           : [&] {
                               double s = 0.0;
                               for (double z : params.initial_positions) s += z;
                               return s;
                             }();
    if (detail::near_zero(mu0, 1.0)) {
      rep.classification = LqClassification::NonUniqueFamily;
      rep.violated_condition = "1+kappa+gamma+T(1+rho) = 0 with mu(0) = 0";
    } else {
      rep.classification = LqClassification::InconsistentSystem;
      rep.violated_condition = "1+kappa+gamma+T(1+rho) = 0 with mu(0) != 0";
    }
    return rep;
  }
  rep.classification = LqClassification::Regular;
  return rep;
}

// ---------------------------------------------------------------------------
// Semimonotonicity constants
// ---------------------------------------------------------------------------

struct SemimonReport {
  double c_la = 0.0;
  double c_lx = 0.0;
  double c_g = 0.0;
  double c_disp = 0.0;             // c_la - T*c_g - T^2/2*c_lx
  double contraction_margin = 0.0; // 1 - |kappa|/(1+gamma)
  double condition_value = 0.0;    // 1+kappa+gamma+T(1+rho)
  double lambda_min = 0.0;         // 1+gamma
  bool semimonotone = false;
  bool contractive = false;
};

// N-player mode mirrors the printed min-of-two-affine-branches constants
// (see the negative-coupling caveat in the tests: for kappa<0 the printed
// branch can exceed the Hessian's smallest eigenvalue, which the probe in
// game_model surfaces). Mean-field mode uses the L^2 form: the sharp feasible
// constants are 1+gamma+min(kappa,0) and max(0, -(1+rho)), and the
// semimonotone flag is the sign of 1+kappa+gamma+T(1+rho).
inline SemimonReport semimon_constants(const LqParams& p, LqMode mode) {
  SemimonReport rep;
  const double g1 = p.gamma + 1.0;
  const double T = p.horizon;
  rep.lambda_min = g1;
  rep.contraction_margin = 1.0 - std::abs(p.kappa) / g1;
  rep.contractive = rep.contraction_margin > 0.0;
  rep.condition_value = 1.0 + p.kappa + p.gamma + T * (1.0 + p.rho);
  rep.c_lx = 0.0;

  if (mode == LqMode::NPlayer) {
    const double n1 = p.n_players() - 1.0;
    rep.c_la = std::min(g1 + (1.0 - 1.0 / n1) * p.kappa, g1 - p.kappa / n1);
    rep.c_g = -std::min(g1 + (1.0 - 1.0 / n1) * p.rho, g1 - p.rho / n1);
    rep.c_disp = rep.c_la - T * rep.c_g - 0.5 * T * T * rep.c_lx;
    rep.semimonotone = rep.c_disp > 0.0;
  } else {
    rep.c_la = g1 + std::min(p.kappa, 0.0);
    rep.c_g = std::max(0.0, -(1.0 + std::min(p.rho, 0.0)));
    rep.c_disp = rep.c_la - T * rep.c_g - 0.5 * T * T * rep.c_lx;
    rep.semimonotone = rep.condition_value > 0.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// N-player solution
// ---------------------------------------------------------------------------

struct LqNPlayerSolution {
  TimeGrid grid;
  LqParams params;
  // Node-indexed curves. r and the gain K are player-independent.
  std::vector<double> r, gain;
  // Player-major curves [player][node].
  std::vector<std::vector<double>> p, q, intercept, x;
  // Aggregates P(t) = sum_i p_i, M(t) = sum_i X_i, and the constant costates.
  std::vector<double> aggregate_p, aggregate_m;
  std::vector<double> costate_const;  // y_i = p_i + r X_i, constant in t
  double shooting_determinant = 0.0;

  int n_players() const { return static_cast<int>(x.size()); }

  // Realized control of player i at node m.
  double control(int i, int m) const { return gain[m] * x[i][m] + intercept[i][m]; }
  // Costate along the trajectory.
  double costate(int i, int m) const { return r[m] * x[i][m] + p[i][m]; }
  // Mean of the other players' realized controls at node m.
  double mean_other_controls(int i, int m) const {
    double s = 0.0;
    for (int j = 0; j < n_players(); ++j)
      if (j != i) s += control(j, m);
    return s / (n_players() - 1);
  }
};

struct LqSolveOptions {
  // The internal grid is the caller's grid refined to at least this many
  // steps; quadrature error then stays well below the 1e-8 identity budget.
  int min_internal_steps = 32768;
};

namespace detail {

struct AggregateState {
  double p, m;
};

// d/dt of the aggregate pair (P, M).
inline AggregateState aggregate_rhs(double t, const AggregateState& s, const LqParams& prm) {
  const double r = riccati_r(t, prm);
  const double g1 = prm.gamma + 1.0;
  const double kg = prm.kappa + g1;
  return {r * (s.p - prm.kappa * r * s.m / g1) / kg, -(s.p + r * s.m) / kg};
}

inline AggregateState rk4_step(double t, double h, const AggregateState& s, const LqParams& prm) {
  const AggregateState k1 = aggregate_rhs(t, s, prm);
  const AggregateState k2 = aggregate_rhs(t + 0.5 * h, {s.p + 0.5 * h * k1.p, s.m + 0.5 * h * k1.m}, prm);
  const AggregateState k3 = aggregate_rhs(t + 0.5 * h, {s.p + 0.5 * h * k2.p, s.m + 0.5 * h * k2.m}, prm);
  const AggregateState k4 = aggregate_rhs(t + h, {s.p + h * k3.p, s.m + h * k3.m}, prm);
  return {s.p + h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p),
          s.m + h / 6.0 * (k1.m + 2.0 * k2.m + 2.0 * k3.m + k4.m)};
}

inline std::vector<double> cumtrapz(const std::vector<double>& f, double h) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t m = 1; m < f.size(); ++m)
    out[m] = out[m - 1] + 0.5 * h * (f[m - 1] + f[m]);
  return out;
}

}  // namespace detail

// Two-parameter superposition shooting on the aggregates (P, M), then
// per-player recovery by quadrature. The per-player costate y_i = p_i + r X_i
// is constant in time (the running cost is state-free), which turns the
// trajectory recovery into a single cumulative integral per player.
inline LqNPlayerSolution solve_nplayer_lq(const LqParams& params, const TimeGrid& grid,
                                          const LqSolveOptions& opts = {}) {
  params.validate();
  if (params.mode != LqMode::NPlayer)
    throw std::invalid_argument("solve_nplayer_lq: params not in N-player mode");
  {
    DegeneracyReport rep = classify_degeneracy(params);
    if (rep.classification == LqClassification::NoQuadraticSolution) throw DegeneracyError(rep);
  }

  const int N = params.n_players();
  const double T = params.horizon;
  const double g1 = params.gamma + 1.0;
  const double n1 = N - 1.0;
  const double DN = g1 - params.kappa / n1;
  const int refine = std::max(1, (opts.min_internal_steps + grid.steps - 1) / grid.steps);
  const TimeGrid fine = grid.refined(refine);
  const int Mf = fine.steps;
  const double h = fine.dt();

  // Basis solutions of the linear aggregate system from (1,0) and (0,1).
  std::vector<detail::AggregateState> u1(Mf + 1), u2(Mf + 1);
  u1[0] = {1.0, 0.0};
  u2[0] = {0.0, 1.0};
  for (int m = 0; m < Mf; ++m) {
    const double t = fine.t(m);
    u1[m + 1] = detail::rk4_step(t, h, u1[m], params);
    u2[m + 1] = detail::rk4_step(t, h, u2[m], params);
  }

  // Terminal condition P(T) = rho M(T); initial condition M(0) = sum z.
  double m0 = 0.0;
  for (double z : params.initial_positions) m0 += z;
  const double b1 = u1[Mf].p - params.rho * u1[Mf].m;
  const double b2 = u2[Mf].p - params.rho * u2[Mf].m;
  const double scale = std::max({1.0, std::abs(u1[Mf].p), std::abs(u1[Mf].m)});
  if (std::abs(b1) <= detail::kDegeneracyRelTol * scale) {
    DegeneracyReport rep;
    rep.determinant = b1;
    rep.classification = detail::near_zero(m0, 1.0) ? LqClassification::NonUniqueFamily
                                                    : LqClassification::InconsistentSystem;
    rep.violated_condition = "singular shooting matrix (1+kappa+gamma+T(1+rho) = 0)";
    throw DegeneracyError(rep);
  }
  const double c2 = m0;
  const double c1 = -c2 * b2 / b1;

  std::vector<double> Pf(Mf + 1), Mfv(Mf + 1), rf(Mf + 1), gf(Mf + 1), gfun(Mf + 1);
  for (int m = 0; m <= Mf; ++m) {
    const double t = fine.t(m);
    Pf[m] = c1 * u1[m].p + c2 * u2[m].p;
    Mfv[m] = c1 * u1[m].m + c2 * u2[m].m;
    rf[m] = riccati_r(t, params);
    gf[m] = -rf[m] / g1;
    const double sc = (-Pf[m] + params.kappa * rf[m] * Mfv[m] / g1) / (params.kappa + g1);
    gfun[m] = params.kappa / n1 * (rf[m] * Mfv[m] / g1 - sc);
  }
  const std::vector<double> G = detail::cumtrapz(gfun, h);

  LqNPlayerSolution sol;
  sol.grid = grid;
  sol.params = params;
  sol.shooting_determinant = b1;
  sol.r.resize(grid.nodes());
  sol.gain.resize(grid.nodes());
  sol.aggregate_p.resize(grid.nodes());
  sol.aggregate_m.resize(grid.nodes());
  sol.p.assign(N, std::vector<double>(grid.nodes()));
  sol.q.assign(N, std::vector<double>(grid.nodes()));
  sol.intercept.assign(N, std::vector<double>(grid.nodes()));
  sol.x.assign(N, std::vector<double>(grid.nodes()));
  sol.costate_const.resize(N);

  for (int m = 0; m <= grid.steps; ++m) {
    const int mm = m * refine;
    sol.r[m] = rf[mm];
    sol.gain[m] = gf[mm];
    sol.aggregate_p[m] = Pf[mm];
    sol.aggregate_m[m] = Mfv[mm];
  }

  // Extra beta-term in q: noise enters only the constant coefficient
  // (couplings through mean paths keep p, X, K, C beta-independent).
  std::vector<double> beta_int;
  if (params.beta > 0.0) beta_int = detail::cumtrapz(rf, h);

  const double rho_n = params.rho / n1;
  const double y_den = 1.0 + (1.0 - rho_n) * T / DN;
  if (std::abs(y_den) <= detail::kDegeneracyRelTol * std::max(1.0, T / std::abs(DN))) {
    DegeneracyReport rep;
    rep.determinant = y_den;
    rep.classification = LqClassification::InconsistentSystem;
    rep.violated_condition = "singular per-player terminal system";
    throw DegeneracyError(rep);
  }

  std::vector<double> Xi(Mf + 1), Ci(Mf + 1), pi(Mf + 1), qi(Mf + 1), integ(Mf + 1);
  for (int i = 0; i < N; ++i) {
    const double zi = params.initial_positions[i];
    const double yi =
        ((1.0 - rho_n) * (zi + G[Mf] / DN) + rho_n * Mfv[Mf]) / y_den;
    sol.costate_const[i] = yi;

    for (int m = 0; m <= Mf; ++m) {
      Xi[m] = zi + (G[m] - yi * fine.t(m)) / DN;
      Ci[m] = (gfun[m] - yi) / DN + rf[m] * Xi[m] / g1;
    }
    // p_i by backward trapezoid of r*C_i from p_i(T) = rho/(N-1) sum_{j!=i} X_j(T).
    pi[Mf] = rho_n * (Mfv[Mf] - Xi[Mf]);
    for (int m = Mf - 1; m >= 0; --m)
      pi[m] = pi[m + 1] + 0.5 * h * (rf[m] * Ci[m] + rf[m + 1] * Ci[m + 1]);
    // q_i by backward trapezoid; terminal value 0.5 p_i(T)^2.
    for (int m = 0; m <= Mf; ++m)
      integ[m] = 0.5 * pi[m] * pi[m] + g1 * pi[m] * Ci[m] + 0.5 * params.gamma * g1 * Ci[m] * Ci[m];
    qi[Mf] = 0.5 * pi[Mf] * pi[Mf];
    for (int m = Mf - 1; m >= 0; --m)
      qi[m] = qi[m + 1] + 0.5 * h * (integ[m] + integ[m + 1]);
    if (params.beta > 0.0)
      for (int m = 0; m <= Mf; ++m) qi[m] += params.beta * (beta_int[Mf] - beta_int[m]);

    for (int m = 0; m <= grid.steps; ++m) {
      const int mm = m * refine;
      sol.x[i][m] = Xi[mm];
      sol.intercept[i][m] = Ci[mm];
      sol.p[i][m] = pi[mm];
      sol.q[i][m] = qi[mm];
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Mean-field solution
// ---------------------------------------------------------------------------

struct LqMfgSolution {
  LqParams params;
  double b_const = 0.0;  // B
  double d_const = 0.0;  // D
  double e_const = 0.0;  // E, anchored by q(T) = 0.5 (rho mu(T))^2
  double determinant = 0.0;

  double r(double t) const { return riccati_r(t, params); }
  double gain(double t) const { return -r(t) / (params.gamma + 1.0); }
  double s(double t) const {
    const double S = params.horizon + params.gamma + 1.0;
    return params.init.inv_width * S / (S - t);
  }
  double mu(double t) const {
    const double S = params.horizon + params.gamma + 1.0;
    return b_const - d_const * (S + t) / params.kappa;
  }
  double p(double t) const {
    const double g1 = params.gamma + 1.0;
    const double S = params.horizon + params.gamma + 1.0;
    return -b_const * g1 / (S - t) +
           d_const * (2.0 * g1 * (params.gamma + 1.0 + params.horizon) / (params.kappa * (S - t)) + 1.0);
  }
  double intercept(double t) const {
    const double S = params.horizon + params.gamma + 1.0;
    return b_const / (S - t) - 2.0 * d_const * S / (params.kappa * (S - t));
  }
  double q(double t) const {
    const double g1 = params.gamma + 1.0;
    const double S = params.horizon + params.gamma + 1.0;
    const double w = b_const - 2.0 * d_const * S / params.kappa;
    double base = g1 * w * w / (2.0 * (S - t)) - 0.5 * d_const * d_const * t + e_const;
    if (params.beta > 0.0) {
      // beta r enters only q'; integral of r is (gamma+1) log((S-t')/...).
      base += params.beta * g1 * (std::log(S - t) - std::log(g1));
    }
    return base;
  }
  // Control distribution nu_t: image of the Gaussian state law under the
  // affine feedback.
  struct NuPoint {
    double mean, stddev;
  };
  NuPoint nu(double t) const {
    const double sd = 1.0 / (s(t) * std::sqrt(2.0));
    return {gain(t) * mu(t) + intercept(t), std::abs(gain(t)) * sd};
  }
  // Mean control equals the aggregate drift; constant in time.
  double mean_control(double t) const { return gain(t) * mu(t) + intercept(t); }
};

inline LqMfgSolution solve_mfg_lq(const LqParams& params) {
  params.validate();
  if (params.mode != LqMode::MeanField)
    throw std::invalid_argument("solve_mfg_lq: params not in mean-field mode");
  DegeneracyReport rep = classify_degeneracy(params);
  if (rep.classification != LqClassification::Regular) throw DegeneracyError(rep);

  const double T = params.horizon, g1 = params.gamma + 1.0, S = T + g1;
  const double a11 = 1.0, a12 = -S / params.kappa;
  const double a21 = -1.0 - params.rho;
  const double a22 = (2.0 * S + params.rho * (2.0 * T + params.gamma + 1.0)) / params.kappa + 1.0;
  const double det = a11 * a22 - a12 * a21;

  LqMfgSolution sol;
  sol.params = params;
  sol.determinant = det;
  sol.b_const = a22 * params.init.mean / det;
  sol.d_const = -a21 * params.init.mean / det;
  sol.e_const = 0.0;
  const double qT_target = 0.5 * params.rho * sol.mu(T) * params.rho * sol.mu(T);
  sol.e_const = qT_target - sol.q(T);
  return sol;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct LqEval {
  double value = 0.0;
  double gradient = 0.0;
  double feedback = 0.0;
};

namespace detail {
inline double lerp_node(const std::vector<double>& v, const TimeGrid& grid, double t) {
  if (!(t >= 0.0) || !(t <= grid.horizon))
    throw std::domain_error("eval_lq: t outside [0, T]");
  const double u = t / grid.dt();
  const int m = std::min(static_cast<int>(u), grid.steps - 1);
  const double w = u - m;
  return (1.0 - w) * v[m] + w * v[m + 1];
}
}  // namespace detail

inline LqEval eval_lq(const LqNPlayerSolution& sol, int player, double t, double x) {
  const double r = detail::lerp_node(sol.r, sol.grid, t);
  const double p = detail::lerp_node(sol.p[player], sol.grid, t);
  const double q = detail::lerp_node(sol.q[player], sol.grid, t);
  const double K = detail::lerp_node(sol.gain, sol.grid, t);
  const double C = detail::lerp_node(sol.intercept[player], sol.grid, t);
  return {0.5 * r * x * x + p * x + q, r * x + p, K * x + C};
}

inline LqEval eval_lq(const LqMfgSolution& sol, double t, double x) {
  const double r = sol.r(t);
  return {0.5 * r * x * x + sol.p(t) * x + sol.q(t), r * x + sol.p(t),
          sol.gain(t) * x + sol.intercept(t)};
}

// Residual of feedback = -(gradient + kappa * mean control)/(gamma+1).
inline double feedback_consistency_residual(const LqNPlayerSolution& sol, int player, int node,
                                            double x) {
  const double grad = sol.r[node] * x + sol.p[player][node];
  const double feedback = sol.gain[node] * x + sol.intercept[player][node];
  const double mean = sol.mean_other_controls(player, node);
  return feedback + (grad + sol.params.kappa * mean) / (sol.params.gamma + 1.0);
}

inline double feedback_consistency_residual(const LqMfgSolution& sol, double t, double x) {
  const LqEval e = eval_lq(sol, t, x);
  return e.feedback + (e.gradient + sol.params.kappa * sol.mean_control(t)) / (sol.params.gamma + 1.0);
}

// ---------------------------------------------------------------------------
// CSV serialization: columns (t, r, p, q, K, C, X[, mu, s])
// ---------------------------------------------------------------------------

inline void write_csv(const LqNPlayerSolution& sol, int player, std::ostream& os) {
  CsvWriter w(os);
  w.header({"t", "r", "p", "q", "K", "C", "X"});
  for (int m = 0; m <= sol.grid.steps; ++m) {
    w.field(sol.grid.t(m))
        .field(sol.r[m])
        .field(sol.p[player][m])
        .field(sol.q[player][m])
        .field(sol.gain[m])
        .field(sol.intercept[player][m])
        .field(sol.x[player][m]);
    w.endrow();
  }
}

inline void write_csv(const LqMfgSolution& sol, const TimeGrid& grid, std::ostream& os) {
  CsvWriter w(os);
  w.header({"t", "r", "p", "q", "K", "C", "X", "mu", "s"});
  for (int m = 0; m <= grid.steps; ++m) {
    const double t = grid.t(m);
    w.field(t)
        .field(sol.r(t))
        .field(sol.p(t))
        .field(sol.q(t))
        .field(sol.gain(t))
        .field(sol.intercept(t))
        .field(sol.mu(t))
        .field(sol.mu(t))
        .field(sol.s(t));
    w.endrow();
  }
}

}  // namespace mfgc

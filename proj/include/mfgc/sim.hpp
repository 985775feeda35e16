#pragma once

// Euler-Maruyama path simulation under evaluable feedback controls, Monte
// Carlo cost estimation, and the unilateral-deviation equilibrium check with
// common random numbers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "mfgc/csv.hpp"
#include "mfgc/errors.hpp"
#include "mfgc/fbode.hpp"
#include "mfgc/lq.hpp"
#include "mfgc/model.hpp"
#include "mfgc/rng.hpp"

namespace mfgc {

struct SimConfig {
  double beta = 0.0;
  int n_paths = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  bool antithetic = false;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be > 0");
    if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
    if (!(beta >= 0.0)) throw std::invalid_argument("SimConfig: beta must be >= 0");
  }
};

// Affine-in-state feedback curve sampled on a grid; linear interpolation in t.
struct FeedbackCurve {
  TimeGrid grid;
  std::vector<double> gain, intercept;

  double eval(double t, double x) const {
    const double u = std::clamp(t / grid.dt(), 0.0, static_cast<double>(grid.steps));
    const int m = std::min(static_cast<int>(u), grid.steps - 1);
    const double w = u - m;
    const double K = (1.0 - w) * gain[m] + w * gain[m + 1];
    const double C = (1.0 - w) * intercept[m] + w * intercept[m + 1];
    return K * x + C;
  }
};

struct FeedbackSet {
  std::vector<FeedbackCurve> players;
  int size() const { return static_cast<int>(players.size()); }
  double horizon() const { return players.at(0).grid.horizon; }
};

inline FeedbackSet feedback_from_lq(const LqNPlayerSolution& sol) {
  FeedbackSet fs;
  for (int i = 0; i < sol.n_players(); ++i)
    fs.players.push_back(FeedbackCurve{sol.grid, sol.gain, sol.intercept[i]});
  return fs;
}

inline FeedbackSet feedback_from_mfg(const LqMfgSolution& sol, const TimeGrid& grid,
                                     int n_copies) {
  FeedbackCurve c;
  c.grid = grid;
  c.gain.resize(grid.nodes());
  c.intercept.resize(grid.nodes());
  for (int m = 0; m <= grid.steps; ++m) {
    c.gain[m] = sol.gain(grid.t(m));
    c.intercept[m] = sol.intercept(grid.t(m));
  }
  FeedbackSet fs;
  fs.players.assign(n_copies, c);
  return fs;
}

// Feedback-field reconstruction from a solved bundle: the gain is fitted
// cross-sectionally per node (all entities share it), then each entity keeps
// its own intercept A_i - K X_i. Exact for affine fields with spread states;
// a population concentrated at one point degrades to the zero-gain constant
// fit, which is exact on-trajectory only.
inline FeedbackSet feedback_from_bundle(const TrajectoryBundle& b) {
  const int n = b.entities();
  FeedbackSet fs;
  std::vector<double> gain(b.nodes());
  for (int m = 0; m < b.nodes(); ++m) {
    double sx = 0, sa = 0, sxx = 0, sxa = 0;
    for (int i = 0; i < n; ++i) {
      sx += b.states[i][m];
      sa += b.controls[i][m];
      sxx += b.states[i][m] * b.states[i][m];
      sxa += b.states[i][m] * b.controls[i][m];
    }
    const double var = sxx / n - (sx / n) * (sx / n);
    gain[m] = (n >= 2 && var > 1e-12) ? (sxa / n - (sx / n) * (sa / n)) / var : 0.0;
  }
  for (int i = 0; i < n; ++i) {
    FeedbackCurve c;
    c.grid = b.grid;
    c.gain = gain;
    c.intercept.resize(b.nodes());
    for (int m = 0; m < b.nodes(); ++m)
      c.intercept[m] = b.controls[i][m] - gain[m] * b.states[i][m];
    fs.players.push_back(std::move(c));
  }
  return fs;
}

// ---------------------------------------------------------------------------
// Perturbations of a single player's feedback
// ---------------------------------------------------------------------------

struct Perturbation {
  enum class Kind { ConstantShift, GainScale, TimeBump };
  Kind kind = Kind::ConstantShift;
  double amount = 0.0;
  double t0 = 0.0, t1 = 0.0;  // TimeBump support
  std::string label;
};

inline FeedbackCurve apply_perturbation(const FeedbackCurve& c, const Perturbation& p) {
  FeedbackCurve out = c;
  switch (p.kind) {
    case Perturbation::Kind::ConstantShift:
      for (double& v : out.intercept) v += p.amount;
      break;
    case Perturbation::Kind::GainScale:
      for (double& v : out.gain) v *= 1.0 + p.amount;
      break;
    case Perturbation::Kind::TimeBump:
      for (int m = 0; m < out.grid.nodes(); ++m) {
        const double t = out.grid.t(m);
        if (t >= p.t0 && t <= p.t1) out.intercept[m] += p.amount;
      }
      break;
  }
  return out;
}

// The configured deviation family: constant shifts, gain scalings and
// time-localized bumps, each in both directions and two magnitudes.
inline std::vector<Perturbation> default_perturbations(double horizon) {
  std::vector<Perturbation> out;
  for (double a : {0.1, -0.1, 0.05, -0.05})
    out.push_back({Perturbation::Kind::ConstantShift, a, 0, 0,
                   "shift" + fmt_double(a)});
  for (double a : {0.1, -0.1, 0.05, -0.05})
    out.push_back({Perturbation::Kind::GainScale, a, 0, 0, "gain" + fmt_double(a)});
  for (double a : {0.1, -0.1})
    out.push_back({Perturbation::Kind::TimeBump, a, 0.0, horizon / 4,
                   "bump-early" + fmt_double(a)});
  for (double a : {0.1, -0.1})
    out.push_back({Perturbation::Kind::TimeBump, a, horizon / 2, 3 * horizon / 4,
                   "bump-late" + fmt_double(a)});
  return out;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct PathEnsemble {
  TimeGrid grid;
  int n_paths = 0, n_players = 0;
  double beta = 0.0;
  std::vector<double> states, controls;  // [path][player][node] flattened

  double state(int path, int player, int node) const {
    return states[(static_cast<std::size_t>(path) * n_players + player) * grid.nodes() + node];
  }
  double control(int path, int player, int node) const {
    return controls[(static_cast<std::size_t>(path) * n_players + player) * grid.nodes() + node];
  }
};

namespace detail {

inline TimeGrid sim_grid(double horizon, double dt) {
  const int steps = std::max(2, static_cast<int>(std::llround(horizon / dt)));
  return TimeGrid(horizon, steps);
}

// One player's path under `curve` with the given normal increments.
inline void em_path(const FeedbackCurve& curve, double x0, double beta, const TimeGrid& g,
                    std::span<const double> normals, std::span<double> x_out,
                    std::span<double> a_out) {
  const double h = g.dt();
  const double noise = std::sqrt(2.0 * beta * h);
  double x = x0;
  for (int m = 0; m < g.steps; ++m) {
    x_out[m] = x;
    const double a = curve.eval(g.t(m), x);
    a_out[m] = a;
    x += a * h + noise * normals[m];
    if (!std::isfinite(x))
      throw SolverError("simulate: non-finite state at node " + std::to_string(m + 1));
  }
  x_out[g.steps] = x;
  a_out[g.steps] = curve.eval(g.horizon, x);
}

// Fill the per-path normals for (path, player); antithetic odd paths reuse
// the even partner's draws negated. Paired paths also share the init draw.
inline void path_normals(const SimConfig& cfg, int path, int player, int steps,
                         std::vector<double>& normals) {
  const int base = cfg.antithetic ? path - (path % 2) : path;
  Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(base),
                        static_cast<std::uint64_t>(player));
  const double flip = (cfg.antithetic && path % 2 == 1) ? -1.0 : 1.0;
  normals.resize(steps);
  for (int m = 0; m < steps; ++m) normals[m] = flip * rng.normal();
}

}  // namespace detail

inline PathEnsemble simulate(const FeedbackSet& feedbacks,
                             const std::function<double(int, Rng&)>& init_sampler,
                             const SimConfig& cfg) {
  cfg.validate();
  const int np = feedbacks.size();
  const TimeGrid g = detail::sim_grid(feedbacks.horizon(), cfg.dt);
  const std::size_t total =
      static_cast<std::size_t>(cfg.n_paths) * np * g.nodes();
  if (total > 30'000'000u)
    throw std::invalid_argument("simulate: ensemble too large to materialize; "
                                "use the streaming estimators");
  PathEnsemble e;
  e.grid = g;
  e.n_paths = cfg.n_paths;
  e.n_players = np;
  e.beta = cfg.beta;
  e.states.resize(total);
  e.controls.resize(total);
  std::vector<double> normals;
  for (int path = 0; path < cfg.n_paths; ++path)
    for (int pl = 0; pl < np; ++pl) {
      detail::path_normals(cfg, path, pl, g.steps, normals);
      const std::size_t off = (static_cast<std::size_t>(path) * np + pl) * g.nodes();
      Rng init_rng = Rng::stream(cfg.seed ^ 0x5eedULL,
                                 static_cast<std::uint64_t>(
                                     cfg.antithetic ? path - (path % 2) : path),
                                 static_cast<std::uint64_t>(pl));
      const double x0 = init_sampler(pl, init_rng);
      detail::em_path(feedbacks.players[pl], x0, cfg.beta, g, normals,
                      std::span<double>(e.states).subspan(off, g.nodes()),
                      std::span<double>(e.controls).subspan(off, g.nodes()));
    }
  return e;
}

inline PathEnsemble simulate(const FeedbackSet& feedbacks, std::span<const double> init,
                             const SimConfig& cfg) {
  if (static_cast<int>(init.size()) != feedbacks.size())
    throw std::invalid_argument("simulate: init size mismatch");
  std::vector<double> z(init.begin(), init.end());
  return simulate(feedbacks, [z](int pl, Rng&) { return z[pl]; }, cfg);
}

struct CostEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n_paths = 0;
};

namespace detail {

// Trapezoid-in-time cost of player `i` along one joint path bundle.
inline double path_cost(const CostModel& model, const TimeGrid& g, int i,
                        const std::vector<std::vector<double>>& xs,
                        const std::vector<std::vector<double>>& as, BundleMode mode) {
  const int np = static_cast<int>(xs.size());
  const double h = g.dt();
  std::vector<double> x_node(np), a_node(np);
  double acc = 0.0;
  for (int m = 0; m <= g.steps; ++m) {
    for (int j = 0; j < np; ++j) {
      x_node[j] = xs[j][m];
      a_node[j] = as[j][m];
    }
    const Context ctx = node_context(mode, x_node, a_node, i);
    const double w = (m == 0 || m == g.steps) ? 0.5 * h : h;
    acc += w * model.running_cost(x_node[i], a_node[i], ctx);
    if (m == g.steps) acc += model.terminal_cost(x_node[i], ctx);
  }
  return acc;
}

struct Welford {
  double mean = 0.0, m2 = 0.0;
  long n = 0;
  void push(double v) {
    ++n;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  double stderr_() const {
    return n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;
  }
};

}  // namespace detail

// Monte-Carlo-in-paths, trapezoid-in-time estimate of player `i`'s cost from
// a stored ensemble; all players share one joint path per sample.
inline CostEstimate estimate_cost(const PathEnsemble& e, const CostModel& model, int player) {
  detail::Welford w;
  std::vector<std::vector<double>> xs(e.n_players, std::vector<double>(e.grid.nodes()));
  std::vector<std::vector<double>> as(e.n_players, std::vector<double>(e.grid.nodes()));
  const BundleMode mode = BundleMode::NPlayer;
  for (int path = 0; path < e.n_paths; ++path) {
    for (int j = 0; j < e.n_players; ++j)
      for (int m = 0; m < e.grid.nodes(); ++m) {
        xs[j][m] = e.state(path, j, m);
        as[j][m] = e.control(path, j, m);
      }
    w.push(detail::path_cost(model, e.grid, player, xs, as, mode));
  }
  return {w.mean, w.stderr_(), e.n_paths};
}

// Streaming estimator for all players at once (no ensemble materialization).
inline std::vector<CostEstimate> estimate_costs(const FeedbackSet& feedbacks,
                                                const CostModel& model,
                                                std::span<const double> init,
                                                const SimConfig& cfg) {
  cfg.validate();
  const int np = feedbacks.size();
  const TimeGrid g = detail::sim_grid(feedbacks.horizon(), cfg.dt);
  std::vector<detail::Welford> acc(np);
  std::vector<std::vector<double>> xs(np, std::vector<double>(g.nodes()));
  std::vector<std::vector<double>> as(np, std::vector<double>(g.nodes()));
  std::vector<double> normals;
  for (int path = 0; path < cfg.n_paths; ++path) {
    for (int pl = 0; pl < np; ++pl) {
      detail::path_normals(cfg, path, pl, g.steps, normals);
      detail::em_path(feedbacks.players[pl], init[pl], cfg.beta, g, normals, xs[pl], as[pl]);
    }
    for (int pl = 0; pl < np; ++pl)
      acc[pl].push(detail::path_cost(model, g, pl, xs, as, BundleMode::NPlayer));
  }
  std::vector<CostEstimate> out(np);
  for (int pl = 0; pl < np; ++pl) out[pl] = {acc[pl].mean, acc[pl].stderr_(), cfg.n_paths};
  return out;
}

// ---------------------------------------------------------------------------
// Unilateral deviation test
// ---------------------------------------------------------------------------

struct DeviationVerdict {
  std::string label;
  double delta_j = 0.0;
  double stderr_ = 0.0;
  bool pass = false;
  bool inconclusive = false;
};

struct DeviationReport {
  std::vector<DeviationVerdict> verdicts;
  CostEstimate baseline;
  bool all_pass = true;
};

// Estimates Delta J = J^i(perturbed; others) - J^i(baseline) per perturbation
// with common random numbers; only player `i`'s path changes, so the other
// players' paths are simulated once per sample.
inline DeviationReport deviation_test(const FeedbackSet& equilibrium, const CostModel& model,
                                      int player, std::span<const Perturbation> perturbations,
                                      std::span<const double> init, const SimConfig& cfg) {
  cfg.validate();
  const int np = equilibrium.size();
  if (player < 0 || player >= np) throw std::invalid_argument("deviation_test: bad player");
  const TimeGrid g = detail::sim_grid(equilibrium.horizon(), cfg.dt);

  std::vector<FeedbackCurve> perturbed;
  perturbed.reserve(perturbations.size());
  for (const auto& p : perturbations)
    perturbed.push_back(apply_perturbation(equilibrium.players[player], p));

  std::vector<std::vector<double>> xs(np, std::vector<double>(g.nodes()));
  std::vector<std::vector<double>> as(np, std::vector<double>(g.nodes()));
  std::vector<double> x_dev(g.nodes()), a_dev(g.nodes());
  std::vector<double> normals, own_normals;
  detail::Welford base_acc;
  std::vector<detail::Welford> dev_acc(perturbations.size());

  for (int path = 0; path < cfg.n_paths; ++path) {
    for (int pl = 0; pl < np; ++pl) {
      detail::path_normals(cfg, path, pl, g.steps, normals);
      if (pl == player) own_normals = normals;
      detail::em_path(equilibrium.players[pl], init[pl], cfg.beta, g, normals, xs[pl], as[pl]);
    }
    const double j_base =
        detail::path_cost(model, g, player, xs, as, BundleMode::NPlayer);
    base_acc.push(j_base);

    std::vector<double> x_keep = xs[player], a_keep = as[player];
    for (std::size_t k = 0; k < perturbed.size(); ++k) {
      detail::em_path(perturbed[k], init[player], cfg.beta, g, own_normals, x_dev, a_dev);
      xs[player] = x_dev;
      as[player] = a_dev;
      dev_acc[k].push(detail::path_cost(model, g, player, xs, as, BundleMode::NPlayer) - j_base);
      xs[player] = x_keep;
      as[player] = a_keep;
    }
  }

  DeviationReport rep;
  rep.baseline = {base_acc.mean, base_acc.stderr_(), cfg.n_paths};
  const double floor = 1e-9 * (1.0 + std::abs(base_acc.mean));
  for (std::size_t k = 0; k < perturbations.size(); ++k) {
    DeviationVerdict v;
    v.label = perturbations[k].label;
    v.delta_j = dev_acc[k].mean;
    v.stderr_ = dev_acc[k].stderr_();
    const double slack = std::max(3.0 * v.stderr_, floor);
    v.pass = v.delta_j >= -slack;
    v.inconclusive = v.delta_j < 0.0 && v.pass;
    rep.all_pass = rep.all_pass && v.pass;
    rep.verdicts.push_back(std::move(v));
  }
  return rep;
}

// Fits Delta J(eps) ~ c * eps^2 over a scaled family of constant shifts.
struct ScaledDeviationFit {
  std::vector<double> eps, delta_j;
  double quad_coeff = 0.0;
};

inline ScaledDeviationFit scaled_deviation_fit(const FeedbackSet& equilibrium,
                                               const CostModel& model, int player,
                                               std::span<const double> eps_list,
                                               std::span<const double> init,
                                               const SimConfig& cfg) {
  std::vector<Perturbation> ps;
  for (double e : eps_list)
    ps.push_back({Perturbation::Kind::ConstantShift, e, 0, 0, "eps" + fmt_double(e)});
  const DeviationReport rep = deviation_test(equilibrium, model, player, ps, init, cfg);
  ScaledDeviationFit fit;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    fit.eps.push_back(eps_list[k]);
    fit.delta_j.push_back(rep.verdicts[k].delta_j);
    num += rep.verdicts[k].delta_j * eps_list[k] * eps_list[k];
    den += eps_list[k] * eps_list[k] * eps_list[k] * eps_list[k];
  }
  fit.quad_coeff = den > 0 ? num / den : 0.0;
  return fit;
}

inline void write_summary_csv(std::span<const CostEstimate> costs, std::ostream& os) {
  CsvWriter w(os);
  w.header({"player", "J_mean", "J_stderr"});
  for (std::size_t i = 0; i < costs.size(); ++i) {
    w.field(static_cast<int>(i)).field(costs[i].mean).field(costs[i].stderr_);
    w.endrow();
  }
}

// Full-path dump, guarded by a row cap.
inline void write_paths_csv(const PathEnsemble& e, std::ostream& os,
                            std::size_t max_rows = 200000) {
  const std::size_t rows =
      static_cast<std::size_t>(e.n_paths) * e.n_players * e.grid.nodes();
  if (rows > max_rows)
    throw std::invalid_argument("write_paths_csv: dump of " + std::to_string(rows) +
                                " rows exceeds the cap of " + std::to_string(max_rows));
  CsvWriter w(os);
  w.header({"path", "player", "node", "t", "X", "A"});
  for (int p = 0; p < e.n_paths; ++p)
    for (int i = 0; i < e.n_players; ++i)
      for (int m = 0; m < e.grid.nodes(); ++m) {
        w.field(p).field(i).field(m).field(e.grid.t(m)).field(e.state(p, i, m)).field(
            e.control(p, i, m));
        w.endrow();
      }
}

}  // namespace mfgc

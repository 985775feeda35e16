#pragma once

// Picard-type solver for the deterministic coupled forward/backward system:
// states integrate the controls forward, costates integrate the running-cost
// state gradient backward from the terminal-cost gradient, and the controls
// are re-derived at every node from the consistency fixed point. The damped
// outer loop iterates control values along trajectories until the update
// norm settles below tolerance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "mfgc/csv.hpp"
#include "mfgc/errors.hpp"
#include "mfgc/model.hpp"
#include "mfgc/rng.hpp"
#include "mfgc/time_grid.hpp"

namespace mfgc {

enum class BundleMode { NPlayer, MeanFieldParticles };

struct TrajectoryBundle {
  BundleMode mode = BundleMode::NPlayer;
  TimeGrid grid;
  // [entity][node]
  std::vector<std::vector<double>> states, costates, controls;

  int entities() const { return static_cast<int>(states.size()); }
  int nodes() const { return grid.nodes(); }
};

struct SolveReport {
  int outer_iterations = 0;
  double final_update = 0.0;
  double max_consistency_residual = 0.0;
  double forward_defect = 0.0;
  double backward_defect = 0.0;
  double contraction_estimate = 0.0;
  double damping_used = 1.0;
  bool converged = false;
};

struct PicardConfig {
  double outer_tol = 1e-8;
  int max_outer = 400;
  double damping = 0.0;  // 0 => auto: 1.0, falling back to 0.5 on stall
  ConsistencyConfig inner;
  std::vector<double> initial_controls_flat;  // optional warm start, entity-major
  PicardConfig() { inner.tol = outer_tol / 100.0; }
};

struct DefectReport {
  double forward = 0.0;
  double backward = 0.0;
  double consistency = 0.0;
};

namespace detail {

struct NodeSums {
  double x = 0.0, a = 0.0;
};

inline NodeSums node_sums(std::span<const double> xs, std::span<const double> as) {
  NodeSums s;
  for (double x : xs) s.x += x;
  for (double a : as) s.a += a;
  return s;
}

inline Context node_context(BundleMode mode, std::span<const double> xs,
                            std::span<const double> as, int self, const NodeSums& s) {
  if (mode == BundleMode::NPlayer) return Context(OtherPlayers{xs, as, self, s.x, s.a});
  return Context(EmpiricalPairMeasure{xs, as, s.x, s.a});
}

inline Context node_context(BundleMode mode, std::span<const double> xs,
                            std::span<const double> as, int self) {
  return node_context(mode, xs, as, self, node_sums(xs, as));
}

struct PicardWorkspace {
  std::vector<double> x_node, y_node, a_node;
};

// One full Picard solve over a population with initial states `init`.
inline std::pair<TrajectoryBundle, SolveReport> picard_solve(const CostModel& model,
                                                             std::span<const double> init,
                                                             const TimeGrid& grid,
                                                             const PicardConfig& cfg,
                                                             BundleMode mode) {
  model.validate();
  const int n = static_cast<int>(init.size());
  if (n < 1) throw std::invalid_argument("picard_solve: empty population");
  if (mode == BundleMode::NPlayer && n < 2)
    throw std::invalid_argument("picard_solve: N-player mode needs N >= 2");
  const int M = grid.steps;
  const double h = grid.dt();

  TrajectoryBundle b;
  b.mode = mode;
  b.grid = grid;
  b.states.assign(n, std::vector<double>(M + 1, 0.0));
  b.costates.assign(n, std::vector<double>(M + 1, 0.0));
  b.controls.assign(n, std::vector<double>(M + 1, 0.0));
  if (!cfg.initial_controls_flat.empty()) {
    if (static_cast<int>(cfg.initial_controls_flat.size()) != n * (M + 1))
      throw std::invalid_argument("picard_solve: warm start size mismatch");
    for (int i = 0; i < n; ++i)
      for (int m = 0; m <= M; ++m)
        b.controls[i][m] = cfg.initial_controls_flat[i * (M + 1) + m];
  }

  ConsistencyConfig inner = cfg.inner;
  if (inner.tol <= 0.0) inner.tol = cfg.outer_tol / 100.0;

  SolveReport rep;
  double theta = cfg.damping > 0.0 ? cfg.damping : 1.0;
  const bool auto_damping = cfg.damping <= 0.0;
  int fallbacks = 0;

  std::vector<double> x_node(n), y_node(n), a_warm(n), dxl(n);
  std::vector<std::vector<double>> a_hat(n, std::vector<double>(M + 1, 0.0));
  std::vector<double> ratios;
  double prev_update = -1.0, first_update = -1.0;
  int stalled = 0;

  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    // (1) states forward: dX = A, explicit trapezoid over the known field.
    for (int i = 0; i < n; ++i) {
      b.states[i][0] = init[i];
      for (int m = 0; m < M; ++m)
        b.states[i][m + 1] =
            b.states[i][m] + 0.5 * h * (b.controls[i][m] + b.controls[i][m + 1]);
    }
    // (2) costates backward with driver D_xH = -D_xL evaluated at the
    // current control iterate.
    for (int i = 0; i < n; ++i) x_node[i] = b.states[i][M];
    for (int i = 0; i < n; ++i) a_warm[i] = b.controls[i][M];
    NodeSums sums = node_sums(x_node, a_warm);
    for (int i = 0; i < n; ++i) {
      const Context ctx = node_context(mode, x_node, a_warm, i, sums);
      b.costates[i][M] = model.terminal_grad(x_node[i], ctx);
      if (!std::isfinite(b.costates[i][M]))
        throw CallbackError("picard_solve: non-finite terminal gradient");
    }
    std::vector<double> dxl_next(n);
    for (int i = 0; i < n; ++i) {
      const Context ctx = node_context(mode, x_node, a_warm, i, sums);
      dxl_next[i] = model.grad_x(x_node[i], b.controls[i][M], ctx);
    }
    for (int m = M - 1; m >= 0; --m) {
      for (int i = 0; i < n; ++i) x_node[i] = b.states[i][m];
      for (int i = 0; i < n; ++i) a_warm[i] = b.controls[i][m];
      sums = node_sums(x_node, a_warm);
      for (int i = 0; i < n; ++i) {
        const Context ctx = node_context(mode, x_node, a_warm, i, sums);
        dxl[i] = model.grad_x(x_node[i], b.controls[i][m], ctx);
      }
      for (int i = 0; i < n; ++i)
        b.costates[i][m] = b.costates[i][m + 1] + 0.5 * h * (dxl[i] + dxl_next[i]);
      dxl.swap(dxl_next);
    }
    // (3) refresh controls at every node from the consistency fixed point.
    for (int m = 0; m <= M; ++m) {
      for (int i = 0; i < n; ++i) {
        x_node[i] = b.states[i][m];
        y_node[i] = b.costates[i][m];
        a_warm[i] = b.controls[i][m];
      }
      const ConsistencyResult cr =
          mode == BundleMode::NPlayer
              ? consistency_fixed_point_nplayer(x_node, y_node, model, inner, a_warm)
              : consistency_fixed_point_mf(x_node, y_node, model, inner, a_warm);
      for (int i = 0; i < n; ++i) a_hat[i][m] = cr.controls[i];
    }
    // (4) damped update and stopping test on the undamped correction.
    double update = 0.0;
    for (int i = 0; i < n; ++i)
      for (int m = 0; m <= M; ++m)
        update = std::max(update, std::abs(a_hat[i][m] - b.controls[i][m]));
    for (int i = 0; i < n; ++i)
      for (int m = 0; m <= M; ++m)
        b.controls[i][m] = (1.0 - theta) * b.controls[i][m] + theta * a_hat[i][m];

    rep.outer_iterations = outer;
    rep.final_update = update;
    rep.damping_used = theta;
    if (prev_update > 0.0 && update > 0.0) {
      ratios.push_back(update / prev_update);
      if (ratios.size() > 6) ratios.erase(ratios.begin());
      std::vector<double> sorted = ratios;
      std::sort(sorted.begin(), sorted.end());
      rep.contraction_estimate = sorted[sorted.size() / 2];
    }
    if (update <= cfg.outer_tol) {
      rep.converged = true;
      break;
    }
    if (first_update < 0.0) first_update = update;
    const bool growing = prev_update > 0.0 && update >= prev_update * (1.0 - 1e-9);
    stalled = growing ? stalled + 1 : 0;
    const bool blowup = update > 1e6 * first_update;
    if (stalled >= 5 || blowup) {
      // First fallback halves the step; the second tunes it to the measured
      // growth rate, which handles strongly negative outer eigenvalues.
      if (auto_damping && fallbacks < 2) {
        // For a dominant negative eigenvalue, the damped ratio r relates to
        // |lambda| via r = theta |lambda| - (1 - theta).
        const double lam =
            std::max(1.0, (rep.contraction_estimate + 1.0 - theta) / std::max(theta, 1e-3));
        theta = fallbacks == 0 ? 0.5 : std::clamp(0.9 / (1.0 + lam), 0.02, 0.45);
        ++fallbacks;
        stalled = 0;
        prev_update = -1.0;
        ratios.clear();
        continue;
      }
      throw NonContraction("picard_solve: outer iteration stalled or diverged",
                           rep.contraction_estimate, outer);
    }
    prev_update = update;
  }
  if (!rep.converged)
    throw NonConvergence("picard_solve: outer iterations exhausted", rep.final_update,
                         rep.outer_iterations);
  return {std::move(b), rep};
}

}  // namespace detail

inline DefectReport residuals(const TrajectoryBundle& b, const CostModel& model) {
  const int n = b.entities();
  const int M = b.grid.steps;
  const double h = b.grid.dt();
  DefectReport rep;
  std::vector<double> x_node(n), a_node(n), dxl(n), dxl_next(n);

  for (int i = 0; i < n; ++i)
    for (int m = 0; m < M; ++m)
      rep.forward = std::max(
          rep.forward, std::abs(b.states[i][m + 1] - b.states[i][m] -
                                0.5 * h * (b.controls[i][m] + b.controls[i][m + 1])));

  // Backward defect against a re-integration from the bundle's own data.
  std::vector<std::vector<double>> y(n, std::vector<double>(M + 1, 0.0));
  for (int i = 0; i < n; ++i) x_node[i] = b.states[i][M];
  for (int i = 0; i < n; ++i) a_node[i] = b.controls[i][M];
  detail::NodeSums sums = detail::node_sums(x_node, a_node);
  for (int i = 0; i < n; ++i) {
    const Context ctx = detail::node_context(b.mode, x_node, a_node, i, sums);
    y[i][M] = model.terminal_grad(x_node[i], ctx);
    dxl_next[i] = model.grad_x(x_node[i], a_node[i], ctx);
  }
  for (int m = M - 1; m >= 0; --m) {
    for (int i = 0; i < n; ++i) x_node[i] = b.states[i][m];
    for (int i = 0; i < n; ++i) a_node[i] = b.controls[i][m];
    sums = detail::node_sums(x_node, a_node);
    for (int i = 0; i < n; ++i) {
      const Context ctx = detail::node_context(b.mode, x_node, a_node, i, sums);
      dxl[i] = model.grad_x(x_node[i], a_node[i], ctx);
    }
    for (int i = 0; i < n; ++i) y[i][m] = y[i][m + 1] + 0.5 * h * (dxl[i] + dxl_next[i]);
    dxl.swap(dxl_next);
  }
  for (int i = 0; i < n; ++i)
    for (int m = 0; m <= M; ++m)
      rep.backward = std::max(rep.backward, std::abs(y[i][m] - b.costates[i][m]));

  // First-order-condition residual of the stored controls.
  for (int m = 0; m <= M; ++m) {
    for (int i = 0; i < n; ++i) {
      x_node[i] = b.states[i][m];
      a_node[i] = b.controls[i][m];
    }
    sums = detail::node_sums(x_node, a_node);
    for (int i = 0; i < n; ++i) {
      const Context ctx = detail::node_context(b.mode, x_node, a_node, i, sums);
      rep.consistency = std::max(
          rep.consistency, std::abs(b.costates[i][m] + model.grad_a(x_node[i], a_node[i], ctx)));
    }
  }
  return rep;
}

inline std::pair<TrajectoryBundle, SolveReport> solve_nplayer_deterministic(
    const CostModel& model, std::span<const double> init, const TimeGrid& grid,
    const PicardConfig& cfg = {}) {
  auto out = detail::picard_solve(model, init, grid, cfg, BundleMode::NPlayer);
  const DefectReport d = residuals(out.first, model);
  out.second.forward_defect = d.forward;
  out.second.backward_defect = d.backward;
  out.second.max_consistency_residual = d.consistency;
  return out;
}

inline std::pair<TrajectoryBundle, SolveReport> solve_mfg_particles(
    const CostModel& model, const std::function<double(Rng&)>& init_sampler, int n_particles,
    const TimeGrid& grid, const PicardConfig& cfg, std::uint64_t seed) {
  if (n_particles < 1) throw std::invalid_argument("solve_mfg_particles: need n_particles >= 1");
  Rng rng(seed);
  std::vector<double> init(n_particles);
  for (double& z : init) z = init_sampler(rng);
  auto out = detail::picard_solve(model, init, grid, cfg, BundleMode::MeanFieldParticles);
  const DefectReport d = residuals(out.first, model);
  out.second.forward_defect = d.forward;
  out.second.backward_defect = d.backward;
  out.second.max_consistency_residual = d.consistency;
  return out;
}

struct StabilityResult {
  double ratio = 0.0;
  bool degenerate = false;  // identical initializations (0/0 handled as 0)
};

// Empirical constant of the trajectory-stability estimate:
// sup_t sum_i |X^a_i(t) - X^b_i(t)| / sum_i |z^a_i - z^b_i|.
inline StabilityResult stability_probe(const CostModel& model, std::span<const double> init_a,
                                       std::span<const double> init_b, const TimeGrid& grid,
                                       const PicardConfig& cfg = {}) {
  if (init_a.size() != init_b.size())
    throw std::invalid_argument("stability_probe: mismatched initializations");
  double denom = 0.0;
  for (std::size_t i = 0; i < init_a.size(); ++i) denom += std::abs(init_a[i] - init_b[i]);
  if (denom <= 1e-300) return {0.0, true};
  const auto [ba, ra] = solve_nplayer_deterministic(model, init_a, grid, cfg);
  const auto [bb, rb] = solve_nplayer_deterministic(model, init_b, grid, cfg);
  double worst = 0.0;
  for (int m = 0; m <= grid.steps; ++m) {
    double s = 0.0;
    for (int i = 0; i < ba.entities(); ++i) s += std::abs(ba.states[i][m] - bb.states[i][m]);
    worst = std::max(worst, s);
  }
  return {worst / denom, false};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void write_csv(const TrajectoryBundle& b, std::ostream& os) {
  CsvWriter w(os);
  w.header({"entity", "node", "t", "X", "Y", "A"});
  for (int i = 0; i < b.entities(); ++i)
    for (int m = 0; m <= b.grid.steps; ++m) {
      w.field(i).field(m).field(b.grid.t(m)).field(b.states[i][m]).field(b.costates[i][m]).field(
          b.controls[i][m]);
      w.endrow();
    }
}

// Compact dump: magic "MFGC", version, mode, N, M, horizon, then X, Y, A
// entity-major as little-endian 64-bit floats.
inline void write_binary(const TrajectoryBundle& b, std::ostream& os) {
  const char magic[4] = {'M', 'F', 'G', 'C'};
  os.write(magic, 4);
  const auto put_u32 = [&](std::uint32_t v) {
    unsigned char bytes[4];
    for (int k = 0; k < 4; ++k) bytes[k] = static_cast<unsigned char>(v >> (8 * k));
    os.write(reinterpret_cast<const char*>(bytes), 4);
  };
  const auto put_f64 = [&](double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(u >> (8 * k));
    os.write(reinterpret_cast<const char*>(bytes), 8);
  };
  put_u32(1u);
  put_u32(b.mode == BundleMode::NPlayer ? 0u : 1u);
  put_u32(static_cast<std::uint32_t>(b.entities()));
  put_u32(static_cast<std::uint32_t>(b.grid.steps));
  put_f64(b.grid.horizon);
  for (const auto* arr : {&b.states, &b.costates, &b.controls})
    for (const auto& row : *arr)
      for (double v : row) put_f64(v);
}

inline TrajectoryBundle read_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "MFGC", 4) != 0)
    throw std::invalid_argument("read_binary: bad magic");
  const auto get_u32 = [&] {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[k]) << (8 * k);
    return v;
  };
  const auto get_f64 = [&] {
    unsigned char bytes[8];
    is.read(reinterpret_cast<char*>(bytes), 8);
    std::uint64_t u = 0;
    for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  };
  const std::uint32_t version = get_u32();
  if (version != 1u) throw std::invalid_argument("read_binary: unsupported version");
  const std::uint32_t mode = get_u32();
  const std::uint32_t n = get_u32();
  const std::uint32_t steps = get_u32();
  const double horizon = get_f64();
  TrajectoryBundle b;
  b.mode = mode == 0u ? BundleMode::NPlayer : BundleMode::MeanFieldParticles;
  b.grid = TimeGrid(horizon, static_cast<int>(steps));
  b.states.assign(n, std::vector<double>(steps + 1));
  b.costates.assign(n, std::vector<double>(steps + 1));
  b.controls.assign(n, std::vector<double>(steps + 1));
  for (auto* arr : {&b.states, &b.costates, &b.controls})
    for (auto& row : *arr)
      for (double& v : row) v = get_f64();
  if (!is) throw std::invalid_argument("read_binary: truncated stream");
  return b;
}

// Analytic spectral radius of the undamped outer iteration for the LQ game;
// used by tests to check the measured contraction rate.
inline double lq_outer_spectral_radius(const LqParams& p) {
  const double g1 = p.gamma + 1.0;
  if (p.mode == LqMode::NPlayer) {
    const double n1 = p.n_players() - 1.0;
    const double ones = (1.0 + p.rho) / (g1 + p.kappa);
    const double dev = (1.0 - p.rho / n1) / (g1 - p.kappa / n1);
    return p.horizon * std::max(std::abs(ones), std::abs(dev));
  }
  const double ones = (1.0 + p.rho) / (g1 + p.kappa);
  const double dev = 1.0 / g1;
  return p.horizon * std::max(std::abs(ones), std::abs(dev));
}

}  // namespace mfgc

#pragma once

// Wasserstein distances on empirical measures, the dimension/moment rate
// function and concentration bound shapes from the convergence theory, and
// the empirical error functionals compared against them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfgc/csv.hpp"
#include "mfgc/fbode.hpp"
#include "mfgc/lq.hpp"

namespace mfgc {

// Exact 2-Wasserstein distance between two empirical measures on R via
// quantile coupling; unequal sizes use the common refinement of the two
// empirical CDFs.
inline double w2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("w2_1d: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::size_t n = sa.size(), m = sb.size();
  if (n == m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (sa[i] - sb[i]) * (sa[i] - sb[i]);
    return std::sqrt(acc / n);
  }
  double acc = 0.0, pos = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < n && ib < m) {
    const double next_a = static_cast<double>(ia + 1) / n;
    const double next_b = static_cast<double>(ib + 1) / m;
    const double end = std::min(next_a, next_b);
    const double d = sa[ia] - sb[ib];
    acc += (end - pos) * d * d;
    pos = end;
    if (next_a <= end + 1e-18) ++ia;
    if (next_b <= end + 1e-18) ++ib;
  }
  return std::sqrt(acc);
}

namespace detail {

// Min-cost square assignment by shortest augmenting paths with potentials.
inline double assignment_min_cost(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j)
        if (!used[j]) {
          const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
  return total;
}

}  // namespace detail

// Exact W2 between equal-size point clouds in R^d (n <= 64) via optimal
// assignment on the squared-distance matrix.
inline double w2_exact_small(const std::vector<std::vector<double>>& a,
                             const std::vector<std::vector<double>>& b) {
  if (a.empty() || a.size() != b.size())
    throw std::invalid_argument("w2_exact_small: need equal nonzero sizes");
  if (a.size() > 64)
    throw std::invalid_argument("w2_exact_small: refusing n > 64 (complexity guard)");
  const std::size_t n = a.size(), d = a[0].size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].size() != d || b[i].size() != d)
      throw std::invalid_argument("w2_exact_small: inconsistent dimensions");
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[i][k] - b[j][k];
        s += diff * diff;
      }
      cost[i][j] = s;
    }
  }
  return std::sqrt(detail::assignment_min_cost(cost) / n);
}

// Empirical-measure convergence rate r_{d,q}(N), piecewise in the dimension.
inline double fournier_guillin_rate(int d, double q, double n) {
  if (d < 1) throw std::domain_error("fournier_guillin_rate: d must be >= 1");
  if (n < 1.0) throw std::domain_error("fournier_guillin_rate: N must be >= 1");
  if (!(q > 2.0) || std::abs(q - 4.0) <= 1e-12 * q ||
      (d > 2 && std::abs(q - static_cast<double>(d) / (d - 2)) <= 1e-12 * q))
    throw std::domain_error(
        "fournier_guillin_rate: hypothesis requires q > 2 with q != 4 and q != d/(d-2)");
  const double moment = std::pow(n, -(q - 2.0) / q);
  if (d < 4) return std::pow(n, -0.5) + moment;
  if (d == 4) return std::pow(n, -0.5) * std::log(1.0 + n) + moment;
  return std::pow(n, -2.0 / static_cast<double>(d)) + moment;
}

// K(N) = (1/N) sum_i W2^2(m0, law of player i's initial), from samples.
inline double initial_mismatch_K(std::span<const double> m0_samples,
                                 const std::vector<std::vector<double>>& per_player_samples) {
  if (per_player_samples.empty())
    throw std::invalid_argument("initial_mismatch_K: no players");
  double acc = 0.0;
  for (const auto& s : per_player_samples) {
    const double w = w2_1d(m0_samples, s);
    acc += w * w;
  }
  return acc / per_player_samples.size();
}

// ---------------------------------------------------------------------------
// Empirical convergence error between an N-player solve and i.i.d. mean-field
// copies sharing its grid and initial draws.
// ---------------------------------------------------------------------------

struct ConvergenceErrors {
  double traj_error = 0.0;
  std::optional<double> value_gap;
  std::optional<double> grad_gap;
  double grad_gap_x_component = 0.0;  // |r_i - r|; identically zero for LQ
};

inline ConvergenceErrors empirical_convergence_error(const TrajectoryBundle& nplayer,
                                                     const TrajectoryBundle& mf_iid,
                                                     const LqNPlayerSolution* lq = nullptr,
                                                     const LqMfgSolution* mfg = nullptr,
                                                     double box_scale = 3.0) {
  if (!(nplayer.grid == mf_iid.grid) || nplayer.entities() != mf_iid.entities())
    throw std::invalid_argument("empirical_convergence_error: grid or entity mismatch");
  const int n = nplayer.entities();
  const int M = nplayer.grid.steps;
  const double h = nplayer.grid.dt();

  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double sup2 = 0.0, ctrl = 0.0;
    for (int m = 0; m <= M; ++m) {
      const double dx = nplayer.states[i][m] - mf_iid.states[i][m];
      sup2 = std::max(sup2, dx * dx);
      const double da = nplayer.controls[i][m] - mf_iid.controls[i][m];
      const double w = (m == 0 || m == M) ? 0.5 * h : h;
      ctrl += w * da * da;
    }
    acc += sup2 + ctrl;
  }
  ConvergenceErrors out;
  out.traj_error = acc / n;

  if (lq != nullptr && mfg != nullptr) {
    double envelope = 0.0;
    for (int i = 0; i < n; ++i)
      for (int m = 0; m <= M; ++m)
        envelope = std::max({envelope, std::abs(nplayer.states[i][m]),
                             std::abs(mf_iid.states[i][m])});
    const double box = box_scale * envelope;
    double vgap = 0.0, ggap = 0.0, xcomp = 0.0;
    for (int i = 0; i < n; ++i)
      for (int m = 0; m <= M; ++m) {
        const double t = lq->grid.t(m);
        const double dp = lq->p[i][m] - mfg->p(t);
        const double dq = lq->q[i][m] - mfg->q(t);
        vgap = std::max(vgap, std::abs(dp) * box + std::abs(dq));
        ggap = std::max(ggap, std::abs(dp));
        if (i == 0) xcomp = std::max(xcomp, std::abs(lq->r[m] - mfg->r(t)));
      }
    out.value_gap = vgap;
    out.grad_gap = ggap;
    out.grad_gap_x_component = xcomp;
  }
  return out;
}

// Builds the trajectory/costate/control bundle realized by a closed-form
// N-player solution.
inline TrajectoryBundle bundle_from_lq(const LqNPlayerSolution& sol) {
  TrajectoryBundle b;
  b.mode = BundleMode::NPlayer;
  b.grid = sol.grid;
  const int n = sol.n_players();
  b.states.assign(n, std::vector<double>(sol.grid.nodes()));
  b.costates.assign(n, std::vector<double>(sol.grid.nodes()));
  b.controls.assign(n, std::vector<double>(sol.grid.nodes()));
  for (int i = 0; i < n; ++i)
    for (int m = 0; m <= sol.grid.steps; ++m) {
      b.states[i][m] = sol.x[i][m];
      b.costates[i][m] = sol.costate(i, m);
      b.controls[i][m] = sol.control(i, m);
    }
  return b;
}

// i.i.d. copies of the mean-field equilibrium trajectory started from the
// given initial draws: deviations from the mean flow contract along the
// feedback gain, X(t) = mu(t) + phi(t) (z - mu(0)) with
// phi(t) = (T+gamma+1-t)/(T+gamma+1).
inline TrajectoryBundle lq_mfg_iid_bundle(const LqMfgSolution& sol,
                                          std::span<const double> initials,
                                          const TimeGrid& grid) {
  TrajectoryBundle b;
  b.mode = BundleMode::MeanFieldParticles;
  b.grid = grid;
  const int n = static_cast<int>(initials.size());
  b.states.assign(n, std::vector<double>(grid.nodes()));
  b.costates.assign(n, std::vector<double>(grid.nodes()));
  b.controls.assign(n, std::vector<double>(grid.nodes()));
  const double S = sol.params.horizon + sol.params.gamma + 1.0;
  for (int m = 0; m <= grid.steps; ++m) {
    const double t = grid.t(m);
    const double mu = sol.mu(t), p = sol.p(t), r = sol.r(t);
    const double K = sol.gain(t), C = sol.intercept(t);
    const double phi = (S - t) / S;
    for (int i = 0; i < n; ++i) {
      const double x = mu + phi * (initials[i] - sol.params.init.mean);
      b.states[i][m] = x;
      b.costates[i][m] = r * x + p;
      b.controls[i][m] = K * x + C;
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Concentration bound shape
// ---------------------------------------------------------------------------

struct TailParams {
  double q = 0.0;           // moment order; the q > 4 branch applies when q > 4
  double sigma = 0.0;       // exponential-moment exponent (0 = unavailable)
  double gamma_tail = 0.0;  // exponential-moment coefficient
  double k_n = 0.0;         // initial mismatch K(N)
  double big_c = 1.0;       // abstract leading constant C
  double small_c = 1.0;     // abstract exponent constant c
};

// C * ( (K + r_{d,q})/eps + a_eps 1{eps<=2} + b_eps ), with the tail branch
// picked from the available moment information.
inline double concentration_bound(double eps, double n, int d, double q,
                                  const TailParams& tail) {
  if (!(eps > 0.0)) throw std::domain_error("concentration_bound: eps must be > 0");
  const double c = tail.small_c;
  const double first = (tail.k_n + fournier_guillin_rate(d, q, n)) / eps;

  double a_term = 0.0;
  if (eps <= 2.0) {
    if (d < 4) {
      a_term = std::exp(-c * n * eps * eps);
    } else if (d == 4) {
      const double lg = std::log(1.0 + 1.0 / eps);
      a_term = std::exp(-c * n * eps * eps / (lg * lg));
    } else {
      a_term = std::exp(-c * n * std::pow(eps, d / 2.0));
    }
  }

  double b_term;
  if (tail.q > 4.0) {
    b_term = eps < 4.0 ? n * std::pow(n * eps, -(tail.q - eps) / 2.0) : 0.0;
  } else if (tail.sigma > 2.0) {
    b_term = eps > 2.0 ? std::exp(-c * n * std::pow(eps, tail.sigma / 2.0)) : 0.0;
  } else if (tail.sigma > 0.0 && tail.sigma < 2.0) {
    b_term = eps <= 2.0 ? std::exp(-c * std::pow(n * eps, (tail.sigma - eps) / 2.0))
                        : std::exp(-c * std::pow(n * eps, tail.sigma / 2.0));
  } else {
    throw std::domain_error(
        "concentration_bound: tail regime requires q > 4 or an exponential moment "
        "with sigma != 2");
  }
  return tail.big_c * (first + a_term + b_term);
}

// ---------------------------------------------------------------------------
// Rate table
// ---------------------------------------------------------------------------

inline double fit_loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need >= 2 matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) continue;
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("fit_loglog_slope: not enough positive points");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct RateRow {
  double n = 0;
  double traj_error = 0, value_gap = 0, grad_gap = 0;
  double k_n = 0, r_dq_n = 0, bound = 0;
};

struct RateTable {
  std::vector<RateRow> rows;

  struct Slopes {
    double traj = 0, value = 0, grad = 0;
  };

  // Log-log least squares, discarding the smallest N as transient.
  Slopes fit_slopes(bool drop_first = true) const {
    std::vector<double> n, t, v, g;
    for (std::size_t i = drop_first && rows.size() > 2 ? 1 : 0; i < rows.size(); ++i) {
      n.push_back(rows[i].n);
      t.push_back(rows[i].traj_error);
      v.push_back(rows[i].value_gap);
      g.push_back(rows[i].grad_gap);
    }
    return {fit_loglog_slope(n, t), fit_loglog_slope(n, v), fit_loglog_slope(n, g)};
  }

  void write_csv(std::ostream& os, const std::string& config_hash = {}) const {
    CsvWriter w(os);
    if (!config_hash.empty()) w.comment("config_hash=" + config_hash);
    w.header({"N", "traj_error", "value_gap", "grad_gap", "K_N", "r_dq_N", "bound"});
    for (const auto& r : rows) {
      w.field(r.n).field(r.traj_error).field(r.value_gap).field(r.grad_gap).field(r.k_n).field(
          r.r_dq_n).field(r.bound);
      w.endrow();
    }
  }
};

}  // namespace mfgc

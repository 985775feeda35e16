// Monte Carlo check that solved feedbacks cannot be improved by unilateral
// deviations, and that a corrupted feedback is caught.

#include <cstdio>

#include "mfgc/lq.hpp"
#include "mfgc/sim.hpp"

int main() {
  using namespace mfgc;
  const LqParams params = LqParams::nplayer(0.6, 0.4, 1.0, 1.0, {1.0, -0.5, 0.3});
  const auto sol = solve_nplayer_lq(params, TimeGrid(1.0, 500));
  const CostModel model = make_lq_cost_model(params);
  const FeedbackSet fs = feedback_from_lq(sol);

  SimConfig cfg;
  cfg.beta = 0.5;
  cfg.n_paths = 4000;
  cfg.dt = 2e-3;
  cfg.seed = 1;

  const auto perts = default_perturbations(params.horizon);
  const auto rep = deviation_test(fs, model, 0, perts, params.initial_positions, cfg);
  std::printf("equilibrium baseline J = %.5f (stderr %.2e)\n", rep.baseline.mean,
              rep.baseline.stderr_);
  for (const auto& v : rep.verdicts)
    std::printf("  %-12s dJ = %+.5f (stderr %.2e) %s\n", v.label.c_str(), v.delta_j, v.stderr_,
                v.pass ? "pass" : "FAIL");

  FeedbackSet corrupted = fs;
  for (double& v : corrupted.players[0].intercept) v += 0.5;
  const auto bad = deviation_test(corrupted, model, 0, perts, params.initial_positions, cfg);
  int refuting = 0;
  for (const auto& v : bad.verdicts)
    if (v.delta_j < -3.0 * v.stderr_) ++refuting;
  std::printf("corrupted feedback: %d of %zu perturbations improve the cost (refuted)\n",
              refuting, bad.verdicts.size());
  return refuting > 0 && rep.all_pass ? 0 : 1;
}

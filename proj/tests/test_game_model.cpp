#include "mfgc/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "mfgc/rng.hpp"
#include "oracles.hpp"

using namespace mfgc;

namespace {

// Context with a prescribed mean of the others' controls.
struct FixedContext {
  std::vector<double> xs, as;
  Context ctx() const { return Context(EmpiricalPairMeasure{xs, as}); }
};

FixedContext mean_control_context(double abar) { return {{0.0}, {abar}}; }

}  // namespace

TEST(LegendreArgmax, LinearFirstOrderCondition) {
  const CostModel m = make_lq_cost_model(0.0, 0.0, 1.0);
  const auto c = mean_control_context(0.0);
  EXPECT_NEAR(legendre_argmax(m, 0.3, 1.0, c.ctx()), -0.5, 1e-12);
}

TEST(LegendreArgmax, StationaryAtZero) {
  const CostModel m = make_lq_cost_model(0.5, 0.0, 0.7);
  const auto c = mean_control_context(0.0);
  EXPECT_NEAR(legendre_argmax(m, -1.0, 0.0, c.ctx()), 0.0, 1e-12);
}

TEST(LegendreArgmax, CoupledCase) {
  const CostModel m = make_lq_cost_model(0.5, 0.0, 0.0);
  const auto c = mean_control_context(1.0);
  EXPECT_NEAR(legendre_argmax(m, 0.0, 1.0, c.ctx()), -1.5, 1e-12);
}

TEST(LegendreArgmax, FiniteDifferenceJacobianPath) {
  CostModel m = make_lq_cost_model(0.5, 0.0, 0.9);
  m.hess_aa = nullptr;  // force the finite-difference Jacobian
  const auto c = mean_control_context(0.7);
  const double a = legendre_argmax(m, 0.0, 0.8, c.ctx());
  EXPECT_NEAR(a, -(0.8 + 0.5 * 0.7) / 1.9, 1e-9);
}

TEST(LegendreArgmax, CoercivityCap) {
  CostModel m = make_lq_cost_model(0.0, 0.0, 1.0);
  m.meta.control_bound = 0.1;
  const auto c = mean_control_context(0.0);
  EXPECT_THROW(legendre_argmax(m, 0.0, 10.0, c.ctx()), CoercivityViolation);
}

TEST(LegendreArgmax, NonFiniteCallback) {
  CostModel m = make_lq_cost_model(0.0, 0.0, 1.0);
  m.grad_a = [](double, double, const Context&) { return std::nan(""); };
  m.hess_aa = nullptr;
  const auto c = mean_control_context(0.0);
  EXPECT_THROW(legendre_argmax(m, 0.0, 1.0, c.ctx()), CallbackError);
}

TEST(LegendreArgmax, LipschitzInCostate) {
  const CostModel m = make_lq_cost_model(0.4, 0.0, 0.8);
  const auto c = mean_control_context(0.3);
  Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    const double p1 = rng.uniform(-3.0, 3.0), p2 = rng.uniform(-3.0, 3.0);
    const double a1 = legendre_argmax(m, 0.0, p1, c.ctx());
    const double a2 = legendre_argmax(m, 0.0, p2, c.ctx());
    EXPECT_LE(std::abs(a1 - a2), std::abs(p1 - p2) / m.meta.lambda_min + 1e-12);
  }
}

// ---------------------------------------------------------------------------

TEST(HamiltonianValue, DecoupledQuadratic) {
  const CostModel m = make_lq_cost_model(0.0, 0.0, 1.0);
  const auto c = mean_control_context(0.0);
  EXPECT_NEAR(hamiltonian_value(m, 2.0, 1.0, c.ctx()), 0.25, 1e-12);
}

TEST(HamiltonianValue, ZeroCostateZeroValue) {
  const CostModel m = make_lq_cost_model(0.0, 0.0, 0.6);
  const auto c = mean_control_context(0.0);
  EXPECT_NEAR(hamiltonian_value(m, 0.4, 0.0, c.ctx()), 0.0, 1e-12);
}

TEST(HamiltonianValue, CoupledFormula) {
  // gamma = 0 kills the quadratic coupling penalty; H = p^2/2 + kappa p abar.
  const CostModel m = make_lq_cost_model(1.0, 0.0, 0.0);
  const auto c = mean_control_context(1.0);
  EXPECT_NEAR(hamiltonian_value(m, 0.0, 1.0, c.ctx()), 1.5, 1e-12);
}

TEST(HamiltonianValue, MatchesDisplayedFormula) {
  Rng rng(23);
  for (int k = 0; k < 50; ++k) {
    const double kappa = rng.uniform(-1.0, 1.5), gamma = rng.uniform(0.0, 2.0);
    const double p = rng.uniform(-2.0, 2.0), abar = rng.uniform(-2.0, 2.0);
    const CostModel m = make_lq_cost_model(kappa, 0.0, gamma);
    const auto c = mean_control_context(abar);
    const double g1 = gamma + 1.0;
    const double want = p * p / (2 * g1) + kappa * p * abar / g1 -
                        gamma * kappa * kappa * abar * abar / (2 * g1);
    EXPECT_NEAR(hamiltonian_value(m, 0.0, p, c.ctx()), want, 1e-10);
  }
}

TEST(HamiltonianValue, DominatesProbeControls) {
  const CostModel m = make_lq_cost_model(0.7, 0.0, 0.5);
  const auto c = mean_control_context(-0.4);
  const double H = hamiltonian_value(m, 0.2, 0.9, c.ctx());
  Rng rng(29);
  for (int k = 0; k < 200; ++k) {
    const double a = rng.uniform(-5.0, 5.0);
    EXPECT_GE(H + 1e-12, -0.9 * a - m.running_cost(0.2, a, c.ctx()));
  }
}

TEST(HamiltonianValue, EnvelopeDerivative) {
  // d/dp H(x, p, ctx) = -a*(p) at fixed context.
  const CostModel m = make_lq_cost_model(0.6, 0.0, 0.8);
  const auto c = mean_control_context(0.5);
  const double h = 1e-5;
  for (double p : {-1.0, 0.2, 1.7}) {
    const double dh = (hamiltonian_value(m, 0.0, p + h, c.ctx()) -
                       hamiltonian_value(m, 0.0, p - h, c.ctx())) / (2 * h);
    EXPECT_NEAR(dh, -legendre_argmax(m, 0.0, p, c.ctx()), 1e-5);
  }
}

// ---------------------------------------------------------------------------

TEST(ConsistencyNPlayer, SymmetricLinearFixedPoint) {
  const CostModel m = make_lq_cost_model(0.5, 0.0, 0.0);
  const std::vector<double> xs{0.0, 0.0}, ps{1.0, 1.0};
  const auto res = consistency_fixed_point_nplayer(xs, ps, m);
  EXPECT_NEAR(res.controls[0], -2.0 / 3.0, 1e-9);
  EXPECT_NEAR(res.controls[1], -2.0 / 3.0, 1e-9);
}

TEST(ConsistencyNPlayer, DecoupledConvergesImmediately) {
  const CostModel m = make_lq_cost_model(0.0, 0.0, 0.5);
  const std::vector<double> xs{0.0, 1.0, 2.0}, ps{1.0, -1.0, 0.3};
  const auto res = consistency_fixed_point_nplayer(xs, ps, m);
  EXPECT_LE(res.iterations, 2);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(res.controls[i], -ps[i] / 1.5, 1e-10);
}

TEST(ConsistencyNPlayer, NonContractionAtUnitRatio) {
  // kappa = -(1+gamma): the iteration matrix has spectral radius one.
  const CostModel m = make_lq_cost_model(-1.0, 0.0, 0.0);
  const std::vector<double> xs{0.0, 0.0}, ps{1.0, 1.0};
  try {
    consistency_fixed_point_nplayer(xs, ps, m);
    FAIL() << "expected NonContraction";
  } catch (const NonContraction& e) {
    EXPECT_LE(e.iterations, 200);
    EXPECT_NEAR(e.factor_estimate, 1.0, 0.05);
  }
}

TEST(ConsistencyNPlayer, MeasuredContractionFactor) {
  Rng rng(31);
  for (double c : {0.2, 0.5, 0.8}) {
    const double gamma = 0.5;
    const CostModel m = make_lq_cost_model(c * (1.0 + gamma), 0.0, gamma);
    std::vector<double> xs(4, 0.0), ps(4);
    for (double& p : ps) p = rng.uniform(-2.0, 2.0);
    const auto res = consistency_fixed_point_nplayer(xs, ps, m);
    EXPECT_NEAR(res.factor_estimate, c, 0.05) << "c=" << c;
  }
}

TEST(ConsistencyMeanField, SingleParticleSelfConsistent) {
  const CostModel m = make_lq_cost_model(0.5, 0.0, 0.0);
  const std::vector<double> xs{0.0}, ps{1.0};
  const auto res = consistency_fixed_point_mf(xs, ps, m);
  EXPECT_NEAR(res.controls[0], -2.0 / 3.0, 1e-9);
}

TEST(ConsistencyMeanField, DecoupledList) {
  const CostModel m = make_lq_cost_model(0.0, 0.0, 1.0);
  const std::vector<double> xs{0.0, 0.5}, ps{1.0, -0.4};
  const auto res = consistency_fixed_point_mf(xs, ps, m);
  EXPECT_LE(res.iterations, 2);
  EXPECT_NEAR(res.controls[0], -0.5, 1e-10);
  EXPECT_NEAR(res.controls[1], 0.2, 1e-10);
}

TEST(ConsistencyMeanField, MeanSolvesAveragedEquation) {
  const double kappa = 0.6, gamma = 0.8;
  const CostModel m = make_lq_cost_model(kappa, 0.0, gamma);
  Rng rng(37);
  std::vector<double> xs(100, 0.0), ps(100);
  double pbar = 0.0;
  for (double& p : ps) {
    p = rng.normal();
    pbar += p / 100.0;
  }
  const auto res = consistency_fixed_point_mf(xs, ps, m);
  double abar = 0.0;
  for (double a : res.controls) abar += a / 100.0;
  EXPECT_NEAR(abar, -pbar / (1.0 + gamma + kappa), 1e-10);
}

// ---------------------------------------------------------------------------

TEST(SemimonProbe, DeclaredConstantsHoldForPositiveCoupling) {
  // gamma = 0, nonnegative couplings: the declared min-of-affine constants
  // coincide with the Hessian eigenvalue bounds, so the inequalities hold.
  const CostModel m = make_lq_cost_model(1.0, 0.5, 0.0, 4);
  const SemimonConstants c{m.meta.c_la, m.meta.c_lx, m.meta.c_g};
  const auto rep = semimon_probe(m, c, 10000, 99, ProbeMode::NPlayer, 4);
  EXPECT_GE(rep.min_gap_running, -1e-9);
  EXPECT_GE(rep.min_gap_terminal, -1e-9);
}

TEST(SemimonProbe, PrintedTerminalConstantFalsifiedForPositiveGamma) {
  // The declared terminal constant carries a gamma term the terminal Hessian
  // does not have; the probe surfaces the gap and the eigensolve pins the
  // sharp replacement.
  const int n = 4;
  const CostModel m = make_lq_cost_model(1.0, 0.5, 0.5, n);
  const double sharp = -mfgc_test::min_eig_terminal_hessian(0.5, n);
  EXPECT_LT(m.meta.c_g, sharp);  // declared constant is the looser (more negative)
  const SemimonConstants printed{m.meta.c_la, 0.0, m.meta.c_g};
  const auto rep = semimon_probe(m, printed, 10000, 99, ProbeMode::NPlayer, n);
  EXPECT_LT(rep.min_gap_terminal, -1e-6);
  const SemimonConstants corrected{m.meta.c_la, 0.0, sharp};
  const auto rep2 = semimon_probe(m, corrected, 10000, 99, ProbeMode::NPlayer, n);
  EXPECT_GE(rep2.min_gap_terminal, -1e-9);
}

TEST(SemimonProbe, IdenticalPairGivesExactZero) {
  const CostModel m = make_lq_cost_model(0.8, 0.4, 0.7, 3);
  const SemimonConstants c{m.meta.c_la, m.meta.c_lx, m.meta.c_g};
  const std::vector<double> xs{0.4, -1.0, 2.0}, as{0.1, 0.2, -0.5};
  const auto g = semimon_gap_pair(m, c, xs, as, xs, as, ProbeMode::NPlayer);
  EXPECT_EQ(g.running, 0.0);
  EXPECT_EQ(g.terminal, 0.0);
}

TEST(SemimonProbe, InflatedConstantIsFalsified) {
  const CostModel m = make_lq_cost_model(1.0, 0.5, 0.5, 4);
  const SemimonConstants c{m.meta.c_la + 1.0, m.meta.c_lx, m.meta.c_g};
  const auto rep = semimon_probe(m, c, 10000, 99, ProbeMode::NPlayer, 4);
  EXPECT_LT(rep.min_gap_running, 0.0);
}

TEST(SemimonProbe, PrintedConstantsFalsifiedForNegativeCoupling) {
  // For kappa < 0 the printed min-of-affine-branches control constant
  // exceeds the smallest eigenvalue of the population Hessian, and random
  // trials expose the gap; the eigensolve pins the sharp value.
  const double kappa = -1.0, gamma = 0.0;
  const int n = 3;
  const CostModel m = make_lq_cost_model(kappa, 0.0, gamma, n);
  const double sharp = mfgc_test::min_eig_control_hessian(kappa, gamma, n);
  EXPECT_GT(m.meta.c_la, sharp);  // printed constant is the loose one
  const SemimonConstants printed{m.meta.c_la, 0.0, m.meta.c_g};
  const auto rep = semimon_probe(m, printed, 20000, 7, ProbeMode::NPlayer, n);
  EXPECT_LT(rep.min_gap_running, -1e-6);
  const SemimonConstants corrected{sharp, 0.0, m.meta.c_g};
  const auto rep2 = semimon_probe(m, corrected, 20000, 7, ProbeMode::NPlayer, n);
  EXPECT_GE(rep2.min_gap_running, -1e-9);
}

TEST(SemimonProbe, MeanFieldFormHolds) {
  const CostModel m = make_lq_cost_model(0.5, 0.5, 1.0);
  const SemimonConstants c{m.meta.c_la, m.meta.c_lx, m.meta.c_g};
  const auto rep = semimon_probe(m, c, 4000, 5, ProbeMode::MeanField, 64);
  EXPECT_GE(rep.min_gap_running, -1e-9);
  EXPECT_GE(rep.min_gap_terminal, -1e-9);
}

// ---------------------------------------------------------------------------

TEST(GradientAudit, BuiltinModelsPass) {
  for (const auto& name : {"lq", "quadratic-plus-potential"}) {
    const CostModel m = make_model(name, nlohmann::json::object());
    const auto rep = audit_gradients(m, 1234, 100);
    EXPECT_TRUE(rep.passed(1e-5)) << name << ": " << rep.max_rel_err_a << " "
                                  << rep.max_rel_err_x << " " << rep.max_rel_err_g;
  }
}

TEST(MetadataAudit, BuiltinConvexityBoundsHold) {
  for (const auto& name : {"lq", "quadratic-plus-potential"}) {
    const CostModel m = make_model(name, nlohmann::json::object());
    const auto rep = audit_metadata(m, 99, 100);
    EXPECT_TRUE(rep.consistent(m.meta.lambda_min, m.meta.lambda_max))
        << name << ": hess in [" << rep.min_hess << ", " << rep.max_hess << "] vs ["
        << m.meta.lambda_min << ", " << m.meta.lambda_max << "]";
  }
}

TEST(MetadataAudit, DetectsUnderstatedCurvature) {
  CostModel m = make_lq_cost_model(0.5, 0.5, 1.0);
  m.meta.lambda_max = 1.5;  // true curvature is 1 + gamma = 2
  const auto rep = audit_metadata(m, 99, 100);
  EXPECT_FALSE(rep.consistent(m.meta.lambda_min, m.meta.lambda_max));
}

TEST(GradientAudit, DetectsWrongGradient) {
  CostModel m = make_lq_cost_model(0.5, 0.5, 1.0);
  m.grad_a = [](double, double a, const Context&) { return 2.5 * a; };
  const auto rep = audit_gradients(m, 1234, 100);
  EXPECT_FALSE(rep.passed(1e-5));
}

TEST(Registry, KnownAndUnknownNames) {
  EXPECT_NO_THROW(make_model("lq", {{"kappa", 0.5}, {"gamma", 1.0}}));
  EXPECT_NO_THROW(make_model("quadratic-plus-potential", nlohmann::json::object()));
  EXPECT_THROW(make_model("nope", nlohmann::json::object()), ConfigError);
}

TEST(Registry, QuadraticPotentialArgmax) {
  QuadraticPotentialParams qp;
  qp.control_weight = 2.0;
  qp.control_couple = 0.5;
  const CostModel m = make_quadratic_potential_model(qp);
  const auto c = mean_control_context(1.0);
  // w a + c abar = -p
  EXPECT_NEAR(legendre_argmax(m, 0.3, 1.0, c.ctx()), -(1.0 + 0.5) / 2.0, 1e-10);
  EXPECT_NEAR(m.contraction_ratio(), 0.25, 1e-15);
}

TEST(ContextHelpers, MeansExcludeSelfOnlyForOthers) {
  const std::vector<double> xs{1.0, 2.0, 3.0}, as{10.0, 20.0, 30.0};
  const Context others(OtherPlayers{xs, as, 0});
  EXPECT_DOUBLE_EQ(ctx_mean_state(others), 2.5);
  EXPECT_DOUBLE_EQ(ctx_mean_control(others), 25.0);
  EXPECT_EQ(ctx_count(others), 2u);
  const Context pairs(EmpiricalPairMeasure{xs, as});
  EXPECT_DOUBLE_EQ(ctx_mean_state(pairs), 2.0);
  EXPECT_DOUBLE_EQ(ctx_mean_control(pairs), 20.0);
  EXPECT_EQ(ctx_count(pairs), 3u);
}

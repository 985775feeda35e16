#include "mfgc/experiments.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mfgc;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

nlohmann::json base_config(const std::string& experiment) {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["seed"] = 11;
  j["out"] = (std::filesystem::temp_directory_path() / "mfgc_exp_test").string();
  return j;
}

}  // namespace

TEST(OracleCheckExperiment, SmallRunPasses) {
  auto j = base_config("oracle-check");
  j["grid"] = {{"steps", 400}};
  j["oracle_check"] = {{"instances", 4}, {"max_players", 5}, {"tolerance", 1e-5},
                       {"particles", 400}, {"particle_steps", 100}, {"order_check", false}};
  const auto cfg = parse_experiment_config(j);
  const auto res = run_oracle_check(cfg);
  EXPECT_TRUE(res.ok);
  EXPECT_TRUE(std::filesystem::exists(res.dir / "table.csv"));
  EXPECT_TRUE(std::filesystem::exists(res.dir / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(res.dir / "plot.gp"));
  const std::string table = slurp(res.dir / "table.csv");
  EXPECT_EQ(table.substr(0, 14), "# config_hash=");
}

TEST(OracleCheckExperiment, DegenerateParametersFailStructurally) {
  auto j = base_config("oracle-check");
  j["model"] = {{"kappa", -2.0}, {"gamma", 1.0}};  // kappa = -(1+gamma)
  j["grid"] = {{"steps", 100}};
  j["oracle_check"] = {{"instances", 1}, {"particles", 50}, {"particle_steps", 40},
                       {"order_check", false}};
  const auto cfg = parse_experiment_config(j);
  try {
    run_oracle_check(cfg);
    FAIL() << "expected DegeneracyError";
  } catch (const DegeneracyError& e) {
    EXPECT_EQ(e.report.classification, LqClassification::NoQuadraticSolution);
    EXPECT_FALSE(e.report.violated_condition.empty());
  }
}

TEST(NSweepExperiment, IidInitialsShowFastDecay) {
  auto j = base_config("n-sweep");
  j["grid"] = {{"steps", 120}};
  j["sweep"] = {{"n_list", {10, 32, 100, 316}}, {"replicates", 6}, {"init_offset", 0.0}};
  const auto cfg = parse_experiment_config(j);
  const auto res = run_n_sweep(cfg);
  EXPECT_TRUE(res.ok);
  // Mean-coupled game with players drawn from m0 itself: the squared
  // trajectory error follows the CLT, about 1/N; faster than the rate bound.
  const double traj = res.report["slopes"]["traj"].get<double>();
  EXPECT_NEAR(traj, -1.0, 0.35);
  EXPECT_LE(res.report["grad_gap_x_component_max"].get<double>(), 1e-12);
}

TEST(NSweepExperiment, ScheduledOffsetTracksTheBoundSlopes) {
  auto j = base_config("n-sweep");
  j["grid"] = {{"steps", 120}};
  j["sweep"] = {{"n_list", {10, 32, 100, 316, 1000}},
                {"replicates", 6},
                {"init_offset", 1.0},
                {"init_offset_exponent", 0.25}};
  const auto cfg = parse_experiment_config(j);
  const auto res = run_n_sweep(cfg);
  const double traj = res.report["slopes"]["traj"].get<double>();
  const double value = res.report["slopes"]["value"].get<double>();
  const double grad = res.report["slopes"]["grad"].get<double>();
  EXPECT_GT(traj, -0.65);
  EXPECT_LT(traj, -0.35);
  EXPECT_GT(value, -0.35);
  EXPECT_LT(value, -0.15);
  EXPECT_GT(grad, -0.35);
  EXPECT_LT(grad, -0.15);
}

TEST(NSweepExperiment, KnFloorUnderConstantShift) {
  // A fixed off-m0 shift keeps K(N) at about shift^2 while the sampling
  // fluctuations die out: the trajectory error flattens toward the floor.
  auto j = base_config("n-sweep");
  j["grid"] = {{"steps", 120}};
  j["sweep"] = {{"n_list", {32, 316, 1000}},
                {"replicates", 6},
                {"init_offset", 0.5},
                {"init_offset_exponent", 0.0}};
  const auto cfg = parse_experiment_config(j);
  const auto res = run_n_sweep(cfg);
  const double traj = res.report["slopes"]["traj"].get<double>();
  EXPECT_GT(traj, -0.25);  // nearly flat
  // and the K_N column sits near (2 sigma^2 + shift^2)
  const std::string table = slurp(res.dir / "table.csv");
  std::istringstream is(table);
  std::string line;
  std::getline(is, line);  // hash
  std::getline(is, line);  // header
  std::getline(is, line);  // first row
  std::stringstream row(line);
  std::string field;
  std::vector<double> fields;
  while (std::getline(row, field, ',')) fields.push_back(std::atof(field.c_str()));
  const double sigma = 0.2;
  EXPECT_NEAR(fields[4], 2 * sigma * sigma + 0.25, 0.05);
}

TEST(DegeneracyMapExperiment, SmallGridLabelsBothLines) {
  auto j = base_config("degeneracy-map");
  j["model"] = {{"gamma", 1.0}, {"mu0", 0.0}, {"s0", 2.0}};
  j["degeneracy_map"] = {{"kappa_min", -3.0}, {"kappa_max", 1.0}, {"rho_min", -3.0},
                         {"rho_max", 1.0},   {"cells", 9},       {"particles", 8},
                         {"map_grid_steps", 30}, {"max_outer", 600}};
  const auto cfg = parse_experiment_config(j);
  const auto res = run_degeneracy_map(cfg);
  EXPECT_TRUE(res.ok);
  EXPECT_TRUE(res.report["nonunique_line_ok"].get<bool>());
  EXPECT_TRUE(res.report["kappa_line_ok"].get<bool>());
  EXPECT_TRUE(res.report["regular_cells_solved"].get<bool>());
  EXPECT_GT(res.report["degenerate_cells"].get<int>(), 0);
}

TEST(ViscositySweepExperiment, LinearOffsetTrend) {
  auto j = base_config("viscosity-sweep");
  j["model"] = {{"kappa", 0.6}, {"rho", 0.0}, {"gamma", 1.0},
                {"initial_positions", {1.0, -0.5, 0.3}}};
  j["grid"] = {{"steps", 400}};
  j["viscosity"] = {{"betas", {0.5, 0.05}}, {"n_paths", 4000}, {"dt", 0.0025},
                    {"antithetic", true}, {"deviation_paths", 500}};
  const auto cfg = parse_experiment_config(j);
  const auto res = run_viscosity_sweep(cfg);
  EXPECT_TRUE(res.ok);
  EXPECT_GE(res.report["r_squared"].get<double>(), 0.99);
  EXPECT_NEAR(res.report["offset_slope"].get<double>(),
              res.report["offset_slope_theory"].get<double>(), 0.1);
  EXPECT_TRUE(res.report["gains_invariant"].get<bool>());
}

TEST(DeviationVerifyExperiment, PassesAndRefutes) {
  auto j = base_config("deviation-verify");
  j["model"] = {{"kappa", 0.6}, {"rho", 0.4}, {"gamma", 1.0},
                {"initial_positions", {1.0, -0.5, 0.3}}};
  j["grid"] = {{"steps", 400}};
  j["deviation"] = {{"player", 0}, {"betas", {0.0, 0.5}}, {"n_paths", 1500},
                    {"dt", 0.0025}, {"corrupt_shift", 0.5}};
  const auto cfg = parse_experiment_config(j);
  const auto res = run_deviation_verify(cfg);
  EXPECT_TRUE(res.ok);
  EXPECT_TRUE(res.report["equilibrium_all_pass"].get<bool>());
  EXPECT_TRUE(res.report["corrupted_refuted"].get<bool>());
  EXPECT_EQ(res.report["families"].get<int>(), 12);
}

TEST(StabilityProbeExperiment, RatiosTabulated) {
  auto j = base_config("stability-probe");
  j["grid"] = {{"steps", 120}};
  const auto cfg = parse_experiment_config(j);
  const auto res = run_stability_probe(cfg);
  EXPECT_TRUE(res.ok);
  EXPECT_LE(res.report["lq_ratio_spread"].get<double>(), 0.01);
}

TEST(Determinism, RerunsProduceIdenticalTableBytes) {
  auto j = base_config("n-sweep");
  j["grid"] = {{"steps", 60}};
  j["sweep"] = {{"n_list", {10, 32}}, {"replicates", 2}};
  const auto cfg = parse_experiment_config(j);
  const auto res1 = run_n_sweep(cfg);
  const std::string t1 = slurp(res1.dir / "table.csv");
  const auto res2 = run_n_sweep(cfg);
  const std::string t2 = slurp(res2.dir / "table.csv");
  EXPECT_EQ(t1, t2);
  // Thread count must not change the bytes either.
  auto j4 = j;
  j4["threads"] = 4;
  const auto res4 = run_n_sweep(parse_experiment_config(j4));
  EXPECT_EQ(res4.dir, res2.dir);  // same hash: threads excluded
  EXPECT_EQ(slurp(res4.dir / "table.csv"), t1);
}

TEST(Determinism, SeedChangesTheTable) {
  auto j = base_config("n-sweep");
  j["grid"] = {{"steps", 60}};
  j["sweep"] = {{"n_list", {10, 32}}, {"replicates", 2}};
  const auto res1 = run_n_sweep(parse_experiment_config(j));
  j["seed"] = 12;
  const auto res2 = run_n_sweep(parse_experiment_config(j));
  EXPECT_NE(res1.dir, res2.dir);
  EXPECT_NE(slurp(res1.dir / "table.csv"), slurp(res2.dir / "table.csv"));
}

#include "mfgc/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mfgc;

namespace {

nlohmann::json toml(const std::string& text) {
  std::istringstream is(text);
  return parse_toml_subset(is);
}

}  // namespace

TEST(TomlSubset, ScalarsTablesArraysComments) {
  const auto j = toml(R"(
# top comment
experiment = "n-sweep"
seed = 42
flag = true
name = "a # not a comment"

[model]           # trailing comment
kappa = 0.8
n_list = [1, 2.5, 3]
)");
  EXPECT_EQ(j["experiment"], "n-sweep");
  EXPECT_EQ(j["seed"], 42);
  EXPECT_EQ(j["flag"], true);
  EXPECT_EQ(j["name"], "a # not a comment");
  EXPECT_DOUBLE_EQ(j["model"]["kappa"].get<double>(), 0.8);
  EXPECT_EQ(j["model"]["n_list"].size(), 3u);
  EXPECT_DOUBLE_EQ(j["model"]["n_list"][1].get<double>(), 2.5);
}

TEST(TomlSubset, Errors) {
  EXPECT_THROW(toml("key"), ConfigError);
  EXPECT_THROW(toml("[unterminated"), ConfigError);
  EXPECT_THROW(toml("k = "), ConfigError);
  EXPECT_THROW(toml("k = [1, 2"), ConfigError);
  EXPECT_THROW(toml("k = \"open"), ConfigError);
  EXPECT_THROW(toml("[a.b]\nk = 1"), ConfigError);
}

TEST(ConfigSchema, DefaultsAndValidation) {
  const auto cfg = parse_experiment_config({{"experiment", "n-sweep"}});
  EXPECT_EQ(cfg.experiment, "n-sweep");
  EXPECT_EQ(cfg.sweep.n_list.size(), 5u);
  EXPECT_EQ(cfg.grid_steps, 1000);
}

TEST(ConfigSchema, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_experiment_config({{"experiment", "nope"}}), ConfigError);
  EXPECT_THROW(parse_experiment_config({{"experiment", "n-sweep"}, {"bogus", 1}}), ConfigError);
  EXPECT_THROW(parse_experiment_config(
                   {{"experiment", "n-sweep"}, {"model", {{"bogus", 1}}}}),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(
                   {{"experiment", "n-sweep"}, {"model", {{"kappa", "x"}}}}),
               ConfigError);
  nlohmann::json inf_cfg{{"experiment", "n-sweep"}};
  inf_cfg["model"]["kappa"] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(parse_experiment_config(inf_cfg), ConfigError);
  EXPECT_THROW(parse_experiment_config({{"experiment", "n-sweep"}, {"seed", "x"}}), ConfigError);
}

TEST(ConfigSchema, HashIsStableAndSeedSensitive) {
  nlohmann::json j{{"experiment", "n-sweep"}, {"seed", 1}};
  const auto a = parse_experiment_config(j);
  const auto b = parse_experiment_config(j);
  EXPECT_EQ(a.hash, b.hash);
  j["seed"] = 2;
  EXPECT_NE(parse_experiment_config(j).hash, a.hash);
  // worker count and output dir do not change the hash
  j["seed"] = 1;
  j["threads"] = 7;
  j["out"] = "elsewhere";
  EXPECT_EQ(parse_experiment_config(j).hash, a.hash);
}

TEST(ConfigSchema, TomlAndJsonAgree) {
  const auto jt = toml(R"(
experiment = "deviation-verify"
seed = 3
[model]
kappa = 0.6
rho = 0.4
[deviation]
player = 1
betas = [0.0, 0.5]
)");
  nlohmann::json jj{{"experiment", "deviation-verify"},
                    {"seed", 3},
                    {"model", {{"kappa", 0.6}, {"rho", 0.4}}},
                    {"deviation", {{"player", 1}, {"betas", {0.0, 0.5}}}}};
  EXPECT_EQ(parse_experiment_config(jt).hash, parse_experiment_config(jj).hash);
}

TEST(ConfigSchema, ShippedExamplesParse) {
  const std::filesystem::path dir = std::filesystem::path(__FILE__).parent_path() / ".." / "configs";
  int found = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".toml") continue;
    ++found;
    const auto j = load_config_file(entry.path().string());
    EXPECT_NO_THROW(parse_experiment_config(j)) << entry.path();
  }
  EXPECT_EQ(found, 6);
}

TEST(ConfigFiles, LoaderDispatchesOnExtension) {
  const auto dir = std::filesystem::temp_directory_path() / "mfgc_cfg_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "a.toml");
    os << "experiment = \"n-sweep\"\n";
  }
  {
    std::ofstream os(dir / "a.json");
    os << "{\"experiment\": \"n-sweep\"}\n";
  }
  EXPECT_EQ(load_config_file((dir / "a.toml").string())["experiment"], "n-sweep");
  EXPECT_EQ(load_config_file((dir / "a.json").string())["experiment"], "n-sweep");
  EXPECT_THROW(load_config_file((dir / "missing.json").string()), ConfigError);
  {
    std::ofstream os(dir / "bad.json");
    os << "{nope";
  }
  EXPECT_THROW(load_config_file((dir / "bad.json").string()), ConfigError);
}

#pragma once

// Experiment configuration: one schema, loadable from JSON or from a flat
// TOML subset (tables one level deep, scalar and array values, # comments).
// Configs are canonicalized to JSON for validation and hashing.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mfgc/errors.hpp"

#include "json.hpp"

namespace mfgc {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline nlohmann::json parse_toml_scalar(const std::string& raw) {
  const std::string v = trim(raw);
  if (v.empty()) throw ConfigError("toml: empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ConfigError("toml: unterminated string");
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  // integer?
  char* end = nullptr;
  const long long ll = std::strtoll(v.c_str(), &end, 10);
  if (end && *end == '\0') return ll;
  const double d = std::strtod(v.c_str(), &end);
  if (end && *end == '\0') return d;
  throw ConfigError("toml: cannot parse value '" + v + "'");
}

inline nlohmann::json parse_toml_value(const std::string& raw) {
  const std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw ConfigError("toml: unterminated array");
    nlohmann::json arr = nlohmann::json::array();
    std::string body = v.substr(1, v.size() - 2);
    std::string item;
    bool in_str = false;
    for (char ch : body) {
      if (ch == '"') in_str = !in_str;
      if (ch == ',' && !in_str) {
        if (!trim(item).empty()) arr.push_back(parse_toml_scalar(item));
        item.clear();
      } else {
        item += ch;
      }
    }
    if (!trim(item).empty()) arr.push_back(parse_toml_scalar(item));
    return arr;
  }
  return parse_toml_scalar(v);
}

}  // namespace detail

inline nlohmann::json parse_toml_subset(std::istream& is) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* current = &root;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("toml: bad table header at line " + std::to_string(lineno));
      const std::string name = detail::trim(s.substr(1, s.size() - 2));
      if (name.empty() || name.find('.') != std::string::npos)
        throw ConfigError("toml: only single-level tables are supported (line " +
                          std::to_string(lineno) + ")");
      root[name] = nlohmann::json::object();
      current = &root[name];
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("toml: expected key = value at line " + std::to_string(lineno));
    const std::string key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("toml: empty key at line " + std::to_string(lineno));
    (*current)[key] = detail::parse_toml_value(s.substr(eq + 1));
  }
  return root;
}

inline nlohmann::json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  const bool is_toml = path.size() > 5 && path.substr(path.size() - 5) == ".toml";
  if (is_toml) return parse_toml_subset(is);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("json parse error: ") + e.what());
  }
}

// FNV-1a over the canonical dump (object keys are kept sorted by the json
// container), printed as 16 hex digits.
inline std::string config_hash(const nlohmann::json& canonical) {
  const std::string dump = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = "out";

  struct Model {
    std::string name = "lq";
    double kappa = 0.8, rho = 0.5, gamma = 1.0, horizon = 1.0, beta = 0.0;
    double mu0 = 0.5, s0 = 3.5355339059327378;  // inverse width; stddev 0.2
    int n_players = 4;
    std::vector<double> initial_positions;  // empty = sample from m0
  } model;

  int grid_steps = 1000;

  struct Sweep {
    std::vector<double> n_list{10, 32, 100, 316, 1000};
    int replicates = 10;
    double q_moment = 6.0;
    double init_offset = 0.0;
    double init_offset_exponent = 0.25;
    double box_scale = 3.0;
    int m0_reference_samples = 2048;
  } sweep;

  struct OracleCheck {
    int instances = 20;
    int max_players = 10;
    double tolerance = 1e-5;
    int particles = 4000;
    int particle_steps = 250;
    bool order_check = true;
  } oracle_check;

  struct DegeneracyMap {
    double kappa_min = -3.0, kappa_max = 1.0;
    double rho_min = -3.0, rho_max = 1.0;
    int cells = 41;
    int particles = 12;
    int map_grid_steps = 50;
    int max_outer = 80;
  } degeneracy_map;

  struct Viscosity {
    std::vector<double> betas{1.0, 0.1, 0.01};
    int n_paths = 20000;
    double dt = 2e-3;
    bool antithetic = true;
    int deviation_paths = 2000;
  } viscosity;

  struct Deviation {
    int player = 0;
    std::vector<double> betas{0.0, 0.5};
    int n_paths = 10000;
    double dt = 1e-3;
    double corrupt_shift = 0.5;
  } deviation;

  struct Stability {
    std::vector<double> epsilons{1e-2, 1e-3, 1e-4};
    int trials = 20;
    double declared_bound = 3.0;
  } stability;

  nlohmann::json canonical;  // effective config echoed into outputs
  std::string hash;
};

namespace detail {

inline void require_known_keys(const nlohmann::json& obj, std::initializer_list<const char*> keys,
                               const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : keys)
      if (key == k) ok = true;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

inline double get_finite(const nlohmann::json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError(std::string("field must be numeric: ") + key);
  const double v = obj[key].get<double>();
  if (!std::isfinite(v)) throw ConfigError(std::string("field must be finite: ") + key);
  return v;
}

inline int get_int(const nlohmann::json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError(std::string("field must be an integer: ") + key);
  return obj[key].get<int>();
}

inline std::vector<double> get_array(const nlohmann::json& obj, const char* key,
                                     std::vector<double> fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_array()) throw ConfigError(std::string("field must be an array: ") + key);
  std::vector<double> out;
  for (const auto& v : obj[key]) {
    if (!v.is_number()) throw ConfigError(std::string("array must be numeric: ") + key);
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(std::string("array must be finite: ") + key);
    out.push_back(d);
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"oracle-check",    "n-sweep",
                                              "degeneracy-map",  "viscosity-sweep",
                                              "deviation-verify", "stability-probe"};
  return names;
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  detail::require_known_keys(j,
                             {"experiment", "seed", "threads", "out", "model", "grid", "sweep",
                              "oracle_check", "degeneracy_map", "viscosity", "deviation",
                              "stability"},
                             "config root");
  if (!j.contains("experiment") || !j["experiment"].is_string())
    throw ConfigError("config needs an 'experiment' string");
  cfg.experiment = j["experiment"].get<std::string>();
  bool known = false;
  for (const auto& n : experiment_names()) known = known || n == cfg.experiment;
  if (!known) throw ConfigError("unknown experiment: " + cfg.experiment);

  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw ConfigError("seed must be an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  cfg.threads = detail::get_int(j, "threads", 1);
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw ConfigError("out must be a string");
    cfg.out_dir = j["out"].get<std::string>();
  }

  if (j.contains("model")) {
    const auto& m = j["model"];
    detail::require_known_keys(m,
                               {"name", "kappa", "rho", "gamma", "horizon", "beta", "mu0", "s0",
                                "n_players", "initial_positions"},
                               "[model]");
    if (m.contains("name")) cfg.model.name = m["name"].get<std::string>();
    cfg.model.kappa = detail::get_finite(m, "kappa", cfg.model.kappa);
    cfg.model.rho = detail::get_finite(m, "rho", cfg.model.rho);
    cfg.model.gamma = detail::get_finite(m, "gamma", cfg.model.gamma);
    cfg.model.horizon = detail::get_finite(m, "horizon", cfg.model.horizon);
    cfg.model.beta = detail::get_finite(m, "beta", cfg.model.beta);
    cfg.model.mu0 = detail::get_finite(m, "mu0", cfg.model.mu0);
    cfg.model.s0 = detail::get_finite(m, "s0", cfg.model.s0);
    cfg.model.n_players = detail::get_int(m, "n_players", cfg.model.n_players);
    cfg.model.initial_positions = detail::get_array(m, "initial_positions", {});
  }
  if (j.contains("grid")) {
    detail::require_known_keys(j["grid"], {"steps"}, "[grid]");
    cfg.grid_steps = detail::get_int(j["grid"], "steps", cfg.grid_steps);
    if (cfg.grid_steps < 2) throw ConfigError("grid steps must be >= 2");
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    detail::require_known_keys(s,
                               {"n_list", "replicates", "q_moment", "init_offset",
                                "init_offset_exponent", "box_scale", "m0_reference_samples"},
                               "[sweep]");
    cfg.sweep.n_list = detail::get_array(s, "n_list", cfg.sweep.n_list);
    if (cfg.sweep.n_list.empty()) throw ConfigError("sweep n_list must be nonempty");
    cfg.sweep.replicates = detail::get_int(s, "replicates", cfg.sweep.replicates);
    cfg.sweep.q_moment = detail::get_finite(s, "q_moment", cfg.sweep.q_moment);
    cfg.sweep.init_offset = detail::get_finite(s, "init_offset", cfg.sweep.init_offset);
    cfg.sweep.init_offset_exponent =
        detail::get_finite(s, "init_offset_exponent", cfg.sweep.init_offset_exponent);
    cfg.sweep.box_scale = detail::get_finite(s, "box_scale", cfg.sweep.box_scale);
    cfg.sweep.m0_reference_samples =
        detail::get_int(s, "m0_reference_samples", cfg.sweep.m0_reference_samples);
  }
  if (j.contains("oracle_check")) {
    const auto& s = j["oracle_check"];
    detail::require_known_keys(
        s, {"instances", "max_players", "tolerance", "particles", "particle_steps", "order_check"},
        "[oracle_check]");
    cfg.oracle_check.instances = detail::get_int(s, "instances", cfg.oracle_check.instances);
    cfg.oracle_check.max_players = detail::get_int(s, "max_players", cfg.oracle_check.max_players);
    cfg.oracle_check.tolerance = detail::get_finite(s, "tolerance", cfg.oracle_check.tolerance);
    cfg.oracle_check.particles = detail::get_int(s, "particles", cfg.oracle_check.particles);
    cfg.oracle_check.particle_steps =
        detail::get_int(s, "particle_steps", cfg.oracle_check.particle_steps);
    if (s.contains("order_check")) cfg.oracle_check.order_check = s["order_check"].get<bool>();
  }
  if (j.contains("degeneracy_map")) {
    const auto& s = j["degeneracy_map"];
    detail::require_known_keys(s,
                               {"kappa_min", "kappa_max", "rho_min", "rho_max", "cells",
                                "particles", "map_grid_steps", "max_outer"},
                               "[degeneracy_map]");
    auto& d = cfg.degeneracy_map;
    d.kappa_min = detail::get_finite(s, "kappa_min", d.kappa_min);
    d.kappa_max = detail::get_finite(s, "kappa_max", d.kappa_max);
    d.rho_min = detail::get_finite(s, "rho_min", d.rho_min);
    d.rho_max = detail::get_finite(s, "rho_max", d.rho_max);
    d.cells = detail::get_int(s, "cells", d.cells);
    if (d.cells < 2) throw ConfigError("degeneracy_map cells must be >= 2");
    d.particles = detail::get_int(s, "particles", d.particles);
    d.map_grid_steps = detail::get_int(s, "map_grid_steps", d.map_grid_steps);
    d.max_outer = detail::get_int(s, "max_outer", d.max_outer);
  }
  if (j.contains("viscosity")) {
    const auto& s = j["viscosity"];
    detail::require_known_keys(s, {"betas", "n_paths", "dt", "antithetic", "deviation_paths"},
                               "[viscosity]");
    cfg.viscosity.betas = detail::get_array(s, "betas", cfg.viscosity.betas);
    cfg.viscosity.n_paths = detail::get_int(s, "n_paths", cfg.viscosity.n_paths);
    cfg.viscosity.dt = detail::get_finite(s, "dt", cfg.viscosity.dt);
    if (s.contains("antithetic")) cfg.viscosity.antithetic = s["antithetic"].get<bool>();
    cfg.viscosity.deviation_paths =
        detail::get_int(s, "deviation_paths", cfg.viscosity.deviation_paths);
  }
  if (j.contains("deviation")) {
    const auto& s = j["deviation"];
    detail::require_known_keys(s, {"player", "betas", "n_paths", "dt", "corrupt_shift"},
                               "[deviation]");
    cfg.deviation.player = detail::get_int(s, "player", cfg.deviation.player);
    cfg.deviation.betas = detail::get_array(s, "betas", cfg.deviation.betas);
    cfg.deviation.n_paths = detail::get_int(s, "n_paths", cfg.deviation.n_paths);
    cfg.deviation.dt = detail::get_finite(s, "dt", cfg.deviation.dt);
    cfg.deviation.corrupt_shift = detail::get_finite(s, "corrupt_shift", cfg.deviation.corrupt_shift);
  }
  if (j.contains("stability")) {
    const auto& s = j["stability"];
    detail::require_known_keys(s, {"epsilons", "trials", "declared_bound"}, "[stability]");
    cfg.stability.epsilons = detail::get_array(s, "epsilons", cfg.stability.epsilons);
    cfg.stability.trials = detail::get_int(s, "trials", cfg.stability.trials);
    cfg.stability.declared_bound =
        detail::get_finite(s, "declared_bound", cfg.stability.declared_bound);
  }

  // The hash covers everything that can influence table bytes; worker count
  // and output location are excluded.
  cfg.canonical = j;
  cfg.canonical["experiment"] = cfg.experiment;
  cfg.canonical["seed"] = cfg.seed;
  cfg.canonical.erase("threads");
  cfg.canonical.erase("out");
  cfg.hash = config_hash(cfg.canonical);
  return cfg;
}

}  // namespace mfgc

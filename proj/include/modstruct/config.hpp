#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "modstruct/dynamics.hpp"
#include "modstruct/enumerate.hpp"
#include "modstruct/error.hpp"
#include "modstruct/ga.hpp"
#include "modstruct/io.hpp"
#include "modstruct/layout.hpp"
#include "modstruct/sim.hpp"

namespace modstruct {

using json = nlohmann::ordered_json;

/// JSON has no infinities; non-finite values travel as strings.
inline json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline double number_from_json(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

inline json vec_json(const Eigen::Vector3d& v) { return json::array({json_number(v[0]), json_number(v[1]), json_number(v[2])}); }

inline Eigen::Vector3d vec_from_json(const json& j, const char* what) {
  MODSTRUCT_REQUIRE(j.is_array() && j.size() == 3, ErrorCode::Parse, std::string(what) + " must be a 3-element array");
  return {number_from_json(j[0]), number_from_json(j[1]), number_from_json(j[2])};
}

inline json roster_json(const Roster& roster) {
  json arr = json::array();
  for (const auto& m : roster) arr.push_back({{"id", m.id}, {"mass", m.mass}, {"inertia", vec_json(m.inertia_diag)}});
  return arr;
}

inline Roster roster_from_json(const json& j) {
  Roster r;
  for (const auto& m : j) r.push_back({m.at("id").get<int>(), m.at("mass").get<double>(), vec_from_json(m.at("inertia"), "inertia")});
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  validate_roster(r);
  return r;
}

inline json fitness_params_json(const FitnessParams& f) {
  return {{"lambda1", f.lambda1}, {"lambda2", f.lambda2}, {"rank_tolerance", f.rank_tolerance}};
}

inline FitnessParams fitness_params_from_json(const json& j) {
  FitnessParams f;
  f.lambda1 = j.value("lambda1", f.lambda1);
  f.lambda2 = j.value("lambda2", f.lambda2);
  f.rank_tolerance = j.value("rank_tolerance", f.rank_tolerance);
  f.validate();
  return f;
}

inline json ga_params_json(const GaParams& g) {
  return {{"pop_size", g.pop_size},     {"g_size", g.g_size},         {"t_size", g.t_size},
          {"c_size", g.c_size},         {"cross_p", g.cross_p},       {"k_converge", g.k_converge},
          {"tournament_k", g.tournament_k}, {"crossover_budget", g.crossover_budget}, {"dedup", g.dedup}};
}

inline GaParams ga_params_from_json(const json& j) {
  GaParams g;
  g.pop_size = j.value("pop_size", g.pop_size);
  g.g_size = j.value("g_size", g.g_size);
  g.t_size = j.value("t_size", g.t_size);
  g.c_size = j.value("c_size", g.c_size);
  g.cross_p = j.value("cross_p", g.cross_p);
  g.k_converge = j.value("k_converge", g.k_converge);
  g.tournament_k = j.value("tournament_k", g.tournament_k);
  g.crossover_budget = j.value("crossover_budget", g.crossover_budget);
  g.dedup = j.value("dedup", g.dedup);
  return g;
}

// Everything an optimize or enumerate run reads from its config file. The
// roster is either a path (relative to the config) or an inline array.
struct RunConfig {
  Roster roster;
  double edge_length = 1.0;
  std::uint64_t seed = 1;
  GaParams ga;
  FitnessParams fitness;
  int n_cap = 8;
  std::vector<std::string> input_files;  // resolved paths read while loading

  json snapshot() const {
    return {{"roster", roster_json(roster)}, {"edge_length", edge_length}, {"seed", seed},
            {"ga", ga_params_json(ga)},      {"fitness", fitness_params_json(fitness)}, {"n_cap", n_cap}};
  }
};

inline json parse_json_file(const std::string& path) {
  const std::string text = detail::slurp(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
}

/// Reads a run config. A run manifest is accepted as well: its embedded
/// config snapshot is used, so re-running from a manifest is exact.
inline RunConfig load_run_config(const std::string& path) {
  json j = parse_json_file(path);
  if (j.contains("config") && j.contains("command")) j = j.at("config");
  RunConfig cfg;
  const auto base = std::filesystem::path(path).parent_path();
  try {
    MODSTRUCT_REQUIRE(j.contains("roster"), ErrorCode::Parse, path + ": missing 'roster'");
    const auto& r = j.at("roster");
    if (r.is_string()) {
      auto rp = std::filesystem::path(r.get<std::string>());
      if (rp.is_relative()) rp = base / rp;
      cfg.roster = read_roster_file(rp.string());
      cfg.input_files.push_back(rp.string());
    } else {
      cfg.roster = roster_from_json(r);
    }
    cfg.edge_length = j.value("edge_length", cfg.edge_length);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("ga")) cfg.ga = ga_params_from_json(j.at("ga"));
    if (j.contains("fitness")) cfg.fitness = fitness_params_from_json(j.at("fitness"));
    cfg.n_cap = j.value("n_cap", cfg.n_cap);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse && std::string(e.what()).find(path) != std::string::npos) throw;
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
  MODSTRUCT_REQUIRE(cfg.edge_length > 0.0, ErrorCode::Parse, path + ": edge_length must be positive");
  cfg.ga.seed = cfg.seed;
  return cfg;
}

inline json trajectory_json(const Trajectory& t) {
  return {{"position_amplitude", vec_json(t.position_amplitude)},
          {"position_frequency", vec_json(t.position_frequency)},
          {"attitude_amplitude", vec_json(t.attitude_amplitude)},
          {"attitude_frequency", vec_json(t.attitude_frequency)},
          {"duration", t.duration}};
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  if (j.contains("position_amplitude")) t.position_amplitude = vec_from_json(j.at("position_amplitude"), "position_amplitude");
  if (j.contains("position_frequency")) t.position_frequency = vec_from_json(j.at("position_frequency"), "position_frequency");
  if (j.contains("attitude_amplitude")) t.attitude_amplitude = vec_from_json(j.at("attitude_amplitude"), "attitude_amplitude");
  if (j.contains("attitude_frequency")) t.attitude_frequency = vec_from_json(j.at("attitude_frequency"), "attitude_frequency");
  t.duration = j.value("duration", t.duration);
  return t;
}

inline json sim_config_json(const SimConfig& c) {
  return {{"gravity", c.gravity},
          {"dt", c.dt},
          {"duration", c.duration},
          {"record_every", c.record_every},
          {"rotation_only", c.rotation_only},
          {"gains",
           {{"position_kp", vec_json(c.gains.position_kp)},
            {"position_kd", vec_json(c.gains.position_kd)},
            {"attitude_kp", vec_json(c.gains.attitude_kp)},
            {"rate_kp", vec_json(c.gains.rate_kp)},
            {"rate_loop", c.gains.rate_loop == RateLoop::effort ? "effort" : "torque"}}},
          {"trajectory", trajectory_json(c.trajectory)}};
}

/// Simulation config. The trajectory is inline or a separate file named by
/// "trajectory_file"; its duration is used unless "duration" is given.
inline SimConfig load_sim_config(const std::string& path, std::vector<std::string>* inputs = nullptr) {
  json j = parse_json_file(path);
  if (j.contains("config") && j.contains("command")) j = j.at("config").at("sim");
  SimConfig c;
  try {
    if (j.contains("trajectory_file")) {
      auto tp = std::filesystem::path(j.at("trajectory_file").get<std::string>());
      if (tp.is_relative()) tp = std::filesystem::path(path).parent_path() / tp;
      c.trajectory = trajectory_from_json(parse_json_file(tp.string()));
      if (inputs) inputs->push_back(tp.string());
    } else if (j.contains("trajectory")) {
      c.trajectory = trajectory_from_json(j.at("trajectory"));
    }
    c.duration = j.value("duration", c.trajectory.duration);
    c.gravity = j.value("gravity", c.gravity);
    c.dt = j.value("dt", c.dt);
    c.record_every = j.value("record_every", c.record_every);
    c.rotation_only = j.value("rotation_only", c.rotation_only);
    if (j.contains("gains")) {
      const auto& g = j.at("gains");
      if (g.contains("position_kp")) c.gains.position_kp = vec_from_json(g.at("position_kp"), "position_kp");
      if (g.contains("position_kd")) c.gains.position_kd = vec_from_json(g.at("position_kd"), "position_kd");
      if (g.contains("attitude_kp")) c.gains.attitude_kp = vec_from_json(g.at("attitude_kp"), "attitude_kp");
      if (g.contains("rate_kp")) c.gains.rate_kp = vec_from_json(g.at("rate_kp"), "rate_kp");
      if (g.contains("rate_loop")) {
        const auto mode = g.at("rate_loop").get<std::string>();
        MODSTRUCT_REQUIRE(mode == "effort" || mode == "torque", ErrorCode::Parse,
                          path + ": rate_loop must be 'effort' or 'torque'");
        c.gains.rate_loop = mode == "effort" ? RateLoop::effort : RateLoop::torque;
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
  return c;
}

/// Structured evaluation record for one structure.
inline json evaluation_report(const Aim& aim, const Roster& roster, double edge_length, const FitnessParams& params) {
  const auto layout = pos_tree_search(aim, roster, edge_length);
  const auto dyn = analyze(layout, params);
  json positions = json::array();
  for (const auto& p : layout.positions) positions.push_back(vec_json(p));
  json js = json::array();
  for (int r = 0; r < 3; ++r) js.push_back(vec_json(dyn.inertia_total.row(r).transpose()));
  return {{"n", aim.size()},
          {"edge_length", edge_length},
          {"fitness", json_number(dyn.fitness.value)},
          {"cond_term", json_number(dyn.fitness.cond_term)},
          {"sigma_term", json_number(dyn.fitness.sigma_term)},
          {"sigma", vec_json(dyn.sigma)},
          {"rank", dyn.rank},
          {"allocation_rank", allocation_rank(layout, params.rank_tolerance)},
          {"J_S", js},
          {"positions", positions}};
}

}  // namespace modstruct

#pragma once

// Run configuration and its JSON form. Unknown keys are rejected so typos in
// a config file surface as errors rather than silently ignored settings.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <string>

#include "uavmpc/agents.hpp"
#include "uavmpc/world.hpp"

namespace uavmpc {

using json = nlohmann::json;

struct RunConfig {
  ScenarioSpec scenario = ScenarioSpec::training();
  std::map<std::string, ScenarioSpec> scenarios;  // named evaluation scenarios
  AgentKind agent = AgentKind::Proposed;
  AgentConfig agent_cfg;
  DynConfig dynamics;
  std::size_t pretrain_transitions = 5000;
  MpcConfig mpc;
  SimConfig sim;
  RewardConfig reward;
  std::uint64_t seed = 1;
  int episodes = 5000;
  int eval_episodes = 300;
  int checkpoint_every = 100;
  int curve_window = 100;
  int threads = 1;

  void validate() const {
    scenario.arena.validate();
    for (const auto& [name, s] : scenarios) s.arena.validate();
    agent_cfg.validate();
    dynamics.validate();
    mpc.validate();
    sim.validate();
    reward.weights.validate();
    if (episodes < 0 || eval_episodes < 0) throw ConfigError("episode counts must be >= 0");
    if (checkpoint_every < 1 || curve_window < 1 || threads < 1) {
      throw ConfigError("checkpoint_every, curve_window and threads must be >= 1");
    }
  }

  StateNormalizer normalizer() const { return StateNormalizer::from(scenario.arena, sim); }

  /// "training", "e1", "e2", "dynamic:<v>" or a name from `scenarios`.
  /// Named entries override the built-in E1/E2 recipes.
  ScenarioSpec resolve_scenario(const std::string& name) const {
    if (auto it = scenarios.find(name); it != scenarios.end()) return it->second;
    if (name == "training") return scenario;
    if (name == "e1") return ScenarioSpec::e1();
    if (name == "e2") return ScenarioSpec::e2();
    if (name.rfind("dynamic:", 0) == 0) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(name.substr(8), &used);
        if (used != name.size() - 8) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ConfigError("bad dynamic scenario '" + name + "' (expected dynamic:<speed>)");
      }
      if (v < 0.0) throw ConfigError("dynamic obstacle speed must be >= 0");
      ScenarioSpec s = scenario;
      s.kind = ScenarioKind::Dynamic;
      s.dynamic_velocity = v;
      return s;
    }
    throw ConfigError("unknown scenario '" + name + "'");
  }
};

namespace detail {

/// Reads optional keys from an object and rejects any it was not asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where_);
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for '" + std::string(key) + "' in " + where_);
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline json scenario_to_json(const ScenarioSpec& s) {
  json j;
  j["arena"] = {{"width", s.arena.width}, {"depth", s.arena.depth}, {"height", s.arena.height}};
  j["obstacles"] = json::array();
  for (const auto& g : s.obstacles) j["obstacles"].push_back({{"count", g.count}, {"radius", g.radius}, {"height", g.height}});
  j["start_corner"] = s.start_corner ? json(corner_name(*s.start_corner)) : json(nullptr);
  j["target_corner"] = s.target_corner ? json(corner_name(*s.target_corner)) : json(nullptr);
  j["dynamic_velocity"] = s.dynamic_velocity;
  j["corner_margin"] = s.corner_margin;
  j["seed"] = s.seed;
  return j;
}

inline ScenarioSpec scenario_from_json(const json& j, const std::string& where, ScenarioSpec s = {}) {
  detail::Reader r(j, where);
  if (const json* a = r.sub("arena")) {
    detail::Reader ra(*a, where + ".arena");
    ra.get("width", s.arena.width);
    ra.get("depth", s.arena.depth);
    ra.get("height", s.arena.height);
  }
  if (const json* obs = r.sub("obstacles")) {
    if (!obs->is_array()) throw ConfigError(where + ".obstacles must be an array");
    s.obstacles.clear();
    for (const auto& g : *obs) {
      ObstacleGroup og{0, 1.0, 50.0};
      detail::Reader rg(g, where + ".obstacles[]");
      rg.get("count", og.count);
      rg.get("radius", og.radius);
      rg.get("height", og.height);
      if (og.count < 0 || !(og.radius > 0.0)) throw ConfigError(where + ": obstacle count >= 0 and radius > 0 required");
      s.obstacles.push_back(og);
    }
  }
  for (const char* key : {"start_corner", "target_corner"}) {
    if (const json* c = r.sub(key)) {
      std::optional<Corner> corner;
      if (!c->is_null()) {
        if (!c->is_string()) throw ConfigError(std::string(key) + " must be a string");
        corner = parse_corner(c->get<std::string>());
        if (!corner) throw ConfigError("bad corner '" + c->get<std::string>() + "' (expected sw, se, nw, ne)");
      }
      (std::string(key) == "start_corner" ? s.start_corner : s.target_corner) = corner;
    }
  }
  r.get("dynamic_velocity", s.dynamic_velocity);
  r.get("corner_margin", s.corner_margin);
  r.get("seed", s.seed);
  if (s.dynamic_velocity > 0.0) s.kind = ScenarioKind::Dynamic;
  return s;
}

inline json to_json(const RunConfig& c) {
  json j;
  j["scenario"] = scenario_to_json(c.scenario);
  j["scenarios"] = json::object();
  for (const auto& [name, s] : c.scenarios) j["scenarios"][name] = scenario_to_json(s);
  j["sim"] = {{"dt", c.sim.dt},
              {"v_max", c.sim.v_max},
              {"yaw_rate_max", c.sim.yaw_rate_max},
              {"safe_distance", c.sim.safe_distance},
              {"sensor_range", c.sim.sensor_range},
              {"uav_radius", c.sim.uav_radius},
              {"target_radius", c.sim.target_radius},
              {"max_steps", c.sim.max_steps}};
  const auto& w = c.reward.weights;
  j["reward"] = {{"weights", {w.w1, w.w2, w.w3, w.w4}}, {"target_bonus", c.reward.target_bonus}};
  const auto& a = c.agent_cfg;
  j["agent"] = {{"gamma", a.gamma},
                {"critic_lr", a.critic_lr},
                {"actor_lr", a.actor_lr},
                {"batch_size", a.batch_size},
                {"exploration_noise", a.exploration_noise},
                {"tau", a.tau},
                {"capacity", a.capacity},
                {"max_episodes", a.max_episodes},
                {"predicted_fraction", a.predicted_fraction},
                {"sigma_rel", a.sigma_rel},
                {"critic_hidden", a.critic_hidden},
                {"actor_hidden", a.actor_hidden},
                {"td3_target_noise", a.td3_target_noise},
                {"td3_noise_clip", a.td3_noise_clip},
                {"td3_policy_delay", a.td3_policy_delay},
                {"warm_start_steps", a.warm_start_steps},
                {"warm_start_min", a.warm_start_min},
                {"warm_start_each_episode", a.warm_start_each_episode}};
  const auto& d = c.dynamics;
  j["dynamics"] = {{"history", d.history},
                   {"layers", d.lstm.layers},
                   {"hidden", d.lstm.hidden},
                   {"learning_rate", d.adam.learning_rate},
                   {"max_epochs", d.max_epochs},
                   {"batch_size", d.batch_size},
                   {"online_batch", d.online_batch},
                   {"warmup_transitions", d.warmup_transitions},
                   {"patience", d.patience},
                   {"pretrain_transitions", c.pretrain_transitions}};
  const auto& m = c.mpc;
  j["mpc"] = {{"horizon", m.horizon},
              {"w_track", m.w_track},
              {"w_effort", m.w_effort},
              {"w_collision", m.w_collision},
              {"collision_length", m.collision_length},
              {"population", m.population},
              {"elite_fraction", m.elite_fraction},
              {"iterations", m.iterations},
              {"init_std", m.init_std},
              {"reuse_previous_plan", m.reuse_previous_plan}};
  j["run"] = {{"agent", agent_name(c.agent)},
              {"seed", c.seed},
              {"episodes", c.episodes},
              {"eval_episodes", c.eval_episodes},
              {"checkpoint_every", c.checkpoint_every},
              {"curve_window", c.curve_window},
              {"threads", c.threads}};
  return j;
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  detail::Reader r(j, "config");
  if (const json* s = r.sub("scenario")) c.scenario = scenario_from_json(*s, "scenario", c.scenario);
  if (const json* s = r.sub("scenarios")) {
    if (!s->is_object()) throw ConfigError("scenarios must be an object");
    for (auto it = s->begin(); it != s->end(); ++it) {
      ScenarioSpec base = it.key() == "e1" ? ScenarioSpec::e1() : it.key() == "e2" ? ScenarioSpec::e2() : ScenarioSpec{};
      c.scenarios[it.key()] = scenario_from_json(it.value(), "scenarios." + it.key(), base);
    }
  }
  if (const json* s = r.sub("sim")) {
    detail::Reader rs(*s, "sim");
    rs.get("dt", c.sim.dt);
    rs.get("v_max", c.sim.v_max);
    rs.get("yaw_rate_max", c.sim.yaw_rate_max);
    rs.get("safe_distance", c.sim.safe_distance);
    rs.get("sensor_range", c.sim.sensor_range);
    rs.get("uav_radius", c.sim.uav_radius);
    rs.get("target_radius", c.sim.target_radius);
    rs.get("max_steps", c.sim.max_steps);
  }
  if (const json* s = r.sub("reward")) {
    detail::Reader rr(*s, "reward");
    std::vector<double> w;
    rr.get("weights", w);
    if (!w.empty()) {
      if (w.size() != 4) throw ConfigError("reward.weights must have 4 entries");
      c.reward.weights = {w[0], w[1], w[2], w[3]};
    }
    rr.get("target_bonus", c.reward.target_bonus);
  }
  if (const json* s = r.sub("agent")) {
    auto& a = c.agent_cfg;
    detail::Reader ra(*s, "agent");
    ra.get("gamma", a.gamma);
    ra.get("critic_lr", a.critic_lr);
    ra.get("actor_lr", a.actor_lr);
    ra.get("batch_size", a.batch_size);
    ra.get("exploration_noise", a.exploration_noise);
    ra.get("tau", a.tau);
    ra.get("capacity", a.capacity);
    ra.get("max_episodes", a.max_episodes);
    ra.get("predicted_fraction", a.predicted_fraction);
    ra.get("sigma_rel", a.sigma_rel);
    ra.get("critic_hidden", a.critic_hidden);
    ra.get("actor_hidden", a.actor_hidden);
    ra.get("td3_target_noise", a.td3_target_noise);
    ra.get("td3_noise_clip", a.td3_noise_clip);
    ra.get("td3_policy_delay", a.td3_policy_delay);
    ra.get("warm_start_steps", a.warm_start_steps);
    ra.get("warm_start_min", a.warm_start_min);
    ra.get("warm_start_each_episode", a.warm_start_each_episode);
  }
  if (const json* s = r.sub("dynamics")) {
    auto& d = c.dynamics;
    detail::Reader rd(*s, "dynamics");
    rd.get("history", d.history);
    rd.get("layers", d.lstm.layers);
    rd.get("hidden", d.lstm.hidden);
    rd.get("learning_rate", d.adam.learning_rate);
    rd.get("max_epochs", d.max_epochs);
    rd.get("batch_size", d.batch_size);
    rd.get("online_batch", d.online_batch);
    rd.get("warmup_transitions", d.warmup_transitions);
    rd.get("patience", d.patience);
    rd.get("pretrain_transitions", c.pretrain_transitions);
  }
  if (const json* s = r.sub("mpc")) {
    auto& m = c.mpc;
    detail::Reader rm(*s, "mpc");
    rm.get("horizon", m.horizon);
    rm.get("w_track", m.w_track);
    rm.get("w_effort", m.w_effort);
    rm.get("w_collision", m.w_collision);
    rm.get("collision_length", m.collision_length);
    rm.get("population", m.population);
    rm.get("elite_fraction", m.elite_fraction);
    rm.get("iterations", m.iterations);
    rm.get("init_std", m.init_std);
    rm.get("reuse_previous_plan", m.reuse_previous_plan);
  }
  if (const json* s = r.sub("run")) {
    detail::Reader rr(*s, "run");
    std::string agent = agent_name(c.agent);
    rr.get("agent", agent);
    c.agent = parse_agent(agent);
    rr.get("seed", c.seed);
    rr.get("episodes", c.episodes);
    rr.get("eval_episodes", c.eval_episodes);
    rr.get("checkpoint_every", c.checkpoint_every);
    rr.get("curve_window", c.curve_window);
    rr.get("threads", c.threads);
  }
  c.mpc.reward = c.reward;
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON");
  }
  return run_config_from_json(j);
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Stable digest of the effective configuration.
inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

}  // namespace uavmpc

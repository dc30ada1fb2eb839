#pragma once

// Training, evaluation and export harness used by the command-line tool.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>
#include <vector>

#include "uavmpc/config.hpp"
#include "uavmpc/episode.hpp"

namespace uavmpc {

namespace fs = std::filesystem;

inline constexpr int kCheckpointFormat = 1;

struct Metrics {
  double sr = 0.0;  // percent
  double cr = 0.0;
  double lr = 0.0;
  double ar = 0.0;
  int episodes = 0;
};

inline Metrics tally(const std::vector<EpisodeResult>& results) {
  Metrics m;
  m.episodes = static_cast<int>(results.size());
  if (results.empty()) return m;
  int s = 0, c = 0, l = 0;
  double reward = 0.0;
  for (const auto& r : results) {
    s += r.outcome == StepStatus::ReachedTarget;
    c += r.outcome == StepStatus::Collision;
    l += r.outcome == StepStatus::TimedOut;
    reward += r.cumulative_reward;
  }
  const double n = static_cast<double>(results.size());
  m.sr = 100.0 * s / n;
  m.cr = 100.0 * c / n;
  m.lr = 100.0 * l / n;
  m.ar = reward / n;
  return m;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream per (seed, episode, purpose).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t episode, std::uint64_t purpose) {
  return splitmix64(splitmix64(splitmix64(seed) ^ episode) ^ purpose);
}

/// Sliding-window means; row i covers values [i, i + window).
inline std::vector<double> windowed_mean(const std::vector<double>& v, int window) {
  std::vector<double> out;
  const auto w = static_cast<std::size_t>(window);
  if (v.size() < w) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= w) sum -= v[i - w];
    if (i + 1 >= w) out.push_back(sum / static_cast<double>(w));
  }
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline Agent make_agent(const RunConfig& rc, AgentKind kind, std::uint64_t seed) {
  MpcConfig mpc = rc.mpc;
  mpc.reward = rc.reward;
  return Agent(kind, rc.agent_cfg, rc.dynamics, mpc, rc.sim, rc.normalizer(), seed);
}

inline json checkpoint_manifest(const RunConfig& rc, int episode) {
  return {{"format", kCheckpointFormat},
          {"agent", agent_name(rc.agent)},
          {"config_hash", config_hash(rc)},
          {"episode", episode},
          {"files", rc.agent == AgentKind::Proposed ? json{"critic.params", "targets.params", "model.params"}
                                                    : json{"critic.params", "targets.params", "actor.params"}}};
}

inline void save_checkpoint(const Agent& agent, const RunConfig& rc, int episode, const fs::path& dir) {
  agent.save(dir);
  std::ofstream(dir / "manifest.json") << checkpoint_manifest(rc, episode).dump(2) << "\n";
  std::ofstream(dir / "config.json") << to_json(rc).dump(2) << "\n";
}

struct LoadedCheckpoint {
  RunConfig config;
  int episode = 0;
  std::string hash;
};

inline json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw StructuralError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    throw StructuralError(p.string() + " is not valid JSON");
  }
}

inline LoadedCheckpoint read_checkpoint_info(const fs::path& dir) {
  const json m = read_json_file(dir / "manifest.json");
  if (!m.contains("format") || m["format"] != kCheckpointFormat) throw StructuralError("unsupported checkpoint format");
  LoadedCheckpoint c;
  c.config = run_config_from_json(read_json_file(dir / "config.json"));
  c.episode = m.value("episode", 0);
  c.hash = m.value("config_hash", "");
  if (agent_name(c.config.agent) != m.value("agent", "")) throw StructuralError("checkpoint manifest/config disagree");
  return c;
}

/// Loads a checkpoint as the given agent kind; networks are shaped by the
/// checkpoint's own configuration.
inline Agent load_agent(const fs::path& dir, AgentKind expected) {
  const LoadedCheckpoint info = read_checkpoint_info(dir);
  if (info.config.agent != expected) {
    throw StructuralError(std::string("checkpoint holds a ") + agent_name(info.config.agent) + " agent, not " +
                          agent_name(expected));
  }
  Agent a = make_agent(info.config, expected, info.config.seed);
  a.load(dir);
  return a;
}

struct TrainOptions {
  bool resume = false;
  bool verbose = false;
  std::ostream* progress = nullptr;
};

struct TrainResult {
  std::vector<EpisodeResult> episodes;
  std::string config_hash;
  int resumed_from = 0;
};

inline std::string episode_record(int episode, const EpisodeResult& r, double wall) {
  json j{{"episode", episode},
         {"outcome", status_name(r.outcome)},
         {"cumulative_reward", r.cumulative_reward},
         {"steps", r.steps},
         {"wall_time_s", wall}};
  return j.dump();
}

inline void write_curves(const fs::path& out, const std::string& hash, const std::vector<EpisodeResult>& eps,
                         int window) {
  std::vector<double> success, reward;
  for (const auto& e : eps) {
    success.push_back(e.outcome == StepStatus::ReachedTarget ? 1.0 : 0.0);
    reward.push_back(e.cumulative_reward);
  }
  const auto sr = windowed_mean(success, window);
  const auto ar = windowed_mean(reward, window);
  std::ofstream fs(out / "curve_success.tsv"), fr(out / "curve_reward.tsv");
  fs << "# config_hash=" << hash << " window=" << window << "\nepisode\tsuccess_ratio\n";
  fr << "# config_hash=" << hash << " window=" << window << "\nepisode\taverage_reward\n";
  for (std::size_t i = 0; i < sr.size(); ++i) {
    fs << i + window << "\t" << format_double(sr[i]) << "\n";
    fr << i + window << "\t" << format_double(ar[i]) << "\n";
  }
}

/// Trains the configured agent. Writes episodes.jsonl, windowed curves,
/// the pretraining loss log and a checkpoint directory under `out`.
inline TrainResult train(const RunConfig& rc, const fs::path& out, const TrainOptions& opt = {}) {
  rc.validate();
  fs::create_directories(out);
  TrainResult res;
  res.config_hash = config_hash(rc);
  const fs::path ckpt = out / "checkpoint";
  Agent agent = make_agent(rc, rc.agent, rc.seed);

  int start = 0;
  if (opt.resume && fs::exists(ckpt / "manifest.json")) {
    const auto info = read_checkpoint_info(ckpt);
    if (info.hash != res.config_hash) throw ConfigError("checkpoint in " + ckpt.string() + " has a different config");
    agent.load(ckpt);
    start = info.episode;
    res.resumed_from = start;
    std::ifstream prev(out / "episodes.jsonl");
    std::string line;
    std::getline(prev, line);  // header
    while (std::getline(prev, line) && static_cast<int>(res.episodes.size()) < start) {
      const json j = json::parse(line);
      EpisodeResult e;
      const std::string o = j.at("outcome");
      e.outcome = o == "reached_target" ? StepStatus::ReachedTarget
                  : o == "collision"    ? StepStatus::Collision
                                        : StepStatus::TimedOut;
      e.cumulative_reward = j.at("cumulative_reward");
      e.steps = j.at("steps");
      res.episodes.push_back(e);
    }
  } else if (rc.agent == AgentKind::Proposed) {
    std::ofstream loss(out / "model_pretrain.jsonl");
    loss << json{{"config_hash", res.config_hash}}.dump() << "\n";
    pretrain_from_limited_map(agent.model(), rc.scenario.arena, rc.sim, rc.pretrain_transitions,
                              derive_seed(rc.seed, 0, 7), &loss);
  }

  const std::string header = json{{"config_hash", res.config_hash}, {"agent", agent_name(rc.agent)},
                                  {"seed", rc.seed}}.dump();
  std::ofstream log;
  if (start > 0) {
    // rewrite the kept prefix so a partially written tail is dropped
    std::vector<std::string> keep;
    {
      std::ifstream prev(out / "episodes.jsonl");
      std::string line;
      std::getline(prev, line);
      for (int i = 0; i < start && std::getline(prev, line); ++i) keep.push_back(line);
    }
    log.open(out / "episodes.jsonl", std::ios::trunc);
    log << header << "\n";
    for (const auto& l : keep) log << l << "\n";
  } else {
    log.open(out / "episodes.jsonl", std::ios::trunc);
    log << header << "\n";
  }

  std::ofstream trace;
  if (opt.verbose && rc.agent == AgentKind::Proposed) trace.open(out / "mpc_trace.jsonl", std::ios::app);

  for (int e = start; e < rc.episodes; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const World w = spawn_scenario(rc.scenario.with_seed(derive_seed(rc.seed, e, 1)), rc.sim);
    const EpisodeResult r = run_episode(agent, w, rc.sim, rc.reward, true, true, derive_seed(rc.seed, e, 2));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.episodes.push_back(r);
    log << episode_record(e + 1, r, wall) << "\n";
    log.flush();
    if (trace.is_open()) {
      for (const auto& row : agent.last_plan().trace) {
        trace << json{{"episode", e + 1}, {"iteration", row.iteration}, {"best", row.best},
                      {"elite_mean", row.elite_mean}}.dump()
              << "\n";
      }
    }
    if (opt.progress && (opt.verbose || (e + 1) % 50 == 0)) {
      *opt.progress << "episode " << e + 1 << "/" << rc.episodes << " " << status_name(r.outcome) << " reward "
                    << r.cumulative_reward << "\n";
    }
    if ((e + 1) % rc.checkpoint_every == 0) save_checkpoint(agent, rc, e + 1, ckpt);
  }
  save_checkpoint(agent, rc, rc.episodes, ckpt);
  write_curves(out, res.config_hash, res.episodes, rc.curve_window);
  return res;
}

/// Runs `n` frozen-policy episodes on freshly spawned worlds. Episode i uses
/// seeds derived from (seed, i) only, so results do not depend on threading.
template <EpisodePolicy Policy>
std::vector<EpisodeResult> evaluate_episodes(const Policy& agent, const ScenarioSpec& scenario,
                                                    const SimConfig& sim, const RewardConfig& reward, int n,
                                                    std::uint64_t seed, int threads = 1) {
  std::vector<EpisodeResult> results(static_cast<std::size_t>(std::max(n, 0)));
  auto work = [&](int first, int stride) {
    Policy local = agent;
    for (int i = first; i < n; i += stride) {
      const World w = spawn_scenario(scenario.with_seed(derive_seed(seed, i, 11)), sim);
      results[i] = run_episode(local, w, sim, reward, false, false, derive_seed(seed, i, 12));
    }
  };
  const int t = std::max(1, std::min(threads, n));
  if (t == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(work, k, t);
    for (auto& th : pool) th.join();
  }
  return results;
}

inline void write_metrics(const fs::path& out, const std::string& hash, const std::string& scenario,
                          const Metrics& m) {
  json j{{"config_hash", hash}, {"scenario", scenario}, {"episodes", m.episodes},
         {"SR", m.sr},          {"CR", m.cr},             {"LR", m.lr},
         {"AR", m.ar}};
  std::ofstream(out / "metrics.json") << j.dump(2) << "\n";
}

struct CompareRow {
  std::string label;
  std::vector<Metrics> cells;  // one per scenario
};

/// Agents x scenarios grid of SR/CR/LR/AR as tab-separated text.
inline std::string comparison_table(const std::vector<CompareRow>& rows, const std::vector<std::string>& scenarios,
                                    const std::string& hash) {
  std::ostringstream os;
  os << "# config_hash=" << hash << "\nagent";
  for (const auto& s : scenarios) os << "\t" << s << ":SR\t" << s << ":CR\t" << s << ":LR\t" << s << ":AR";
  os << "\n" << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    os << r.label;
    for (const auto& m : r.cells) os << "\t" << m.sr << "\t" << m.cr << "\t" << m.lr << "\t" << m.ar;
    os << "\n";
  }
  return os.str();
}

/// Plot-ready single-episode trace: one JSON object per line (header,
/// obstacles, then path points).
inline std::string trajectory_jsonl(const EpisodeTrace& t, const EpisodeResult& r, const SimConfig& sim,
                                    const std::string& hash) {
  std::ostringstream os;
  const World& w = t.initial;
  os << json{{"type", "header"},
             {"config_hash", hash},
             {"arena", {w.arena.width, w.arena.depth}},
             {"start", {w.start.x, w.start.y}},
             {"target", {w.target.x, w.target.y}},
             {"target_radius", sim.target_radius},
             {"outcome", status_name(r.outcome)},
             {"steps", r.steps},
             {"cumulative_reward", r.cumulative_reward}}
            .dump()
     << "\n";
  for (const auto& o : w.obstacles) {
    os << json{{"type", "obstacle"},
               {"center", {o.center.x, o.center.y}},
               {"radius", o.radius},
               {"safe_radius", o.radius + sim.safe_distance},
               {"velocity_x", o.velocity_x}}
              .dump()
       << "\n";
  }
  for (std::size_t i = 0; i < t.path.size(); ++i) {
    const auto& p = t.path[i];
    json j{{"type", "pose"}, {"step", i}, {"x", p.position.x}, {"y", p.position.y}, {"yaw", p.yaw}, {"speed", p.speed}};
    if (i > 0) j["reward"] = t.rewards[i - 1].total;
    os << j.dump() << "\n";
  }
  return os.str();
}

inline std::string trajectory_svg(const EpisodeTrace& t, const SimConfig& sim) {
  const World& w = t.initial;
  const double scale = 800.0 / std::max(w.arena.width, w.arena.depth);
  auto X = [&](double x) { return x * scale; };
  auto Y = [&](double y) { return (w.arena.depth - y) * scale; };
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << X(w.arena.width) << "\" height=\""
     << w.arena.depth * scale << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << X(w.arena.width) << "\" height=\"" << w.arena.depth * scale
     << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const auto& o : w.obstacles) {
    os << "<circle cx=\"" << X(o.center.x) << "\" cy=\"" << Y(o.center.y) << "\" r=\""
       << (o.radius + sim.safe_distance) * scale << "\" fill=\"none\" stroke=\"orange\" stroke-dasharray=\"4\"/>\n";
    os << "<circle cx=\"" << X(o.center.x) << "\" cy=\"" << Y(o.center.y) << "\" r=\"" << o.radius * scale
       << "\" fill=\"gray\"/>\n";
  }
  os << "<circle cx=\"" << X(w.target.x) << "\" cy=\"" << Y(w.target.y) << "\" r=\"" << sim.target_radius * scale
     << "\" fill=\"none\" stroke=\"green\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"blue\" points=\"";
  for (const auto& p : t.path) os << X(p.position.x) << "," << Y(p.position.y) << " ";
  os << "\"/>\n</svg>\n";
  return os.str();
}

}  // namespace uavmpc

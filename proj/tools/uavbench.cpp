// uavbench: train, evaluate, compare and export trajectories.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "uavmpc/bench.hpp"

using namespace uavmpc;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string agent;
  std::string scenario;
  std::optional<int> episodes;
  bool verbose = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run configuration");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--agent", c.agent, "proposed | ddpg | td3");
  app->add_option("--scenario", c.scenario, "training | e1 | e2 | dynamic:<v> | <named>");
  app->add_option("--episodes", c.episodes, "episode count");
  app->add_flag("--verbose", c.verbose, "per-episode progress and planner traces");
}

RunConfig base_config(const Common& c, const std::string& fallback_config = {}) {
  if (!c.config.empty()) return load_run_config(c.config);
  if (!fallback_config.empty()) return load_run_config(fallback_config);
  return RunConfig{};
}

std::string default_checkpoint(const Common& c, const std::string& given) {
  return given.empty() ? (fs::path(c.out) / "checkpoint").string() : given;
}

int cmd_train(const Common& c, bool resume) {
  RunConfig rc = base_config(c);
  if (c.seed) rc.seed = *c.seed;
  if (c.episodes) rc.episodes = *c.episodes;
  if (!c.agent.empty()) rc.agent = parse_agent(c.agent);
  if (!c.scenario.empty()) rc.scenario = rc.resolve_scenario(c.scenario);
  TrainOptions opt;
  opt.resume = resume;
  opt.verbose = c.verbose;
  opt.progress = &std::cerr;
  const TrainResult r = train(rc, c.out, opt);
  const auto tail = std::vector<EpisodeResult>(
      r.episodes.end() - std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(r.episodes.size()), 100),
      r.episodes.end());
  const Metrics m = tally(tail);
  std::cout << "trained " << agent_name(rc.agent) << " for " << rc.episodes << " episodes; final-window SR "
            << m.sr << "% CR " << m.cr << "% LR " << m.lr << "% (config " << r.config_hash << ")\n";
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, int threads) {
  const std::string ckpt = default_checkpoint(c, checkpoint);
  const LoadedCheckpoint info = read_checkpoint_info(ckpt);
  RunConfig rc = c.config.empty() ? info.config : load_run_config(c.config);
  const AgentKind kind = c.agent.empty() ? info.config.agent : parse_agent(c.agent);
  const Agent agent = load_agent(ckpt, kind);
  const std::string scen = c.scenario.empty() ? "training" : c.scenario;
  const ScenarioSpec spec = rc.resolve_scenario(scen);
  const int n = c.episodes.value_or(rc.eval_episodes);
  const std::uint64_t seed = c.seed.value_or(rc.seed);
  const auto results = evaluate_episodes(agent, spec, rc.sim, rc.reward, n, seed, threads);
  const Metrics m = tally(results);
  fs::create_directories(c.out);
  const std::string hash = info.hash;
  write_metrics(c.out, hash, scen, m);
  std::ofstream log(fs::path(c.out) / "eval_episodes.jsonl");
  log << json{{"config_hash", hash}, {"scenario", scen}, {"seed", seed}}.dump() << "\n";
  for (std::size_t i = 0; i < results.size(); ++i) log << episode_record(static_cast<int>(i) + 1, results[i], 0.0) << "\n";
  std::cout << agent_name(kind) << " on " << scen << " over " << n << " episodes: SR " << m.sr << "% CR " << m.cr
            << "% LR " << m.lr << "% AR " << m.ar << "\n";
  return 0;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_compare(const Common& c, const std::vector<std::string>& checkpoints, int threads) {
  if (checkpoints.size() < 2) throw ConfigError("compare needs at least two --checkpoint directories");
  const auto scenarios =
      c.scenario.empty() ? std::vector<std::string>{"e1", "e2", "dynamic:10", "dynamic:15"} : split_csv(c.scenario);
  std::vector<CompareRow> rows;
  std::string hash;
  for (const auto& ck : checkpoints) {
    const LoadedCheckpoint info = read_checkpoint_info(ck);
    const RunConfig rc = c.config.empty() ? info.config : load_run_config(c.config);
    const Agent agent = load_agent(ck, info.config.agent);
    CompareRow row{agent_name(info.config.agent), {}};
    for (const auto& s : scenarios) {
      const int n = c.episodes.value_or(rc.eval_episodes);
      row.cells.push_back(tally(
          evaluate_episodes(agent, rc.resolve_scenario(s), rc.sim, rc.reward, n, c.seed.value_or(rc.seed), threads)));
    }
    hash += (hash.empty() ? "" : ",") + info.hash;
    rows.push_back(std::move(row));
  }
  const std::string table = comparison_table(rows, scenarios, hash);
  fs::create_directories(c.out);
  std::ofstream(fs::path(c.out) / "comparison.tsv") << table;
  std::cout << table;
  return 0;
}

int cmd_export(const Common& c, const std::string& checkpoint, bool svg) {
  const std::string ckpt = default_checkpoint(c, checkpoint);
  const LoadedCheckpoint info = read_checkpoint_info(ckpt);
  const RunConfig rc = c.config.empty() ? info.config : load_run_config(c.config);
  Agent agent = load_agent(ckpt, c.agent.empty() ? info.config.agent : parse_agent(c.agent));
  const std::uint64_t seed = c.seed.value_or(rc.seed);
  const ScenarioSpec spec = rc.resolve_scenario(c.scenario.empty() ? "training" : c.scenario);
  EpisodeTrace trace;
  const World w = spawn_scenario(spec.with_seed(derive_seed(seed, 0, 11)), rc.sim);
  const EpisodeResult r = run_episode(agent, w, rc.sim, rc.reward, false, false, derive_seed(seed, 0, 12), &trace);
  fs::create_directories(c.out);
  std::ofstream(fs::path(c.out) / "trajectory.jsonl") << trajectory_jsonl(trace, r, rc.sim, info.hash);
  if (svg) std::ofstream(fs::path(c.out) / "trajectory.svg") << trajectory_svg(trace, rc.sim);
  std::cout << "exported " << r.steps << "-step trajectory (" << status_name(r.outcome) << ") to " << c.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV path planning benchmark: LSTM-MPC actor-critic and baselines"};
  app.require_subcommand(1);
  Common common;
  bool resume = false, svg = false;
  int threads = 1;
  std::string checkpoint;
  std::vector<std::string> checkpoints;

  auto* train = app.add_subcommand("train", "train an agent");
  add_common(train, common);
  train->add_flag("--resume", resume, "continue from the checkpoint in --out");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory (default <out>/checkpoint)");
  eval->add_option("--threads", threads, "worker threads");

  auto* cmp = app.add_subcommand("compare", "evaluate several checkpoints on several scenarios");
  add_common(cmp, common);
  cmp->add_option("--checkpoint", checkpoints, "checkpoint directory (repeat)");
  cmp->add_option("--threads", threads, "worker threads");

  auto* exp = app.add_subcommand("export-traj", "export one evaluated episode");
  add_common(exp, common);
  exp->add_option("--checkpoint", checkpoint, "checkpoint directory (default <out>/checkpoint)");
  exp->add_flag("--svg", svg, "also write trajectory.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*train) return cmd_train(common, resume);
    if (*eval) return cmd_evaluate(common, checkpoint, threads);
    if (*cmp) return cmd_compare(common, checkpoints, threads);
    if (*exp) return cmd_export(common, checkpoint, svg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

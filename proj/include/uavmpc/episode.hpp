#pragma once

// One interaction episode: scan, decide, move, score, learn.

#include <concepts>
#include <cstdint>
#include <vector>

#include "uavmpc/mdp.hpp"
#include "uavmpc/world.hpp"

namespace uavmpc {

template <class P>
concept EpisodePolicy = requires(P& p, const StateVector& s, Action a, double r, bool f, std::uint64_t seed) {
  { p.begin_episode(seed) };
  { p.select_action(s, f) } -> std::convertible_to<Action>;
  { p.observe(s, a, r, s, f, f, f) };
};

/// Per-step environment outcome.
struct EnvStep {
  UavKinematicState uav;
  StateVector observation;  // raw
  RewardBreakdown reward;
  StepStatus status = StepStatus::Running;
};

/// Advances UAV and obstacles by one step and scores the move.
inline EnvStep env_step(World& world, const UavKinematicState& uav, Action a, int step_index, const SimConfig& cfg,
                        const RewardConfig& rc) {
  EnvStep out;
  const double d_prev = (world.target - uav.position).norm();
  out.uav = step_kinematics(uav, a, cfg);
  step_obstacles(world, cfg.dt);
  out.status = classify_step(world, out.uav, step_index, cfg);
  out.observation = build_state(out.uav, world, lidar_scan(out.uav, world, cfg));
  RewardInputs in;
  in.d_prev = d_prev;
  in.d_curr = (world.target - out.uav.position).norm();
  in.psi_err = std::abs(out.observation[StateVector::kPsi]);
  in.d_min = nearest_obstacle_distance(out.uav.position, world);
  in.collided = out.status == StepStatus::Collision;
  in.reached = out.status == StepStatus::ReachedTarget;
  out.reward = total_reward(in, rc, cfg);
  return out;
}

struct EpisodeTrace {
  World initial;
  std::vector<UavKinematicState> path;  // includes the start pose
  std::vector<Action> actions;
  std::vector<RewardBreakdown> rewards;
};

struct EpisodeResult {
  StepStatus outcome = StepStatus::Running;
  double cumulative_reward = 0.0;
  int steps = 0;
};

/// Runs until a terminal status. Only ReachedTarget and Collision mark the
/// final transition as done; a timeout still bootstraps.
template <EpisodePolicy Policy>
EpisodeResult run_episode(Policy& policy, World world, const SimConfig& cfg, const RewardConfig& rc, bool explore,
                          bool learn, std::uint64_t episode_seed, EpisodeTrace* trace = nullptr) {
  policy.begin_episode(episode_seed);
  UavKinematicState uav = initial_state(world);
  StateVector obs = build_state(uav, world, lidar_scan(uav, world, cfg));
  if (trace) {
    trace->initial = world;
    trace->path = {uav};
  }
  EpisodeResult res;
  while (true) {
    const Action a = policy.select_action(obs, explore);
    const EnvStep st = env_step(world, uav, a, res.steps + 1, cfg, rc);
    ++res.steps;
    res.cumulative_reward += st.reward.total;
    const bool over = is_terminal(st.status);
    const bool done = st.status == StepStatus::ReachedTarget || st.status == StepStatus::Collision;
    policy.observe(obs, a, st.reward.total, st.observation, done, over, learn);
    if (trace) {
      trace->path.push_back(st.uav);
      trace->actions.push_back(a);
      trace->rewards.push_back(st.reward);
    }
    uav = st.uav;
    obs = st.observation;
    if (over) {
      res.outcome = st.status;
      break;
    }
  }
  return res;
}

}  // namespace uavmpc

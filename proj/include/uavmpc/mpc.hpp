#pragma once

// Receding-horizon planner. A cross-entropy search over H-step action
// sequences scores each candidate by rolling it through a dynamics model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "uavmpc/dynamics.hpp"
#include "uavmpc/mdp.hpp"

namespace uavmpc {

struct MpcConfig {
  int horizon = 5;
  double w_track = 1.0;
  double w_effort = 1.0;
  double w_collision = 10000.0;
  double collision_length = 1.5;  // lambda, metres
  RewardConfig reward;
  int population = 64;
  double elite_fraction = 0.125;
  int iterations = 4;
  double init_std = 0.5;
  bool reuse_previous_plan = true;

  int elite_count() const {
    return std::max(1, static_cast<int>(std::lround(elite_fraction * static_cast<double>(population))));
  }

  void validate() const {
    if (horizon < 1) throw ConfigError("mpc horizon must be >= 1");
    if (w_track < 0.0 || w_effort < 0.0 || w_collision < 0.0) throw ConfigError("mpc cost weights must be >= 0");
    if (!(collision_length > 0.0)) throw ConfigError("mpc collision length must be positive");
    if (population < 1 || iterations < 1) throw ConfigError("mpc population and iterations must be >= 1");
    if (!(elite_fraction > 0.0) || elite_fraction > 1.0) throw ConfigError("mpc elite fraction must be in (0, 1]");
    if (!(init_std > 0.0)) throw ConfigError("mpc initial std must be positive");
    reward.weights.validate();
  }
};

/// Obstacle surface points seen by the last scan, relative to the UAV position
/// at planning time.
struct WorldBelief {
  std::vector<Vec2> points;

  static WorldBelief from_scan(const StateVector& raw, const SimConfig& cfg) {
    WorldBelief b;
    const double yaw = yaw_from_state(raw);
    for (int k = 0; k < kLidarRays; ++k) {
      const double d = raw.lidar(k);
      if (d < cfg.sensor_range) b.points.push_back(unit_from_angle(yaw + lidar_offset(k)) * d);
    }
    return b;
  }

  double distance(Vec2 q) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& p : points) best = std::min(best, (p - q).norm());
    return best;
  }
};

inline double collision_cost(double d, double length) { return std::exp(-std::max(d, 0.0) / length); }

/// Stage cost at a predicted raw state; the desired state is the target with
/// zero velocity. `du` is the action change (speed, steer), each in [-2, 2].
inline double stage_cost(const StateVector& predicted, Vec2 du, double obstacle_distance, const MpcConfig& cfg) {
  const double track = predicted[StateVector::kRelX] * predicted[StateVector::kRelX] +
                       predicted[StateVector::kRelY] * predicted[StateVector::kRelY] +
                       predicted[StateVector::kVx] * predicted[StateVector::kVx] +
                       predicted[StateVector::kVy] * predicted[StateVector::kVy];
  const double effort = du.x * du.x + du.y * du.y;
  return cfg.w_track * track + cfg.w_effort * effort +
         cfg.w_collision * collision_cost(obstacle_distance, cfg.collision_length);
}

/// Reward inputs for moving from `prev` to `next`, judged from predicted states only.
inline RewardInputs predicted_inputs(const StateVector& prev, const StateVector& next, const SimConfig& sim) {
  double d_min = sim.sensor_range;
  for (int k = 0; k < kLidarRays; ++k) d_min = std::min(d_min, next.lidar(k));
  d_min = std::max(d_min, 0.0);
  RewardInputs in;
  in.d_prev = prev.target_distance();
  in.d_curr = next.target_distance();
  in.psi_err = std::abs(next[StateVector::kPsi]);
  in.d_min = d_min;
  in.collided = d_min < sim.uav_radius;
  in.reached = in.d_curr <= sim.target_radius;
  return in;
}

inline RewardBreakdown predicted_reward(const StateVector& prev, const StateVector& next, const RewardConfig& rc,
                                        const SimConfig& sim) {
  return total_reward(predicted_inputs(prev, next, sim), rc, sim);
}

struct MpcTraceRow {
  int iteration = 0;
  double best = 0.0;
  double elite_mean = 0.0;
};

struct MpcPlan {
  ActionSequence actions;
  std::vector<StateVector> states;  // raw predicted s_1..s_H
  std::vector<double> stage_costs;
  std::vector<double> rewards;  // weighted totals per stage
  std::size_t terminal_stage = 0;  // 1-based first stage with a predicted arrival or collision, 0 if none
  double objective = std::numeric_limits<double>::infinity();
  std::vector<MpcTraceRow> trace;

  Action first() const { return actions.empty() ? Action{0, 0} : actions.front(); }
};

/// Everything the planner sees at decision time.
struct MpcProblem {
  ModelContext context;   // normalized history + current state
  StateVector current;    // raw current state
  Action previous{0, 0};  // last executed action
  WorldBelief belief;
};

/// Fills stage costs, rewards and objective of a plan whose actions and
/// predicted states are already set.
inline void score_plan(MpcPlan& plan, const MpcProblem& pb, const MpcConfig& cfg, const SimConfig& sim) {
  const std::size_t H = plan.actions.size();
  plan.stage_costs.assign(H, 0.0);
  plan.rewards.assign(H, 0.0);
  plan.terminal_stage = 0;
  const Vec2 origin = pb.current.rel_target();
  double J = 0.0;
  Action prev_u = pb.previous;
  const StateVector* prev_s = &pb.current;
  for (std::size_t j = 0; j < H; ++j) {
    const StateVector& s = plan.states[j];
    const Vec2 q = origin - s.rel_target();
    const Vec2 du{plan.actions[j].speed - prev_u.speed, plan.actions[j].steer - prev_u.steer};
    plan.stage_costs[j] = stage_cost(s, du, pb.belief.distance(q), cfg);
    if (plan.terminal_stage == 0) {  // no reward after a predicted arrival or collision
      const RewardInputs in = predicted_inputs(*prev_s, s, sim);
      plan.rewards[j] = total_reward(in, cfg.reward, sim).total;
      if (in.reached || in.collided) plan.terminal_stage = j + 1;
    }
    J += plan.stage_costs[j] - plan.rewards[j];
    prev_u = plan.actions[j];
    prev_s = &s;
  }
  plan.objective = J;
}

/// Rolls `actions` through the model and scores the result.
template <DynamicsPredictor Model>
MpcPlan evaluate_plan(const Model& model, const MpcProblem& pb, const ActionSequence& actions, const MpcConfig& cfg,
                      const SimConfig& sim) {
  std::vector<PredictedTrajectory> out;
  model.rollout_batch(pb.context, {actions}, out);
  MpcPlan plan;
  plan.actions = actions;
  plan.states = out.front();
  score_plan(plan, pb, cfg, sim);
  return plan;
}

inline ActionSequence straight_line_plan(int horizon) { return ActionSequence(horizon, Action{1.0, 0.0}); }

/// Cross-entropy search. Elites are carried into the next population, so both
/// the best-ever and the elite-mean objective are non-increasing. A warm plan
/// is scored as-is in the first population and so bounds the result.
template <DynamicsPredictor Model>
MpcPlan solve(const Model& model, const MpcProblem& pb, const MpcConfig& cfg, const SimConfig& sim,
              std::uint64_t seed, const ActionSequence* warm = nullptr) {
  const int H = cfg.horizon;
  const int P = cfg.population;
  const int K = std::min(cfg.elite_count(), P);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> mean(2 * H, 0.0), stdev(2 * H, cfg.init_std);
  if (warm && !warm->empty()) {
    for (int j = 0; j < H; ++j) {
      const Action& a = (*warm)[std::min<std::size_t>(j, warm->size() - 1)];
      mean[2 * j] = a.speed;
      mean[2 * j + 1] = a.steer;
    }
  }

  std::vector<ActionSequence> elites;
  std::vector<double> elite_costs;
  MpcPlan best;
  std::vector<ActionSequence> pop;
  std::vector<PredictedTrajectory> trajs;
  std::vector<double> costs;
  MpcPlan scratch;
  std::vector<MpcTraceRow> trace;

  for (int it = 0; it < cfg.iterations; ++it) {
    const int fresh = P - static_cast<int>(elites.size());
    pop.assign(fresh, ActionSequence(H, Action{0, 0}));
    for (auto& seq : pop) {
      for (int j = 0; j < H; ++j) {
        seq[j] = Action{mean[2 * j] + stdev[2 * j] * gauss(rng), mean[2 * j + 1] + stdev[2 * j + 1] * gauss(rng)};
      }
    }
    if (it == 0 && warm && !warm->empty() && fresh > 0) {
      for (int j = 0; j < H; ++j) pop[0][j] = Action{mean[2 * j], mean[2 * j + 1]};  // the warm plan itself
    }
    model.rollout_batch(pb.context, pop, trajs);
    costs.assign(fresh, 0.0);
    for (int b = 0; b < fresh; ++b) {
      scratch.actions = pop[b];
      scratch.states = trajs[b];
      score_plan(scratch, pb, cfg, sim);
      costs[b] = scratch.objective;
      if (scratch.objective < best.objective) best = scratch;
    }
    for (std::size_t e = 0; e < elites.size(); ++e) {
      pop.push_back(elites[e]);
      costs.push_back(elite_costs[e]);
    }

    std::vector<int> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return costs[a] < costs[b]; });
    elites.clear();
    elite_costs.clear();
    for (int k = 0; k < K; ++k) {
      elites.push_back(pop[order[k]]);
      elite_costs.push_back(costs[order[k]]);
    }
    const double elite_mean = std::accumulate(elite_costs.begin(), elite_costs.end(), 0.0) / K;
    trace.push_back({it + 1, best.objective, elite_mean});

    bool degenerate = true;
    for (int d = 0; d < 2 * H; ++d) {
      double m = 0.0;
      for (const auto& seq : elites) m += d % 2 == 0 ? seq[d / 2].speed : seq[d / 2].steer;
      m /= K;
      double v = 0.0;
      for (const auto& seq : elites) {
        const double x = (d % 2 == 0 ? seq[d / 2].speed : seq[d / 2].steer) - m;
        v += x * x;
      }
      mean[d] = m;
      stdev[d] = std::sqrt(v / K);
      if (stdev[d] > 1e-6) degenerate = false;
    }
    if (degenerate) std::fill(stdev.begin(), stdev.end(), cfg.init_std);
  }
  best.trace = std::move(trace);
  return best;
}

}  // namespace uavmpc

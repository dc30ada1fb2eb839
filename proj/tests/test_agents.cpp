#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "uavmpc/agents.hpp"
#include "uavmpc/episode.hpp"
#include "uavmpc/nn/gradcheck.hpp"

using namespace uavmpc;

namespace {

const ArenaConfig kArena{50, 50, 50};

AgentConfig small_agent() {
  AgentConfig c;
  c.batch_size = 8;
  c.capacity = 256;
  c.critic_hidden = {16};
  c.actor_hidden = {16};
  c.warm_start_min = 32;
  return c;
}

DynConfig small_dyn() {
  DynConfig d;
  d.lstm.layers = 1;
  d.lstm.hidden = 8;
  d.warmup_transitions = 20;
  d.online_batch = 8;
  return d;
}

MpcConfig small_mpc() {
  MpcConfig m;
  m.population = 16;
  m.iterations = 2;
  return m;
}

Agent make(AgentKind kind, std::uint64_t seed = 1, AgentConfig cfg = small_agent()) {
  SimConfig sim;
  return Agent(kind, cfg, small_dyn(), small_mpc(), sim, StateNormalizer::from(kArena, sim), seed);
}

StateVector random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  StateVector s;
  for (auto& v : s.values) v = u(rng);
  return s;
}

Transition random_transition(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  return {random_state(rng), Action{u(rng), u(rng)}, u(rng), random_state(rng), false, Action{u(rng), u(rng)}};
}

PredictedTransition random_predicted(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1), w(0.1, 1);
  PredictedTransition p;
  p.s = random_state(rng);
  p.a = Action{u(rng), u(rng)};
  p.r = u(rng);
  p.s2 = random_state(rng);
  p.next_action = Action{u(rng), u(rng)};
  p.w_rel = w(rng);
  return p;
}

World open_world() {
  World w;
  w.arena = kArena;
  w.start = {10, 25};
  w.target = {40, 25};
  w.start_yaw = 0.0;
  return w;
}

struct ConstantPolicy {
  Action a;
  std::vector<char> done_flags;
  void begin_episode(std::uint64_t) {}
  Action select_action(const StateVector&, bool) { return a; }
  void observe(const StateVector&, Action, double, const StateVector&, bool done, bool, bool) {
    done_flags.push_back(done ? 1 : 0);
  }
};

/// Planner driven by the true simulator; recovers the pose from the
/// observation, so it only suits static worlds.
struct OraclePlanner {
  World world;
  SimConfig sim;
  MpcConfig cfg;
  std::mt19937_64 rng{0};
  Action previous{0, 0};
  void begin_episode(std::uint64_t seed) {
    rng.seed(seed);
    previous = Action{0, 0};
  }
  Action select_action(const StateVector& s, bool) {
    SimulatorDynamics dyn(sim, StateNormalizer::from(world.arena, sim));
    UavKinematicState uav = UavKinematicState::make(world.target - s.rel_target(), yaw_from_state(s), s[StateVector::kSpeed]);
    dyn.set_truth(world, uav);
    MpcProblem pb;
    pb.current = s;
    pb.previous = previous;
    pb.belief = WorldBelief::from_scan(s, sim);
    return solve(dyn, pb, cfg, sim, rng()).first();
  }
  void observe(const StateVector&, Action a, double, const StateVector&, bool, bool, bool) { previous = a; }
};

}  // namespace

TEST(RingPool, EvictsOldestAtCapacity) {
  RingPool<int> p(2);
  p.push(1);
  p.push(2);
  p.push(3);
  EXPECT_EQ(p.size(), 2u);
  EXPECT_EQ(p.pushed(), 3u);
  EXPECT_EQ(p[p.slot_of(0)], 2);
  EXPECT_EQ(p[p.slot_of(1)], 3);
  EXPECT_THROW(RingPool<int>(0), ConfigError);
}

TEST(RingPool, SizeTracksPushesUpToCapacity) {
  RingPool<int> p(7);
  for (int i = 1; i <= 20; ++i) {
    p.push(i);
    EXPECT_EQ(p.size(), static_cast<std::size_t>(std::min(i, 7)));
  }
}

TEST(PredictingPool, OneEntryPerStageChained) {
  std::mt19937_64 rng(1);
  const StateNormalizer norm = StateNormalizer::from(kArena, SimConfig{});
  MpcPlan plan;
  for (int j = 0; j < 5; ++j) {
    plan.actions.push_back(Action{0.1 * j, -0.1 * j});
    plan.states.push_back(norm.denormalize(random_state(rng)));
    plan.rewards.push_back(j + 0.5);
  }
  PredictingPool pool(100);
  const StateVector cur = random_state(rng);
  EXPECT_EQ(fill_predicting_pool(pool, plan, cur, norm, 40), 5);
  ASSERT_EQ(pool.size(), 5u);
  EXPECT_EQ(pool[0].s, cur);
  for (std::size_t j = 0; j < 5; ++j) {
    const auto& e = pool[j];
    for (std::size_t i = 0; i < kStateDim; ++i) EXPECT_NEAR(e.s2[i], norm.normalize(plan.states[j])[i], 1e-15);
    EXPECT_EQ(e.a, plan.actions[j]);
    EXPECT_EQ(e.r, plan.rewards[j]);
    EXPECT_EQ(e.target_step, 40 + j + 1);
    EXPECT_EQ(e.w_rel, 1.0);
    if (j + 1 < 5) {
      EXPECT_EQ(pool[j + 1].s, e.s2);
      EXPECT_EQ(e.next_action, plan.actions[j + 1]);
    }
  }
  for (std::size_t j = 0; j < 5; ++j) EXPECT_FALSE(pool[j].done);
  EXPECT_EQ(pool.pending_count(), 5u);
  EXPECT_EQ(fill_predicting_pool(pool, MpcPlan{}, cur, norm, 41), 0);
  EXPECT_EQ(pool.size(), 5u);
}

TEST(PredictingPool, StopsAtPredictedTerminalStage) {
  std::mt19937_64 rng(2);
  const StateNormalizer norm = StateNormalizer::from(kArena, SimConfig{});
  MpcPlan plan;
  for (int j = 0; j < 5; ++j) {
    plan.actions.push_back(Action{0.2, 0.0});
    plan.states.push_back(norm.denormalize(random_state(rng)));
    plan.rewards.push_back(j < 2 ? 1.0 : 0.0);
  }
  plan.terminal_stage = 2;
  PredictingPool pool(100);
  EXPECT_EQ(fill_predicting_pool(pool, plan, random_state(rng), norm, 0), 2);
  ASSERT_EQ(pool.size(), 2u);
  EXPECT_FALSE(pool[0].done);
  EXPECT_TRUE(pool[1].done);
}

TEST(PredictingPool, ReliabilityKernel) {
  std::mt19937_64 rng(2);
  PredictingPool pool(10);
  PredictedTransition e = random_predicted(rng);
  e.target_step = 7;
  for (int k = 0; k < 3; ++k) pool.mark_pending(pool.push(e));
  StateVector off = e.s2;
  off[0] += 0.5;  // ||error|| = sigma for sigma 0.5
  EXPECT_EQ(pool.update_reliability(6, e.s2, 0.5), 0);
  EXPECT_EQ(pool.pending_count(), 3u);
  EXPECT_EQ(pool.update_reliability(7, e.s2, 0.5), 3);
  EXPECT_EQ(pool[0].w_rel, 1.0);
  EXPECT_EQ(pool.pending_count(), 0u);

  PredictingPool p2(10);
  p2.mark_pending(p2.push(e));
  p2.update_reliability(7, off, 0.5);
  EXPECT_NEAR(p2[0].w_rel, std::exp(-1.0), 1e-12);

  double prev = 2.0;
  for (double err = 0.0; err < 3.0; err += 0.1) {
    PredictingPool p(4);
    p.mark_pending(p.push(e));
    StateVector r = e.s2;
    r[3] += err;
    p.update_reliability(7, r, 1.0);
    EXPECT_LT(p[0].w_rel, prev);
    EXPECT_GE(p[0].w_rel, 0.0);
    EXPECT_LE(p[0].w_rel, 1.0);
    prev = p[0].w_rel;
  }
}

TEST(PredictingPool, OverwrittenEntriesAreNotUpdated) {
  std::mt19937_64 rng(3);
  PredictingPool pool(2);
  PredictedTransition e = random_predicted(rng);
  e.target_step = 5;
  pool.mark_pending(pool.push(e));
  PredictedTransition f = e;
  f.target_step = 9;
  f.w_rel = 0.3;
  pool.push(f);
  pool.push(f);  // evicts the pending entry
  EXPECT_EQ(pool.update_reliability(5, e.s2, 1.0), 0);
  EXPECT_EQ(pool[0].w_rel, 0.3);
}

TEST(PredictingPool, WeightedSamplingFollowsReliability) {
  std::mt19937_64 rng(4);
  PredictingPool pool(3);
  for (double w : {0.0, 1.0, 3.0}) {
    PredictedTransition e = random_predicted(rng);
    e.w_rel = w;
    pool.push(e);
  }
  std::vector<int> counts(3, 0);
  for (std::size_t i : pool.sample_weighted(40000, rng)) ++counts[i];
  EXPECT_EQ(counts[0], 0);
  EXPECT_NEAR(counts[2] / 40000.0, 0.75, 0.01);
}

TEST(Agent, ExplorationNoiseHasConfiguredSpread) {
  Agent a = make(AgentKind::Ddpg);
  a.begin_episode(5);
  StateVector s;
  const Action clean = a.policy_action(s);
  const int n = 100000;
  double s1 = 0, s2 = 0, t1 = 0, t2 = 0;
  for (int i = 0; i < n; ++i) {
    const Action x = a.select_action(s, true);
    const double ds = x.speed - clean.speed, dt = x.steer - clean.steer;
    s1 += ds;
    s2 += ds * ds;
    t1 += dt;
    t2 += dt * dt;
  }
  const double sd_speed = std::sqrt(s2 / n - (s1 / n) * (s1 / n));
  const double sd_steer = std::sqrt(t2 / n - (t1 / n) * (t1 / n));
  EXPECT_NEAR(sd_speed, 0.2, 0.01);
  EXPECT_NEAR(sd_steer, 0.2, 0.01);
  EXPECT_NEAR(s1 / n, 0.0, 0.005);
}

TEST(Agent, NoisyActionsStayInBounds) {
  AgentConfig cfg = small_agent();
  cfg.exploration_noise = 5.0;
  Agent a = make(AgentKind::Td3, 2, cfg);
  a.begin_episode(1);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 2000; ++i) {
    const Action x = a.select_action(random_state(rng), true);
    EXPECT_LE(std::abs(x.speed), 1.0);
    EXPECT_LE(std::abs(x.steer), 1.0);
  }
}

TEST(Agent, NoExplorationIsDeterministic) {
  for (AgentKind k : {AgentKind::Ddpg, AgentKind::Proposed}) {
    Agent a = make(k);
    Agent b = make(k);
    std::mt19937_64 rng(3);
    const StateNormalizer norm = a.normalizer();
    a.begin_episode(9);
    b.begin_episode(9);
    for (int i = 0; i < 5; ++i) {
      const StateVector s = norm.denormalize(random_state(rng));
      EXPECT_EQ(a.select_action(s, false), b.select_action(s, false));
    }
  }
}

TEST(Agent, TerminalTargetIsRewardOnly) {
  for (AgentKind k : {AgentKind::Proposed, AgentKind::Ddpg, AgentKind::Td3}) {
    Agent a = make(k);
    std::mt19937_64 rng(4);
    CriticBatch b;
    for (int i = 0; i < 6; ++i) {
      const Transition t = random_transition(rng);
      b.add(t.s, t.a, t.r, t.s2, t.next_action, true, 1.0);
    }
    const nn::Matrix y = a.td_targets(b);
    for (int i = 0; i < 6; ++i) EXPECT_EQ(y(0, i), b.r[i]);
  }
}

TEST(Agent, PredictedTerminalEntriesDoNotBootstrap) {
  Agent a = make(AgentKind::Proposed);
  std::mt19937_64 rng(6);
  PredictedTransition e = random_predicted(rng);
  Transition t{e.s, e.a, e.r, e.s2, true, e.next_action};
  e.done = true;
  EXPECT_DOUBLE_EQ(a.td_error(std::vector<PredictedTransition>{e}), a.td_error(std::vector<Transition>{t}));
  e.done = false;
  t.done = false;
  EXPECT_DOUBLE_EQ(a.td_error(std::vector<PredictedTransition>{e}), a.td_error(std::vector<Transition>{t}));
}

TEST(Agent, ProposedTargetMatchesHandComputation) {
  AgentConfig cfg = small_agent();
  cfg.critic_hidden = {};  // linear critic
  Agent a = make(AgentKind::Proposed, 3, cfg);
  const auto& p = a.critic_targets()[0].params();
  std::mt19937_64 rng(5);
  const Transition t = random_transition(rng);
  CriticBatch b;
  b.add(t.s, t.a, t.r, t.s2, t.next_action, false, 1.0);
  double q = p[1](0, 0);
  for (std::size_t i = 0; i < kStateDim; ++i) q += p[0](0, static_cast<Eigen::Index>(i)) * t.s2[i];
  q += p[0](0, 13) * t.next_action.speed + p[0](0, 14) * t.next_action.steer;
  EXPECT_NEAR(a.td_targets(b)(0, 0), t.r + 0.99 * q, 1e-12);
}

TEST(Agent, BaselineTargetUsesTargetActorAndTwinMinimum) {
  Agent a = make(AgentKind::Td3, 4);
  std::mt19937_64 rng(6);
  CriticBatch b;
  for (int i = 0; i < 4; ++i) {
    const Transition t = random_transition(rng);
    b.add(t.s, t.a, t.r, t.s2, Action{0, 0}, false, 1.0);
  }
  // make the twins disagree
  a.critic_targets()[1].params()[a.critic_targets()[1].params().size() - 1](0, 0) += 0.3;
  const nn::Matrix y = a.td_targets(b);
  for (int i = 0; i < 4; ++i) {
    nn::Matrix s2(kStateDim, 1);
    for (std::size_t k = 0; k < kStateDim; ++k) s2(k, 0) = b.s2[i][k];
    const nn::Matrix mu = a.actor_target()->forward(s2);
    nn::Matrix x(kModelInputDim, 1);
    x.topRows(kStateDim) = s2;
    x.bottomRows(2) = mu;
    const double q1 = a.critic_targets()[0].forward(x)(0, 0);
    const double q2 = a.critic_targets()[1].forward(x)(0, 0);
    EXPECT_NEAR(y(0, i), b.r[i] + 0.99 * std::min(q1, q2), 1e-12);
  }
}

TEST(Agent, ZeroPredictedFractionIgnoresPredictingPool) {
  AgentConfig cfg = small_agent();
  cfg.predicted_fraction = 0.0;
  Agent a = make(AgentKind::Proposed, 7, cfg);
  Agent b = make(AgentKind::Proposed, 7, cfg);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 40; ++i) {
    const Transition t = random_transition(rng);
    a.experience().push(t);
    b.experience().push(t);
  }
  for (int i = 0; i < 40; ++i) b.predicting().push(random_predicted(rng));
  for (int k = 0; k < 3; ++k) EXPECT_EQ(a.critic_update(), b.critic_update());
  EXPECT_TRUE(a.critics()[0].params() == b.critics()[0].params());

  cfg.predicted_fraction = 0.5;
  Agent c = make(AgentKind::Proposed, 7, cfg);
  for (int i = 0; i < 40; ++i) c.experience().push(a.experience()[i]);
  for (int i = 0; i < 40; ++i) c.predicting().push(b.predicting()[i]);
  for (int k = 0; k < 3; ++k) c.critic_update();
  EXPECT_FALSE(a.critics()[0].params() == c.critics()[0].params());
}

TEST(Agent, CriticUpdateWaitsForFullBatch) {
  Agent a = make(AgentKind::Ddpg);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 7; ++i) a.experience().push(random_transition(rng));
  EXPECT_TRUE(std::isnan(a.critic_update()));
  a.experience().push(random_transition(rng));
  EXPECT_TRUE(std::isfinite(a.critic_update()));
}

TEST(Agent, FlatCriticLeavesActorUnchanged) {
  Agent a = make(AgentKind::Ddpg);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) a.experience().push(random_transition(rng));
  a.critics()[0].params().set_zero();
  const nn::ParamVector before = a.actor()->params();
  a.actor_update();
  EXPECT_TRUE(a.actor()->params() == before);
}

TEST(Agent, ActorGradientMatchesFiniteDifference) {
  Agent a = make(AgentKind::Ddpg, 11);
  std::mt19937_64 rng(12);
  nn::Matrix S(kStateDim, 6);
  for (int k = 0; k < 6; ++k) {
    const StateVector s = random_state(rng);
    for (std::size_t i = 0; i < kStateDim; ++i) S(i, k) = s[i];
  }
  nn::ParamVector g = a.actor()->params().zeros_like();
  a.actor_gradient(S, g);
  auto loss = [&] {
    nn::Matrix X(kModelInputDim, S.cols());
    X.topRows(kStateDim) = S;
    X.bottomRows(2) = a.actor()->forward(S);
    return -a.critics()[0].forward(X).mean();
  };
  const nn::ParamVector num = nn::central_difference(a.actor()->params(), loss, 1e-6);
  EXPECT_LT(nn::max_relative_error(g, num, 1e-7), 1e-4);
}

TEST(Agent, ActorUpdateRaisesCriticValue) {
  AgentConfig cfg = small_agent();
  cfg.actor_lr = 1e-3;
  Agent a = make(AgentKind::Ddpg, 13, cfg);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 64; ++i) a.experience().push(random_transition(rng));
  nn::Matrix S(kStateDim, 64);
  for (int k = 0; k < 64; ++k) {
    for (std::size_t i = 0; i < kStateDim; ++i) S(i, k) = a.experience()[k].s[i];
  }
  nn::ParamVector g = a.actor()->params().zeros_like();
  const double before = a.actor_gradient(S, g);
  for (int k = 0; k < 20; ++k) a.actor_update();
  g.set_zero();
  EXPECT_LT(a.actor_gradient(S, g), before);
}

TEST(Agent, WarmStartZeroStepsIsNoOp) {
  Agent a = make(AgentKind::Proposed);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) a.predicting().push(random_predicted(rng));
  const nn::ParamVector before = a.critics()[0].params();
  a.warm_start_critic(0);
  EXPECT_TRUE(a.critics()[0].params() == before);
}

TEST(Agent, WarmStartLowersPoolLoss) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Agent a = make(AgentKind::Proposed, seed);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 120; ++i) a.predicting().push(random_predicted(rng));
    const double l0 = a.predicted_pool_loss();
    a.warm_start_critic(100);
    const double l1 = a.predicted_pool_loss();
    EXPECT_LT(l1, l0);
  }
}

TEST(Agent, ModelUpdateWaitsThenLearnsRealTransitions) {
  Agent a = make(AgentKind::Proposed, 5);
  SimConfig sim;
  const World w = open_world();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const StateNormalizer norm = a.normalizer();
  auto s = initial_state(w);
  std::vector<TrajectoryWindow> data;
  for (int t = 0; t < 60; ++t) {
    const Action act{u(rng), u(rng)};
    const auto next = step_kinematics(s, act, sim);
    a.sequences().push({model_input(norm.normalize(build_state(s, w, lidar_scan(s, w, sim))), act),
                        norm.normalize(build_state(next, w, lidar_scan(next, w, sim))), 1, true});
    s = next;
    if (t == 10) {
      EXPECT_TRUE(std::isnan(a.model_update()));
    }
  }
  for (std::size_t i = 0; i < a.sequences().size(); ++i) data.push_back(a.sequences().window(i));
  const double before = a.model().full_loss(data);
  for (int k = 0; k < 30; ++k) EXPECT_TRUE(std::isfinite(a.model_update()));
  EXPECT_LT(a.model().full_loss(data), before);
}

TEST(Episode, ZeroActionTimesOutAndRewardsSum) {
  SimConfig sim;
  sim.max_steps = 25;
  RewardConfig rc;
  ConstantPolicy p{Action{0, 0}, {}};
  EpisodeTrace trace;
  const EpisodeResult r = run_episode(p, open_world(), sim, rc, false, true, 1, &trace);
  EXPECT_EQ(r.outcome, StepStatus::TimedOut);
  EXPECT_EQ(r.steps, 25);
  double sum = 0.0;
  for (const auto& b : trace.rewards) sum += b.total;
  EXPECT_NEAR(r.cumulative_reward, sum, 1e-10);
  EXPECT_EQ(trace.path.size(), 26u);
  EXPECT_EQ(p.done_flags.back(), 0);  // timeouts bootstrap
}

TEST(Episode, StraightFlightReachesTargetWithBonus) {
  SimConfig sim;
  RewardConfig rc;
  ConstantPolicy p{Action{1, 0}, {}};
  EpisodeTrace trace;
  const EpisodeResult r = run_episode(p, open_world(), sim, rc, false, false, 1, &trace);
  EXPECT_EQ(r.outcome, StepStatus::ReachedTarget);
  EXPECT_EQ(r.steps, 4);  // 7.5 m per step over 30 m less the target radius
  EXPECT_EQ(trace.rewards.back().bonus, 10.0);
  EXPECT_EQ(p.done_flags.back(), 1);
}

TEST(Episode, CollisionIsTerminal) {
  SimConfig sim;
  RewardConfig rc;
  World w = open_world();
  w.obstacles = {{{25, 25}, 3.0, 50.0, 0.0}};
  ConstantPolicy p{Action{1, 0}, {}};
  const EpisodeResult r = run_episode(p, w, sim, rc, false, false, 1);
  EXPECT_EQ(r.outcome, StepStatus::Collision);
  EXPECT_EQ(p.done_flags.back(), 1);
}

TEST(Agent, ProposedFillsPoolsAndWarmStartsOnce) {
  SimConfig sim;
  sim.max_steps = 30;
  RewardConfig rc;
  Agent a = make(AgentKind::Proposed, 21);
  std::uint64_t steps = 0;
  for (int e = 0; e < 3; ++e) {
    World w = open_world();
    w.start_yaw = 2.0 + e;  // start facing away so episodes last a few steps
    steps += static_cast<std::uint64_t>(run_episode(a, w, sim, rc, true, true, 100 + e).steps);
  }
  EXPECT_EQ(a.global_step(), steps);
  EXPECT_EQ(a.experience().size(), std::min<std::size_t>(steps, 256));
  EXPECT_LE(a.predicting().pushed(), 5 * steps);  // plans stop at a predicted arrival
  EXPECT_GE(a.predicting().pushed(), steps);
  EXPECT_EQ(a.warm_started(), a.predicting().pushed() >= 32);
}

TEST(Agent, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "uavmpc_agent_roundtrip";
  std::filesystem::remove_all(dir);
  for (AgentKind k : {AgentKind::Proposed, AgentKind::Ddpg, AgentKind::Td3}) {
    Agent a = make(k, 31);
    std::mt19937_64 rng(31);
    for (int i = 0; i < 30; ++i) a.experience().push(random_transition(rng));
    for (int i = 0; i < 5; ++i) a.critic_update();
    a.save(dir / agent_name(k));
    Agent b = make(k, 99);
    b.load(dir / agent_name(k));
    for (std::size_t c = 0; c < a.critics().size(); ++c) {
      EXPECT_TRUE(a.critics()[c].params() == b.critics()[c].params());
      EXPECT_TRUE(a.critic_targets()[c].params() == b.critic_targets()[c].params());
    }
    if (k == AgentKind::Proposed) {
      EXPECT_TRUE(a.model().params() == b.model().params());
    } else {
      EXPECT_TRUE(a.actor()->params() == b.actor()->params());
      EXPECT_TRUE(a.actor_target()->params() == b.actor_target()->params());
    }
  }
  Agent ddpg = make(AgentKind::Ddpg);
  EXPECT_THROW(ddpg.load(dir / "td3"), std::exception);
  std::filesystem::remove_all(dir);
}

TEST(Planner, TrueDynamicsDoAtLeastAsWellAsLearnedModel) {
  SimConfig sim;
  sim.max_steps = 60;
  RewardConfig rc;
  AgentConfig cfg = small_agent();
  DynConfig dyn = small_dyn();
  dyn.lstm.hidden = 32;
  dyn.max_epochs = 20;
  Agent learned(AgentKind::Proposed, cfg, dyn, MpcConfig{}, sim, StateNormalizer::from(kArena, sim), 3);
  pretrain_from_limited_map(learned.model(), kArena, sim, 2000, 17);

  std::vector<double> oracle_rewards, learned_rewards;
  ScenarioSpec spec;
  spec.arena = kArena;
  for (int e = 0; e < 20; ++e) {
    const World w = spawn_scenario(spec.with_seed(500 + e), sim);
    OraclePlanner op{w, sim, MpcConfig{}};
    oracle_rewards.push_back(run_episode(op, w, sim, rc, false, false, e).cumulative_reward);
    learned_rewards.push_back(run_episode(learned, w, sim, rc, false, false, e).cumulative_reward);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  std::cout << "median reward: simulator " << median(oracle_rewards) << ", learned " << median(learned_rewards)
            << "\n";
  EXPECT_GE(median(oracle_rewards), median(learned_rewards));
}

#pragma once

// Actor-critic agents. The proposed agent acts through the planner and
// improves by refining its dynamics model; the DDPG and TD3 baselines use a
// tanh actor network trained through the critic.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uavmpc/dynamics.hpp"
#include "uavmpc/mpc.hpp"
#include "uavmpc/nn/adam.hpp"
#include "uavmpc/nn/mlp.hpp"
#include "uavmpc/nn/serialize.hpp"
#include "uavmpc/pools.hpp"

namespace uavmpc {

enum class AgentKind { Proposed, Ddpg, Td3 };

inline const char* agent_name(AgentKind k) {
  switch (k) {
    case AgentKind::Proposed: return "proposed";
    case AgentKind::Ddpg: return "ddpg";
    case AgentKind::Td3: return "td3";
  }
  return "?";
}

inline AgentKind parse_agent(const std::string& s) {
  if (s == "proposed") return AgentKind::Proposed;
  if (s == "ddpg") return AgentKind::Ddpg;
  if (s == "td3") return AgentKind::Td3;
  throw ConfigError("unknown agent '" + s + "' (expected proposed, ddpg or td3)");
}

struct AgentConfig {
  double gamma = 0.99;
  double critic_lr = 1e-3;
  double actor_lr = 1e-3;
  int batch_size = 256;
  double exploration_noise = 0.2;
  double tau = 1e-3;
  std::size_t capacity = 100'000;
  int max_episodes = 5000;
  double predicted_fraction = 0.25;  // rho
  double sigma_rel = 1.0;
  std::vector<int> critic_hidden{256, 256};
  std::vector<int> actor_hidden{256, 256};
  double td3_target_noise = 0.2;
  double td3_noise_clip = 0.5;
  int td3_policy_delay = 2;
  int warm_start_steps = 100;
  std::size_t warm_start_min = 256;  // predicted entries needed before warm start
  bool warm_start_each_episode = false;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must be in (0, 1]");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (capacity < static_cast<std::size_t>(batch_size)) throw ConfigError("pool capacity must be >= batch size");
    if (!(critic_lr > 0.0) || !(actor_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (exploration_noise < 0.0) throw ConfigError("exploration noise must be >= 0");
    if (predicted_fraction < 0.0 || predicted_fraction > 1.0) throw ConfigError("predicted fraction must be in [0, 1]");
    if (!(sigma_rel > 0.0)) throw ConfigError("sigma_rel must be positive");
    if (td3_policy_delay < 1) throw ConfigError("td3 policy delay must be >= 1");
    if (warm_start_steps < 0) throw ConfigError("warm start steps must be >= 0");
  }
};

/// Concatenates parameter sets under name prefixes (checkpoint bundles).
inline nn::ParamVector bundle(const std::vector<std::pair<std::string, const nn::ParamVector*>>& parts) {
  nn::ParamVector out;
  for (const auto& [prefix, p] : parts) {
    for (const auto& t : p->tensors()) {
      const std::size_t i = out.add(prefix + t.name, t.value.rows(), t.value.cols());
      out[i] = t.value;
    }
  }
  return out;
}

inline void unbundle(const nn::ParamVector& from, const std::vector<std::pair<std::string, nn::ParamVector*>>& parts) {
  nn::ParamVector shape = [&] {
    std::vector<std::pair<std::string, const nn::ParamVector*>> c;
    for (const auto& [prefix, p] : parts) c.emplace_back(prefix, p);
    return bundle(c);
  }();
  shape.require_same_shape(from);
  std::size_t k = 0;
  for (const auto& [prefix, p] : parts) {
    for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] = from[k++];
  }
}

/// Columns of (s, a, r, s2, a2, done, weight) for one critic step.
struct CriticBatch {
  std::vector<StateVector> s, s2;
  std::vector<Action> a, a2;
  std::vector<double> r, w;
  std::vector<char> done;

  void add(const StateVector& s_, Action a_, double r_, const StateVector& s2_, Action a2_, bool done_, double w_) {
    s.push_back(s_);
    a.push_back(a_);
    r.push_back(r_);
    s2.push_back(s2_);
    a2.push_back(a2_);
    done.push_back(done_ ? 1 : 0);
    w.push_back(w_);
  }
  Eigen::Index size() const { return static_cast<Eigen::Index>(s.size()); }
  nn::Matrix inputs() const {
    nn::Matrix X(kModelInputDim, size());
    for (Eigen::Index k = 0; k < size(); ++k) {
      for (std::size_t i = 0; i < kStateDim; ++i) X(i, k) = s[k][i];
      X(kStateDim, k) = a[k].speed;
      X(kStateDim + 1, k) = a[k].steer;
    }
    return X;
  }
  nn::Matrix weight_row() const {
    nn::Matrix m(1, size());
    for (Eigen::Index i = 0; i < size(); ++i) m(0, i) = w[i];
    return m;
  }
};

/// Per-step learning diagnostics.
struct UpdateStats {
  double critic_loss = std::numeric_limits<double>::quiet_NaN();
  double model_loss = std::numeric_limits<double>::quiet_NaN();
  bool warm_started = false;
};

class Agent {
 public:
  Agent(AgentKind kind, AgentConfig cfg, DynConfig dyn, MpcConfig mpc, SimConfig sim, StateNormalizer norm,
        std::uint64_t seed)
      : kind_(kind),
        cfg_((cfg.validate(), std::move(cfg))),
        mpc_((mpc.validate(), std::move(mpc))),
        sim_(sim),
        norm_(norm),
        rng_(seed),
        experience_(cfg_.capacity),
        predicting_(cfg_.capacity),
        model_(dyn, norm),
        sequence_(cfg_.capacity, dyn.history),
        history_(dyn.history) {
    std::mt19937_64 init_rng(seed ^ 0x5bd1e995ULL);
    const int critics = kind_ == AgentKind::Td3 ? 2 : 1;
    for (int c = 0; c < critics; ++c) {
      critics_.emplace_back(nn::MlpSpec{kModelInputDim, cfg_.critic_hidden, 1, nn::Squash::None});
      critics_.back().init(init_rng);
      critic_targets_.push_back(critics_.back());
      critic_opts_.emplace_back(critics_.back().params(), nn::AdamConfig{cfg_.critic_lr});
    }
    if (kind_ != AgentKind::Proposed) {
      actor_.emplace(nn::MlpSpec{static_cast<int>(kStateDim), cfg_.actor_hidden, 2, nn::Squash::Tanh});
      actor_->init(init_rng);
      actor_target_ = *actor_;
      actor_opt_.emplace(actor_->params(), nn::AdamConfig{cfg_.actor_lr});
    } else {
      model_.init(seed ^ 0x27d4eb2fULL);
    }
  }

  AgentKind kind() const { return kind_; }
  const AgentConfig& config() const { return cfg_; }
  const MpcConfig& mpc_config() const { return mpc_; }
  const StateNormalizer& normalizer() const { return norm_; }
  LstmDynamicsModel& model() { return model_; }
  const LstmDynamicsModel& model() const { return model_; }
  std::vector<nn::Mlp>& critics() { return critics_; }
  std::vector<nn::Mlp>& critic_targets() { return critic_targets_; }
  std::optional<nn::Mlp>& actor() { return actor_; }
  std::optional<nn::Mlp>& actor_target() { return actor_target_; }
  ExperiencePool& experience() { return experience_; }
  PredictingPool& predicting() { return predicting_; }
  SequenceBuffer& sequences() { return sequence_; }
  const MpcPlan& last_plan() const { return plan_; }
  bool warm_started() const { return warm_started_; }
  std::uint64_t global_step() const { return step_; }

  /// Resets per-episode state. All per-episode randomness (exploration noise,
  /// planner seeds) derives from `episode_seed`.
  void begin_episode(std::uint64_t episode_seed) {
    episode_rng_.seed(episode_seed);
    history_.reset();
    previous_ = Action{0, 0};
    warm_plan_.clear();
    plan_ = MpcPlan{};
    predicting_.clear_pending();
    ++episode_id_;
    if (kind_ == AgentKind::Proposed && cfg_.warm_start_each_episode && warm_started_) {
      warm_start_critic(cfg_.warm_start_steps);
    }
  }

  /// Deterministic policy output, plus Gaussian exploration noise if asked.
  Action policy_action(const StateVector& raw) {
    if (kind_ == AgentKind::Proposed) {
      MpcProblem pb;
      const StateVector n = norm_.normalize(raw);
      pb.context = history_.context(n);
      pb.current = raw;
      pb.previous = previous_;
      pb.belief = WorldBelief::from_scan(raw, sim_);
      const std::uint64_t seed = episode_rng_();
      const bool warm = mpc_.reuse_previous_plan && !warm_plan_.empty();
      plan_ = solve(model_, pb, mpc_, sim_, seed, warm ? &warm_plan_ : nullptr);
      warm_plan_.assign(plan_.actions.begin() + 1, plan_.actions.end());
      return plan_.first();
    }
    const nn::Matrix out = actor_->forward(column(norm_.normalize(raw)));
    return Action{out(0, 0), out(1, 0)};
  }

  Action select_action(const StateVector& raw, bool explore) {
    const Action clean = policy_action(raw);
    if (!explore || cfg_.exploration_noise == 0.0) return clean;
    std::normal_distribution<double> noise(0.0, cfg_.exploration_noise);
    return Action{clean.speed + noise(episode_rng_), clean.steer + noise(episode_rng_)};
  }

  /// Records the executed step. With `learn` the pools are filled and one
  /// round of updates runs.
  UpdateStats observe(const StateVector& raw_s, Action a, double r, const StateVector& raw_s2, bool done,
                      bool episode_over, bool learn) {
    UpdateStats stats;
    const StateVector s = norm_.normalize(raw_s);
    const StateVector s2 = norm_.normalize(raw_s2);
    history_.push(s, a);
    previous_ = a;
    if (!learn) return stats;

    Transition t{s, a, r, s2, done, a};
    if (kind_ == AgentKind::Proposed && plan_.actions.size() > 1) t.next_action = plan_.actions[1];
    experience_.push(t);
    if (kind_ == AgentKind::Proposed) {
      fill_predicting_pool(predicting_, plan_, s, norm_, step_);
      predicting_.update_reliability(step_ + 1, s2, cfg_.sigma_rel);
      sequence_.push({model_input(s, a), s2, episode_id_, !episode_over});
    }
    ++step_;

    if (kind_ == AgentKind::Proposed && !warm_started_ && predicting_.size() >= cfg_.warm_start_min) {
      warm_start_critic(cfg_.warm_start_steps);
      warm_started_ = true;
      stats.warm_started = true;
    }
    stats.critic_loss = critic_update();
    if (!std::isnan(stats.critic_loss)) {
      ++critic_updates_;
      if (kind_ == AgentKind::Ddpg) {
        actor_update();
      } else if (kind_ == AgentKind::Td3 && critic_updates_ % cfg_.td3_policy_delay == 0) {
        actor_update();
        for (std::size_t c = 0; c < critics_.size(); ++c) {
          nn::soft_update(critic_targets_[c].params(), critics_[c].params(), cfg_.tau);
        }
      }
    }
    if (kind_ == AgentKind::Proposed) stats.model_loss = model_update();
    return stats;
  }

  /// One critic step on a real batch mixed with ceil(rho N) predicted
  /// samples drawn by reliability. Returns NaN when the pool is too small.
  double critic_update() {
    const auto N = static_cast<std::size_t>(cfg_.batch_size);
    if (experience_.size() < N) return std::numeric_limits<double>::quiet_NaN();
    CriticBatch b;
    for (std::size_t i : experience_.sample_uniform(N, rng_)) {
      const Transition& t = experience_[i];
      b.add(t.s, t.a, t.r, t.s2, t.next_action, t.done, 1.0 / static_cast<double>(N));
    }
    if (kind_ == AgentKind::Proposed && cfg_.predicted_fraction > 0.0 && !predicting_.empty()) {
      const auto M = static_cast<std::size_t>(std::ceil(cfg_.predicted_fraction * static_cast<double>(N)));
      for (std::size_t i : predicting_.sample_weighted(M, rng_)) {
        const PredictedTransition& t = predicting_[i];
        b.add(t.s, t.a, t.r, t.s2, t.next_action, t.done, t.w_rel / static_cast<double>(M));
      }
    }
    const double loss = fit_critics(b);
    if (kind_ != AgentKind::Td3) {
      for (std::size_t c = 0; c < critics_.size(); ++c) {
        nn::soft_update(critic_targets_[c].params(), critics_[c].params(), cfg_.tau);
      }
    }
    return loss;
  }

  /// Deterministic policy gradient step for the baselines.
  void actor_update() {
    if (!actor_ || experience_.size() < static_cast<std::size_t>(cfg_.batch_size)) return;
    const auto idx = experience_.sample_uniform(static_cast<std::size_t>(cfg_.batch_size), rng_);
    nn::Matrix S(kStateDim, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) set_state(S, k, experience_[idx[k]].s);
    nn::ParamVector g = actor_->params().zeros_like();
    actor_gradient(S, g);
    actor_opt_->step(actor_->params(), g);
    nn::soft_update(actor_target_->params(), actor_->params(), cfg_.tau);
  }

  /// Gradient of -mean Q(s, mu(s)) with respect to the actor parameters.
  double actor_gradient(const nn::Matrix& S, nn::ParamVector& grads) const {
    const auto B = S.cols();
    nn::Mlp::Tape ta, tc;
    const nn::Matrix A = actor_->forward(S, ta);
    nn::Matrix X(kModelInputDim, B);
    X.topRows(kStateDim) = S;
    X.bottomRows(2) = A;
    const nn::Matrix q = critics_[0].forward(X, tc);
    nn::ParamVector scratch = critics_[0].params().zeros_like();
    const nn::Matrix dX = critics_[0].backward(tc, nn::Matrix::Constant(1, B, -1.0 / static_cast<double>(B)), scratch);
    actor_->backward(ta, dX.bottomRows(2), grads);
    return -q.mean();
  }

  /// Supervised dynamics-model step on realized windows (proposed agent).
  double model_update() {
    if (sequence_.trainable_count() < static_cast<std::size_t>(model_.config().warmup_transitions)) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    const auto batch = sequence_.sample(static_cast<std::size_t>(model_.config().online_batch), rng_);
    return model_.train_on_batch(batch);
  }

  /// Reliability-weighted TD regression on predicted transitions. If the
  /// weighted loss over the pool ends higher than it started, the steps are
  /// undone and retried at half the learning rate.
  void warm_start_critic(int steps) {
    if (steps <= 0 || predicting_.empty()) return;
    const auto before = snapshot();
    const double l0 = predicted_pool_loss();
    double lr = cfg_.critic_lr;
    for (int attempt = 0; attempt < 5; ++attempt) {
      for (auto& o : critic_opts_) o.config().learning_rate = lr;
      for (int k = 0; k < steps; ++k) {
        CriticBatch b;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg_.batch_size), predicting_.size());
        for (std::size_t i : predicting_.sample_uniform(n, rng_)) {
          const PredictedTransition& t = predicting_[i];
          b.add(t.s, t.a, t.r, t.s2, t.next_action, t.done, t.w_rel / static_cast<double>(n));
        }
        fit_critics(b);
        for (std::size_t c = 0; c < critics_.size(); ++c) {
          nn::soft_update(critic_targets_[c].params(), critics_[c].params(), cfg_.tau);
        }
      }
      if (predicted_pool_loss() <= l0) break;
      restore(before);
      lr *= 0.5;
    }
    for (auto& o : critic_opts_) o.config().learning_rate = cfg_.critic_lr;
  }

  /// Mean w_rel-weighted squared TD error over the whole predicting pool.
  double predicted_pool_loss() const {
    std::vector<const PredictedTransition*> all;
    for (std::size_t i = 0; i < predicting_.size(); ++i) all.push_back(&predicting_[i]);
    return td_error(all, true);
  }

  /// Mean squared TD error of the first critic on the given transitions.
  double td_error(const std::vector<const PredictedTransition*>& items, bool weighted = false) const {
    double sum = 0.0;
    const std::size_t chunk = 1024;
    for (std::size_t k = 0; k < items.size(); k += chunk) {
      CriticBatch b;
      for (std::size_t m = k; m < std::min(items.size(), k + chunk); ++m) {
        const auto* t = items[m];
        b.add(t->s, t->a, t->r, t->s2, t->next_action, t->done, weighted ? t->w_rel : 1.0);
      }
      const nn::Matrix y = td_targets(b);
      const nn::Matrix q = critics_[0].forward(b.inputs());
      sum += ((q - y).array().square() * b.weight_row().array()).sum();
    }
    return items.empty() ? 0.0 : sum / static_cast<double>(items.size());
  }

  double td_error(const std::vector<PredictedTransition>& items) const {
    std::vector<const PredictedTransition*> p;
    for (const auto& t : items) p.push_back(&t);
    return td_error(p);
  }

  /// Same measure on real transitions; terminal ones use the reward alone.
  double td_error(const std::vector<Transition>& items) const {
    CriticBatch b;
    for (const auto& t : items) b.add(t.s, t.a, t.r, t.s2, t.next_action, t.done, 1.0);
    if (items.empty()) return 0.0;
    const nn::Matrix q = critics_[0].forward(b.inputs());
    return (q - td_targets(b)).array().square().mean();
  }

  /// Bootstrapped targets r + gamma (1 - done) Q'(s2, a2). Baselines take a2
  /// from the target actor (smoothed for TD3); the proposed agent uses the
  /// planner's next action stored with the transition.
  nn::Matrix td_targets(const CriticBatch& b, std::mt19937_64* smoothing_rng = nullptr) const {
    const auto B = b.size();
    nn::Matrix S2(kStateDim, B);
    for (Eigen::Index k = 0; k < B; ++k) set_state(S2, static_cast<std::size_t>(k), b.s2[k]);
    nn::Matrix A2(2, B);
    if (kind_ == AgentKind::Proposed) {
      for (Eigen::Index k = 0; k < B; ++k) {
        A2(0, k) = b.a2[k].speed;
        A2(1, k) = b.a2[k].steer;
      }
    } else {
      A2 = actor_target_->forward(S2);
      if (kind_ == AgentKind::Td3 && smoothing_rng) {
        std::normal_distribution<double> n(0.0, cfg_.td3_target_noise);
        for (Eigen::Index k = 0; k < A2.size(); ++k) {
          const double e = std::clamp(n(*smoothing_rng), -cfg_.td3_noise_clip, cfg_.td3_noise_clip);
          A2.data()[k] = std::clamp(A2.data()[k] + e, -1.0, 1.0);
        }
      }
    }
    nn::Matrix X2(kModelInputDim, B);
    X2.topRows(kStateDim) = S2;
    X2.bottomRows(2) = A2;
    nn::Matrix q2 = critic_targets_[0].forward(X2);
    for (std::size_t c = 1; c < critic_targets_.size(); ++c) q2 = q2.cwiseMin(critic_targets_[c].forward(X2));
    nn::Matrix y(1, B);
    for (Eigen::Index k = 0; k < B; ++k) y(0, k) = b.r[k] + (b.done[k] ? 0.0 : cfg_.gamma * q2(0, k));
    return y;
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nn::save_params((dir / "critic.params").string(), bundle(critic_parts(critics_)));
    auto tparts = critic_parts(critic_targets_);
    if (actor_target_) tparts.emplace_back("actor.", &actor_target_->params());
    nn::save_params((dir / "targets.params").string(), bundle(tparts));
    if (actor_) nn::save_params((dir / "actor.params").string(), actor_->params());
    if (kind_ == AgentKind::Proposed) nn::save_params((dir / "model.params").string(), model_.params());
  }

  void load(const std::filesystem::path& dir) {
    unbundle(nn::load_params((dir / "critic.params").string()), mutable_parts(critics_));
    auto tparts = mutable_parts(critic_targets_);
    if (actor_target_) tparts.emplace_back("actor.", &actor_target_->params());
    unbundle(nn::load_params((dir / "targets.params").string()), tparts);
    if (actor_) nn::load_params((dir / "actor.params").string(), actor_->params());
    if (kind_ == AgentKind::Proposed) nn::load_params((dir / "model.params").string(), model_.params());
  }

 private:
  struct Snapshot {
    std::vector<nn::ParamVector> critics, targets;
    std::vector<nn::Adam> opts;
  };

  Snapshot snapshot() const {
    Snapshot s;
    for (const auto& c : critics_) s.critics.push_back(c.params());
    for (const auto& c : critic_targets_) s.targets.push_back(c.params());
    s.opts = critic_opts_;
    return s;
  }

  void restore(const Snapshot& s) {
    for (std::size_t c = 0; c < critics_.size(); ++c) {
      critics_[c].params().assign(s.critics[c]);
      critic_targets_[c].params().assign(s.targets[c]);
    }
    critic_opts_ = s.opts;
  }

  static std::vector<std::pair<std::string, const nn::ParamVector*>> critic_parts(const std::vector<nn::Mlp>& v) {
    std::vector<std::pair<std::string, const nn::ParamVector*>> parts;
    for (std::size_t c = 0; c < v.size(); ++c) parts.emplace_back("q" + std::to_string(c + 1) + ".", &v[c].params());
    return parts;
  }

  static std::vector<std::pair<std::string, nn::ParamVector*>> mutable_parts(std::vector<nn::Mlp>& v) {
    std::vector<std::pair<std::string, nn::ParamVector*>> parts;
    for (std::size_t c = 0; c < v.size(); ++c) parts.emplace_back("q" + std::to_string(c + 1) + ".", &v[c].params());
    return parts;
  }

  static nn::Matrix column(const StateVector& s) {
    nn::Matrix m(kStateDim, 1);
    for (std::size_t i = 0; i < kStateDim; ++i) m(i, 0) = s[i];
    return m;
  }

  static void set_state(nn::Matrix& m, std::size_t col, const StateVector& s) {
    for (std::size_t i = 0; i < kStateDim; ++i) m(i, static_cast<Eigen::Index>(col)) = s[i];
  }

  /// One optimizer step per critic on sum_k w_k (y_k - Q_k)^2. Returns the
  /// first critic's weighted loss before the step.
  double fit_critics(const CriticBatch& b) {
    const nn::Matrix y = td_targets(b, &rng_);
    const nn::Matrix X = b.inputs();
    const nn::Matrix w = b.weight_row();
    double first = 0.0;
    for (std::size_t c = 0; c < critics_.size(); ++c) {
      nn::Mlp::Tape tape;
      const nn::Matrix diff = critics_[c].forward(X, tape) - y;
      if (c == 0) first = (diff.array().square() * w.array()).sum();
      nn::ParamVector g = critics_[c].params().zeros_like();
      critics_[c].backward(tape, (2.0 * diff.array() * w.array()).matrix(), g);
      critic_opts_[c].step(critics_[c].params(), g);
    }
    return first;
  }

  AgentKind kind_;
  AgentConfig cfg_;
  MpcConfig mpc_;
  SimConfig sim_;
  StateNormalizer norm_;
  std::mt19937_64 rng_;
  std::mt19937_64 episode_rng_{0};

  std::vector<nn::Mlp> critics_, critic_targets_;
  std::vector<nn::Adam> critic_opts_;
  std::optional<nn::Mlp> actor_, actor_target_;
  std::optional<nn::Adam> actor_opt_;

  ExperiencePool experience_;
  PredictingPool predicting_;
  LstmDynamicsModel model_;
  SequenceBuffer sequence_;
  HistoryBuffer history_;

  Action previous_{0, 0};
  ActionSequence warm_plan_;
  MpcPlan plan_;
  bool warm_started_ = false;
  std::uint64_t step_ = 0;
  std::uint64_t episode_id_ = 0;
  std::uint64_t critic_updates_ = 0;
};

}  // namespace uavmpc

#pragma once

// Learned state-transition model. An LSTM reads a short window of normalized
// (state, action) pairs and predicts the change to the next state; rollouts
// feed each prediction back in, continuing the recurrent state.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <deque>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "uavmpc/mdp.hpp"
#include "uavmpc/nn/adam.hpp"
#include "uavmpc/nn/lstm.hpp"
#include "uavmpc/world.hpp"

namespace uavmpc {

inline constexpr int kModelInputDim = static_cast<int>(kStateDim + kActionDim);
using ModelInput = std::array<double, kModelInputDim>;

inline ModelInput model_input(const StateVector& normalized, Action a) {
  ModelInput in{};
  std::copy(normalized.values.begin(), normalized.values.end(), in.begin());
  in[kStateDim] = a.speed;
  in[kStateDim + 1] = a.steer;
  return in;
}

/// Change from `from` to `to` in normalized space; the heading component is
/// the wrapped angular difference.
inline StateVector normalized_delta(const StateVector& from, const StateVector& to) {
  StateVector d;
  for (std::size_t i = 0; i < kStateDim; ++i) d[i] = to[i] - from[i];
  d[StateVector::kPsi] = wrap_angle((to[StateVector::kPsi] - from[StateVector::kPsi]) * kPi) / kPi;
  return d;
}

/// Keeps a normalized prediction physical: heading wrapped, lidar in range.
inline void project_normalized(StateVector& n) {
  n[StateVector::kPsi] = wrap_angle(n[StateVector::kPsi] * kPi) / kPi;
  for (int k = 0; k < kLidarRays; ++k) {
    n[StateVector::kLidar0 + k] = std::clamp(n[StateVector::kLidar0 + k], -1.0, 1.0);
  }
}

struct DynConfig {
  int history = 5;
  nn::LstmSpec lstm{kModelInputDim, 3, 200, static_cast<int>(kStateDim)};
  nn::AdamConfig adam{0.01};
  int max_epochs = 100;
  bool predict_delta = true;
  int batch_size = 64;
  int online_batch = 32;
  int warmup_transitions = 1000;
  int patience = 10;              // epochs without 0.1% improvement before stopping
  std::uint64_t seed = 0;

  void validate() const {
    if (history < 1) throw ConfigError("dynamics history must be >= 1");
    if (lstm.input != kModelInputDim || lstm.output != static_cast<int>(kStateDim)) {
      throw ConfigError("dynamics LSTM must map 15 inputs to 13 outputs");
    }
    lstm.validate();
    adam.validate();
    if (batch_size < 1 || online_batch < 1 || max_epochs < 0) throw ConfigError("invalid dynamics batch/epochs");
  }
};

/// What the model knows at decision time: the L-1 pairs preceding the current
/// state (oldest first, zero-padded at episode start) and the current state.
struct ModelContext {
  std::vector<ModelInput> past;
  StateVector current;  // normalized
};

/// L consecutive (state, action) inputs and, for each, the realized next
/// state. Zero-padded positions carry valid = false.
struct TrajectoryWindow {
  std::vector<ModelInput> inputs;
  std::vector<StateVector> next;  // normalized
  std::vector<char> valid;
};

/// Rolling record of the current episode's normalized (state, action) pairs.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(int history = 5) : keep_(std::max(history - 1, 0)) {}

  void reset() { pairs_.clear(); }

  void push(const StateVector& normalized, Action a) {
    if (keep_ == 0) return;
    pairs_.push_back(model_input(normalized, a));
    while (static_cast<int>(pairs_.size()) > keep_) pairs_.pop_front();
  }

  ModelContext context(const StateVector& current_normalized) const {
    ModelContext ctx;
    ctx.past.assign(keep_ - pairs_.size(), ModelInput{});
    ctx.past.insert(ctx.past.end(), pairs_.begin(), pairs_.end());
    ctx.current = current_normalized;
    return ctx;
  }

 private:
  int keep_;
  std::deque<ModelInput> pairs_;
};

using ActionSequence = std::vector<Action>;
using PredictedTrajectory = std::vector<StateVector>;  // raw states s_1..s_H

/// Anything that can roll a batch of action sequences forward from a context.
template <class M>
concept DynamicsPredictor = requires(const M& m, const ModelContext& ctx, const std::vector<ActionSequence>& seqs,
                                     std::vector<PredictedTrajectory>& out) {
  { m.rollout_batch(ctx, seqs, out) };
  { m.normalizer() } -> std::convertible_to<StateNormalizer>;
};

struct FitReport {
  std::vector<double> epoch_losses;  // accepted full-dataset loss after each epoch
  int epochs_run = 0;
  int lr_halvings = 0;
  double final_learning_rate = 0.0;
};

class LstmDynamicsModel {
 public:
  LstmDynamicsModel() : LstmDynamicsModel(DynConfig{}, StateNormalizer{}) {}

  /// Parameters start at zero, so an untrained model predicts no change.
  LstmDynamicsModel(DynConfig cfg, StateNormalizer norm)
      : cfg_(std::move(cfg)), norm_(norm), net_((cfg_.validate(), cfg_.lstm)), opt_(net_.params(), cfg_.adam) {}

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    net_.init(rng);
    opt_ = nn::Adam(net_.params(), cfg_.adam);
  }

  const DynConfig& config() const { return cfg_; }
  const StateNormalizer& normalizer() const { return norm_; }
  nn::ParamVector& params() { return net_.params(); }
  const nn::ParamVector& params() const { return net_.params(); }
  nn::Adam& optimizer() { return opt_; }
  const nn::Lstm& network() const { return net_; }

  /// Batched rollout: out[b][j] is the raw state after applying seqs[b][0..j].
  void rollout_batch(const ModelContext& ctx, const std::vector<ActionSequence>& seqs,
                     std::vector<PredictedTrajectory>& out) const {
    const auto B = static_cast<Eigen::Index>(seqs.size());
    out.assign(seqs.size(), {});
    if (B == 0) return;
    const std::size_t H = seqs.front().size();
    nn::Lstm::State prefix = net_.zero_state(1);
    for (const auto& p : ctx.past) {
      nn::Matrix x(kModelInputDim, 1);
      for (int i = 0; i < kModelInputDim; ++i) x(i, 0) = p[i];
      net_.step(x, prefix);
    }
    nn::Lstm::State st = nn::Lstm::broadcast(prefix, B);
    nn::Matrix cur(kStateDim, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < kStateDim; ++i) cur(i, b) = ctx.current[i];
    }
    for (auto& o : out) o.resize(H);
    nn::Matrix x(kModelInputDim, B);
    for (std::size_t j = 0; j < H; ++j) {
      x.topRows(kStateDim) = cur;
      for (Eigen::Index b = 0; b < B; ++b) {
        x(kStateDim, b) = seqs[b][j].speed;
        x(kStateDim + 1, b) = seqs[b][j].steer;
      }
      const nn::Matrix y = net_.step(x, st);
      for (Eigen::Index b = 0; b < B; ++b) {
        StateVector n;
        for (std::size_t i = 0; i < kStateDim; ++i) n[i] = cfg_.predict_delta ? cur(i, b) + y(i, b) : y(i, b);
        project_normalized(n);
        for (std::size_t i = 0; i < kStateDim; ++i) cur(i, b) = n[i];
        out[b][j] = norm_.denormalize(n);
      }
    }
  }

  PredictedTrajectory rollout(const ModelContext& ctx, std::span<const Action> actions) const {
    std::vector<PredictedTrajectory> out;
    rollout_batch(ctx, {ActionSequence(actions.begin(), actions.end())}, out);
    return out.front();
  }

  StateVector predict_next(const ModelContext& ctx, Action a) const {
    const Action one[1] = {a};
    return rollout(ctx, one).front();
  }

  /// Masked MSE between predicted and realized normalized changes at every
  /// valid window position. Optionally accumulates parameter gradients.
  double loss(std::span<const TrajectoryWindow> batch, nn::ParamVector* grads = nullptr) const {
    if (batch.empty()) return 0.0;
    const auto B = static_cast<Eigen::Index>(batch.size());
    const std::size_t T = batch.front().inputs.size();
    std::vector<nn::Matrix> xs(T, nn::Matrix(kModelInputDim, B));
    std::vector<nn::Matrix> targets(T, nn::Matrix::Zero(kStateDim, B));
    std::vector<nn::Matrix> masks(T, nn::Matrix::Zero(1, B));
    double count = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& w = batch[b];
      if (w.inputs.size() != T) throw StructuralError("windows in a batch must share length");
      for (std::size_t t = 0; t < T; ++t) {
        for (int i = 0; i < kModelInputDim; ++i) xs[t](i, b) = w.inputs[t][i];
        if (!w.valid[t]) continue;
        StateVector cur;
        std::copy_n(w.inputs[t].begin(), kStateDim, cur.values.begin());
        const StateVector target = cfg_.predict_delta ? normalized_delta(cur, w.next[t]) : w.next[t];
        for (std::size_t i = 0; i < kStateDim; ++i) targets[t](i, b) = target[i];
        masks[t](0, b) = 1.0;
        count += 1.0;
      }
    }
    if (count == 0.0) return 0.0;
    nn::Lstm::State st = net_.zero_state(B);
    nn::Lstm::Tape tape;
    const auto ys = net_.forward_sequence(xs, st, grads ? &tape : nullptr);
    const double denom = count * static_cast<double>(kStateDim);
    double total = 0.0;
    std::vector<nn::Matrix> douts(T);
    for (std::size_t t = 0; t < T; ++t) {
      nn::Matrix diff = ys[t] - targets[t];
      for (Eigen::Index b = 0; b < B; ++b) diff.col(b) *= masks[t](0, b);
      total += diff.squaredNorm();
      if (grads) douts[t] = (2.0 / denom) * diff;
    }
    if (grads) net_.backward_sequence(tape, douts, *grads);
    return total / denom;
  }

  /// One optimizer step on the batch; returns the loss before the update.
  double train_on_batch(std::span<const TrajectoryWindow> batch) {
    if (batch.empty()) return 0.0;
    nn::ParamVector grads = net_.params().zeros_like();
    const double l = loss(batch, &grads);
    opt_.step(net_.params(), grads);
    return l;
  }

  /// Minibatch epochs. After each epoch the full-dataset loss is measured; an
  /// increase reverts the epoch and halves the learning rate, so accepted
  /// losses never increase. Stops early after `patience` epochs without a
  /// 0.1% improvement.
  FitReport fit(std::span<const TrajectoryWindow> data, int epochs, std::mt19937_64& rng,
                std::ostream* loss_log = nullptr) {
    FitReport rep;
    rep.final_learning_rate = opt_.config().learning_rate;
    if (data.empty() || epochs <= 0) return rep;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    double best = full_loss(data);
    int stale = 0;
    std::vector<TrajectoryWindow> batch;
    for (int e = 0; e < epochs; ++e) {
      const nn::ParamVector snapshot = net_.params();
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t k = 0; k < order.size(); k += static_cast<std::size_t>(cfg_.batch_size)) {
        batch.clear();
        for (std::size_t m = k; m < std::min(order.size(), k + cfg_.batch_size); ++m) batch.push_back(data[order[m]]);
        train_on_batch(batch);
      }
      double l = full_loss(data);
      if (!(l <= best)) {
        net_.params().assign(snapshot);
        opt_.config().learning_rate *= 0.5;
        ++rep.lr_halvings;
        l = best;
      }
      stale = (l < best * (1.0 - 1e-3)) ? 0 : stale + 1;
      best = std::min(best, l);
      rep.epoch_losses.push_back(best);
      ++rep.epochs_run;
      if (loss_log) {
        *loss_log << "{\"epoch\":" << e + 1 << ",\"loss\":" << best << ",\"learning_rate\":" << opt_.config().learning_rate
                   << "}\n";
      }
      if (cfg_.patience > 0 && stale >= cfg_.patience) break;
    }
    rep.final_learning_rate = opt_.config().learning_rate;
    return rep;
  }

  double full_loss(std::span<const TrajectoryWindow> data) const {
    double weighted = 0.0;
    double n = 0.0;
    const std::size_t chunk = 512;
    for (std::size_t k = 0; k < data.size(); k += chunk) {
      const auto part = data.subspan(k, std::min(chunk, data.size() - k));
      double valid = 0.0;
      for (const auto& w : part) valid += static_cast<double>(std::count(w.valid.begin(), w.valid.end(), 1));
      weighted += loss(part) * valid;
      n += valid;
    }
    return n > 0.0 ? weighted / n : 0.0;
  }

 private:
  DynConfig cfg_;
  StateNormalizer norm_;
  nn::Lstm net_;
  nn::Adam opt_;
};

/// Normalized one-step prediction error of `model` on the last position of
/// each window (heading error wrapped), averaged over all 13 components.
template <DynamicsPredictor Model>
double one_step_mse(const Model& model, std::span<const TrajectoryWindow> windows) {
  double sum = 0.0;
  double n = 0.0;
  const StateNormalizer norm = model.normalizer();
  for (const auto& w : windows) {
    const std::size_t last = w.inputs.size() - 1;
    if (!w.valid[last]) continue;
    ModelContext ctx;
    ctx.past.assign(w.inputs.begin(), w.inputs.begin() + static_cast<std::ptrdiff_t>(last));
    std::copy_n(w.inputs[last].begin(), kStateDim, ctx.current.values.begin());
    const Action a{w.inputs[last][kStateDim], w.inputs[last][kStateDim + 1]};
    std::vector<PredictedTrajectory> out;
    model.rollout_batch(ctx, {ActionSequence{a}}, out);
    const StateVector pred = norm.normalize(out[0][0]);
    const StateVector err = normalized_delta(w.next[last], pred);
    for (std::size_t i = 0; i < kStateDim; ++i) sum += err[i] * err[i];
    n += static_cast<double>(kStateDim);
  }
  return n > 0.0 ? sum / n : 0.0;
}

/// Ring buffer of real normalized steps used to cut training windows.
class SequenceBuffer {
 public:
  struct Step {
    ModelInput input{};
    StateVector next;  // normalized
    std::uint64_t episode = 0;
    bool trainable = false;  // non-terminal transition
  };

  explicit SequenceBuffer(std::size_t capacity = 100'000, int history = 5)
      : capacity_(capacity), history_(history) {
    steps_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  void push(const Step& s) {
    if (steps_.size() < capacity_) {
      steps_.push_back(s);
    } else {
      steps_[head_] = s;
    }
    head_ = (head_ + 1) % capacity_;
    if (s.trainable) ++trainable_;
  }

  std::size_t size() const { return steps_.size(); }
  std::size_t trainable_count() const { return trainable_; }

  /// Window ending at logical index i (0 = oldest retained step).
  TrajectoryWindow window(std::size_t i) const {
    TrajectoryWindow w;
    const int L = history_;
    w.inputs.assign(L, ModelInput{});
    w.next.assign(L, StateVector{});
    w.valid.assign(L, 0);
    const Step& end = at(i);
    for (int k = 0; k < L; ++k) {
      const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(i) - (L - 1 - k);
      if (idx < 0) continue;
      const Step& s = at(static_cast<std::size_t>(idx));
      if (s.episode != end.episode) continue;
      w.inputs[k] = s.input;
      w.next[k] = s.next;
      w.valid[k] = s.trainable ? 1 : 0;
    }
    return w;
  }

  /// Uniformly samples windows whose final step is trainable.
  std::vector<TrajectoryWindow> sample(std::size_t n, std::mt19937_64& rng) const {
    std::vector<TrajectoryWindow> out;
    if (trainable_ == 0 || steps_.empty()) return out;
    std::uniform_int_distribution<std::size_t> pick(0, steps_.size() - 1);
    std::size_t guard = 0;
    while (out.size() < n && guard++ < 100 * n) {
      const std::size_t i = pick(rng);
      if (at(i).trainable) out.push_back(window(i));
    }
    return out;
  }

 private:
  const Step& at(std::size_t logical) const {
    if (steps_.size() < capacity_) return steps_[logical];
    return steps_[(head_ + logical) % capacity_];
  }

  std::size_t capacity_;
  int history_;
  std::vector<Step> steps_;
  std::size_t head_ = 0;
  std::size_t trainable_ = 0;
};

/// Uses the true simulator as the transition model (needs the real world).
class SimulatorDynamics {
 public:
  SimulatorDynamics(SimConfig cfg, StateNormalizer norm) : cfg_(cfg), norm_(norm) {}

  void set_truth(const World& w, const UavKinematicState& s) {
    world_ = w;
    uav_ = s;
  }

  const StateNormalizer& normalizer() const { return norm_; }

  void rollout_batch(const ModelContext&, const std::vector<ActionSequence>& seqs,
                     std::vector<PredictedTrajectory>& out) const {
    out.assign(seqs.size(), {});
    for (std::size_t b = 0; b < seqs.size(); ++b) {
      World w = world_;
      UavKinematicState s = uav_;
      for (const Action& a : seqs[b]) {
        s = step_kinematics(s, a, cfg_);
        step_obstacles(w, cfg_.dt);
        out[b].push_back(build_state(s, w, lidar_scan(s, w, cfg_)));
      }
    }
  }

 private:
  SimConfig cfg_;
  StateNormalizer norm_;
  World world_;
  UavKinematicState uav_;
};

/// Random-policy data from obstacle-free worlds with the given arena. Start
/// poses are drawn uniformly (5 m from walls, random heading); the target is a
/// random corner. Only non-terminal transitions become windows.
inline std::vector<TrajectoryWindow> collect_random_windows(const ArenaConfig& arena, const SimConfig& cfg,
                                                            int history, std::size_t count, std::uint64_t seed) {
  std::vector<TrajectoryWindow> out;
  if (count == 0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ua(-1.0, 1.0);
  const StateNormalizer norm = StateNormalizer::from(arena, cfg);
  SequenceBuffer buf(count * 2 + 1024, history);
  std::uint64_t episode = 0;
  ScenarioSpec spec;
  spec.arena = arena;
  while (buf.trainable_count() < count) {
    const World w = spawn_scenario(spec.with_seed(rng()), cfg);
    const double margin = std::min({5.0, arena.width / 4.0, arena.depth / 4.0});
    std::uniform_real_distribution<double> ux(margin, arena.width - margin);
    std::uniform_real_distribution<double> uy(margin, arena.depth - margin);
    std::uniform_real_distribution<double> uyaw(-kPi, kPi);
    const Vec2 p0{ux(rng), uy(rng)};
    const double yaw0 = uyaw(rng);
    UavKinematicState s = UavKinematicState::make(p0, yaw0, 0.0);
    StateVector obs = build_state(s, w, lidar_scan(s, w, cfg));
    ++episode;
    for (int t = 1; t <= cfg.max_steps && buf.trainable_count() < count; ++t) {
      const Action a{ua(rng), ua(rng)};
      const UavKinematicState next = step_kinematics(s, a, cfg);
      const StateVector next_obs = build_state(next, w, lidar_scan(next, w, cfg));
      const StepStatus st = classify_step(w, next, t, cfg);
      buf.push({model_input(norm.normalize(obs), a), norm.normalize(next_obs), episode, !is_terminal(st)});
      if (is_terminal(st)) break;
      s = next;
      obs = next_obs;
    }
  }
  for (std::size_t i = 0; i < buf.size(); ++i) {
    TrajectoryWindow w = buf.window(i);
    if (w.valid.back()) out.push_back(std::move(w));
  }
  return out;
}

/// Initializes the model from obstacle-free random-policy experience.
inline FitReport pretrain_from_limited_map(LstmDynamicsModel& model, const ArenaConfig& arena, const SimConfig& cfg,
                                           std::size_t transitions, std::uint64_t seed,
                                           std::ostream* loss_log = nullptr) {
  if (transitions == 0) return {};
  const auto data = collect_random_windows(arena, cfg, model.config().history, transitions, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return model.fit(data, model.config().max_epochs, rng, loss_log);
}

}  // namespace uavmpc

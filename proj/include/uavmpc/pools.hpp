#pragma once

// Replay storage: the experience pool of real transitions and the predicting
// pool of model-predicted transitions emitted by each planner solve.

#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "uavmpc/mdp.hpp"
#include "uavmpc/mpc.hpp"

namespace uavmpc {

/// States are stored normalized.
struct Transition {
  StateVector s;
  Action a{0, 0};
  double r = 0.0;
  StateVector s2;
  bool done = false;
  Action next_action{0, 0};  // planner's intended action at s2 (proposed agent only)
};

struct PredictedTransition {
  StateVector s;
  Action a{0, 0};
  double r = 0.0;
  StateVector s2;
  Action next_action{0, 0};
  bool done = false;  // predicted arrival or collision
  double w_rel = 1.0;
  std::uint64_t source_step = 0;  // global step of the solve that produced it
  std::uint64_t target_step = 0;  // global step at which s2 is realized
};

template <class T>
class RingPool {
 public:
  explicit RingPool(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("pool capacity must be positive");
  }

  /// Returns the slot written.
  std::size_t push(const T& item) {
    std::size_t slot;
    if (items_.size() < capacity_) {
      slot = items_.size();
      items_.push_back(item);
    } else {
      slot = head_;
      items_[slot] = item;
    }
    head_ = (slot + 1) % capacity_;
    ++pushed_;
    return slot;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t pushed() const { return pushed_; }
  bool empty() const { return items_.empty(); }
  const T& operator[](std::size_t slot) const { return items_[slot]; }
  T& operator[](std::size_t slot) { return items_[slot]; }

  /// Oldest-first view index -> slot.
  std::size_t slot_of(std::size_t logical) const {
    return items_.size() < capacity_ ? logical : (head_ + logical) % capacity_;
  }

  std::vector<std::size_t> sample_uniform(std::size_t n, std::mt19937_64& rng) const {
    std::vector<std::size_t> out;
    if (items_.empty()) return out;
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pick(rng));
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<T> items_;
  std::size_t head_ = 0;
  std::uint64_t pushed_ = 0;
};

using ExperiencePool = RingPool<Transition>;

class PredictingPool : public RingPool<PredictedTransition> {
 public:
  using RingPool::RingPool;

  /// Samples slots with probability proportional to w_rel.
  std::vector<std::size_t> sample_weighted(std::size_t n, std::mt19937_64& rng) const {
    std::vector<std::size_t> out;
    if (empty()) return out;
    std::vector<double> w(size());
    double total = 0.0;
    for (std::size_t i = 0; i < size(); ++i) total += (w[i] = (*this)[i].w_rel);
    if (!(total > 0.0)) return sample_uniform(n, rng);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pick(rng));
    return out;
  }

  /// Remembers which slots await a realized state.
  void mark_pending(std::size_t slot) { pending_.push_back({slot, (*this)[slot].target_step, pushed()}); }

  /// Matches a realized normalized state to predictions of the same time
  /// index. Returns how many entries were updated.
  int update_reliability(std::uint64_t realized_step, const StateVector& realized, double sigma_rel) {
    int updated = 0;
    std::deque<Pending> keep;
    for (const auto& p : pending_) {
      if (pushed() - p.pushed_at >= capacity()) continue;  // overwritten
      if (p.target_step == realized_step) {
        auto& e = (*this)[p.slot];
        double sq = 0.0;
        for (std::size_t i = 0; i < kStateDim; ++i) sq += (e.s2[i] - realized[i]) * (e.s2[i] - realized[i]);
        e.w_rel = std::exp(-sq / (sigma_rel * sigma_rel));
        ++updated;
      } else if (p.target_step > realized_step) {
        keep.push_back(p);
      }
    }
    pending_.swap(keep);
    return updated;
  }

  void clear_pending() { pending_.clear(); }
  std::size_t pending_count() const { return pending_.size(); }

 private:
  struct Pending {
    std::size_t slot;
    std::uint64_t target_step;
    std::uint64_t pushed_at;
  };
  std::deque<Pending> pending_;
};

/// Appends one predicted transition per scored plan stage; stage j links
/// predicted state j to j+1, with stage 0 starting from the observed state.
inline int fill_predicting_pool(PredictingPool& pool, const MpcPlan& plan, const StateVector& current_normalized,
                                const StateNormalizer& norm, std::uint64_t step) {
  const std::size_t H = plan.terminal_stage > 0 ? std::min(plan.terminal_stage, plan.actions.size()) : plan.actions.size();
  if (H == 0 || plan.states.size() < H || plan.rewards.size() < H) return 0;
  StateVector prev = current_normalized;
  for (std::size_t j = 0; j < H; ++j) {
    PredictedTransition e;
    e.s = prev;
    e.a = plan.actions[j];
    e.r = plan.rewards[j];
    e.s2 = norm.normalize(plan.states[j]);
    e.next_action = plan.actions[std::min(j + 1, plan.actions.size() - 1)];
    e.done = j + 1 == plan.terminal_stage;
    e.source_step = step;
    e.target_step = step + j + 1;
    const std::size_t slot = pool.push(e);
    pool.mark_pending(slot);
    prev = e.s2;
  }
  return static_cast<int>(H);
}

}  // namespace uavmpc

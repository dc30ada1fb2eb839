#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "uavmpc/action.hpp"
#include "uavmpc/errors.hpp"
#include "uavmpc/world.hpp"

namespace uavmpc {

inline constexpr std::size_t kStateDim = 13;
inline constexpr std::size_t kActionDim = 2;

/// Observation layout: [dx, dy, vx, vy, v, psi, d0..d6] where (dx, dy) is the
/// target minus the UAV position and psi is the heading error to the target
/// bearing, wrapped to (-pi, pi].
struct StateVector {
  enum Index : std::size_t { kRelX = 0, kRelY, kVx, kVy, kSpeed, kPsi, kLidar0 };
  std::array<double, kStateDim> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  Vec2 rel_target() const { return {values[kRelX], values[kRelY]}; }
  double lidar(int k) const { return values[kLidar0 + k]; }
  double target_distance() const { return std::hypot(values[kRelX], values[kRelY]); }

  bool operator==(const StateVector&) const = default;
};

/// Heading error between yaw and the bearing of `rel` (target - position).
inline double heading_error(double yaw, Vec2 rel) {
  const double bearing = (rel.x == 0.0 && rel.y == 0.0) ? 0.0 : std::atan2(rel.y, rel.x);
  return wrap_angle(yaw - bearing);
}

inline StateVector build_state(const UavKinematicState& uav, const World& world, const LidarScan& lidar) {
  StateVector s;
  const Vec2 rel = world.target - uav.position;
  s[StateVector::kRelX] = rel.x;
  s[StateVector::kRelY] = rel.y;
  s[StateVector::kVx] = uav.vx;
  s[StateVector::kVy] = uav.vy;
  s[StateVector::kSpeed] = uav.speed;
  s[StateVector::kPsi] = heading_error(uav.yaw, rel);
  for (int k = 0; k < kLidarRays; ++k) s[StateVector::kLidar0 + k] = lidar[k];
  return s;
}

/// World-frame yaw recovered from an observation.
inline double yaw_from_state(const StateVector& s) {
  const Vec2 rel = s.rel_target();
  const double bearing = (rel.x == 0.0 && rel.y == 0.0) ? 0.0 : std::atan2(rel.y, rel.x);
  return wrap_angle(s[StateVector::kPsi] + bearing);
}

/// Affine per-component scaling of a StateVector into roughly [-1, 1]:
/// offsets by the arena extent, velocities by v_max, psi by pi, and lidar
/// mapped so 0 -> -1 and sensor_range -> +1.
struct StateNormalizer {
  double position_scale = 200.0;
  double velocity_scale = 15.0;
  double range = 20.0;

  static StateNormalizer from(const ArenaConfig& arena, const SimConfig& cfg) {
    return {std::max(arena.width, arena.depth), cfg.v_max, cfg.sensor_range};
  }

  double scale(std::size_t i) const {
    if (i <= StateVector::kRelY) return position_scale;
    if (i <= StateVector::kSpeed) return velocity_scale;
    if (i == StateVector::kPsi) return kPi;
    return range / 2.0;
  }
  double offset(std::size_t i) const { return i >= StateVector::kLidar0 ? range / 2.0 : 0.0; }

  StateVector normalize(const StateVector& s) const {
    StateVector n;
    for (std::size_t i = 0; i < kStateDim; ++i) n[i] = (s[i] - offset(i)) / scale(i);
    return n;
  }
  StateVector denormalize(const StateVector& n) const {
    StateVector s;
    for (std::size_t i = 0; i < kStateDim; ++i) s[i] = n[i] * scale(i) + offset(i);
    return s;
  }
};

struct RewardWeights {
  double w1 = 1.0;  // distance
  double w2 = 0.5;  // step
  double w3 = 0.5;  // orientation
  double w4 = 1.0;  // obstacle

  /// Distance and obstacle terms must outweigh step and orientation terms.
  void validate() const {
    if (!(w1 > w2 && w1 > w3 && w4 > w2 && w4 > w3)) {
      throw ConfigError("reward weights must satisfy w1,w4 > w2,w3");
    }
  }
};

struct RewardConfig {
  RewardWeights weights;
  double target_bonus = 10.0;
};

struct RewardBreakdown {
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
  double bonus = 0.0;
  double total = 0.0;
};

inline double reward_distance(double d_prev, double d_curr) {
  const double d_dis = d_curr - d_prev;
  if (d_dis > 0.0) return -0.1;
  if (d_dis < 0.0) return 1.0;
  return 0.0;
}

inline constexpr double reward_step() { return -0.01; }

/// Linear in the absolute heading error, reaching -0.01 when facing away.
inline double reward_orientation(double psi_err) { return -0.01 * (psi_err / kPi); }

inline double reward_obstacle(double d_min, bool collided, const SimConfig& cfg) {
  if (collided) return -1.0;
  if (d_min < cfg.safe_distance) return -0.1;
  return 0.0;
}

struct RewardInputs {
  double d_prev = 0.0;
  double d_curr = 0.0;
  double psi_err = 0.0;
  double d_min = 0.0;
  bool collided = false;
  bool reached = false;
};

inline RewardBreakdown total_reward(const RewardInputs& in, const RewardConfig& rc, const SimConfig& cfg) {
  RewardBreakdown b;
  b.r1 = reward_distance(in.d_prev, in.d_curr);
  b.r2 = reward_step();
  b.r3 = reward_orientation(in.psi_err);
  b.r4 = reward_obstacle(in.d_min, in.collided, cfg);
  b.bonus = in.reached ? rc.target_bonus : 0.0;
  const auto& w = rc.weights;
  b.total = w.w1 * b.r1 + w.w2 * b.r2 + w.w3 * b.r3 + w.w4 * b.r4 + b.bonus;
  return b;
}

}  // namespace uavmpc

#pragma once

// Planar constant-altitude UAV simulation: cylindrical obstacles seen as
// circles, a 7-ray heading-aligned lidar, and episode termination rules.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uavmpc/action.hpp"
#include "uavmpc/errors.hpp"
#include "uavmpc/geometry.hpp"

namespace uavmpc {

struct ArenaConfig {
  double width = 200.0;
  double depth = 200.0;
  double height = 50.0;  // informational

  void validate() const {
    if (!(width > 0.0) || !(depth > 0.0)) throw ConfigError("arena width and depth must be positive");
  }
  bool operator==(const ArenaConfig&) const = default;
};

struct ObstacleCylinder {
  Vec2 center;
  double radius = 1.0;
  double height = 50.0;
  double velocity_x = 0.0;

  bool operator==(const ObstacleCylinder&) const = default;
};

struct SimConfig {
  double dt = 0.5;
  double v_max = 15.0;
  double yaw_rate_max = kPi / 2.0;
  double safe_distance = 1.5;
  double sensor_range = 20.0;
  double uav_radius = 0.5;
  double target_radius = 3.0;
  int max_steps = 500;

  void validate() const {
    if (!(dt > 0 && v_max > 0 && yaw_rate_max > 0 && safe_distance > 0 && sensor_range > 0 &&
          uav_radius > 0 && target_radius > 0 && max_steps > 0)) {
      throw ConfigError("sim config values must all be positive");
    }
    if (!(safe_distance > uav_radius)) throw ConfigError("safe_distance must exceed uav_radius");
  }
};

/// Kinematic UAV state. (vx, vy) are kept consistent with (speed, yaw).
struct UavKinematicState {
  Vec2 position;
  double yaw = 0.0;
  double speed = 0.0;
  double vx = 0.0;
  double vy = 0.0;

  static UavKinematicState make(Vec2 position, double yaw, double speed) {
    UavKinematicState s;
    s.position = position;
    s.yaw = wrap_angle(yaw);
    s.speed = speed;
    s.vx = speed * std::cos(s.yaw);
    s.vy = speed * std::sin(s.yaw);
    return s;
  }

  bool operator==(const UavKinematicState&) const = default;
};

enum class Corner { SouthWest, SouthEast, NorthWest, NorthEast };

inline const char* corner_name(Corner c) {
  switch (c) {
    case Corner::SouthWest: return "sw";
    case Corner::SouthEast: return "se";
    case Corner::NorthWest: return "nw";
    case Corner::NorthEast: return "ne";
  }
  return "?";
}

inline std::optional<Corner> parse_corner(const std::string& s) {
  if (s == "sw") return Corner::SouthWest;
  if (s == "se") return Corner::SouthEast;
  if (s == "nw") return Corner::NorthWest;
  if (s == "ne") return Corner::NorthEast;
  return std::nullopt;
}

enum class ScenarioKind { Training, E1, E2, Dynamic, Custom };

struct ObstacleGroup {
  int count = 0;
  double radius = 1.0;
  double height = 50.0;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Custom;
  ArenaConfig arena;
  std::vector<ObstacleGroup> obstacles;
  std::optional<Corner> start_corner;   // nullopt = random
  std::optional<Corner> target_corner;  // nullopt = random, distinct from start
  double dynamic_velocity = 0.0;        // obstacles move at -v along x
  std::uint64_t seed = 0;
  double corner_margin = 10.0;

  // Obstacle "size 5 x 50" is read as radius 5, height 50.
  static ScenarioSpec training(std::uint64_t seed = 0) {
    ScenarioSpec s;
    s.kind = ScenarioKind::Training;
    s.obstacles = {{5, 5.0, 50.0}, {5, 10.0, 50.0}};
    s.seed = seed;
    return s;
  }
  static ScenarioSpec e1(std::uint64_t seed = 0) {
    ScenarioSpec s;
    s.kind = ScenarioKind::E1;
    s.obstacles = {{5, 20.0, 50.0}, {5, 15.0, 50.0}};
    s.seed = seed;
    return s;
  }
  static ScenarioSpec e2(std::uint64_t seed = 0) {
    ScenarioSpec s;
    s.kind = ScenarioKind::E2;
    s.obstacles = {{10, 20.0, 50.0}, {10, 5.0, 50.0}};
    s.seed = seed;
    return s;
  }
  static ScenarioSpec dynamic(double v, std::uint64_t seed = 0) {
    ScenarioSpec s = training(seed);
    s.kind = ScenarioKind::Dynamic;
    s.dynamic_velocity = v;
    return s;
  }

  ScenarioSpec with_seed(std::uint64_t s) const {
    ScenarioSpec copy = *this;
    copy.seed = s;
    return copy;
  }

  int obstacle_count() const {
    int n = 0;
    for (const auto& g : obstacles) n += g.count;
    return n;
  }
};

struct World {
  ArenaConfig arena;
  std::vector<ObstacleCylinder> obstacles;
  Vec2 start;
  Vec2 target;
  double start_yaw = 0.0;
  Corner start_corner = Corner::SouthWest;
  Corner target_corner = Corner::NorthEast;

  bool operator==(const World&) const = default;
};

inline Vec2 corner_point(const ArenaConfig& arena, Corner c, double margin) {
  switch (c) {
    case Corner::SouthWest: return {margin, margin};
    case Corner::SouthEast: return {arena.width - margin, margin};
    case Corner::NorthWest: return {margin, arena.depth - margin};
    case Corner::NorthEast: return {arena.width - margin, arena.depth - margin};
  }
  return {};
}

inline constexpr int kMaxPlacementAttempts = 10'000;

/// Builds a world from a scenario recipe. Deterministic for a fixed seed.
/// Throws ScenarioInfeasible if an obstacle cannot be placed.
inline World spawn_scenario(const ScenarioSpec& spec, const SimConfig& cfg) {
  spec.arena.validate();
  std::mt19937_64 rng(spec.seed);
  World w;
  w.arena = spec.arena;

  std::uniform_int_distribution<int> pick4(0, 3);
  std::uniform_int_distribution<int> pick3(0, 2);
  Corner start = spec.start_corner ? *spec.start_corner : static_cast<Corner>(pick4(rng));
  Corner target;
  if (spec.target_corner) {
    target = *spec.target_corner;
  } else {
    int k = pick3(rng);
    target = static_cast<Corner>(k >= static_cast<int>(start) ? k + 1 : k);
  }
  if (start == target) throw ConfigError("start and target corners must differ");
  w.start_corner = start;
  w.target_corner = target;
  w.start = corner_point(spec.arena, start, spec.corner_margin);
  w.target = corner_point(spec.arena, target, spec.corner_margin);
  const Vec2 to_target = w.target - w.start;
  w.start_yaw = wrap_angle(std::atan2(to_target.y, to_target.x));

  const double keep_out = cfg.target_radius + cfg.safe_distance;
  for (const auto& group : spec.obstacles) {
    if (group.radius <= 0.0) throw ConfigError("obstacle radius must be positive");
    for (int i = 0; i < group.count; ++i) {
      const double r = group.radius;
      if (2.0 * r >= spec.arena.width || 2.0 * r >= spec.arena.depth) {
        throw ScenarioInfeasible("obstacle radius too large for arena");
      }
      std::uniform_real_distribution<double> ux(r, spec.arena.width - r);
      std::uniform_real_distribution<double> uy(r, spec.arena.depth - r);
      bool placed = false;
      for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
        const Vec2 c{ux(rng), uy(rng)};
        if ((c - w.start).norm() < r + keep_out) continue;
        if ((c - w.target).norm() < r + keep_out) continue;
        bool overlap = false;
        for (const auto& o : w.obstacles) {
          if ((c - o.center).norm() < r + o.radius) {
            overlap = true;
            break;
          }
        }
        if (overlap) continue;
        w.obstacles.push_back({c, r, group.height, 0.0 - spec.dynamic_velocity});
        placed = true;
      }
      if (!placed) {
        throw ScenarioInfeasible("could not place obstacle " + std::to_string(w.obstacles.size()) +
                                 " after " + std::to_string(kMaxPlacementAttempts) + " attempts");
      }
    }
  }
  return w;
}

inline UavKinematicState initial_state(const World& w) {
  return UavKinematicState::make(w.start, w.start_yaw, 0.0);
}

/// Speed is set directly; heading turns at most yaw_rate_max*dt per step.
inline UavKinematicState step_kinematics(const UavKinematicState& s, Action a, const SimConfig& cfg) {
  const Action u(a.speed, a.steer);
  const double max_turn = cfg.yaw_rate_max * cfg.dt;
  const double turn = std::clamp(u.steer * cfg.yaw_rate_max * cfg.dt, -max_turn, max_turn);
  const double v = u.speed * cfg.v_max;
  UavKinematicState next = UavKinematicState::make(s.position, s.yaw + turn, v);
  next.position = {s.position.x + next.vx * cfg.dt, s.position.y + next.vy * cfg.dt};
  return next;
}

/// Moves every obstacle by velocity_x*dt; centers leaving [0, width) re-enter
/// at the opposite edge.
inline void step_obstacles(World& w, double dt) {
  for (auto& o : w.obstacles) {
    if (o.velocity_x == 0.0) continue;
    double x = o.center.x + o.velocity_x * dt;
    x = std::fmod(x, w.arena.width);
    if (x < 0.0) x += w.arena.width;
    o.center.x = x;
  }
}

inline constexpr int kLidarRays = 7;
using LidarScan = std::array<double, kLidarRays>;

/// Heading offsets of the lidar rays: -pi/2 .. pi/2 in steps of pi/6.
inline double lidar_offset(int ray) { return (ray - 3) * kPi / 6.0; }

inline double cast_ray(Vec2 origin, double angle, const World& w, double range) {
  const Vec2 dir = unit_from_angle(angle);
  double best = ray_box_interior_distance(origin, dir, w.arena.width, w.arena.depth);
  for (const auto& o : w.obstacles) {
    if (auto t = ray_circle_distance(origin, dir, o.center, o.radius)) best = std::min(best, *t);
  }
  return std::min(best, range);
}

inline LidarScan lidar_scan(const UavKinematicState& s, const World& w, const SimConfig& cfg) {
  LidarScan out{};
  for (int k = 0; k < kLidarRays; ++k) {
    out[k] = cast_ray(s.position, s.yaw + lidar_offset(k), w, cfg.sensor_range);
  }
  return out;
}

/// Clearance from p to the nearest obstacle surface or arena wall, floored at 0.
inline double nearest_obstacle_distance(Vec2 p, const World& w) {
  double d = std::min({p.x, w.arena.width - p.x, p.y, w.arena.depth - p.y});
  for (const auto& o : w.obstacles) d = std::min(d, (p - o.center).norm() - o.radius);
  return std::max(d, 0.0);
}

enum class StepStatus { Running, ReachedTarget, Collision, TimedOut };

inline const char* status_name(StepStatus s) {
  switch (s) {
    case StepStatus::Running: return "running";
    case StepStatus::ReachedTarget: return "reached_target";
    case StepStatus::Collision: return "collision";
    case StepStatus::TimedOut: return "timed_out";
  }
  return "?";
}

inline bool is_terminal(StepStatus s) { return s != StepStatus::Running; }

/// Target check wins over collision, collision over timeout.
inline StepStatus classify_step(const World& w, const UavKinematicState& s, int step_index,
                                const SimConfig& cfg) {
  if ((s.position - w.target).norm() <= cfg.target_radius) return StepStatus::ReachedTarget;
  if (nearest_obstacle_distance(s.position, w) < cfg.uav_radius) return StepStatus::Collision;
  if (step_index >= cfg.max_steps) return StepStatus::TimedOut;
  return StepStatus::Running;
}

}  // namespace uavmpc

#pragma once

#include <algorithm>

namespace uavmpc {

/// Control command: speed ratio and steering signal, both clamped to [-1, 1].
struct Action {
  double speed = 0.0;
  double steer = 0.0;

  constexpr Action() = default;
  constexpr Action(double speed_ratio, double steering)
      : speed(std::clamp(speed_ratio, -1.0, 1.0)), steer(std::clamp(steering, -1.0, 1.0)) {}

  constexpr bool operator==(const Action&) const = default;
};

}  // namespace uavmpc

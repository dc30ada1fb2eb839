#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace uavmpc {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
};

inline Vec2 unit_from_angle(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// Smallest non-negative ray parameter at which origin + t*dir meets the circle.
/// `dir` must be unit length. An origin inside (or on) the circle reports 0.
inline std::optional<double> ray_circle_distance(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 oc = origin - center;
  const double c = oc.dot(oc) - radius * radius;
  if (c <= 0.0) return 0.0;
  const double b = oc.dot(dir);
  if (b >= 0.0) return std::nullopt;  // pointing away and outside
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  // Numerically stable near root: t = c / (-b + sqrt(disc)).
  return c / (-b + std::sqrt(disc));
}

/// Distance from a point inside the axis-aligned box [0,w]x[0,h] to the box
/// boundary along `dir`. Points outside the box report 0 (walls are solid).
inline double ray_box_interior_distance(Vec2 origin, Vec2 dir, double width, double depth) {
  if (origin.x < 0.0 || origin.y < 0.0 || origin.x > width || origin.y > depth) return 0.0;
  double t = std::numeric_limits<double>::infinity();
  if (dir.x > 0.0) t = std::min(t, (width - origin.x) / dir.x);
  if (dir.x < 0.0) t = std::min(t, -origin.x / dir.x);
  if (dir.y > 0.0) t = std::min(t, (depth - origin.y) / dir.y);
  if (dir.y < 0.0) t = std::min(t, -origin.y / dir.y);
  return t;
}

}  // namespace uavmpc

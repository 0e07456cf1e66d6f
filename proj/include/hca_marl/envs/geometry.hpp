#pragma once

#include <cmath>
#include <limits>

namespace hca_marl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 unit_from_angle(double radians) { return {std::cos(radians), std::sin(radians)}; }

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

/// Distance along a unit-direction ray to a circle, or kNoHit. A ray starting inside the circle hits at 0.
inline double ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 oc = center - origin;
  const double along = dot(oc, dir);
  const double perp2 = dot(oc, oc) - along * along;
  const double r2 = radius * radius;
  if (perp2 > r2) return kNoHit;
  const double half = std::sqrt(r2 - perp2);
  const double t0 = along - half;
  const double t1 = along + half;
  if (t1 < 0.0) return kNoHit;
  return t0 >= 0.0 ? t0 : 0.0;
}

/// Distance along a unit-direction ray to segment [a, b], or kNoHit.
inline double ray_segment(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b) {
  const Vec2 seg = b - a;
  const double denom = cross(dir, seg);
  if (std::abs(denom) < 1e-12) return kNoHit;
  const Vec2 ao = a - origin;
  const double t = cross(ao, seg) / denom;
  const double u = cross(ao, dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return kNoHit;
  return t;
}

}  // namespace hca_marl

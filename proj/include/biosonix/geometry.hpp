#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace biosonix {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
  friend constexpr Vec3 operator*(Vec3 v, double s) { return s * v; }
  friend constexpr bool operator==(Vec3 a, Vec3 b) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }
inline double distance(Vec3 a, Vec3 b) { return norm(a - b); }

inline bool is_finite(Vec3 v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Axis-aligned box [lo, hi].
struct Box {
  Vec3 lo;
  Vec3 hi;

  bool contains(Vec3 p, double tol = 1e-9) const {
    for (int a = 0; a < 3; ++a) {
      if (p[a] < lo[a] - tol || p[a] > hi[a] + tol) return false;
    }
    return true;
  }
};

// Parametric interval [t_in, t_out] (t >= 0) where origin + t * dir lies inside the box.
struct RayInterval {
  double t_in = 0.0;
  double t_out = 0.0;
  double length() const { return t_out - t_in; }
};

// Slab clipping. Returns nothing when the ray never enters the box or only touches it.
inline std::optional<RayInterval> clip_ray(const Box& box, Vec3 origin, Vec3 dir) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = origin[a];
    const double d = dir[a];
    if (d == 0.0) {
      if (o < box.lo[a] || o > box.hi[a]) return std::nullopt;
      continue;
    }
    double ta = (box.lo[a] - o) / d;
    double tb = (box.hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0)) return std::nullopt;
  return RayInterval{t0, t1};
}

// Perpendicular distance from p to the infinite line origin + t * dir (dir unit length).
inline double distance_to_line(Vec3 p, Vec3 origin, Vec3 dir) {
  const Vec3 rel = p - origin;
  const double along = dot(rel, dir);
  const Vec3 perp = rel - along * dir;
  return norm(perp);
}

// Distance from p to the segment origin + t * dir, t in [t0, t1].
inline double distance_to_segment(Vec3 p, Vec3 origin, Vec3 dir, double t0, double t1) {
  const double along = std::clamp(dot(p - origin, dir), t0, t1);
  return distance(p, origin + along * dir);
}

}  // namespace biosonix

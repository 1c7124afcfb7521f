// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <utility>

namespace preempt {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, const Vec3& a) { return a * s; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

/// Azimuth is measured in the XY plane from +y toward +x, elevation from the
/// XY plane toward +z. The antenna array and the camera share this frame.
struct Angles {
  double azimuth = 0.0;
  double elevation = 0.0;
};

inline Angles direction_angles(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  return {std::atan2(d.x, d.y), std::atan2(d.z, std::hypot(d.x, d.y))};
}

inline Vec3 unit_direction(const Angles& a) {
  const double c = std::cos(a.elevation);
  return {c * std::sin(a.azimuth), c * std::cos(a.azimuth), std::sin(a.elevation)};
}

inline Vec3 point_along(const Vec3& origin, const Angles& a, double range) {
  return origin + unit_direction(a) * range;
}

/// Axis-aligned box.
struct Aabb {
  Vec3 lo;
  Vec3 hi;

  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }

  /// Euclidean distance from p to the closest point of the box (0 inside).
  double distance_to(const Vec3& p) const {
    const double dx = std::fmax(std::fmax(lo.x - p.x, 0.0), p.x - hi.x);
    const double dy = std::fmax(std::fmax(lo.y - p.y, 0.0), p.y - hi.y);
    const double dz = std::fmax(std::fmax(lo.z - p.z, 0.0), p.z - hi.z);
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }
};

/// Slab test for the closed segment [a, b] against a closed box.
inline bool segment_intersects(const Aabb& box, const Vec3& a, const Vec3& b) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double origin[3] = {a.x, a.y, a.z};
  const double delta[3] = {b.x - a.x, b.y - a.y, b.z - a.z};
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  for (int i = 0; i < 3; ++i) {
    if (delta[i] == 0.0) {
      if (origin[i] < lo[i] || origin[i] > hi[i]) return false;
      continue;
    }
    double ta = (lo[i] - origin[i]) / delta[i];
    double tb = (hi[i] - origin[i]) / delta[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::fmax(t0, ta);
    t1 = std::fmin(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace preempt

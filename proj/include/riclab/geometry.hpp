#pragma once

#include <algorithm>
#include <cmath>

namespace riclab::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Axis-aligned box given by center and half extents (hx, hy > 0).
struct Box2D {
  Vec2 center;
  Vec2 half;

  double min_x() const { return center.x - half.x; }
  double max_x() const { return center.x + half.x; }
  double min_y() const { return center.y - half.y; }
  double max_y() const { return center.y + half.y; }

  friend bool operator==(const Box2D&, const Box2D&) = default;
};

/// Closed-box point containment (boundary counts).
inline bool contains(const Box2D& box, Vec2 p) {
  return p.x >= box.min_x() && p.x <= box.max_x() && p.y >= box.min_y() &&
         p.y <= box.max_y();
}

/// Closed-box overlap (touching edges count as overlap).
inline bool boxes_overlap(const Box2D& a, const Box2D& b) {
  return std::abs(a.center.x - b.center.x) <= a.half.x + b.half.x &&
         std::abs(a.center.y - b.center.y) <= a.half.y + b.half.y;
}

/// Closed segment vs closed axis-aligned box, slab clipping on the segment
/// parameter t in [0,1]. Boundary touch counts as intersection. Requires
/// p0 != p1 only in the sense that a degenerate segment reduces to a point
/// test, which this handles via the parallel-slab branch.
inline bool segment_intersects_box(Vec2 p0, Vec2 p1, const Box2D& box) {
  double t0 = 0.0;
  double t1 = 1.0;
  const double origin[2] = {p0.x, p0.y};
  const double dir[2] = {p1.x - p0.x, p1.y - p0.y};
  const double lo[2] = {box.min_x(), box.min_y()};
  const double hi[2] = {box.max_x(), box.max_y()};
  for (int a = 0; a < 2; ++a) {
    if (dir[a] == 0.0) {
      // Parallel to this slab: inside it or never.
      if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
    } else {
      double ta = (lo[a] - origin[a]) / dir[a];
      double tb = (hi[a] - origin[a]) / dir[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
  }
  return true;
}

}  // namespace riclab::geom

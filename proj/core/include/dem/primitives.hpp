#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "dem/geometry.hpp"

namespace dem {

/// Closest point on a triangle to a query point. `s`, `t` are barycentric
/// coordinates with point = v1 + s (v2 - v1) + t (v3 - v1).
struct PointTriangleResult {
  Vec3 point;
  Real s = 0;
  Real t = 0;
  Real squared_distance = 0;
};

/// Seven-region (three vertices, three edges, interior) projection.
PointTriangleResult closest_point_on_triangle(const Vec3& p, const Triangle& tri);

inline Real point_triangle_distance(const Vec3& p, const Triangle& tri) {
  return std::sqrt(closest_point_on_triangle(p, tri).squared_distance);
}

struct SegmentSegmentResult {
  Vec3 point_p;
  Vec3 point_q;
  Real s = 0;  ///< parameter along p0 -> p1
  Real t = 0;  ///< parameter along q0 -> q1
  Real squared_distance = 0;
};

SegmentSegmentResult closest_points_segments(const Vec3& p0, const Vec3& p1,
                                             const Vec3& q0, const Vec3& q1);

/// Point where segment a->b crosses the plane of `tri`, if that point lies
/// inside the triangle. Segments lying in the plane report nothing.
std::optional<Vec3> segment_triangle_intersection(const Vec3& a, const Vec3& b,
                                                  const Triangle& tri);

/// Barycentric (s, t) of the orthogonal projection of p onto the plane of tri.
std::pair<Real, Real> barycentric_of(const Vec3& p, const Triangle& tri);

}  // namespace dem

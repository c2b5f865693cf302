#pragma once

#include <array>
#include <span>
#include <vector>

#include "dem/types.hpp"

namespace dem {

struct Triangle {
  Vec3 v1 = Vec3::Zero();
  Vec3 v2 = Vec3::Zero();
  Vec3 v3 = Vec3::Zero();

  Vec3 edge1() const { return v2 - v1; }
  Vec3 edge2() const { return v3 - v1; }
  /// Non-normalised normal (v2-v1)x(v3-v1); its length is twice the area.
  Vec3 scaled_normal() const { return edge1().cross(edge2()); }
  Vec3 unit_normal() const;
  Real area() const { return Real(0.5) * scaled_normal().norm(); }
  Vec3 centroid() const { return (v1 + v2 + v3) / Real(3); }
  Real max_squared_edge() const;
  const Vec3& vertex(int k) const { return k == 0 ? v1 : (k == 1 ? v2 : v3); }
  Vec3& vertex(int k) { return k == 0 ? v1 : (k == 1 ? v2 : v3); }

  /// Squared area below 1e-12 of the fourth power of the longest edge.
  bool is_degenerate() const;

  bool operator==(const Triangle& o) const {
    return v1 == o.v1 && v2 == o.v2 && v3 == o.v3;
  }
};

/// v1 + a (v2 - v1) + b (v3 - v1). (a, b) need not be admissible.
inline Vec3 barycentric_point(const Triangle& t, Real a, Real b) {
  return t.v1 + a * (t.v2 - t.v1) + b * (t.v3 - t.v1);
}

/// Flat, topology-free triangle buffer: 9 scalars per triangle, vertex-major.
struct TriangleSoup {
  std::size_t count = 0;
  std::vector<Real> coords;

  Triangle triangle(std::size_t i) const;
  void set(std::size_t i, const Triangle& t);
  bool valid() const { return coords.size() == 9 * count; }
  bool operator==(const TriangleSoup&) const = default;
};

TriangleSoup flatten(std::span<const Triangle> triangles);
std::vector<Triangle> unflatten(const TriangleSoup& soup);

/// Body-to-world rigid transform: x -> rotation * x + translation.
struct RigidMotion {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidMotion identity() { return {}; }
  static RigidMotion from_axis_angle(const Vec3& axis, Real angle,
                                     const Vec3& translation = Vec3::Zero());

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  Vec3 apply_vector(const Vec3& d) const { return rotation * d; }
  Triangle apply(const Triangle& t) const {
    return {apply(t.v1), apply(t.v2), apply(t.v3)};
  }
  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  /// this ∘ inner, i.e. apply inner first. Rotation is renormalised.
  RigidMotion compose(const RigidMotion& inner) const;

  /// Advance a world-frame pose by linear velocity v and angular velocity
  /// omega over dt (exponential map on the rotation).
  RigidMotion advanced(const Vec3& v, const Vec3& omega, Real dt) const;
};

TriangleSoup apply_motion(const TriangleSoup& soup, const RigidMotion& m);

/// Indexed triangle mesh with consistently oriented (outward) faces.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<Index, 3>> faces;

  std::size_t size() const { return faces.size(); }
  Triangle triangle(std::size_t f) const {
    const auto& ids = faces[f];
    return {vertices[ids[0]], vertices[ids[1]], vertices[ids[2]]};
  }
  std::vector<Triangle> triangles() const;
  TriangleSoup soup() const;

  /// Every undirected edge is shared by exactly two faces, traversed in
  /// opposite directions.
  bool is_closed() const;
  Real signed_volume() const;
  Vec3 vertex_centroid() const;
  Real bounding_radius(const Vec3& center) const;

  void transform(const RigidMotion& m);
  void scale(Real s);
  void translate(const Vec3& d);
};

}  // namespace dem

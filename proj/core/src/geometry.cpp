#include "dem/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace dem {

Vec3 Triangle::unit_normal() const {
  const Vec3 n = scaled_normal();
  const Real len = n.norm();
  return len > Real(0) ? Vec3(n / len) : Vec3::Zero();
}

Real Triangle::max_squared_edge() const {
  return std::max({(v2 - v1).squaredNorm(), (v3 - v2).squaredNorm(),
                   (v1 - v3).squaredNorm()});
}

bool Triangle::is_degenerate() const {
  const Real longest = max_squared_edge();
  const Real a = area();
  return a * a < Real(1e-12) * longest * longest || longest == Real(0);
}

Triangle TriangleSoup::triangle(std::size_t i) const {
  const Real* c = coords.data() + 9 * i;
  return {Vec3(c[0], c[1], c[2]), Vec3(c[3], c[4], c[5]),
          Vec3(c[6], c[7], c[8])};
}

void TriangleSoup::set(std::size_t i, const Triangle& t) {
  Real* c = coords.data() + 9 * i;
  for (int k = 0; k < 3; ++k) {
    const Vec3& v = t.vertex(k);
    c[3 * k + 0] = v.x();
    c[3 * k + 1] = v.y();
    c[3 * k + 2] = v.z();
  }
}

TriangleSoup flatten(std::span<const Triangle> triangles) {
  TriangleSoup soup;
  soup.count = triangles.size();
  soup.coords.resize(9 * soup.count);
  for (std::size_t i = 0; i < triangles.size(); ++i) soup.set(i, triangles[i]);
  return soup;
}

std::vector<Triangle> unflatten(const TriangleSoup& soup) {
  std::vector<Triangle> out;
  out.reserve(soup.count);
  for (std::size_t i = 0; i < soup.count; ++i) out.push_back(soup.triangle(i));
  return out;
}

RigidMotion RigidMotion::from_axis_angle(const Vec3& axis, Real angle,
                                         const Vec3& translation) {
  RigidMotion m;
  m.rotation = Quat(Eigen::AngleAxis<Real>(angle, axis.normalized()));
  m.translation = translation;
  return m;
}

RigidMotion RigidMotion::compose(const RigidMotion& inner) const {
  RigidMotion out;
  out.rotation = (rotation * inner.rotation).normalized();
  out.translation = rotation * inner.translation + translation;
  return out;
}

RigidMotion RigidMotion::advanced(const Vec3& v, const Vec3& omega,
                                  Real dt) const {
  RigidMotion out = *this;
  out.translation += dt * v;
  const Real angle = omega.norm() * dt;
  if (angle > Real(0)) {
    const Quat dq(Eigen::AngleAxis<Real>(angle, omega.normalized()));
    out.rotation = (dq * rotation).normalized();
  }
  return out;
}

TriangleSoup apply_motion(const TriangleSoup& soup, const RigidMotion& m) {
  TriangleSoup out;
  out.count = soup.count;
  out.coords.resize(soup.coords.size());
  const Mat3 r = m.rotation_matrix();
  const bool identity = m.rotation.coeffs() == Quat::Identity().coeffs() &&
                        m.translation == Vec3::Zero();
  if (identity) {
    out.coords = soup.coords;
    return out;
  }
  const std::size_t n = 3 * soup.count;
  for (std::size_t k = 0; k < n; ++k) {
    const Real* src = soup.coords.data() + 3 * k;
    Real* dst = out.coords.data() + 3 * k;
    const Vec3 x = r * Vec3(src[0], src[1], src[2]) + m.translation;
    dst[0] = x.x();
    dst[1] = x.y();
    dst[2] = x.z();
  }
  return out;
}

std::vector<Triangle> TriangleMesh::triangles() const {
  std::vector<Triangle> out;
  out.reserve(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) out.push_back(triangle(f));
  return out;
}

TriangleSoup TriangleMesh::soup() const {
  const auto tris = triangles();
  return flatten(tris);
}

bool TriangleMesh::is_closed() const {
  if (faces.empty()) return false;
  // directed edge -> use count
  std::map<std::pair<Index, Index>, int> directed;
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      const Index a = f[k];
      const Index b = f[(k + 1) % 3];
      if (a == b) return false;
      if (++directed[{a, b}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (directed.find({edge.second, edge.first}) == directed.end()) return false;
  }
  return true;
}

Real TriangleMesh::signed_volume() const {
  Real volume = 0;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Triangle t = triangle(f);
    volume += t.v1.dot(t.v2.cross(t.v3));
  }
  return volume / Real(6);
}

Vec3 TriangleMesh::vertex_centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& v : vertices) c += v;
  return vertices.empty() ? c : Vec3(c / Real(vertices.size()));
}

Real TriangleMesh::bounding_radius(const Vec3& center) const {
  Real r = 0;
  for (const auto& v : vertices) r = std::max(r, (v - center).norm());
  return r;
}

void TriangleMesh::transform(const RigidMotion& m) {
  for (auto& v : vertices) v = m.apply(v);
}

void TriangleMesh::scale(Real s) {
  for (auto& v : vertices) v *= s;
}

void TriangleMesh::translate(const Vec3& d) {
  for (auto& v : vertices) v += d;
}

}  // namespace dem

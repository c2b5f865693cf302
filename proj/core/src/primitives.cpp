#include "dem/primitives.hpp"

#include <algorithm>
#include <cmath>

namespace dem {

PointTriangleResult closest_point_on_triangle(const Vec3& p, const Triangle& tri) {
  // Region classification after Ericson, Real-Time Collision Detection 5.1.5.
  const Vec3& a = tri.v1;
  const Vec3& b = tri.v2;
  const Vec3& c = tri.v3;
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;

  auto result = [&](Real s, Real t) {
    PointTriangleResult r;
    r.s = s;
    r.t = t;
    r.point = a + s * ab + t * ac;
    r.squared_distance = (p - r.point).squaredNorm();
    return r;
  };

  const Real d1 = ab.dot(ap);
  const Real d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return result(0, 0);  // V0

  const Vec3 bp = p - b;
  const Real d3 = ab.dot(bp);
  const Real d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return result(1, 0);  // V1

  const Real vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {  // E01
    const Real v = d1 / (d1 - d3);
    return result(v, 0);
  }

  const Vec3 cp = p - c;
  const Real d5 = ab.dot(cp);
  const Real d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return result(0, 1);  // V2

  const Real vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {  // E20
    const Real w = d2 / (d2 - d6);
    return result(0, w);
  }

  const Real va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {  // E12
    const Real w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return result(1 - w, w);
  }

  const Real denom = Real(1) / (va + vb + vc);
  return result(vb * denom, vc * denom);  // interior
}

SegmentSegmentResult closest_points_segments(const Vec3& p0, const Vec3& p1,
                                             const Vec3& q0, const Vec3& q1) {
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const Real a = d1.squaredNorm();
  const Real e = d2.squaredNorm();
  const Real f = d2.dot(r);
  constexpr Real tiny = std::numeric_limits<Real>::min();

  Real s = 0;
  Real t = 0;
  if (a <= tiny && e <= tiny) {
    s = t = 0;
  } else if (a <= tiny) {
    t = std::clamp(f / e, Real(0), Real(1));
  } else {
    const Real c = d1.dot(r);
    if (e <= tiny) {
      s = std::clamp(-c / a, Real(0), Real(1));
    } else {
      const Real b = d1.dot(d2);
      const Real denom = a * e - b * b;
      s = denom > 0 ? std::clamp((b * f - c * e) / denom, Real(0), Real(1)) : Real(0);
      t = (b * s + f) / e;
      if (t < 0) {
        t = 0;
        s = std::clamp(-c / a, Real(0), Real(1));
      } else if (t > 1) {
        t = 1;
        s = std::clamp((b - c) / a, Real(0), Real(1));
      }
    }
  }
  SegmentSegmentResult out;
  out.s = s;
  out.t = t;
  out.point_p = p0 + s * d1;
  out.point_q = q0 + t * d2;
  out.squared_distance = (out.point_p - out.point_q).squaredNorm();
  return out;
}

std::pair<Real, Real> barycentric_of(const Vec3& p, const Triangle& tri) {
  const Vec3 e1 = tri.edge1();
  const Vec3 e2 = tri.edge2();
  const Vec3 d = p - tri.v1;
  const Real a00 = e1.dot(e1);
  const Real a01 = e1.dot(e2);
  const Real a11 = e2.dot(e2);
  const Real b0 = d.dot(e1);
  const Real b1 = d.dot(e2);
  const Real det = a00 * a11 - a01 * a01;
  if (det <= 0) return {0, 0};
  return {(a11 * b0 - a01 * b1) / det, (a00 * b1 - a01 * b0) / det};
}

std::optional<Vec3> segment_triangle_intersection(const Vec3& a, const Vec3& b,
                                                  const Triangle& tri) {
  const Vec3 n = tri.scaled_normal();
  const Real da = n.dot(a - tri.v1);
  const Real db = n.dot(b - tri.v1);
  if ((da > 0 && db > 0) || (da < 0 && db < 0)) return std::nullopt;
  if (da == db) return std::nullopt;  // parallel to (or inside) the plane
  const Real lambda = da / (da - db);
  const Vec3 x = a + lambda * (b - a);
  const auto [s, t] = barycentric_of(x, tri);
  // Points outside the triangle are discounted.
  constexpr Real tol = Real(64) * std::numeric_limits<Real>::epsilon();
  if (s < -tol || t < -tol || s + t > 1 + tol) return std::nullopt;
  return x;
}

}  // namespace dem

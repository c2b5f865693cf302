#include "dem/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <tuple>

#include <Eigen/Dense>

#include "dem/primitives.hpp"

namespace dem {

void KernelParams::validate() const {
  if (!(epsilon > 0)) throw InvalidSpec("epsilon must be positive");
  if (n_iterative < 1) throw InvalidSpec("n_iterative must be at least 1");
  if (!(c_factor > 0)) throw InvalidSpec("c_factor must be positive");
  if (!(alpha_iterative > 0)) throw InvalidSpec("alpha_iterative must be positive");
  if (!(alpha_regulariser > 0)) throw InvalidSpec("alpha_regulariser must be positive");
}

PenaltyWeights resolve_weights(const Triangle& t1, const Triangle& t2,
                               const KernelParams& p) {
  Real scale = std::max(t1.max_squared_edge(), t2.max_squared_edge());
  if (!(scale > 0)) scale = 1;
  return {p.alpha_iterative * scale, p.alpha_regulariser * scale};
}

// ---------------------------------------------------------------------------
// comparison kernel

namespace {

// Barycentric (a, b) of the point at parameter s along edge k of a triangle:
// edge 0 is v1->v2, edge 1 is v2->v3, edge 2 is v3->v1.
std::pair<Real, Real> edge_barycentric(int k, Real s) {
  switch (k) {
    case 0: return {s, 0};
    case 1: return {1 - s, s};
    default: return {0, 1 - s};
  }
}

std::pair<Real, Real> vertex_barycentric(int k) {
  switch (k) {
    case 0: return {0, 0};
    case 1: return {1, 0};
    default: return {0, 1};
  }
}

}  // namespace

DistanceResult closest_comparison(const Triangle& t1, const Triangle& t2,
                                  Real contact_distance) {
  if (t1.is_degenerate() || t2.is_degenerate()) {
    throw DegenerateTriangle("comparison kernel received a degenerate triangle");
  }

  // Intersections first: any edge crossing the other triangle means distance 0.
  std::vector<Vec3> hits;
  for (int k = 0; k < 3; ++k) {
    if (auto x = segment_triangle_intersection(t1.vertex(k), t1.vertex((k + 1) % 3), t2))
      hits.push_back(*x);
  }
  for (int k = 0; k < 3; ++k) {
    if (auto x = segment_triangle_intersection(t2.vertex(k), t2.vertex((k + 1) % 3), t1))
      hits.push_back(*x);
  }

  DistanceResult best;
  Real best_sq = std::numeric_limits<Real>::infinity();
  auto consider = [&](Real sq, const Vec3& pa, const Vec3& pb,
                      std::pair<Real, Real> ba, std::pair<Real, Real> bb) {
    if (sq < best_sq) {
      best_sq = sq;
      best.point_a = pa;
      best.point_b = pb;
      std::tie(best.a1, best.b1) = ba;
      std::tie(best.a2, best.b2) = bb;
    }
  };

  for (int k = 0; k < 3; ++k) {
    const auto r = closest_point_on_triangle(t1.vertex(k), t2);
    consider(r.squared_distance, t1.vertex(k), r.point, vertex_barycentric(k), {r.s, r.t});
  }
  for (int k = 0; k < 3; ++k) {
    const auto r = closest_point_on_triangle(t2.vertex(k), t1);
    consider(r.squared_distance, r.point, t2.vertex(k), {r.s, r.t}, vertex_barycentric(k));
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const auto r = closest_points_segments(t1.vertex(i), t1.vertex((i + 1) % 3),
                                             t2.vertex(j), t2.vertex((j + 1) % 3));
      consider(r.squared_distance, r.point_p, r.point_q, edge_barycentric(i, r.s),
               edge_barycentric(j, r.t));
    }
  }

  if (!hits.empty()) {
    std::size_t ia = 0, ib = 0;
    Real far = -1;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      for (std::size_t j = i; j < hits.size(); ++j) {
        const Real d = (hits[i] - hits[j]).squaredNorm();
        if (d > far) {
          far = d;
          ia = i;
          ib = j;
        }
      }
    }
    const Vec3 mid = Real(0.5) * (hits[ia] + hits[ib]);
    best_sq = 0;
    best.point_a = best.point_b = mid;
    std::tie(best.a1, best.b1) = barycentric_of(mid, t1);
    std::tie(best.a2, best.b2) = barycentric_of(mid, t2);
  }

  best.distance = std::sqrt(best_sq);
  best.lower_bound = best.distance;
  best.kind = best.distance <= contact_distance ? DistanceKind::Contact
                                                : DistanceKind::NoContact;
  return best;
}

// ---------------------------------------------------------------------------
// iterative kernel

namespace {

struct PairFrame {
  Vec3 base;  // t1.v1 - t2.v1
  Vec3 e1, e2, f1, f2;
  Vec3 dir[4];  // derivative of the difference vector per coordinate

  PairFrame(const Triangle& t1, const Triangle& t2)
      : base(t1.v1 - t2.v1),
        e1(t1.edge1()),
        e2(t1.edge2()),
        f1(t2.edge1()),
        f2(t2.edge2()) {
    dir[0] = e1;
    dir[1] = e2;
    dir[2] = -f1;
    dir[3] = -f2;
  }

  Vec3 difference(const std::array<Real, 4>& x) const {
    return base + x[0] * e1 + x[1] * e2 - x[2] * f1 - x[3] * f2;
  }
};

Real hinge(Real v) { return v > 0 ? v : Real(0); }

Real penalty_sum(const std::array<Real, 4>& x) {
  Real s = 0;
  for (int t = 0; t < 2; ++t) {
    const Real a = x[2 * t];
    const Real b = x[2 * t + 1];
    s += hinge(-a) + hinge(a - 1) + hinge(-b) + hinge(b - 1) + hinge(a + b - 1);
  }
  return s;
}

// Euclidean projection of (a, b) onto {a >= 0, b >= 0, a + b <= 1}.
void project_admissible(Real& a, Real& b) {
  if (a >= 0 && b >= 0 && a + b <= 1) return;
  const Real s = std::clamp((a - b + 1) / 2, Real(0), Real(1));
  const std::array<std::pair<Real, Real>, 3> candidates{{
      {s, 1 - s},
      {Real(0), std::clamp(b, Real(0), Real(1))},
      {std::clamp(a, Real(0), Real(1)), Real(0)},
  }};
  Real best = std::numeric_limits<Real>::infinity();
  std::pair<Real, Real> out{a, b};
  for (const auto& [ca, cb] : candidates) {
    const Real d = (ca - a) * (ca - a) + (cb - b) * (cb - b);
    if (d < best) {
      best = d;
      out = {ca, cb};
    }
  }
  a = out.first;
  b = out.second;
}

// Lower bound on the true distance: gap between the triangles' vertex
// projections onto the axis d = point_a - point_b.
Real separation_bound(const Triangle& t1, const Triangle& t2, const Vec3& d) {
  const Real len = d.norm();
  if (!(len > 0)) return 0;
  const Vec3 n = d / len;
  const Real low = std::min({n.dot(t1.v1), n.dot(t1.v2), n.dot(t1.v3)});
  const Real high = std::max({n.dot(t2.v1), n.dot(t2.v2), n.dot(t2.v3)});
  return low - high;
}

using Vec4 = Eigen::Matrix<Real, 4, 1>;
using Mat4 = Eigen::Matrix<Real, 4, 4>;

Vec4 project_admissible(Vec4 x) {
  project_admissible(x[0], x[1]);
  project_admissible(x[2], x[3]);
  return x;
}

}  // namespace

Objective evaluate_objective(const Triangle& t1, const Triangle& t2,
                             const std::array<Real, 4>& x, Real alpha_iterative) {
  const PairFrame f(t1, t2);
  const Real j_hat = Real(0.5) * f.difference(x).squaredNorm();
  return {j_hat + alpha_iterative * penalty_sum(x), j_hat};
}

std::array<Real, 4> gradient_of_J(const Triangle& t1, const Triangle& t2, Real a1,
                                  Real b1, Real a2, Real b2, const KernelParams& p) {
  const PairFrame f(t1, t2);
  const std::array<Real, 4> x{a1, b1, a2, b2};
  const Vec3 d = f.difference(x);
  const Real alpha = resolve_weights(t1, t2, p).alpha_iterative;
  std::array<Real, 4> g{};
  for (int k = 0; k < 4; ++k) g[k] = d.dot(f.dir[k]);
  for (int t = 0; t < 2; ++t) {
    const Real a = x[2 * t];
    const Real b = x[2 * t + 1];
    Real& ga = g[2 * t];
    Real& gb = g[2 * t + 1];
    if (a < 0) ga -= alpha;
    if (a > 1) ga += alpha;
    if (b < 0) gb -= alpha;
    if (b > 1) gb += alpha;
    if (a + b > 1) {
      ga += alpha;
      gb += alpha;
    }
  }
  return g;
}

DistanceResult closest_iterative(const Triangle& t1, const Triangle& t2,
                                 const KernelParams& p, Halo halo) {
  const PairFrame f(t1, t2);
  const PenaltyWeights w = resolve_weights(t1, t2, p);
  Mat4 hess;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) hess(i, k) = f.dir[i].dot(f.dir[k]);

  auto as_array = [](const Vec4& v) { return std::array<Real, 4>{v[0], v[1], v[2], v[3]}; };
  auto j_hat = [&](const Vec4& v) { return Real(0.5) * f.difference(as_array(v)).squaredNorm(); };
  auto gradient = [&](const Vec4& v) {
    const Vec3 d = f.difference(as_array(v));
    return Vec4(d.dot(f.dir[0]), d.dot(f.dir[1]), d.dot(f.dir[2]), d.dot(f.dir[3]));
  };
  auto objective = [&](const Vec4& v) {
    return j_hat(v) + w.alpha_iterative * penalty_sum(as_array(v));
  };

  Vec4 x(p.start_a, p.start_b, p.start_a, p.start_b);
  Real j = objective(x);
  Real j_old = j;
  for (int n = 0; n < p.n_iterative; ++n) {
    j_old = j;

    // Constraint half-step: projected steepest descent on Ĵ, step length from
    // the exact line minimum, halved until Ĵ does not increase.
    Vec4 g = gradient(x);
    const Real curvature = g.dot(hess * g);
    Real step = curvature > 0 ? g.squaredNorm() / curvature : Real(1);
    const Real j0 = j_hat(x);
    Vec4 trial = project_admissible(x - step * g);
    for (int halving = 0; halving < 30 && j_hat(trial) > j0; ++halving) {
      step *= Real(0.5);
      trial = project_admissible(x - step * g);
    }
    if (j_hat(trial) <= j0) x = trial;

    // Ĵ half-step: regularised Newton step on the face the iterate lies on,
    // shortened so that no further constraint is crossed.
    g = gradient(x);
    Eigen::Matrix<Real, 4, Eigen::Dynamic, 0, 4, 4> basis(4, 0);
    std::array<bool, 6> active{};
    for (int t = 0; t < 2; ++t) {
      const Real a = x[2 * t];
      const Real b = x[2 * t + 1];
      active[3 * t + 0] = a <= 0;
      active[3 * t + 1] = b <= 0;
      active[3 * t + 2] = a + b >= 1;
      const int n_active = active[3 * t] + active[3 * t + 1] + active[3 * t + 2];
      auto push = [&](Real da, Real db) {
        basis.conservativeResize(4, basis.cols() + 1);
        basis.col(basis.cols() - 1).setZero();
        basis(2 * t, basis.cols() - 1) = da;
        basis(2 * t + 1, basis.cols() - 1) = db;
      };
      if (n_active == 0) {
        push(1, 0);
        push(0, 1);
      } else if (n_active == 1) {
        if (active[3 * t]) push(0, 1);
        else if (active[3 * t + 1]) push(1, 0);
        else push(1, -1);
      }
    }
    if (basis.cols() > 0) {
      Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4> reduced =
          basis.transpose() * hess * basis;
      reduced.diagonal().array() += w.alpha_regulariser;
      const Vec4 dx = basis * reduced.ldlt().solve(-(basis.transpose() * g));
      Real tau = 1;
      for (int t = 0; t < 2; ++t) {
        const Real a = x[2 * t], b = x[2 * t + 1];
        const Real da = dx[2 * t], db = dx[2 * t + 1];
        if (!active[3 * t] && da < 0) tau = std::min(tau, std::max(Real(0), -a / da));
        if (!active[3 * t + 1] && db < 0) tau = std::min(tau, std::max(Real(0), -b / db));
        if (!active[3 * t + 2] && da + db > 0)
          tau = std::min(tau, std::max(Real(0), (1 - a - b) / (da + db)));
      }
      x += tau * dx;
      x = project_admissible(x);  // rounding only
    }
    j = objective(x);
  }

  DistanceResult r;
  r.a1 = x[0];
  r.b1 = x[1];
  r.a2 = x[2];
  r.b2 = x[3];
  r.point_a = barycentric_point(t1, x[0], x[1]);
  r.point_b = barycentric_point(t2, x[2], x[3]);
  r.distance = (r.point_a - r.point_b).norm();
  r.objective = j;
  r.objective_change = std::abs(j - j_old);
  r.sweeps = p.n_iterative;

  const Real eps = Real(0.5) * halo.sum();
  const Real tolerance = p.c_factor * eps;
  r.lower_bound = std::max(Real(0), separation_bound(t1, t2, r.point_a - r.point_b));
  r.kind = DistanceKind::NotTerminated;
  if (r.objective_change <= tolerance) {
    if (j_hat(x) <= 2 * eps * eps) {
      r.kind = DistanceKind::Contact;
    } else if (r.distance - r.lower_bound <= tolerance) {
      r.kind = DistanceKind::NoContact;
    }
  }
  return r;
}

DistanceResult closest_hybrid(const Triangle& t1, const Triangle& t2,
                              const KernelParams& p, KernelCounters& counters,
                              Halo halo) {
  if (p.method == KernelMethod::Comparison) {
    ++counters.comparison_invocations;
    return closest_comparison(t1, t2, halo.sum());
  }
  ++counters.iterative_invocations;
  DistanceResult r = closest_iterative(t1, t2, p, halo);
  if (r.kind != DistanceKind::NotTerminated) return r;
  ++counters.fallback_invocations;
  ++counters.comparison_invocations;
  return closest_comparison(t1, t2, halo.sum());
}

// ---------------------------------------------------------------------------
// batched front-end

namespace {

template <class Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || n < 64) {
    fn(std::size_t(0), n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<BatchEntry> run_kernel_jobs(std::span<const KernelJob> jobs,
                                        const KernelParams& p,
                                        KernelCounters& counters, unsigned workers) {
  std::vector<BatchEntry> out(jobs.size());
  if (jobs.empty()) return out;

  auto compare_into = [&](std::size_t i) {
    try {
      out[i].result = closest_comparison(jobs[i].a, jobs[i].b, jobs[i].halo.sum());
    } catch (const DegenerateTriangle&) {
      out[i].error = KernelError::DegenerateTriangle;
      out[i].result.kind = DistanceKind::NotTerminated;
    }
  };

  if (p.method == KernelMethod::Comparison) {
    parallel_chunks(jobs.size(), workers, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) compare_into(i);
    });
    counters.comparison_invocations += jobs.size();
    return out;
  }

  parallel_chunks(jobs.size(), workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      out[i].result = closest_iterative(jobs[i].a, jobs[i].b, p, jobs[i].halo);
  });
  counters.iterative_invocations += jobs.size();

  std::vector<std::size_t> fallback;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (out[i].result.kind == DistanceKind::NotTerminated && jobs[i].allow_fallback)
      fallback.push_back(i);
  }
  parallel_chunks(fallback.size(), workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) compare_into(fallback[k]);
  });
  counters.fallback_invocations += fallback.size();
  counters.comparison_invocations += fallback.size();
  return out;
}

std::vector<BatchEntry> batch_closest(std::span<const TrianglePair> pairs,
                                      const KernelParams& p,
                                      KernelCounters& counters, unsigned workers) {
  std::vector<KernelJob> jobs;
  jobs.reserve(pairs.size());
  for (const auto& pr : pairs) jobs.push_back({pr.a, pr.b, Halo::uniform(p.epsilon), true});
  return run_kernel_jobs(jobs, p, counters, workers);
}

}  // namespace dem

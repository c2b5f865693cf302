#include "dem/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dem/primitives.hpp"

namespace dem {

void FitParams::validate() const {
  if (beta_size < 2 || beta_size % 2 != 0) throw InvalidSpec("beta_size must be even and >= 2");
  if (!(alpha_area > 0)) throw InvalidSpec("alpha_area must be positive");
  if (alpha_inside < 0) throw InvalidSpec("alpha_inside must be non-negative");
  if (beta_normal < 2) throw InvalidSpec("beta_normal must be >= 2");
  if (max_fit_iterations < 0) throw InvalidSpec("max_fit_iterations must be non-negative");
  if (!(shrink > 0 && shrink <= 1)) throw InvalidSpec("shrink must lie in (0, 1]");
}

namespace {

Real ipow(Real x, int n) {
  Real r = 1;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

// Children mapped to coordinates centred on their vertex mean and scaled by
// their bounding radius.
struct Normalised {
  Vec3 center = Vec3::Zero();
  Real radius = 1;
  std::vector<Triangle> children;
  Real area_weight = 0;

  Normalised(std::span<const Triangle> input, const FitParams& p) {
    for (const auto& t : input) center += t.v1 + t.v2 + t.v3;
    center /= Real(3 * input.size());
    Real r = 0;
    for (const auto& t : input)
      for (int k = 0; k < 3; ++k) r = std::max(r, (t.vertex(k) - center).norm());
    radius = r > 0 ? r : Real(1);
    children.reserve(input.size());
    Real mean_area = 0;
    for (const auto& t : input) {
      children.push_back(to_local(t));
      mean_area += children.back().area();
    }
    mean_area /= Real(input.size());
    if (!(mean_area > 0)) mean_area = 1;
    area_weight = p.alpha_area * mean_area * mean_area;
  }

  Vec3 to_local(const Vec3& x) const { return (x - center) / radius; }
  Triangle to_local(const Triangle& t) const {
    return {to_local(t.v1), to_local(t.v2), to_local(t.v3)};
  }
  Triangle to_world(const Triangle& t) const {
    return {center + radius * t.v1, center + radius * t.v2, center + radius * t.v3};
  }
};

// Value and gradient of the fit functional in local coordinates.
Real functional(const Triangle& s, const Normalised& n, const FitParams& p,
                std::array<Vec3, 3>* grad) {
  Real value = 0;
  std::array<Vec3, 3> g{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};

  // size term: (1/beta) sum |x - t|^beta
  for (int k = 0; k < 3; ++k) {
    const Vec3& x = s.vertex(k);
    for (const auto& t : n.children) {
      const auto r = closest_point_on_triangle(x, t);
      const Real d2 = r.squared_distance;
      const Real dpow = ipow(d2, p.beta_size / 2 - 1);  // |x-t|^(beta-2)
      value += dpow * d2 / Real(p.beta_size);
      g[k] += dpow * (x - r.point);
    }
  }

  const Vec3 e1 = s.v2 - s.v1;
  const Vec3 e2 = s.v3 - s.v1;
  const Vec3 c = e1.cross(e2);
  const Real c2 = c.squaredNorm();
  if (!(c2 > 0)) return std::numeric_limits<Real>::infinity();
  Vec3 gc = Vec3::Zero();  // derivative with respect to c

  // area regulariser: alpha/2 |c|^-2
  value += Real(0.5) * n.area_weight / c2;
  gc += -n.area_weight * c / (c2 * c2);

  // inside term: alpha/beta_n sum max(0, (x - x_t).N)^beta_n
  if (p.alpha_inside > 0) {
    const Real clen = std::sqrt(c2);
    const Vec3 normal = c / clen;
    Vec3 gn = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      const Vec3& x = s.vertex(k);
      for (const auto& t : n.children) {
        for (int m = 0; m < 3; ++m) {
          const Vec3 diff = x - t.vertex(m);
          const Real h = diff.dot(normal);
          if (h <= 0) continue;
          const Real hp = ipow(h, p.beta_normal - 1);
          value += p.alpha_inside * hp * h / Real(p.beta_normal);
          g[k] += p.alpha_inside * hp * normal;
          gn += p.alpha_inside * hp * diff;
        }
      }
    }
    gc += (gn - normal * normal.dot(gn)) / clen;
  }

  if (grad) {
    // c = e1 x e2
    const Vec3 g2 = e2.cross(gc);
    const Vec3 g3 = gc.cross(e1);
    g[1] += g2;
    g[2] += g3;
    g[0] -= g2 + g3;
    *grad = g;
  }
  return value;
}

Triangle seed_triangle(std::span<const Triangle> children) {
  Vec3 mean = Vec3::Zero();
  for (const auto& t : children) mean += t.centroid();
  mean /= Real(children.size());
  std::size_t best = 0;
  Real best_d = std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < children.size(); ++i) {
    const Real d = (children[i].centroid() - mean).squaredNorm();
    if (d < best_d && !children[i].is_degenerate()) {
      best_d = d;
      best = i;
    }
  }
  return children[best];
}

Triangle shrink_about_centroid(const Triangle& t, Real sigma) {
  const Vec3 c = t.centroid();
  return {c + sigma * (t.v1 - c), c + sigma * (t.v2 - c), c + sigma * (t.v3 - c)};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Real fit_objective(const Triangle& surrogate, std::span<const Triangle> children,
                   const FitParams& params) {
  if (children.empty()) throw EmptyInput("fit_objective needs at least one child");
  const Normalised n(children, params);
  return functional(n.to_local(surrogate), n, params, nullptr);
}

Triangle fit_surrogate_triangle(std::span<const Triangle> children,
                                const FitParams& params) {
  if (children.empty()) throw EmptyInput("fit_surrogate_triangle needs at least one child");
  const Normalised n(children, params);

  Triangle x = n.to_local(seed_triangle(children));
  std::array<Vec3, 3> g;
  Real value = functional(x, n, params, &g);
  Real step = Real(1e-2);
  for (int it = 0; it < params.max_fit_iterations; ++it) {
    Real gnorm2 = 0;
    for (const auto& v : g) gnorm2 += v.squaredNorm();
    if (!(gnorm2 > 0)) break;
    // Backtracking (Armijo) on a step normalised by the gradient length.
    step *= 2;
    Triangle trial;
    Real trial_value = 0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      const Real s = step / std::sqrt(gnorm2);
      trial = {x.v1 - s * g[0], x.v2 - s * g[1], x.v3 - s * g[2]};
      trial_value = functional(trial, n, params, nullptr);
      if (trial_value <= value - Real(1e-4) * s * gnorm2) {
        accepted = true;
        break;
      }
      step *= Real(0.5);
    }
    if (!accepted) break;
    const Real decrease = value - trial_value;
    x = trial;
    value = functional(x, n, params, &g);
    if (decrease <= params.relative_tolerance * std::abs(value)) break;
  }

  if (params.shrink < 1) x = shrink_about_centroid(x, params.shrink);
  return n.to_world(x);
}

Real conservative_epsilon(const Triangle& surrogate, std::span<const EpsilonChild> children) {
  if (children.empty()) throw EmptyInput("conservative_epsilon needs at least one child");
  Real eps = 0;
  for (const auto& c : children) {
    for (int k = 0; k < 3; ++k)
      eps = std::max(eps, point_triangle_distance(c.triangle.vertex(k), surrogate) + c.epsilon);
  }
  return eps;
}

FittedSurrogate fit_conservative_surrogate(std::span<const Triangle> children,
                                           Real child_epsilon, const FitParams& params) {
  if (children.empty()) throw EmptyInput("fit_conservative_surrogate needs at least one child");
  std::vector<EpsilonChild> padded;
  padded.reserve(children.size());
  for (const auto& t : children) padded.push_back({t, child_epsilon});
  const std::vector<Real> one{Real(1)};
  const auto& areas = params.area_multipliers.empty() ? one : params.area_multipliers;
  const auto& insides = params.inside_multipliers.empty() ? one : params.inside_multipliers;
  // the unfitted seed competes too, so a single child maps onto itself
  const Triangle seed = seed_triangle(children);
  FittedSurrogate best{seed, conservative_epsilon(seed, padded)};
  for (Real ma : areas) {
    for (Real mi : insides) {
      FitParams p = params;
      p.alpha_area *= ma;
      p.alpha_inside *= mi;
      const Triangle t = fit_surrogate_triangle(children, p);
      const Real eps = conservative_epsilon(t, padded);
      if (eps < best.epsilon) best = {t, eps};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// clustering

std::vector<std::vector<Index>> cluster_triangles(std::span<const Triangle> triangles,
                                                  std::span<const Index> subset, int k,
                                                  std::uint64_t seed) {
  const std::size_t n = subset.size();
  std::vector<std::vector<Index>> groups;
  if (n == 0) return groups;
  k = std::max(1, k);
  if (static_cast<std::size_t>(k) >= n) {
    for (Index i : subset) groups.push_back({i});
    std::sort(groups.begin(), groups.end());
    return groups;
  }
  std::vector<Vec3> points(n);
  for (std::size_t i = 0; i < n; ++i) points[i] = triangles[subset[i]].centroid();

  // farthest-point initialisation from a seeded start
  std::vector<Vec3> centers;
  std::vector<Real> nearest(n, std::numeric_limits<Real>::infinity());
  std::size_t pick = static_cast<std::size_t>(mix_seed(seed, 0) % n);
  for (int c = 0; c < k; ++c) {
    centers.push_back(points[pick]);
    Real far = -1;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (points[i] - centers.back()).squaredNorm());
      if (nearest[i] > far) {
        far = nearest[i];
        pick = i;
      }
    }
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      Real best_d = std::numeric_limits<Real>::infinity();
      for (int c = 0; c < k; ++c) {
        const Real d = (points[i] - centers[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    // re-seed empty clusters from the largest cluster's farthest member
    std::vector<int> count(k, 0);
    for (int a : assign) ++count[a];
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      const int largest = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
      std::size_t far_i = 0;
      Real far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != largest) continue;
        const Real d = (points[i] - centers[largest]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      assign[far_i] = c;
      --count[largest];
      count[c] = 1;
      centers[c] = points[far_i];
      changed = true;
    }
    for (int c = 0; c < k; ++c) {
      Vec3 sum = Vec3::Zero();
      int m = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] == c) {
          sum += points[i];
          ++m;
        }
      }
      if (m > 0) centers[c] = sum / Real(m);
    }
    if (!changed) break;
  }

  groups.assign(k, {});
  for (std::size_t i = 0; i < n; ++i) groups[assign[i]].push_back(subset[i]);
  groups.erase(std::remove_if(groups.begin(), groups.end(),
                              [](const auto& g) { return g.empty(); }),
               groups.end());
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end());
  return groups;
}

std::vector<std::vector<Index>> cluster_triangles(std::span<const Triangle> triangles,
                                                  int k, std::uint64_t seed) {
  std::vector<Index> all(triangles.size());
  std::iota(all.begin(), all.end(), Index(0));
  return cluster_triangles(triangles, all, k, seed);
}

// ---------------------------------------------------------------------------
// tree

int SurrogateTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.level + 1);
  return d;
}

std::vector<int> SurrogateTree::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_leaf()) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<Index> SurrogateTree::descendant_triangles(int node) const {
  std::vector<Index> out;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const auto& n = nodes[id];
    out.insert(out.end(), n.leaf_triangles.begin(), n.leaf_triangles.end());
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<std::size_t> SurrogateTree::level_sizes() const {
  std::vector<std::size_t> out(depth(), 0);
  for (const auto& n : nodes) ++out[n.level];
  return out;
}

namespace {

struct TreeBuilder {
  std::span<const Triangle> mesh;
  int n_surrogate;
  const FitParams& fit;
  Real finest_epsilon;
  SurrogateTree tree;

  int make_node(const std::vector<Index>& set, int parent, int level) {
    std::vector<Triangle> tris;
    tris.reserve(set.size());
    for (Index i : set) tris.push_back(mesh[i]);
    const FittedSurrogate fitted = fit_conservative_surrogate(tris, finest_epsilon, fit);
    SurrogateNode node;
    node.triangle = fitted.triangle;
    node.epsilon = fitted.epsilon;
    node.parent = parent;
    node.level = level;
    tree.nodes.push_back(std::move(node));
    return static_cast<int>(tree.nodes.size() - 1);
  }

  int build(const std::vector<Index>& set, int parent, int level, std::uint64_t seed) {
    const int id = make_node(set, parent, level);
    if (set.size() <= static_cast<std::size_t>(n_surrogate)) {
      tree.nodes[id].leaf_triangles = set;
      tree.nodes[id].height = 1;
      return id;
    }
    const std::size_t ns = static_cast<std::size_t>(n_surrogate);
    const int k = static_cast<int>(std::min(ns, (set.size() + ns - 1) / ns));
    auto groups = cluster_triangles(mesh, set, std::max(k, 2), seed);
    if (groups.size() < 2) {
      // coincident barycentres: split by index
      groups.clear();
      const std::size_t half = set.size() / 2;
      groups.emplace_back(set.begin(), set.begin() + half);
      groups.emplace_back(set.begin() + half, set.end());
    }
    int height = 1;
    for (std::size_t c = 0; c < groups.size(); ++c) {
      const int child = build(groups[c], id, level + 1, mix_seed(seed, c + 1));
      tree.nodes[id].children.push_back(child);
      height = std::max(height, tree.nodes[child].height + 1);
    }
    tree.nodes[id].height = height;
    return id;
  }
};

}  // namespace

SurrogateTree build_surrogate_tree(std::span<const Triangle> mesh, int n_surrogate,
                                   const FitParams& fit, std::uint64_t seed,
                                   Real finest_epsilon) {
  if (mesh.empty()) throw EmptyInput("cannot build a surrogate tree over an empty mesh");
  if (n_surrogate < 2) throw InvalidSpec("n_surrogate must be at least 2");
  if (!(finest_epsilon > 0)) throw InvalidSpec("finest epsilon must be positive");
  fit.validate();
  TreeBuilder b{mesh, n_surrogate, fit, finest_epsilon, {}};
  b.tree.mesh_size = mesh.size();
  b.tree.n_surrogate = n_surrogate;
  b.tree.finest_epsilon = finest_epsilon;
  std::vector<Index> all(mesh.size());
  std::iota(all.begin(), all.end(), Index(0));
  b.build(all, -1, 0, seed);
  return std::move(b.tree);
}

ConservativeReport validate_conservative(const SurrogateTree& tree,
                                         std::span<const Triangle> mesh,
                                         int samples_per_triangle, Real tolerance) {
  ConservativeReport report;
  report.worst_slack = std::numeric_limits<Real>::infinity();
  // barycentric sample pattern shared by all triangles
  std::vector<std::pair<Real, Real>> pattern{{0, 0}, {1, 0}, {0, 1}};
  int m = 1;
  while ((m + 1) * (m + 2) / 2 < samples_per_triangle) ++m;
  for (int i = 0; i <= m; ++i)
    for (int j = 0; i + j <= m; ++j) pattern.emplace_back(Real(i) / m, Real(j) / m);

  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    const SurrogateNode& node = tree.nodes[id];
    for (Index t : tree.descendant_triangles(static_cast<int>(id))) {
      if (t >= mesh.size()) {
        report.pass = false;
        continue;
      }
      for (const auto& [a, b] : pattern) {
        const Vec3 x = barycentric_point(mesh[t], a, b);
        const Real slack =
            node.epsilon - (point_triangle_distance(x, node.triangle) + tree.finest_epsilon);
        ++report.samples;
        if (slack < report.worst_slack) {
          report.worst_slack = slack;
          report.worst_node = static_cast<int>(id);
        }
      }
    }
  }
  if (report.samples == 0) report.worst_slack = 0;
  report.pass = report.pass && report.worst_slack >= -tolerance;
  return report;
}

}  // namespace dem

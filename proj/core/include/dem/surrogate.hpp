#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dem/geometry.hpp"

namespace dem {

/// Weights of the surrogate-fit functional. The functional is evaluated in
/// coordinates normalised by the child set's bounding radius, so all weights
/// are dimensionless.
struct FitParams {
  int beta_size = 8;          ///< even exponent of the vertex-distance term
  Real alpha_area = Real(1e6);  ///< times (mean normalised child area)^2
  Real alpha_inside = Real(1);
  int beta_normal = 2;
  int max_fit_iterations = 500;
  Real relative_tolerance = Real(1e-8);  ///< stop when the decrease falls below
  Real shrink = Real(1);  ///< post-scale about the centroid, in (0, 1]
  /// Tree construction fits every combination of these multipliers of
  /// alpha_area and alpha_inside and keeps the fit with the smallest epsilon.
  /// Empty lists mean the base weights only.
  std::vector<Real> area_multipliers{Real(1e-3), Real(1), Real(1e3)};
  std::vector<Real> inside_multipliers{Real(1), Real(100)};

  /// Throws InvalidSpec.
  void validate() const;
};

/// Value of the fit functional for `surrogate` over `children`, with the same
/// normalisation as `fit_surrogate_triangle`.
Real fit_objective(const Triangle& surrogate, std::span<const Triangle> children,
                   const FitParams& params);

/// Gradient descent with backtracking from the child nearest the children's
/// mean barycentre. Throws EmptyInput.
Triangle fit_surrogate_triangle(std::span<const Triangle> children,
                                const FitParams& params);

struct EpsilonChild {
  Triangle triangle;
  Real epsilon;
};

/// max over child vertices of distance to the surrogate plus child epsilon.
/// Throws EmptyInput.
Real conservative_epsilon(const Triangle& surrogate, std::span<const EpsilonChild> children);

struct FittedSurrogate {
  Triangle triangle;
  Real epsilon;
};

/// Fits once per weight candidate of `params` and returns the fit whose
/// conservative epsilon over `children` (each padded by `child_epsilon`) is
/// smallest. Throws EmptyInput.
FittedSurrogate fit_conservative_surrogate(std::span<const Triangle> children,
                                           Real child_epsilon, const FitParams& params);

/// k-means on triangle barycentres. Returns at most k non-empty groups of
/// indices into `triangles`, each sorted, groups ordered by smallest member.
std::vector<std::vector<Index>> cluster_triangles(std::span<const Triangle> triangles,
                                                  std::span<const Index> subset, int k,
                                                  std::uint64_t seed);
std::vector<std::vector<Index>> cluster_triangles(std::span<const Triangle> triangles,
                                                  int k, std::uint64_t seed);

/// Surrogate node. Nodes are stored flat in `SurrogateTree::nodes`; node 0 is
/// the root. A node whose `leaf_triangles` is non-empty has mesh triangles as
/// children and no child nodes.
struct SurrogateNode {
  Triangle triangle;
  Real epsilon = 0;
  int parent = -1;
  std::vector<int> children;
  std::vector<Index> leaf_triangles;
  int level = 0;   ///< distance from the root
  int height = 1;  ///< 1 for nodes over mesh triangles, parent = max child + 1

  bool is_leaf() const { return !leaf_triangles.empty(); }
  bool operator==(const SurrogateNode&) const = default;
};

struct SurrogateTree {
  std::vector<SurrogateNode> nodes;
  std::size_t mesh_size = 0;
  int n_surrogate = 8;
  Real finest_epsilon = Real(1e-2);

  const SurrogateNode& root() const { return nodes.front(); }
  int depth() const;  ///< number of surrogate levels
  std::vector<int> leaves() const;
  /// Mesh triangle indices below a node, in tree order.
  std::vector<Index> descendant_triangles(int node) const;
  /// Number of nodes per level, root first.
  std::vector<std::size_t> level_sizes() const;
  bool operator==(const SurrogateTree&) const = default;
};

/// Recursive k-means split. A set of at most n_surrogate triangles becomes a
/// leaf; larger sets are split into min(n_surrogate, ceil(|set| / n_surrogate))
/// clusters. Every node's epsilon is the smallest conservative one over the
/// mesh triangles it covers (each padded by `finest_epsilon`).
/// Throws EmptyInput, InvalidSpec.
SurrogateTree build_surrogate_tree(std::span<const Triangle> mesh, int n_surrogate,
                                   const FitParams& fit, std::uint64_t seed,
                                   Real finest_epsilon = Real(1e-2));

struct ConservativeReport {
  bool pass = true;
  Real worst_slack = 0;  ///< min over samples of node eps - (distance + finest eps)
  int worst_node = -1;
  std::size_t samples = 0;
};

/// Samples each covered mesh triangle (vertices plus an interior barycentric
/// grid of about `samples_per_triangle` points) against every ancestor node.
ConservativeReport validate_conservative(const SurrogateTree& tree,
                                         std::span<const Triangle> mesh,
                                         int samples_per_triangle,
                                         Real tolerance = Real(1e-6));

inline constexpr int kTreeFormatVersion = 1;

std::string tree_to_json(const SurrogateTree& tree);
/// Throws SchemaMismatch.
SurrogateTree tree_from_json(const std::string& text);
void save_tree(const std::string& path, const SurrogateTree& tree);
SurrogateTree load_tree(const std::string& path);

}  // namespace dem

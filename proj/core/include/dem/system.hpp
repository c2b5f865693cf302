#pragma once

#include <memory>
#include <span>
#include <vector>

#include "dem/contact.hpp"
#include "dem/geometry.hpp"
#include "dem/surrogate.hpp"

namespace dem {

/// Uniform addressing of a surrogate tree together with its mesh. Elements
/// [0, node_count) are surrogate nodes; element node_count + k is mesh
/// triangle k.
class Hierarchy {
 public:
  Hierarchy() = default;
  Hierarchy(const SurrogateTree& tree, std::span<const Triangle> mesh);

  int root() const { return 0; }
  int node_count() const { return static_cast<int>(tree_->nodes.size()); }
  int element_count() const { return node_count() + static_cast<int>(mesh_.size()); }
  bool is_mesh(int e) const { return e >= node_count(); }
  int mesh_index(int e) const { return e - node_count(); }
  int mesh_element(int k) const { return node_count() + k; }
  int parent(int e) const { return parent_[e]; }  ///< -1 for the root
  const std::vector<int>& children(int e) const { return children_[e]; }
  /// 0 for mesh triangles, else the node height.
  int height(int e) const;
  Real epsilon(int e) const;
  const Triangle& triangle(int e) const;  ///< body frame
  const SurrogateTree& tree() const { return *tree_; }

 private:
  const SurrogateTree* tree_ = nullptr;
  std::span<const Triangle> mesh_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
};

/// Immutable per-shape data shared by every particle that uses it. The body
/// frame has the centre of mass at the origin.
struct ParticleShape {
  TriangleMesh mesh;
  std::vector<Triangle> triangles;
  SurrogateTree tree;
  MassProperties mass;
  Real bounding_radius = 0;
  Hierarchy hierarchy;

  ParticleShape() = default;
  ParticleShape(const ParticleShape&) = delete;
  ParticleShape& operator=(const ParticleShape&) = delete;
};

/// Recentres `mesh` on its centre of mass and builds tree and hierarchy.
/// An immovable shape skips mass integration (open meshes are allowed) and is
/// recentred on its vertex centroid.
std::shared_ptr<ParticleShape> make_shape(TriangleMesh mesh, int n_surrogate,
                                          const FitParams& fit, std::uint64_t seed,
                                          Real finest_epsilon, Real density, bool immovable);

struct Particle {
  std::shared_ptr<const ParticleShape> shape;
  RigidMotion pose;  ///< body to world; translation is the world centre of mass
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();

  const MassProperties& mass() const { return shape->mass; }
  bool immovable() const { return shape->mass.immovable; }
  std::vector<Triangle> world_triangles() const;
};

struct System {
  std::vector<Particle> particles;
  Vec3 gravity = Vec3::Zero();
  Real time = 0;
};

}  // namespace dem

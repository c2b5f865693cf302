#include "dem/system.hpp"

#include <algorithm>

namespace dem {

Hierarchy::Hierarchy(const SurrogateTree& tree, std::span<const Triangle> mesh)
    : tree_(&tree), mesh_(mesh) {
  const int n = node_count();
  parent_.assign(element_count(), -1);
  children_.assign(element_count(), {});
  for (int i = 0; i < n; ++i) {
    const auto& node = tree.nodes[i];
    parent_[i] = node.parent;
    for (int c : node.children) children_[i].push_back(c);
    for (Index k : node.leaf_triangles) {
      const int e = mesh_element(static_cast<int>(k));
      children_[i].push_back(e);
      parent_[e] = i;
    }
  }
}

int Hierarchy::height(int e) const { return is_mesh(e) ? 0 : tree_->nodes[e].height; }

Real Hierarchy::epsilon(int e) const {
  return is_mesh(e) ? tree_->finest_epsilon : tree_->nodes[e].epsilon;
}

const Triangle& Hierarchy::triangle(int e) const {
  return is_mesh(e) ? mesh_[mesh_index(e)] : tree_->nodes[e].triangle;
}

std::shared_ptr<ParticleShape> make_shape(TriangleMesh mesh, int n_surrogate,
                                          const FitParams& fit, std::uint64_t seed,
                                          Real finest_epsilon, Real density, bool immovable) {
  auto shape = std::make_shared<ParticleShape>();
  if (immovable) {
    mesh.translate(-mesh.vertex_centroid());
    shape->mass.immovable = true;
    shape->mass.center_of_mass = Vec3::Zero();
  } else {
    const MassProperties m = mass_properties_from_mesh(mesh, density);
    mesh.translate(-m.center_of_mass);
    shape->mass = m;
    shape->mass.center_of_mass = Vec3::Zero();
  }
  shape->bounding_radius = mesh.bounding_radius(Vec3::Zero());
  shape->triangles = mesh.triangles();
  shape->mesh = std::move(mesh);
  shape->tree = build_surrogate_tree(shape->triangles, n_surrogate, fit, seed, finest_epsilon);
  shape->hierarchy = Hierarchy(shape->tree, shape->triangles);
  return shape;
}

std::vector<Triangle> Particle::world_triangles() const {
  std::vector<Triangle> out;
  out.reserve(shape->triangles.size());
  for (const auto& t : shape->triangles) out.push_back(pose.apply(t));
  return out;
}

}  // namespace dem

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dem/distance.hpp"
#include "dem/geometry.hpp"

namespace dem {

/// One contact between particles `particle_i` and `particle_j`.
///
/// `normal` points from `position` toward the closest point on the side-i
/// triangle; contact holds while |normal| <= `epsilon` (the side-i halo).
/// Sources are mesh triangle indices on level 0 and surrogate node ids above.
struct ContactPoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  int particle_i = 0;
  int particle_j = 1;
  int source_i = 0;
  int source_j = 0;
  int level_i = 0;  ///< 0 for a mesh triangle, else the surrogate node height
  int level_j = 0;
  Real epsilon = Real(1e-2);
  /// Unit direction for intersecting triangles (|normal| = 0): minus the
  /// side-i triangle normal. Zero otherwise.
  Vec3 fallback_direction = Vec3::Zero();

  bool operator==(const ContactPoint&) const = default;
};

/// Builds the contact from a kernel result between side-i triangle `ti` and
/// side-j triangle `tj`. The contact point divides the shortest segment in
/// the ratio halo.a : halo.b, which is its midpoint for equal halos.
ContactPoint make_contact(const DistanceResult& r, const Triangle& ti, Halo halo);

struct MassProperties {
  Real mass = 1;
  Real volume = 1;
  Vec3 center_of_mass = Vec3::Zero();
  Mat3 inertia = Mat3::Identity();  ///< about the centre of mass, body frame
  bool immovable = false;           ///< infinite mass and inertia

  Real inverse_mass() const { return immovable ? Real(0) : Real(1) / mass; }
};

/// Signed-tetrahedron integration over a closed outward mesh. Throws
/// OpenMesh when the signed volume is not positive.
MassProperties mass_properties_from_mesh(const TriangleMesh& mesh, Real density = 1);

struct ForceModelParams {
  Real k_s = Real(1000);
  Real epsilon = Real(1e-2);

  /// Throws InvalidSpec.
  void validate() const;
};

/// sqrt(1 / (1/M_i + 1/M_j)); an immovable side contributes 1/M = 0.
Real reduced_mass_factor(const MassProperties& mi, const MassProperties& mj);

/// Spring force on particle i: n/|n| K_s (1 - |n|/eps) sqrt(reduced mass),
/// zero once |n| >= eps. Particle j receives the negated force. `c.epsilon`
/// is the halo used. Throws ZeroNormal when |n| < 1e-12.
Vec3 contact_force(const ContactPoint& c, const MassProperties& mi, const MassProperties& mj,
                   const ForceModelParams& p);

struct AppliedForce {
  Vec3 point;
  Vec3 force;
};

struct Acceleration {
  Vec3 dv = Vec3::Zero();
  Vec3 domega = Vec3::Zero();
};

/// dv = F / M, dω = I_w^-1 (τ - ω × I_w ω) with I_w = R I Rᵀ. Zero for an
/// immovable body.
Acceleration acceleration_from(const Vec3& force, const Vec3& torque, const MassProperties& mass,
                               const Quat& rotation, const Vec3& omega);

/// dv = sum F / M, dω = I_w^-1 (τ - ω × I_w ω) with τ about the world centre
/// of mass and I_w = R I Rᵀ. Forces are summed in the given order.
Acceleration accumulate(std::span<const AppliedForce> forces, const MassProperties& mass,
                        const Vec3& world_center, const Quat& rotation, const Vec3& omega);

/// Every pair (a_k, b_l) is run through the batched hybrid kernel with halo
/// (ε, ε). When `same_set` is set, pairs with k == l are skipped. Results are
/// ordered by (k, l). Throws DegenerateTriangle.
std::vector<ContactPoint> find_contacts_single_level(std::span<const Triangle> a,
                                                     std::span<const Triangle> b,
                                                     const KernelParams& p,
                                                     KernelCounters& counters,
                                                     std::pair<int, int> particles = {0, 1},
                                                     bool same_set = false,
                                                     unsigned workers = 1);
std::vector<ContactPoint> find_contacts_single_level(const TriangleSoup& a,
                                                     const TriangleSoup& b,
                                                     const KernelParams& p,
                                                     KernelCounters& counters,
                                                     std::pair<int, int> particles = {0, 1},
                                                     bool same_set = false,
                                                     unsigned workers = 1);

/// Greedy agglomeration per particle pair, in input order: a contact joins the
/// first cluster whose first member lies within `epsilon`. Each cluster
/// becomes the mean position and mean normal rescaled to the mean normal
/// length. Passes repeat until nothing merges, so the result is a fixed point.
std::vector<ContactPoint> merge_contacts(std::span<const ContactPoint> contacts, Real epsilon);

}  // namespace dem

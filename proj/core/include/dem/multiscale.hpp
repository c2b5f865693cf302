#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "dem/contact.hpp"
#include "dem/distance.hpp"
#include "dem/system.hpp"

namespace dem {

/// Kernel counters plus triangle checks binned by surrogate level, where a
/// pairing's level is the larger element height of its two sides.
struct DetectionStats {
  KernelCounters counters;
  std::vector<std::uint64_t> level_checks;

  void add_level(int level, std::uint64_t n);
  DetectionStats& operator+=(const DetectionStats& o);
  bool operator==(const DetectionStats&) const = default;
};

/// One side of a particle pairing: its hierarchy placed in the world.
struct PlacedHierarchy {
  const Hierarchy* hierarchy;
  RigidMotion pose;
  int particle;

  Triangle world(int e) const { return pose.apply(hierarchy->triangle(e)); }
};

enum class PairingOutcome {
  Contact,
  Separated,  ///< for surrogate pairings: distance lower bound exceeds the halo sum
  Undecided,  ///< surrogate pairing without a certified verdict
};

/// Verdict of a kernel result for a pairing. Mesh–mesh pairings take the
/// hybrid result as is; surrogate pairings are only pruned when separation is
/// certified, so no fine contact can be hidden by the iterative tolerance.
PairingOutcome classify_pairing(const DistanceResult& r, bool mesh_pair, Halo halo);

/// Breadth-wise unfolding from the roots over a frontier of element pairings.
/// Per round every pairing is kernel-tested; certified separations are
/// pruned, other surrogate pairings are replaced by the cross product of
/// their children (a mesh side stays fixed), and mesh–mesh contacts become
/// contact points. The result is ordered by (mesh index i, mesh index j),
/// the order of the single-level detector.
///
/// When `rounds` is given, it receives the (element a, element b) pairings
/// tested in each round.
std::vector<ContactPoint> multiscale_contacts(
    const PlacedHierarchy& a, const PlacedHierarchy& b, const KernelParams& p,
    DetectionStats& stats, unsigned workers = 1,
    std::vector<std::vector<std::pair<int, int>>>* rounds = nullptr);

/// Single-level detection of two placed particles with halo (ε, ε) from the
/// hierarchies' finest epsilon.
std::vector<ContactPoint> single_level_contacts(const PlacedHierarchy& a,
                                                const PlacedHierarchy& b,
                                                const KernelParams& p, DetectionStats& stats,
                                                unsigned workers = 1);

/// Active set of one ordered particle pair: elements of the first particle's
/// hierarchy live against the second particle.
struct ActiveSet {
  std::set<int> active;
  std::set<int> removed;  ///< elements that ever left `active`
  std::set<int> memory;   ///< removed then re-added: removal vetoed

  bool operator==(const ActiveSet&) const = default;
};

ActiveSet initial_active_set(const Hierarchy& h);

/// Replaces each listed element by its parent, unless it is the root, its
/// parent was already active, or its removal is vetoed by the memory set.
void narrow_active_set(std::set<int>& active, const ActiveSet& state, const Hierarchy& h,
                       std::span<const int> non_contact);

/// Whenever an active element has an active ancestor, the siblings along the
/// path are activated and the ancestor removed. Afterwards no active element
/// has an active ancestor and the active elements still cover every mesh
/// triangle exactly once if they did before.
void active_set_cleanup(std::set<int>& active, const Hierarchy& h);

/// Installs `next`, updating the removal history and the memory set.
/// Returns true when the active elements changed.
bool commit_active_set(ActiveSet& state, std::set<int> next);

/// Mesh triangles covered by the active elements, with repetitions.
std::vector<int> covered_mesh_triangles(const std::set<int>& active, const Hierarchy& h);

}  // namespace dem

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dem/contact.hpp"
#include "dem/distance.hpp"
#include "dem/multiscale.hpp"
#include "dem/system.hpp"

namespace dem {

enum class StepMode {
  ExplicitSingle,
  ExplicitMultiscale,
  ImplicitSingle,
  ImplicitSurrogateInPicard,
  ImplicitMultiscalePicard,
};

const char* to_string(StepMode m);
/// Throws InvalidSpec.
StepMode step_mode_from_string(const std::string& s);

struct StepConfig {
  Real dt = Real(1e-4);
  StepMode mode = StepMode::ExplicitSingle;
  Real convergence_rel_tol = Real(0.01);
  int max_picard_iterations = 200;
  Real theta_min = Real(0.05);
  Real theta_grow = Real(1.2);
  Real theta_shrink = Real(0.5);
  /// Forces from contacts whose coarser side has height h are scaled by
  /// surrogate_force_damping^h.
  Real surrogate_force_damping = Real(0.5);
  unsigned workers = 1;
  KernelParams kernel;
  ForceModelParams force;

  /// Throws InvalidSpec.
  void validate() const;
};

/// Statistics of one committed step. For implicit modes, `detection` sums
/// every Picard sweep and `sweep_checks` lists the triangle checks per sweep.
struct StepStats {
  DetectionStats detection;
  int picard_iterations = 0;
  std::size_t merged_contacts = 0;
  std::size_t raw_contacts = 0;
  std::size_t candidate_pairs = 0;
  std::size_t active_set_changes = 0;
  std::vector<std::uint64_t> sweep_checks;
};

/// Particle pairs (i < j) whose bounding spheres, grown by both finest
/// halos, overlap. Uniform-grid binning; particles larger than a cell are
/// tested against all others. Lexicographic order.
std::vector<std::pair<int, int>> broad_phase(const System& system, std::span<const RigidMotion> poses);

/// Merged contacts of a pair under the given poses, using the single-level or
/// the multiscale detector.
std::vector<ContactPoint> detect_pair(const System& system, std::span<const RigidMotion> poses,
                                      int i, int j, bool multiscale, const StepConfig& cfg,
                                      DetectionStats& stats);

/// Per-particle total force and torque (about the world centre of mass) from
/// merged contacts. A contact with vanishing normal pushes along the line
/// between the centres of mass with magnitude K_s sqrt(reduced mass).
struct Load {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};
std::vector<Load> contact_loads(const System& system, std::span<const RigidMotion> poses,
                                std::span<const ContactPoint> contacts, const StepConfig& cfg);

/// Explicit Euler: detect on the current geometry, move with the current
/// velocities, then update velocities from the forces.
StepStats explicit_step(System& system, const StepConfig& cfg);

/// Picard-iterated implicit Euler with per-particle θ relaxation of the
/// loads. Throws PicardDiverged.
StepStats implicit_step(System& system, const StepConfig& cfg);

/// Per unordered particle pair (i < j): active sets of i against j and of j
/// against i.
struct PairActiveSets {
  ActiveSet first;
  ActiveSet second;
};

using ActiveSetMap = std::map<std::pair<int, int>, PairActiveSets>;

/// Called after every Picard sweep with the sweep number (from 1) and the
/// active sets after clean-up.
using SweepObserver = std::function<void(int, const ActiveSetMap&)>;

/// Implicit Euler with Picard iterations and active-set unfolding
/// intermingled. Active and memory sets live for one step. Throws
/// PicardDiverged.
StepStats multiscale_picard_step(System& system, const StepConfig& cfg,
                                 const SweepObserver& observer = {});

/// Dispatches on cfg.mode.
StepStats step(System& system, const StepConfig& cfg);

}  // namespace dem

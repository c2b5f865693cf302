#pragma once

#include <array>
#include <span>
#include <vector>

#include "dem/geometry.hpp"

namespace dem {

enum class KernelMethod {
  Hybrid,      ///< fixed-sweep penalty minimiser with comparison fallback
  Comparison,  ///< comparison-based exact distance only
};

/// Parameters of the triangle-triangle distance kernels.
///
/// The penalty weight and the regulariser are given relative to the largest
/// squared edge length of the pair under test, so the iteration behaves the
/// same under uniform scaling. `resolve_weights` turns them into absolute
/// values for a concrete pair.
struct KernelParams {
  Real epsilon = Real(1e-2);  ///< finest-level halo width
  int n_iterative = 4;        ///< fixed number of update sweeps
  Real c_factor = Real(1);    ///< convergence threshold is c_factor * epsilon
  Real alpha_iterative = Real(10);     ///< times max squared edge of the pair
  Real alpha_regulariser = Real(1e-4);  ///< times max squared edge of the pair
  Real start_a = Real(1) / Real(3);  ///< initial barycentric iterate
  Real start_b = Real(1) / Real(3);
  KernelMethod method = KernelMethod::Hybrid;

  /// Throws InvalidSpec.
  void validate() const;
};

struct PenaltyWeights {
  Real alpha_iterative;
  Real alpha_regulariser;
};

PenaltyWeights resolve_weights(const Triangle& t1, const Triangle& t2,
                               const KernelParams& p);

/// Halo widths of the two triangles of a pair. Contact means the halos
/// overlap, i.e. distance <= a + b.
struct Halo {
  Real a;
  Real b;
  Real sum() const { return a + b; }
  static Halo uniform(Real eps) { return {eps, eps}; }
};

enum class DistanceKind { Contact, NoContact, NotTerminated };

struct DistanceResult {
  DistanceKind kind = DistanceKind::NoContact;
  Real distance = 0;
  Vec3 point_a = Vec3::Zero();
  Vec3 point_b = Vec3::Zero();
  Real a1 = 0, b1 = 0;  ///< barycentric coordinates on the first triangle
  Real a2 = 0, b2 = 0;  ///< barycentric coordinates on the second triangle
  Real objective = 0;         ///< J after the last sweep (iterative only)
  Real objective_change = 0;  ///< |J - J_old| of the last sweep (iterative only)
  int sweeps = 0;             ///< update sweeps executed (iterative only)
  /// Certified lower bound on the true distance. Equals `distance` for the
  /// comparison kernel; a separating-axis bound for the iterative one.
  Real lower_bound = 0;

  bool contact() const { return kind == DistanceKind::Contact; }
};

struct KernelCounters {
  std::uint64_t iterative_invocations = 0;
  std::uint64_t comparison_invocations = 0;
  std::uint64_t fallback_invocations = 0;

  /// Distinct triangle pairs tested.
  std::uint64_t checks() const {
    return iterative_invocations + comparison_invocations - fallback_invocations;
  }
  KernelCounters& operator+=(const KernelCounters& o) {
    iterative_invocations += o.iterative_invocations;
    comparison_invocations += o.comparison_invocations;
    fallback_invocations += o.fallback_invocations;
    return *this;
  }
  bool operator==(const KernelCounters&) const = default;
};

/// Exact distance from the six vertex-triangle, nine edge-edge and six
/// edge-plane tests. Throws DegenerateTriangle.
DistanceResult closest_comparison(const Triangle& t1, const Triangle& t2,
                                  Real contact_distance);
inline DistanceResult closest_comparison(const Triangle& t1, const Triangle& t2,
                                         const KernelParams& p = {}) {
  return closest_comparison(t1, t2, 2 * p.epsilon);
}

/// Value of the penalised functional J and of its quadratic part Ĵ.
struct Objective {
  Real j;
  Real j_hat;
};

Objective evaluate_objective(const Triangle& t1, const Triangle& t2,
                             const std::array<Real, 4>& x, Real alpha_iterative);

/// Analytic gradient of J with respect to (a1, b1, a2, b2). The subgradient of
/// each max(0, .) term is taken as 0 exactly at its kink.
std::array<Real, 4> gradient_of_J(const Triangle& t1, const Triangle& t2, Real a1,
                                  Real b1, Real a2, Real b2, const KernelParams& p);

/// Exactly `n_iterative` sweeps, each a projected steepest-descent step onto
/// the admissible barycentric set followed by a regularised Newton step on Ĵ
/// within the current face. Contact when the last sweep changed J by at most
/// C·ε and Ĵ <= 2ε²; NoContact when it converged, Ĵ > 2ε² and the separating
/// axis along the closest-point direction confirms the distance to within C·ε;
/// NotTerminated otherwise. Never throws.
DistanceResult closest_iterative(const Triangle& t1, const Triangle& t2,
                                 const KernelParams& p, Halo halo);
inline DistanceResult closest_iterative(const Triangle& t1, const Triangle& t2,
                                        const KernelParams& p) {
  return closest_iterative(t1, t2, p, Halo::uniform(p.epsilon));
}

/// Iterative result unless it did not terminate, then the comparison result.
DistanceResult closest_hybrid(const Triangle& t1, const Triangle& t2,
                              const KernelParams& p, KernelCounters& counters,
                              Halo halo);
inline DistanceResult closest_hybrid(const Triangle& t1, const Triangle& t2,
                                     const KernelParams& p, KernelCounters& counters) {
  return closest_hybrid(t1, t2, p, counters, Halo::uniform(p.epsilon));
}

struct TrianglePair {
  Triangle a;
  Triangle b;
};

enum class KernelError { None, DegenerateTriangle };

struct BatchEntry {
  DistanceResult result;
  KernelError error = KernelError::None;
};

/// One unit of batched work. `allow_fallback` is cleared for pairings that
/// involve a surrogate triangle: there a NotTerminated outcome is returned
/// as is and the comparison kernel is never run.
struct KernelJob {
  Triangle a;
  Triangle b;
  Halo halo;
  bool allow_fallback = true;
};

/// Runs the iterative phase for every job before any fallback. Output is
/// positional and independent of `workers`.
std::vector<BatchEntry> run_kernel_jobs(std::span<const KernelJob> jobs,
                                        const KernelParams& p,
                                        KernelCounters& counters,
                                        unsigned workers = 1);

std::vector<BatchEntry> batch_closest(std::span<const TrianglePair> pairs,
                                      const KernelParams& p,
                                      KernelCounters& counters,
                                      unsigned workers = 1);

}  // namespace dem

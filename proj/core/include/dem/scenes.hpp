#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dem/surrogate.hpp"
#include "dem/system.hpp"

namespace dem {

enum class SceneKind { ParticleParticle, ParticleOnPlane, CartesianGrid, ScaledPair };

const char* to_string(SceneKind k);
/// Throws InvalidSpec.
SceneKind scene_kind_from_string(const std::string& s);

/// Particle meshes are noisy spheres of radius `radius` (before noise) with
/// `triangle_count` faces. Particle k uses noise seed `seed + k`.
struct SceneSpec {
  SceneKind kind = SceneKind::ParticleParticle;
  int triangle_count = 80;
  Real eta_r = Real(1.4);
  std::uint64_t seed = 1;
  Real radius = Real(0.5);
  Real epsilon = Real(1e-2);
  int n_surrogate = 8;
  Real density = 1;
  /// Isotropic scale per particle; missing entries are 1.
  std::vector<Real> scales;
  /// Extra stretch of every sphere along its body x axis.
  Real stretch = 1;
  /// Clearance at t = 0. Pairs: centre distance beyond the one at which the
  /// halos first touch. Plane: between the plane and the sphere's bounding
  /// sphere.
  Real gap = Real(0.002);
  /// Speed of each particle toward its partner (toward the plane).
  Real approach_speed = Real(0.5);

  std::array<int, 3> grid{4, 4, 4};
  /// Centre distance of grid neighbours; 0 means 2 radius + epsilon.
  Real grid_spacing = 0;

  Real plane_tilt_deg = 10;
  Real plane_size = 10;
  Real plane_epsilon = Real(1e-2);
  /// Magnitude of gravity along -z; only ParticleOnPlane uses it.
  Real gravity = Real(9.81);

  /// ScaledPair: scale of the big particle. With `refine` it must be a power
  /// of two and every doubling adds one subdivision level.
  Real big_scale = 2;
  bool refine = true;

  /// Throws InvalidSpec.
  void validate() const;
  bool operator==(const SceneSpec&) const = default;
};

/// Throws InvalidSpec on unknown keys, bad values or malformed JSON.
SceneSpec parse_scene_spec(const std::string& json);
std::string dump_scene_spec(const SceneSpec& spec);
SceneSpec load_scene_spec(const std::filesystem::path& path);

/// Deterministic system for `spec`. Throws InvalidSpec.
System build_scene(const SceneSpec& spec, const FitParams& fit = {});

/// World-space meshes of all particles, one OBJ object per particle.
void export_scene_obj(const System& system, const std::filesystem::path& path);

}  // namespace dem

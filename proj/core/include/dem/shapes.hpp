#pragma once

#include <cstdint>

#include "dem/geometry.hpp"

namespace dem {

/// Layered value noise in [0, 1].
struct NoiseParams {
  int octaves = 3;
  Real base_frequency = Real(1.5);
  Real lacunarity = Real(2);
  Real gain = Real(0.5);
};

Real value_noise(const Vec3& x, std::uint64_t seed, const NoiseParams& p = {});

/// Unit icosphere subdivided `subdiv_level` times (20 * 4^level faces), every
/// vertex pushed to radius 1 + (eta_r - 1) * noise. Faces are outward.
/// Throws InvalidSpec.
TriangleMesh generate_noisy_sphere(int subdiv_level, Real eta_r, std::uint64_t seed,
                                   const NoiseParams& noise = {});

/// Latitude/longitude sphere with 2 * slices * (rings - 1) faces, noise as above.
TriangleMesh generate_uv_sphere(int slices, int rings, Real eta_r, std::uint64_t seed,
                                const NoiseParams& noise = {});

/// Icosphere when `triangle_count` is 20 * 4^L, otherwise the UV sphere with
/// that many faces for 12, 36, 140 and 1224. Throws InvalidSpec otherwise.
TriangleMesh generate_sphere_with_count(int triangle_count, Real eta_r, std::uint64_t seed,
                                        const NoiseParams& noise = {});

}  // namespace dem

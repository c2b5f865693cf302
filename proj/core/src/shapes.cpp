#include "dem/shapes.hpp"

#include <cmath>
#include <map>
#include <utility>

namespace dem {

namespace {

std::uint64_t hash3(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t seed) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  for (std::int64_t v : {x, y, z}) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
  }
  return h;
}

Real lattice(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t seed) {
  return Real(hash3(x, y, z, seed) >> 11) * Real(1.0 / 9007199254740992.0);
}

Real smooth(Real t) { return t * t * (3 - 2 * t); }

Real single_octave(const Vec3& p, std::uint64_t seed) {
  const Real fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
             iz = static_cast<std::int64_t>(fz);
  const Real tx = smooth(p.x() - fx), ty = smooth(p.y() - fy), tz = smooth(p.z() - fz);
  Real acc = 0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const Real w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
    acc += w * lattice(ix + dx, iy + dy, iz + dz, seed);
  }
  return acc;
}

TriangleMesh apply_noise(TriangleMesh m, Real eta_r, std::uint64_t seed, const NoiseParams& noise) {
  for (auto& v : m.vertices) {
    const Vec3 dir = v.normalized();
    const Real r = eta_r == 1 ? Real(1) : 1 + (eta_r - 1) * value_noise(dir, seed, noise);
    v = r * dir;
  }
  return m;
}

}  // namespace

Real value_noise(const Vec3& x, std::uint64_t seed, const NoiseParams& p) {
  Real sum = 0, norm = 0, amp = 1, freq = p.base_frequency;
  for (int o = 0; o < p.octaves; ++o) {
    sum += amp * single_octave(freq * x, seed + static_cast<std::uint64_t>(o) * 7919);
    norm += amp;
    amp *= p.gain;
    freq *= p.lacunarity;
  }
  return norm > 0 ? sum / norm : Real(0);
}

TriangleMesh generate_noisy_sphere(int subdiv_level, Real eta_r, std::uint64_t seed,
                                   const NoiseParams& noise) {
  if (subdiv_level < 0) throw InvalidSpec("subdivision level must be non-negative");
  if (!(eta_r >= 1)) throw InvalidSpec("eta_r must be at least 1");
  const Real t = (1 + std::sqrt(Real(5))) / 2;
  TriangleMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < subdiv_level; ++level) {
    std::map<std::pair<Index, Index>, Index> midpoint;
    auto mid = [&](Index a, Index b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const Index id = static_cast<Index>(m.vertices.size() - 1);
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<Index, 3>> faces;
    faces.reserve(4 * m.faces.size());
    for (const auto& f : m.faces) {
      const Index a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      faces.push_back({f[0], a, c});
      faces.push_back({f[1], b, a});
      faces.push_back({f[2], c, b});
      faces.push_back({a, b, c});
    }
    m.faces = std::move(faces);
  }
  return apply_noise(std::move(m), eta_r, seed, noise);
}

TriangleMesh generate_uv_sphere(int slices, int rings, Real eta_r, std::uint64_t seed,
                                const NoiseParams& noise) {
  if (slices < 3 || rings < 2) throw InvalidSpec("uv sphere needs slices >= 3 and rings >= 2");
  if (!(eta_r >= 1)) throw InvalidSpec("eta_r must be at least 1");
  TriangleMesh m;
  m.vertices.emplace_back(0, 0, 1);
  for (int r = 1; r < rings; ++r) {
    const Real theta = Real(M_PI) * r / rings;
    for (int s = 0; s < slices; ++s) {
      const Real phi = 2 * Real(M_PI) * s / slices;
      m.vertices.emplace_back(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                              std::cos(theta));
    }
  }
  m.vertices.emplace_back(0, 0, -1);
  const Index south = static_cast<Index>(m.vertices.size() - 1);
  auto ring = [&](int r, int s) { return static_cast<Index>(1 + (r - 1) * slices + (s % slices)); };
  for (int s = 0; s < slices; ++s) m.faces.push_back({0, ring(1, s), ring(1, s + 1)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < slices; ++s) {
      m.faces.push_back({ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)});
      m.faces.push_back({ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)});
    }
  }
  for (int s = 0; s < slices; ++s) m.faces.push_back({south, ring(rings - 1, s + 1), ring(rings - 1, s)});
  return apply_noise(std::move(m), eta_r, seed, noise);
}

TriangleMesh generate_sphere_with_count(int triangle_count, Real eta_r, std::uint64_t seed,
                                        const NoiseParams& noise) {
  for (int level = 0, n = 20; level < 8; ++level, n *= 4)
    if (n == triangle_count) return generate_noisy_sphere(level, eta_r, seed, noise);
  switch (triangle_count) {
    case 12: return generate_uv_sphere(6, 2, eta_r, seed, noise);
    case 36: return generate_uv_sphere(6, 4, eta_r, seed, noise);
    case 140: return generate_uv_sphere(10, 8, eta_r, seed, noise);
    case 1224: return generate_uv_sphere(36, 18, eta_r, seed, noise);
    default: break;
  }
  throw InvalidSpec("unsupported sphere triangle count " + std::to_string(triangle_count));
}

}  // namespace dem

#include "dem/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dem/multiscale.hpp"
#include "dem/shapes.hpp"
#include "json.hpp"

namespace dem {

const char* to_string(SceneKind k) {
  switch (k) {
    case SceneKind::ParticleParticle: return "particle-particle";
    case SceneKind::ParticleOnPlane: return "particle-on-plane";
    case SceneKind::CartesianGrid: return "cartesian-grid";
    case SceneKind::ScaledPair: return "scaled-pair";
  }
  return "unknown";
}

SceneKind scene_kind_from_string(const std::string& s) {
  for (auto k : {SceneKind::ParticleParticle, SceneKind::ParticleOnPlane, SceneKind::CartesianGrid,
                 SceneKind::ScaledPair})
    if (s == to_string(k)) return k;
  throw InvalidSpec("unknown scene kind '" + s + "'");
}

namespace {

bool is_power_of_two(Real s) {
  if (s < 1) return false;
  const Real l = std::log2(s);
  return std::abs(l - std::round(l)) < Real(1e-9);
}

bool on_icosphere_ladder(int n) {
  for (int m = 20; m <= 20 * (1 << 14); m *= 4)
    if (m == n) return true;
  return false;
}

}  // namespace

void SceneSpec::validate() const {
  if (!(eta_r >= 1)) throw InvalidSpec("eta_r must be >= 1");
  if (!(radius > 0)) throw InvalidSpec("radius must be positive");
  if (!(epsilon > 0)) throw InvalidSpec("epsilon must be positive");
  if (!(plane_epsilon > 0)) throw InvalidSpec("plane_epsilon must be positive");
  if (n_surrogate < 2) throw InvalidSpec("n_surrogate must be >= 2");
  if (!(density > 0)) throw InvalidSpec("density must be positive");
  if (!(stretch > 0)) throw InvalidSpec("stretch must be positive");
  for (Real s : scales)
    if (!(s > 0)) throw InvalidSpec("scales must be positive");
  if (!(gap >= 0)) throw InvalidSpec("gap must be >= 0");
  if (!std::isfinite(approach_speed)) throw InvalidSpec("approach_speed must be finite");
  if (!on_icosphere_ladder(triangle_count) && triangle_count != 12 && triangle_count != 36 &&
      triangle_count != 140 && triangle_count != 1224)
    throw InvalidSpec("triangle_count must be 20*4^L or one of 12, 36, 140, 1224");
  switch (kind) {
    case SceneKind::CartesianGrid:
      for (int n : grid)
        if (n < 1) throw InvalidSpec("grid dimensions must be >= 1");
      if (grid_spacing < 0) throw InvalidSpec("grid_spacing must be >= 0");
      break;
    case SceneKind::ParticleOnPlane:
      if (!(plane_size > 0)) throw InvalidSpec("plane_size must be positive");
      if (!(std::abs(plane_tilt_deg) < 80)) throw InvalidSpec("plane_tilt_deg must lie in (-80, 80)");
      if (!(gravity >= 0)) throw InvalidSpec("gravity must be >= 0");
      break;
    case SceneKind::ScaledPair:
      if (!(big_scale >= 1)) throw InvalidSpec("big_scale must be >= 1");
      if (refine && !is_power_of_two(big_scale))
        throw InvalidSpec("big_scale must be a power of two when refining");
      if (refine && !on_icosphere_ladder(triangle_count))
        throw InvalidSpec("refinement needs an icosphere triangle count");
      break;
    case SceneKind::ParticleParticle: break;
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

json to_json(const SceneSpec& s) {
  return json{{"kind", to_string(s.kind)},
              {"triangle_count", s.triangle_count},
              {"eta_r", s.eta_r},
              {"seed", s.seed},
              {"radius", s.radius},
              {"epsilon", s.epsilon},
              {"n_surrogate", s.n_surrogate},
              {"density", s.density},
              {"scales", s.scales},
              {"stretch", s.stretch},
              {"gap", s.gap},
              {"approach_speed", s.approach_speed},
              {"grid", s.grid},
              {"grid_spacing", s.grid_spacing},
              {"plane_tilt_deg", s.plane_tilt_deg},
              {"plane_size", s.plane_size},
              {"plane_epsilon", s.plane_epsilon},
              {"gravity", s.gravity},
              {"big_scale", s.big_scale},
              {"refine", s.refine}};
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

SceneSpec from_json(const json& j) {
  if (!j.is_object()) throw InvalidSpec("scene spec must be a JSON object");
  const json known = to_json(SceneSpec{});
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw InvalidSpec("unknown scene key '" + key + "'");
  SceneSpec s;
  if (auto it = j.find("kind"); it != j.end()) s.kind = scene_kind_from_string(it->get<std::string>());
  read(j, "triangle_count", s.triangle_count);
  read(j, "eta_r", s.eta_r);
  read(j, "seed", s.seed);
  read(j, "radius", s.radius);
  read(j, "epsilon", s.epsilon);
  read(j, "n_surrogate", s.n_surrogate);
  read(j, "density", s.density);
  read(j, "scales", s.scales);
  read(j, "stretch", s.stretch);
  read(j, "gap", s.gap);
  read(j, "approach_speed", s.approach_speed);
  read(j, "grid", s.grid);
  read(j, "grid_spacing", s.grid_spacing);
  read(j, "plane_tilt_deg", s.plane_tilt_deg);
  read(j, "plane_size", s.plane_size);
  read(j, "plane_epsilon", s.plane_epsilon);
  read(j, "gravity", s.gravity);
  read(j, "big_scale", s.big_scale);
  read(j, "refine", s.refine);
  s.validate();
  return s;
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("scene spec: ") + e.what());
  }
}

std::string dump_scene_spec(const SceneSpec& spec) { return to_json(spec).dump(2); }

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_spec(ss.str());
}

// ---------------------------------------------------------------------------
// construction

namespace {

Real scale_of(const SceneSpec& s, std::size_t k) {
  return k < s.scales.size() ? s.scales[k] : Real(1);
}

std::shared_ptr<ParticleShape> sphere_shape(const SceneSpec& s, int triangle_count, Real scale,
                                            std::uint64_t seed, const FitParams& fit) {
  TriangleMesh mesh = generate_sphere_with_count(triangle_count, s.eta_r, seed);
  mesh.scale(s.radius * scale);
  if (s.stretch != 1)
    for (auto& v : mesh.vertices) v.x() *= s.stretch;
  return make_shape(std::move(mesh), s.n_surrogate, fit, seed, s.epsilon, s.density, false);
}

Particle at(std::shared_ptr<const ParticleShape> shape, const Vec3& position, const Vec3& v) {
  Particle p;
  p.shape = std::move(shape);
  p.pose.translation = position;
  p.v = v;
  return p;
}

bool halos_touch(const ParticleShape& a, const ParticleShape& b, Real distance) {
  RigidMotion pb;
  pb.translation = Vec3(distance, 0, 0);
  DetectionStats stats;
  return !multiscale_contacts({&a.hierarchy, RigidMotion{}, 0}, {&b.hierarchy, pb, 1}, KernelParams{}, stats)
              .empty();
}

// Two particles on the x axis, approaching each other. The centre distance
// is the largest one at which the halos touch, plus `gap`.
void place_pair(System& sys, std::shared_ptr<const ParticleShape> a,
                std::shared_ptr<const ParticleShape> b, const SceneSpec& s) {
  Real ra = 0, rb = 0;
  for (const auto& v : a->mesh.vertices) ra = std::max(ra, v.x());
  for (const auto& v : b->mesh.vertices) rb = std::max(rb, -v.x());
  // march inward from a separated placement, then bisect the last step
  const Real eps = std::min(a->tree.finest_epsilon, b->tree.finest_epsilon);
  Real hi = ra + rb + 3 * eps;
  while (hi > 0 && !halos_touch(*a, *b, hi - eps)) hi -= eps;
  Real lo = std::max(Real(0), hi - eps);
  for (int it = 0; it < 40; ++it) {
    const Real mid = (lo + hi) / 2;
    (halos_touch(*a, *b, mid) ? lo : hi) = mid;
  }
  const Real d = hi + s.gap;
  const Real xa = -d * ra / (ra + rb);
  sys.particles.push_back(at(std::move(a), Vec3(xa, 0, 0), Vec3(s.approach_speed, 0, 0)));
  sys.particles.push_back(at(std::move(b), Vec3(xa + d, 0, 0), Vec3(-s.approach_speed, 0, 0)));
}

std::shared_ptr<ParticleShape> plane_shape(const SceneSpec& s, const FitParams& fit) {
  const Real h = s.plane_size / 2;
  const Real tilt = s.plane_tilt_deg * Real(M_PI) / 180;
  const Quat q(Eigen::AngleAxis<Real>(tilt, Vec3::UnitX()));
  TriangleMesh mesh;
  for (const Vec3& c : {Vec3(-h, -h, 0), Vec3(h, -h, 0), Vec3(h, h, 0), Vec3(-h, h, 0)})
    mesh.vertices.push_back(q * c);
  mesh.faces = {{0, 1, 2}, {0, 2, 3}};
  return make_shape(std::move(mesh), s.n_surrogate, fit, s.seed, s.plane_epsilon, s.density, true);
}

}  // namespace

System build_scene(const SceneSpec& s, const FitParams& fit) {
  s.validate();
  fit.validate();
  System sys;
  switch (s.kind) {
    case SceneKind::ParticleParticle: {
      auto a = sphere_shape(s, s.triangle_count, scale_of(s, 0), s.seed, fit);
      auto b = sphere_shape(s, s.triangle_count, scale_of(s, 1), s.seed + 1, fit);
      place_pair(sys, std::move(a), std::move(b), s);
      break;
    }
    case SceneKind::ScaledPair: {
      int count = s.triangle_count;
      if (s.refine)
        for (int d = static_cast<int>(std::lround(std::log2(s.big_scale))); d > 0; --d) count *= 4;
      auto big = sphere_shape(s, count, s.big_scale * scale_of(s, 0), s.seed, fit);
      auto small = sphere_shape(s, s.triangle_count, scale_of(s, 1), s.seed + 1, fit);
      place_pair(sys, std::move(big), std::move(small), s);
      break;
    }
    case SceneKind::ParticleOnPlane: {
      auto sphere = sphere_shape(s, s.triangle_count, scale_of(s, 0), s.seed, fit);
      const Real tilt = s.plane_tilt_deg * Real(M_PI) / 180;
      const Real height = (sphere->bounding_radius + s.gap) / std::cos(tilt);
      sys.particles.push_back(at(std::move(sphere), Vec3(0, 0, height), Vec3(0, 0, -s.approach_speed)));
      sys.particles.push_back(at(plane_shape(s, fit), Vec3::Zero(), Vec3::Zero()));
      sys.gravity = Vec3(0, 0, -s.gravity);
      break;
    }
    case SceneKind::CartesianGrid: {
      auto shape = sphere_shape(s, s.triangle_count, scale_of(s, 0), s.seed, fit);
      const Real spacing = s.grid_spacing > 0 ? s.grid_spacing : 2 * s.radius + s.epsilon;
      for (int i = 0; i < s.grid[0]; ++i)
        for (int j = 0; j < s.grid[1]; ++j)
          for (int k = 0; k < s.grid[2]; ++k)
            sys.particles.push_back(at(shape, spacing * Vec3(i, j, k), Vec3::Zero()));
      break;
    }
  }
  return sys;
}

void export_scene_obj(const System& system, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  std::size_t offset = 1;
  for (std::size_t k = 0; k < system.particles.size(); ++k) {
    const auto& p = system.particles[k];
    out << "o particle_" << k << '\n';
    for (const auto& v : p.shape->mesh.vertices) {
      const Vec3 w = p.pose.apply(v);
      out << "v " << w.x() << ' ' << w.y() << ' ' << w.z() << '\n';
    }
    for (const auto& f : p.shape->mesh.faces)
      out << "f " << f[0] + offset << ' ' << f[1] + offset << ' ' << f[2] + offset << '\n';
    offset += p.shape->mesh.vertices.size();
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dem

#include "dem/timestepping.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace dem {

const char* to_string(StepMode m) {
  switch (m) {
    case StepMode::ExplicitSingle: return "explicit-single";
    case StepMode::ExplicitMultiscale: return "explicit-multiscale";
    case StepMode::ImplicitSingle: return "implicit-single";
    case StepMode::ImplicitSurrogateInPicard: return "implicit-surrogate-in-picard";
    case StepMode::ImplicitMultiscalePicard: return "implicit-multiscale-picard";
  }
  return "unknown";
}

StepMode step_mode_from_string(const std::string& s) {
  for (auto m : {StepMode::ExplicitSingle, StepMode::ExplicitMultiscale, StepMode::ImplicitSingle,
                 StepMode::ImplicitSurrogateInPicard, StepMode::ImplicitMultiscalePicard})
    if (s == to_string(m)) return m;
  throw InvalidSpec("unknown step mode '" + s + "'");
}

void StepConfig::validate() const {
  if (!(dt > 0)) throw InvalidSpec("dt must be positive");
  if (!(convergence_rel_tol > 0)) throw InvalidSpec("convergence_rel_tol must be positive");
  if (max_picard_iterations < 1) throw InvalidSpec("max_picard_iterations must be >= 1");
  if (!(theta_min > 0 && theta_min <= 1)) throw InvalidSpec("theta_min must lie in (0, 1]");
  if (!(theta_grow >= 1)) throw InvalidSpec("theta_grow must be >= 1");
  if (!(theta_shrink > 0 && theta_shrink <= 1)) throw InvalidSpec("theta_shrink must lie in (0, 1]");
  if (!(surrogate_force_damping > 0 && surrogate_force_damping <= 1))
    throw InvalidSpec("surrogate_force_damping must lie in (0, 1]");
  kernel.validate();
  force.validate();
}

// ---------------------------------------------------------------------------
// broad phase

std::vector<std::pair<int, int>> broad_phase(const System& system,
                                             std::span<const RigidMotion> poses) {
  const int n = static_cast<int>(system.particles.size());
  std::vector<Real> radius(n);
  for (int i = 0; i < n; ++i) {
    const auto& shape = *system.particles[i].shape;
    radius[i] = shape.bounding_radius + shape.tree.finest_epsilon;
  }
  std::vector<std::pair<int, int>> out;
  if (n < 2) return out;

  std::vector<Real> sorted = radius;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const Real cell = 2 * sorted[n / 2];
  auto overlap = [&](int i, int j) {
    const Real reach = radius[i] + radius[j];
    return (poses[i].translation - poses[j].translation).squaredNorm() <= reach * reach;
  };

  std::vector<int> big;
  std::map<std::array<long long, 3>, std::vector<int>> grid;
  for (int i = 0; i < n; ++i) {
    if (radius[i] > cell / 2) {
      big.push_back(i);
      continue;
    }
    const Vec3& c = poses[i].translation;
    grid[{static_cast<long long>(std::floor(c.x() / cell)),
          static_cast<long long>(std::floor(c.y() / cell)),
          static_cast<long long>(std::floor(c.z() / cell))}]
        .push_back(i);
  }
  for (const auto& [key, members] : grid) {
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find({key[0] + dx, key[1] + dy, key[2] + dz});
          if (it == grid.end()) continue;
          for (int i : members)
            for (int j : it->second)
              if (i < j && overlap(i, j)) out.emplace_back(i, j);
        }
  }
  for (int b : big)
    for (int j = 0; j < n; ++j)
      if (j != b && overlap(b, j)) out.emplace_back(std::min(b, j), std::max(b, j));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// detection and loads

std::vector<ContactPoint> detect_pair(const System& system, std::span<const RigidMotion> poses,
                                      int i, int j, bool multiscale, const StepConfig& cfg,
                                      DetectionStats& stats) {
  const PlacedHierarchy a{&system.particles[i].shape->hierarchy, poses[i], i};
  const PlacedHierarchy b{&system.particles[j].shape->hierarchy, poses[j], j};
  const auto raw = multiscale ? multiscale_contacts(a, b, cfg.kernel, stats, cfg.workers)
                              : single_level_contacts(a, b, cfg.kernel, stats, cfg.workers);
  return merge_contacts(raw, cfg.kernel.epsilon);
}

std::vector<Load> contact_loads(const System& system, std::span<const RigidMotion> poses,
                                std::span<const ContactPoint> contacts, const StepConfig& cfg) {
  std::vector<Load> loads(system.particles.size());
  for (const auto& c : contacts) {
    const auto& pi = system.particles[c.particle_i];
    const auto& pj = system.particles[c.particle_j];
    const Vec3& ci = poses[c.particle_i].translation;
    const Vec3& cj = poses[c.particle_j].translation;
    Vec3 f;
    if (c.normal.norm() < Real(1e-12)) {
      Vec3 dir = ci - cj;
      dir = dir.norm() > 0 ? Vec3(dir.normalized()) : c.fallback_direction;
      f = dir * (cfg.force.k_s * reduced_mass_factor(pi.mass(), pj.mass()));
    } else {
      f = contact_force(c, pi.mass(), pj.mass(), cfg.force);
    }
    const int level = std::max(c.level_i, c.level_j);
    if (level > 0) f *= std::pow(cfg.surrogate_force_damping, Real(level));
    loads[c.particle_i].force += f;
    loads[c.particle_i].torque += (c.position - ci).cross(f);
    loads[c.particle_j].force -= f;
    loads[c.particle_j].torque += (c.position - cj).cross(-f);
  }
  return loads;
}

namespace {

std::vector<RigidMotion> poses_of(const System& system) {
  std::vector<RigidMotion> out;
  out.reserve(system.particles.size());
  for (const auto& p : system.particles) out.push_back(p.pose);
  return out;
}

std::vector<ContactPoint> detect_all(const System& system, std::span<const RigidMotion> poses,
                                     bool multiscale, const StepConfig& cfg, StepStats& stats,
                                     std::size_t& raw_count) {
  const auto pairs = broad_phase(system, poses);
  stats.candidate_pairs = pairs.size();
  std::vector<ContactPoint> contacts;
  for (const auto& [i, j] : pairs) {
    const auto merged = detect_pair(system, poses, i, j, multiscale, cfg, stats.detection);
    contacts.insert(contacts.end(), merged.begin(), merged.end());
  }
  raw_count = contacts.size();
  return contacts;
}

Acceleration acceleration_of(const Particle& p, const Load& load, const Quat& rotation,
                             const Vec3& omega, const Vec3& gravity) {
  Acceleration a = acceleration_from(load.force, load.torque, p.mass(), rotation, omega);
  if (!p.immovable()) a.dv += gravity;
  return a;
}

// θ-relaxed load blending and the Picard convergence test.
class Relaxation {
 public:
  Relaxation(std::size_t n, const StepConfig& cfg) : cfg_(cfg), theta_(n, 1), blended_(n) {}

  /// Blends `fresh` into the running loads; returns true when every
  /// particle's load changed by at most the relative tolerance.
  bool update(const std::vector<Load>& fresh, bool first) {
    bool converged = true;
    const Real floor = Real(1e-9) * cfg_.force.k_s;
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      const Load prev = blended_[i];
      if (!first && fresh[i].force.norm() > 0 && prev.force.norm() > 0) {
        theta_[i] = fresh[i].force.dot(prev.force) > 0
                        ? std::min(Real(1), theta_[i] * cfg_.theta_grow)
                        : std::max(cfg_.theta_min, theta_[i] * cfg_.theta_shrink);
      }
      const Real t = theta_[i];
      Load next;
      next.force = t * fresh[i].force + (1 - t) * prev.force;
      next.torque = t * fresh[i].torque + (1 - t) * prev.torque;
      blended_[i] = next;
      converged = converged && close(next.force, prev.force, floor) &&
                  close(next.torque, prev.torque, floor);
    }
    return converged;
  }

  const std::vector<Load>& loads() const { return blended_; }

 private:
  bool close(const Vec3& a, const Vec3& b, Real floor) const {
    const Real scale = std::max({a.norm(), b.norm(), floor});
    return (a - b).norm() <= cfg_.convergence_rel_tol * scale;
  }

  const StepConfig& cfg_;
  std::vector<Real> theta_;
  std::vector<Load> blended_;
};

struct Guess {
  std::vector<RigidMotion> poses;
  std::vector<Vec3> v;
  std::vector<Vec3> omega;
};

Guess initial_guess(const System& system) {
  Guess g;
  for (const auto& p : system.particles) {
    g.poses.push_back(p.pose);
    g.v.push_back(p.v);
    g.omega.push_back(p.omega);
  }
  return g;
}

// (v, ω)guess = (v, ω) + dt (dv, dω); geometry re-advanced from the
// committed pose.
void update_guess(const System& system, const std::vector<Load>& loads, const StepConfig& cfg,
                  Guess& g) {
  for (std::size_t i = 0; i < system.particles.size(); ++i) {
    const auto& p = system.particles[i];
    const Acceleration a = acceleration_of(p, loads[i], g.poses[i].rotation, g.omega[i], system.gravity);
    if (!p.immovable()) {
      g.v[i] = p.v + cfg.dt * a.dv;
      g.omega[i] = p.omega + cfg.dt * a.domega;
    }
    g.poses[i] = p.pose.advanced(g.v[i], g.omega[i], cfg.dt);
  }
}

void commit(System& system, const Guess& g, const StepConfig& cfg) {
  for (std::size_t i = 0; i < system.particles.size(); ++i) {
    auto& p = system.particles[i];
    p.pose = g.poses[i];
    p.v = g.v[i];
    p.omega = g.omega[i];
  }
  system.time += cfg.dt;
}

std::uint64_t checks_of(const DetectionStats& d) { return d.counters.checks(); }

}  // namespace

// ---------------------------------------------------------------------------
// explicit

StepStats explicit_step(System& system, const StepConfig& cfg) {
  if (cfg.mode != StepMode::ExplicitSingle && cfg.mode != StepMode::ExplicitMultiscale)
    throw InvalidSpec("explicit_step needs an explicit mode");
  StepStats stats;
  const auto poses = poses_of(system);
  const auto contacts =
      detect_all(system, poses, cfg.mode == StepMode::ExplicitMultiscale, cfg, stats, stats.raw_contacts);
  stats.merged_contacts = contacts.size();
  const auto loads = contact_loads(system, poses, contacts, cfg);
  for (std::size_t i = 0; i < system.particles.size(); ++i) {
    auto& p = system.particles[i];
    const Acceleration a = acceleration_of(p, loads[i], p.pose.rotation, p.omega, system.gravity);
    p.pose = p.pose.advanced(p.v, p.omega, cfg.dt);
    if (p.immovable()) continue;
    p.v += cfg.dt * a.dv;
    p.omega += cfg.dt * a.domega;
  }
  system.time += cfg.dt;
  stats.sweep_checks.push_back(checks_of(stats.detection));
  return stats;
}

// ---------------------------------------------------------------------------
// implicit

StepStats implicit_step(System& system, const StepConfig& cfg) {
  if (cfg.mode != StepMode::ImplicitSingle && cfg.mode != StepMode::ImplicitSurrogateInPicard)
    throw InvalidSpec("implicit_step needs ImplicitSingle or ImplicitSurrogateInPicard");
  const bool multiscale = cfg.mode == StepMode::ImplicitSurrogateInPicard;
  StepStats stats;
  Guess g = initial_guess(system);
  Relaxation relax(system.particles.size(), cfg);
  for (int it = 1; it <= cfg.max_picard_iterations; ++it) {
    const std::uint64_t before = checks_of(stats.detection);
    const auto contacts = detect_all(system, g.poses, multiscale, cfg, stats, stats.raw_contacts);
    stats.sweep_checks.push_back(checks_of(stats.detection) - before);
    stats.merged_contacts = contacts.size();
    const auto fresh = contact_loads(system, g.poses, contacts, cfg);
    const bool converged = relax.update(fresh, it == 1);
    update_guess(system, relax.loads(), cfg, g);
    if (converged) {
      stats.picard_iterations = it;
      commit(system, g, cfg);
      return stats;
    }
  }
  throw PicardDiverged("Picard iteration did not converge", cfg.max_picard_iterations);
}

// ---------------------------------------------------------------------------
// multiscale Picard

namespace {

struct SweepResult {
  std::vector<ContactPoint> contacts;
  bool changed = false;
};

// One sweep over the active sets of a particle pair.
SweepResult sweep_pair(const System& system, std::span<const RigidMotion> poses, int i, int j,
                       PairActiveSets& sets, const StepConfig& cfg, DetectionStats& stats) {
  const Hierarchy& hi = system.particles[i].shape->hierarchy;
  const Hierarchy& hj = system.particles[j].shape->hierarchy;
  const PlacedHierarchy a{&hi, poses[i], i};
  const PlacedHierarchy b{&hj, poses[j], j};
  const std::vector<int> ea(sets.first.active.begin(), sets.first.active.end());
  const std::vector<int> eb(sets.second.active.begin(), sets.second.active.end());

  std::vector<KernelJob> jobs;
  jobs.reserve(ea.size() * eb.size());
  std::vector<Triangle> wb;
  for (int y : eb) wb.push_back(b.world(y));
  for (int x : ea) {
    const Triangle tx = a.world(x);
    for (std::size_t l = 0; l < eb.size(); ++l) {
      const bool mesh_pair = hi.is_mesh(x) && hj.is_mesh(eb[l]);
      jobs.push_back({tx, wb[l], Halo{hi.epsilon(x), hj.epsilon(eb[l])}, mesh_pair});
      stats.add_level(std::max(hi.height(x), hj.height(eb[l])), 1);
    }
  }
  const auto results = run_kernel_jobs(jobs, cfg.kernel, stats.counters, cfg.workers);

  SweepResult out;
  std::vector<char> widen_a(ea.size(), 0), widen_b(eb.size(), 0);
  for (std::size_t n = 0; n < results.size(); ++n) {
    if (results[n].error != KernelError::None)
      throw DegenerateTriangle("degenerate triangle in multiscale Picard sweep");
    const std::size_t k = n / eb.size();
    const std::size_t l = n % eb.size();
    const auto& r = results[n].result;
    const auto verdict = classify_pairing(r, jobs[n].allow_fallback, jobs[n].halo);
    if (verdict == PairingOutcome::Separated) continue;
    widen_a[k] = widen_b[l] = 1;
    if (verdict == PairingOutcome::Contact) {
      ContactPoint c = make_contact(r, jobs[n].a, jobs[n].halo);
      c.particle_i = i;
      c.particle_j = j;
      c.source_i = hi.is_mesh(ea[k]) ? hi.mesh_index(ea[k]) : ea[k];
      c.source_j = hj.is_mesh(eb[l]) ? hj.mesh_index(eb[l]) : eb[l];
      c.level_i = hi.height(ea[k]);
      c.level_j = hj.height(eb[l]);
      out.contacts.push_back(c);
    }
  }

  auto advance = [&](ActiveSet& set, const Hierarchy& h, const std::vector<int>& elems,
                     const std::vector<char>& widen) {
    std::set<int> next = set.active;
    std::vector<int> narrow;
    for (std::size_t k = 0; k < elems.size(); ++k) {
      const int e = elems[k];
      if (!widen[k]) {
        narrow.push_back(e);
      } else if (!h.is_mesh(e)) {
        next.erase(e);
        next.insert(h.children(e).begin(), h.children(e).end());
      }
    }
    narrow_active_set(next, set, h, narrow);
    active_set_cleanup(next, h);
    return commit_active_set(set, std::move(next));
  };
  const bool ca = advance(sets.first, hi, ea, widen_a);
  const bool cb = advance(sets.second, hj, eb, widen_b);
  out.changed = ca || cb;
  return out;
}

}  // namespace

StepStats multiscale_picard_step(System& system, const StepConfig& cfg,
                                 const SweepObserver& observer) {
  if (cfg.mode != StepMode::ImplicitMultiscalePicard)
    throw InvalidSpec("multiscale_picard_step needs ImplicitMultiscalePicard");
  StepStats stats;
  Guess g = initial_guess(system);
  Relaxation relax(system.particles.size(), cfg);
  ActiveSetMap sets;
  for (int it = 1; it <= cfg.max_picard_iterations; ++it) {
    const std::uint64_t before = checks_of(stats.detection);
    const auto pairs = broad_phase(system, g.poses);
    stats.candidate_pairs = pairs.size();
    std::vector<ContactPoint> contacts;
    bool changed = false;
    std::size_t raw = 0;
    for (const auto& [i, j] : pairs) {
      auto it_set = sets.find({i, j});
      if (it_set == sets.end()) {
        it_set = sets.emplace(std::pair(i, j),
                              PairActiveSets{initial_active_set(system.particles[i].shape->hierarchy),
                                             initial_active_set(system.particles[j].shape->hierarchy)})
                     .first;
      }
      auto sweep = sweep_pair(system, g.poses, i, j, it_set->second, cfg, stats.detection);
      raw += sweep.contacts.size();
      if (sweep.changed) {
        changed = true;
        ++stats.active_set_changes;
      }
      const auto merged = merge_contacts(sweep.contacts, cfg.kernel.epsilon);
      contacts.insert(contacts.end(), merged.begin(), merged.end());
    }
    stats.sweep_checks.push_back(checks_of(stats.detection) - before);
    stats.raw_contacts = raw;
    stats.merged_contacts = contacts.size();
    if (observer) observer(it, sets);
    const auto fresh = contact_loads(system, g.poses, contacts, cfg);
    const bool converged = relax.update(fresh, it == 1);
    update_guess(system, relax.loads(), cfg, g);
    if (converged && !changed) {
      stats.picard_iterations = it;
      commit(system, g, cfg);
      return stats;
    }
  }
  throw PicardDiverged("multiscale Picard iteration did not converge", cfg.max_picard_iterations);
}

StepStats step(System& system, const StepConfig& cfg) {
  switch (cfg.mode) {
    case StepMode::ExplicitSingle:
    case StepMode::ExplicitMultiscale: return explicit_step(system, cfg);
    case StepMode::ImplicitSingle:
    case StepMode::ImplicitSurrogateInPicard: return implicit_step(system, cfg);
    case StepMode::ImplicitMultiscalePicard: return multiscale_picard_step(system, cfg);
  }
  throw InvalidSpec("unknown step mode");
}

}  // namespace dem

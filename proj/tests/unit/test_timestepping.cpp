#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "dem/shapes.hpp"
#include "dem/timestepping.hpp"
#include "test_support.hpp"

using namespace dem;
using dem::testing::random_rotation;

namespace {

constexpr Real kEps = Real(1e-2);

std::shared_ptr<ParticleShape> sphere(int count, Real eta, std::uint64_t seed) {
  TriangleMesh mesh = generate_sphere_with_count(count, eta, seed);
  mesh.scale(Real(0.5));
  return make_shape(std::move(mesh), 8, FitParams{}, seed, kEps, 1, false);
}

Particle particle(std::shared_ptr<const ParticleShape> s, const Vec3& x, const Vec3& v = Vec3::Zero()) {
  Particle p;
  p.shape = std::move(s);
  p.pose.translation = x;
  p.v = v;
  return p;
}

std::vector<RigidMotion> poses(const System& s) {
  std::vector<RigidMotion> out;
  for (const auto& p : s.particles) out.push_back(p.pose);
  return out;
}

std::vector<ContactPoint> detect(const System& s, bool multiscale, DetectionStats* stats = nullptr) {
  DetectionStats local;
  StepConfig cfg;
  const auto ps = poses(s);
  return detect_pair(s, ps, 0, 1, multiscale, cfg, stats ? *stats : local);
}

// Two randomly rotated particles, the second moved along a random direction
// until the pair lies just inside contact range.
System touching_pair(std::shared_ptr<const ParticleShape> a, std::shared_ptr<const ParticleShape> b,
                     std::mt19937_64& rng) {
  System s;
  s.particles.push_back(particle(a, Vec3::Zero()));
  s.particles.push_back(particle(b, Vec3::Zero()));
  s.particles[0].pose.rotation = random_rotation(rng);
  s.particles[1].pose.rotation = random_rotation(rng);
  const Vec3 u = dem::testing::random_vec(rng).normalized();
  Real lo = 0, hi = a->bounding_radius + b->bounding_radius + 3 * kEps;
  for (int it = 0; it < 30; ++it) {
    const Real mid = (lo + hi) / 2;
    s.particles[1].pose.translation = mid * u;
    (detect(s, false).empty() ? hi : lo) = mid;
  }
  std::uniform_real_distribution<Real> depth(0, kEps);
  s.particles[1].pose.translation = (lo - depth(rng)) * u;
  return s;
}

Real momentum_scale(const System& s) {
  Real m = 0;
  for (const auto& p : s.particles) m += p.mass().mass * p.v.norm();
  return m;
}

Vec3 momentum(const System& s) {
  Vec3 m = Vec3::Zero();
  for (const auto& p : s.particles) m += p.mass().mass * p.v;
  return m;
}

void expect_same_contacts(const std::vector<ContactPoint>& a, const std::vector<ContactPoint>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_LE((a[k].position - b[k].position).norm(), 1e-5);
    EXPECT_LE((a[k].normal - b[k].normal).norm(), 1e-5);
  }
}

// Every mesh triangle covered exactly once, no element with an active ancestor.
void expect_consistent(const std::set<int>& active, const Hierarchy& h) {
  for (int e : active)
    for (int up = h.parent(e); up >= 0; up = h.parent(up)) EXPECT_FALSE(active.count(up)) << e;
  auto covered = covered_mesh_triangles(active, h);
  std::sort(covered.begin(), covered.end());
  ASSERT_EQ(covered.size(), h.tree().mesh_size);
  for (std::size_t k = 0; k < covered.size(); ++k) EXPECT_EQ(covered[k], static_cast<int>(k));
}

}  // namespace

TEST(StepConfig, ModeNamesRoundTrip) {
  for (auto m : {StepMode::ExplicitSingle, StepMode::ExplicitMultiscale, StepMode::ImplicitSingle,
                 StepMode::ImplicitSurrogateInPicard, StepMode::ImplicitMultiscalePicard})
    EXPECT_EQ(step_mode_from_string(to_string(m)), m);
  EXPECT_THROW(step_mode_from_string("rk4"), InvalidSpec);
}

TEST(StepConfig, ValidateRejectsBadValues) {
  StepConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dt = 0;
  EXPECT_THROW(c.validate(), InvalidSpec);
  c = StepConfig{};
  c.convergence_rel_tol = -1;
  EXPECT_THROW(c.validate(), InvalidSpec);
  c = StepConfig{};
  c.theta_min = 0;
  EXPECT_THROW(c.validate(), InvalidSpec);
  c = StepConfig{};
  c.max_picard_iterations = 0;
  EXPECT_THROW(c.validate(), InvalidSpec);
}

TEST(BroadPhase, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  auto small = sphere(20, 1.2, 1);
  auto big = sphere(20, 1.2, 2);
  System s;
  std::uniform_real_distribution<Real> u(0, 6);
  for (int k = 0; k < 60; ++k)
    s.particles.push_back(particle(small, Vec3(u(rng), u(rng), u(rng))));
  // one particle much larger than a grid cell
  big->bounding_radius = 2;
  s.particles.push_back(particle(big, Vec3(3, 3, 3)));

  const auto ps = poses(s);
  std::vector<std::pair<int, int>> brute;
  for (int i = 0; i < static_cast<int>(s.particles.size()); ++i)
    for (int j = i + 1; j < static_cast<int>(s.particles.size()); ++j) {
      const Real r = s.particles[i].shape->bounding_radius + s.particles[j].shape->bounding_radius + 2 * kEps;
      if ((ps[i].translation - ps[j].translation).norm() <= r) brute.emplace_back(i, j);
    }
  EXPECT_EQ(broad_phase(s, ps), brute);
  EXPECT_FALSE(brute.empty());
}

TEST(ExplicitStep, BallisticDriftWithoutNeighbours) {
  auto shape = sphere(80, 1.4, 5);
  System s;
  s.particles.push_back(particle(shape, Vec3(0, 0, 0), Vec3(1, 2, 3)));
  s.particles.push_back(particle(shape, Vec3(10, 0, 0), Vec3(-1, 0, 0)));
  StepConfig cfg;
  cfg.dt = Real(1e-3);
  const auto stats = explicit_step(s, cfg);
  EXPECT_EQ(stats.candidate_pairs, 0u);
  EXPECT_EQ(stats.merged_contacts, 0u);
  EXPECT_TRUE(s.particles[0].pose.translation.isApprox(Vec3(1e-3, 2e-3, 3e-3), 1e-12));
  EXPECT_EQ(s.particles[0].v, Vec3(1, 2, 3));
  EXPECT_TRUE(s.particles[1].pose.translation.isApprox(Vec3(10 - 1e-3, 0, 0), 1e-12));
  EXPECT_DOUBLE_EQ(s.time, 1e-3);
}

TEST(ExplicitStep, HeadOnOverlapGivesOpposingImpulses) {
  std::mt19937_64 rng(11);
  System s = touching_pair(sphere(80, 1, 1), sphere(80, 1, 2), rng);
  const System before = s;
  StepConfig cfg;
  const auto stats = explicit_step(s, cfg);
  ASSERT_GT(stats.merged_contacts, 0u);
  const Vec3 p0 = s.particles[0].mass().mass * (s.particles[0].v - before.particles[0].v);
  const Vec3 p1 = s.particles[1].mass().mass * (s.particles[1].v - before.particles[1].v);
  EXPECT_GT(p0.norm(), 0);
  EXPECT_LE((p0 + p1).norm(), 1e-12 * p0.norm());
  // the pair is pushed apart
  const Vec3 d = before.particles[1].pose.translation - before.particles[0].pose.translation;
  EXPECT_GT(p1.dot(d), 0);
}

TEST(ExplicitStep, ImmovableParticleKeepsItsState) {
  std::mt19937_64 rng(4);
  System s = touching_pair(sphere(80, 1, 1), sphere(80, 1, 2), rng);
  auto fixed = make_shape(s.particles[1].shape->mesh, 8, FitParams{}, 2, kEps, 1, true);
  s.particles[1].shape = fixed;
  s.gravity = Vec3(0, 0, -9.81);
  const RigidMotion pose = s.particles[1].pose;
  StepConfig cfg;
  explicit_step(s, cfg);
  EXPECT_EQ(s.particles[1].v, Vec3::Zero());
  EXPECT_EQ(s.particles[1].pose.translation, pose.translation);
}

TEST(ExplicitStep, MomentumConservedThroughCollision) {
  std::mt19937_64 rng(6);
  System s = touching_pair(sphere(80, 1.4, 1), sphere(80, 1.4, 2), rng);
  const Vec3 d = (s.particles[1].pose.translation - s.particles[0].pose.translation).normalized();
  s.particles[0].v = Real(0.5) * d;
  s.particles[1].v = Real(-0.5) * d + Vec3(0, 0.1, 0);
  StepConfig cfg;
  cfg.mode = StepMode::ExplicitMultiscale;
  const Real scale = momentum_scale(s);
  int contact_steps = 0;
  for (int n = 0; n < 400; ++n) {
    const Vec3 p = momentum(s);
    contact_steps += explicit_step(s, cfg).merged_contacts > 0;
    EXPECT_LE((momentum(s) - p).norm(), 1e-12 * scale);
  }
  EXPECT_GT(contact_steps, 0);
}

TEST(Multiscale, MatchesSingleLevelOnTouchingPairs) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 6; ++trial) {
    System s = touching_pair(sphere(80, 1.4, 2 * trial + 1), sphere(80, 1.4, 2 * trial + 2), rng);
    DetectionStats single, multi;
    const auto a = detect(s, false, &single);
    const auto b = detect(s, true, &multi);
    ASSERT_FALSE(a.empty());
    expect_same_contacts(a, b);
    EXPECT_LT(multi.counters.checks(), single.counters.checks());
  }
}

TEST(Multiscale, ExplicitModesAgreeOnState) {
  std::mt19937_64 rng(8);
  System s = touching_pair(sphere(80, 1.4, 3), sphere(80, 1.4, 4), rng);
  s.particles[0].v = Vec3(0.3, 0, 0);
  System m = s;
  StepConfig cfg;
  StepConfig mcfg;
  mcfg.mode = StepMode::ExplicitMultiscale;
  for (int n = 0; n < 5; ++n) {
    explicit_step(s, cfg);
    explicit_step(m, mcfg);
  }
  for (int k = 0; k < 2; ++k) {
    EXPECT_LE((s.particles[k].v - m.particles[k].v).norm(), 1e-9);
    EXPECT_LE((s.particles[k].omega - m.particles[k].omega).norm(), 1e-9);
    EXPECT_LE((s.particles[k].pose.translation - m.particles[k].pose.translation).norm(), 1e-12);
  }
}

TEST(Multiscale, RootEarlyOutSkipsFinestLevel) {
  auto a = sphere(320, 1.4, 1);
  System s;
  s.particles.push_back(particle(a, Vec3::Zero()));
  s.particles.push_back(particle(a, Vec3(3, 0, 0)));
  DetectionStats stats;
  EXPECT_TRUE(detect(s, true, &stats).empty());
  EXPECT_EQ(stats.counters.checks(), 1u);
  ASSERT_FALSE(stats.level_checks.empty());
  EXPECT_EQ(stats.level_checks[0], 0u);
  EXPECT_EQ(stats.level_checks.back(), 1u);
}

TEST(Multiscale, SurrogateLevelsNeverFallBack) {
  std::mt19937_64 rng(5);
  System s = touching_pair(sphere(320, 1.4, 1), sphere(320, 1.4, 2), rng);
  DetectionStats stats;
  detect(s, true, &stats);
  EXPECT_EQ(stats.counters.comparison_invocations, stats.counters.fallback_invocations);
}

TEST(Multiscale, MeshSideStaysFixedWhileOtherUnfolds) {
  // a plane of two large triangles reaches its mesh level long before the sphere
  TriangleMesh plane;
  plane.vertices = {Vec3(-3, -3, 0), Vec3(3, -3, 0), Vec3(3, 3, 0), Vec3(-3, 3, 0)};
  plane.faces = {{0, 1, 2}, {0, 2, 3}};
  auto plane_shape = make_shape(plane, 8, FitParams{}, 1, kEps, 1, true);
  auto ball = sphere(320, 1, 3);
  System s;
  s.particles.push_back(particle(ball, Vec3(0.2, 0.1, ball->bounding_radius + Real(0.5) * kEps)));
  s.particles.push_back(particle(plane_shape, Vec3::Zero()));
  const Hierarchy& hb = ball->hierarchy;
  const Hierarchy& hp = plane_shape->hierarchy;

  DetectionStats stats;
  std::vector<std::vector<std::pair<int, int>>> rounds;
  const PlacedHierarchy pa{&hb, s.particles[0].pose, 0};
  const PlacedHierarchy pb{&hp, s.particles[1].pose, 1};
  const auto contacts = multiscale_contacts(pa, pb, KernelParams{}, stats, 1, &rounds);
  EXPECT_FALSE(contacts.empty());
  ASSERT_GE(rounds.size(), 3u);
  int asymmetric = 0;
  for (std::size_t r = 1; r < rounds.size(); ++r) {
    const std::set<std::pair<int, int>> prev(rounds[r - 1].begin(), rounds[r - 1].end());
    for (auto [x, y] : rounds[r]) {
      // a side may only stay put when it is a mesh triangle
      const bool both = prev.count({hb.parent(x), hp.parent(y)}) > 0;
      const bool keep_y = hp.is_mesh(y) && prev.count({hb.parent(x), y});
      const bool keep_x = hb.is_mesh(x) && prev.count({x, hp.parent(y)});
      EXPECT_TRUE(both || keep_x || keep_y) << "round " << r;
      asymmetric += keep_x || keep_y;
    }
  }
  EXPECT_GT(asymmetric, 0);
}

TEST(ImplicitStep, ForceFreeConvergesOnceAndMatchesDrift) {
  auto shape = sphere(80, 1.4, 5);
  System s;
  s.particles.push_back(particle(shape, Vec3(0, 0, 0), Vec3(1, 2, 3)));
  s.particles.push_back(particle(shape, Vec3(10, 0, 0), Vec3(-1, 0, 0)));
  System e = s;
  StepConfig cfg;
  cfg.mode = StepMode::ImplicitSingle;
  const auto stats = implicit_step(s, cfg);
  EXPECT_EQ(stats.picard_iterations, 1);
  StepConfig ecfg;
  explicit_step(e, ecfg);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LE((s.particles[k].pose.translation - e.particles[k].pose.translation).norm(), 1e-14);
    EXPECT_EQ(s.particles[k].v, e.particles[k].v);
  }
}

TEST(ImplicitStep, WrongModeThrows) {
  System s;
  StepConfig cfg;
  EXPECT_THROW(implicit_step(s, cfg), InvalidSpec);
  cfg.mode = StepMode::ImplicitSingle;
  EXPECT_THROW(explicit_step(s, cfg), InvalidSpec);
  EXPECT_THROW(multiscale_picard_step(s, cfg), InvalidSpec);
}

TEST(ImplicitStep, DivergenceGuardThrows) {
  std::mt19937_64 rng(2);
  System s = touching_pair(sphere(80, 1, 1), sphere(80, 1, 2), rng);
  s.particles[0].v = (s.particles[1].pose.translation - s.particles[0].pose.translation).normalized();
  StepConfig cfg;
  cfg.mode = StepMode::ImplicitSingle;
  cfg.max_picard_iterations = 1;
  cfg.convergence_rel_tol = Real(1e-12);
  try {
    implicit_step(s, cfg);
    FAIL() << "expected PicardDiverged";
  } catch (const PicardDiverged& e) {
    EXPECT_EQ(e.iterations(), 1);
  }
}

TEST(ImplicitStep, SurrogateDetectionReproducesFlatImplicit) {
  std::mt19937_64 rng(13);
  System flat = touching_pair(sphere(80, 1.4, 1), sphere(80, 1.4, 2), rng);
  const Vec3 d = (flat.particles[1].pose.translation - flat.particles[0].pose.translation).normalized();
  flat.particles[0].v = Real(0.3) * d;
  flat.particles[1].v = Real(-0.3) * d;
  System surr = flat;
  StepConfig a;
  a.mode = StepMode::ImplicitSingle;
  StepConfig b = a;
  b.mode = StepMode::ImplicitSurrogateInPicard;
  for (int n = 0; n < 10; ++n) {
    const auto sa = implicit_step(flat, a);
    const auto sb = implicit_step(surr, b);
    EXPECT_EQ(sa.picard_iterations, sb.picard_iterations);
    for (int k = 0; k < 2; ++k) {
      EXPECT_LE((flat.particles[k].v - surr.particles[k].v).norm(), 1e-5);
      EXPECT_LE((flat.particles[k].omega - surr.particles[k].omega).norm(), 1e-5);
      EXPECT_LE((flat.particles[k].pose.translation - surr.particles[k].pose.translation).norm(), 1e-5);
    }
  }
}

TEST(ImplicitStep, ConvergedLoadsAreAFixedPoint) {
  std::mt19937_64 rng(17);
  System s = touching_pair(sphere(80, 1.4, 1), sphere(80, 1.4, 2), rng);
  StepConfig cfg;
  cfg.mode = StepMode::ImplicitSingle;
  for (int n = 0; n < 3; ++n) {
    System before = s;
    implicit_step(s, cfg);
    // loads on the committed geometry drive the committed velocities
    DetectionStats st;
    const auto ps = poses(s);
    const auto contacts = detect_pair(s, ps, 0, 1, false, cfg, st);
    const auto loads = contact_loads(s, ps, contacts, cfg);
    for (int k = 0; k < 2; ++k) {
      const Vec3 implied = before.particles[k].mass().mass *
                           (s.particles[k].v - before.particles[k].v) / cfg.dt;
      const Real scale = std::max({implied.norm(), loads[k].force.norm(), Real(1e-9) * cfg.force.k_s});
      EXPECT_LE((implied - loads[k].force).norm(), 3 * cfg.convergence_rel_tol * scale);
    }
  }
}

TEST(MultiscalePicard, NoContactStaysAtRoots) {
  auto shape = sphere(80, 1.4, 5);
  System s;
  s.particles.push_back(particle(shape, Vec3(0, 0, 0), Vec3(1, 0, 0)));
  s.particles.push_back(particle(shape, Vec3(shape->bounding_radius * 2 + 0.015, 0, 0)));
  StepConfig cfg;
  cfg.mode = StepMode::ImplicitMultiscalePicard;
  int sweeps = 0;
  const auto stats = multiscale_picard_step(s, cfg, [&](int, const ActiveSetMap& sets) {
    ++sweeps;
    for (const auto& [pair, st] : sets) {
      EXPECT_EQ(st.first.active, std::set<int>{0});
      EXPECT_EQ(st.second.active, std::set<int>{0});
    }
  });
  EXPECT_EQ(stats.picard_iterations, 1);
  EXPECT_EQ(sweeps, 1);
}

TEST(MultiscalePicard, ConvergesToFlatImplicitState) {
  std::mt19937_64 rng(13);
  System flat = touching_pair(sphere(80, 1.4, 1), sphere(80, 1.4, 2), rng);
  const Vec3 d = (flat.particles[1].pose.translation - flat.particles[0].pose.translation).normalized();
  flat.particles[0].v = Real(0.3) * d;
  flat.particles[1].v = Real(-0.3) * d;
  System ms = flat;
  StepConfig a;
  a.mode = StepMode::ImplicitSingle;
  a.convergence_rel_tol = Real(1e-4);
  StepConfig b = a;
  b.mode = StepMode::ImplicitMultiscalePicard;
  for (int n = 0; n < 5; ++n) {
    implicit_step(flat, a);
    multiscale_picard_step(ms, b, [&](int, const ActiveSetMap& sets) {
      for (const auto& [pair, st] : sets) {
        expect_consistent(st.first.active, ms.particles[pair.first].shape->hierarchy);
        expect_consistent(st.second.active, ms.particles[pair.second].shape->hierarchy);
      }
    });
    for (int k = 0; k < 2; ++k) {
      const Real vs = flat.particles[k].v.norm();
      EXPECT_LE((flat.particles[k].v - ms.particles[k].v).norm(), 5e-3 * vs);
      const Real ws = std::max(flat.particles[k].omega.norm(), vs);
      EXPECT_LE((flat.particles[k].omega - ms.particles[k].omega).norm(), 5e-3 * ws);
    }
  }
}

// ---------------------------------------------------------------------------
// active-set operations

namespace {

struct SmallTree {
  std::shared_ptr<ParticleShape> shape = sphere(320, 1.4, 7);
  const Hierarchy& h = shape->hierarchy;
};

}  // namespace

TEST(ActiveSet, NarrowingRootIsIdentity) {
  SmallTree t;
  ActiveSet st = initial_active_set(t.h);
  std::set<int> next = st.active;
  const std::vector<int> listed{0};
  narrow_active_set(next, st, t.h, listed);
  EXPECT_EQ(next, std::set<int>{0});
}

TEST(ActiveSet, NarrowingAllChildrenRestoresParent) {
  SmallTree t;
  const auto& kids = t.h.children(0);
  ActiveSet st;
  st.active.insert(kids.begin(), kids.end());
  std::set<int> next = st.active;
  narrow_active_set(next, st, t.h, kids);
  EXPECT_EQ(next, std::set<int>{0});
}

TEST(ActiveSet, VetoedElementStays) {
  SmallTree t;
  const auto& kids = t.h.children(0);
  ActiveSet st = initial_active_set(t.h);
  // widen, narrow back, widen again: the children enter the memory set
  EXPECT_TRUE(commit_active_set(st, std::set<int>(kids.begin(), kids.end())));
  EXPECT_TRUE(commit_active_set(st, {0}));
  EXPECT_TRUE(commit_active_set(st, std::set<int>(kids.begin(), kids.end())));
  std::set<int> remembered(kids.begin(), kids.end());
  remembered.insert(0);
  EXPECT_EQ(st.memory, remembered);
  std::set<int> next = st.active;
  narrow_active_set(next, st, t.h, kids);
  EXPECT_EQ(next, st.active);
  EXPECT_FALSE(commit_active_set(st, next));
}

TEST(ActiveSet, CleanupKeepsConsistentSets) {
  SmallTree t;
  const auto& kids = t.h.children(0);
  std::set<int> s(kids.begin(), kids.end());
  const std::set<int> copy = s;
  active_set_cleanup(s, t.h);
  EXPECT_EQ(s, copy);
}

TEST(ActiveSet, CleanupAddsSiblingsAndDropsParent) {
  SmallTree t;
  const auto& kids = t.h.children(0);
  std::set<int> s{0, kids[0]};
  active_set_cleanup(s, t.h);
  EXPECT_EQ(s, std::set<int>(kids.begin(), kids.end()));
}

TEST(ActiveSet, CleanupInvariantOnRandomUnfolds) {
  SmallTree t;
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    ActiveSet st = initial_active_set(t.h);
    for (int round = 0; round < 12; ++round) {
      std::set<int> next = st.active;
      std::vector<int> elems(st.active.begin(), st.active.end());
      std::vector<int> narrow;
      for (int e : elems) {
        const int pick = static_cast<int>(rng() % 3);
        if (pick == 0 && !t.h.is_mesh(e)) {
          next.erase(e);
          next.insert(t.h.children(e).begin(), t.h.children(e).end());
        } else if (pick == 1) {
          narrow.push_back(e);
        }
      }
      narrow_active_set(next, st, t.h, narrow);
      active_set_cleanup(next, t.h);
      commit_active_set(st, next);
      expect_consistent(st.active, t.h);
      if (::testing::Test::HasFailure()) return;
    }
  }
}

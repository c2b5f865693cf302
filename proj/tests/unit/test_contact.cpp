#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>

#include "dem/contact.hpp"
#include "dem/shapes.hpp"
#include "test_support.hpp"

using namespace dem;
using dem::testing::random_vec;
using dem::testing::translated;
using dem::testing::unit_cube;
using dem::testing::unit_triangle;

namespace {

constexpr Real kEps = Real(1e-2);

MassProperties point_mass(Real m) {
  MassProperties p;
  p.mass = m;
  return p;
}

ContactPoint contact_with_normal(const Vec3& n, const Vec3& at = Vec3::Zero()) {
  ContactPoint c;
  c.position = at;
  c.normal = n;
  c.epsilon = kEps;
  return c;
}

std::vector<Triangle> moved(const TriangleMesh& mesh, const RigidMotion& m) {
  std::vector<Triangle> out;
  for (const auto& t : mesh.triangles()) out.push_back(m.apply(t));
  return out;
}

}  // namespace

TEST(ContactDetection, SeparatedSpheresHaveNoContact) {
  const auto mesh = generate_noisy_sphere(1, 1, 0);
  KernelParams p;
  KernelCounters counters;
  const auto a = mesh.triangles();
  const auto b = moved(mesh, {Quat::Identity(), Vec3(2 + 3 * kEps, 0, 0)});
  EXPECT_TRUE(find_contacts_single_level(a, b, p, counters).empty());
  EXPECT_EQ(counters.checks(), a.size() * b.size());
}

TEST(ContactDetection, FaceToFaceGivesOneMergedContactAtMidplane) {
  const std::vector<Triangle> a{unit_triangle()};
  const std::vector<Triangle> b{translated(unit_triangle(), Vec3(0, 0, kEps))};
  KernelParams p;
  KernelCounters counters;
  const auto raw = find_contacts_single_level(a, b, p, counters);
  const auto merged = merge_contacts(raw, kEps);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_NEAR(merged[0].position.z(), kEps / 2, 1e-12);
  EXPECT_NEAR(merged[0].normal.norm(), kEps / 2, 1e-12);
  EXPECT_LT(merged[0].normal.z(), 0);  // toward the side-i triangle
}

TEST(ContactDetection, SameSetSkipsDiagonal) {
  const std::vector<Triangle> a{unit_triangle(), translated(unit_triangle(), Vec3(0, 0, kEps))};
  KernelParams p;
  KernelCounters counters;
  const auto contacts = find_contacts_single_level(a, a, p, counters, {0, 0}, true);
  EXPECT_EQ(counters.checks(), 2u);
  ASSERT_EQ(contacts.size(), 2u);
  EXPECT_EQ(contacts[0].source_i, 0);
  EXPECT_EQ(contacts[0].source_j, 1);
  EXPECT_EQ(contacts[1].source_i, 1);
  EXPECT_EQ(contacts[1].source_j, 0);
}

TEST(ContactDetection, SoupOverloadAgrees) {
  const auto mesh = generate_noisy_sphere(1, 1.4, 2);
  const RigidMotion m{Quat::Identity(), Vec3(2.005, 0.1, 0)};
  KernelParams p;
  KernelCounters c1, c2;
  const auto a = find_contacts_single_level(mesh.triangles(), moved(mesh, m), p, c1);
  const auto b = find_contacts_single_level(mesh.soup(), apply_motion(mesh.soup(), m), p, c2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(c1, c2);
}

TEST(ContactDetection, VertexToVertexMergesToOne) {
  // icosahedra whose vertices touch tip to tip across x = 0
  auto mesh = generate_noisy_sphere(0, 1, 0);
  const Vec3 tip = mesh.vertices[0].normalized();
  const Quat align = Quat::FromTwoVectors(tip, Vec3::UnitX());
  const Real gap = kEps;
  const auto a = moved(mesh, {align, Vec3(-1 - gap / 2, 0, 0)});
  const auto b = moved(mesh, {Quat::FromTwoVectors(tip, -Vec3::UnitX()), Vec3(1 + gap / 2, 0, 0)});
  KernelParams p;
  KernelCounters counters;
  const auto raw = find_contacts_single_level(a, b, p, counters);
  EXPECT_EQ(raw.size(), 25u);
  const auto merged = merge_contacts(raw, kEps);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_LT(merged[0].position.norm(), 1e-9);
  EXPECT_NEAR(merged[0].normal.norm(), gap / 2, 1e-9);
}

TEST(ContactDetection, UnequalHalosSplitSegmentByRatio) {
  DistanceResult r;
  r.point_a = Vec3(0, 0, 0);
  r.point_b = Vec3(0, 0, 0.3);
  const auto c = make_contact(r, unit_triangle(), Halo{0.1, 0.2});
  EXPECT_NEAR(c.position.z(), 0.1, 1e-15);
  EXPECT_NEAR(c.normal.norm(), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(c.epsilon, 0.1);
}

TEST(ContactDetection, IntersectingRecordsFallbackDirection) {
  DistanceResult r;
  const auto c = make_contact(r, unit_triangle(), Halo::uniform(kEps));
  EXPECT_EQ(c.normal, Vec3::Zero());
  EXPECT_NEAR((c.fallback_direction - Vec3(0, 0, -1)).norm(), 0, 1e-15);
}

TEST(MergeContacts, EmptyStaysEmpty) {
  EXPECT_TRUE(merge_contacts({}, kEps).empty());
}

TEST(MergeContacts, IdenticalContactsCollapse) {
  const ContactPoint c = contact_with_normal(Vec3(0.001, -0.002, 0.003), Vec3(1, 2, 3));
  const std::vector<ContactPoint> in(5, c);
  const auto out = merge_contacts(in, kEps);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR((out[0].position - c.position).norm(), 0, 1e-15);
  EXPECT_NEAR((out[0].normal - c.normal).norm(), 0, 1e-15);
}

TEST(MergeContacts, IdempotentAndDeterministic) {
  std::mt19937_64 rng(5);
  std::vector<ContactPoint> in;
  for (int i = 0; i < 200; ++i) {
    auto c = contact_with_normal(kEps * Real(0.4) * random_vec(rng), Real(0.05) * random_vec(rng));
    c.particle_j = 1 + i % 2;
    in.push_back(c);
  }
  const auto once = merge_contacts(in, kEps);
  EXPECT_LE(once.size(), in.size());
  EXPECT_EQ(merge_contacts(once, kEps), once);
  EXPECT_EQ(merge_contacts(in, kEps), once);
  for (std::size_t i = 0; i < once.size(); ++i)
    for (std::size_t j = i + 1; j < once.size(); ++j)
      if (once[i].particle_j == once[j].particle_j)
        EXPECT_GT((once[i].position - once[j].position).norm(), kEps);
}

TEST(MergeContacts, DifferentPairsNeverMerge) {
  auto a = contact_with_normal(Vec3(0, 0, 0.001));
  auto b = a;
  b.particle_j = 2;
  const std::vector<ContactPoint> in{a, b};
  EXPECT_EQ(merge_contacts(in, kEps).size(), 2u);
}

TEST(ContactForce, VanishesAtHaloEdge) {
  const auto f = contact_force(contact_with_normal(Vec3(kEps, 0, 0)), point_mass(1),
                               point_mass(1), ForceModelParams{});
  EXPECT_EQ(f, Vec3::Zero());
}

TEST(ContactForce, HalfHaloEqualMassesOfTwo) {
  const auto f = contact_force(contact_with_normal(Vec3(0, kEps / 2, 0)), point_mass(2),
                               point_mass(2), ForceModelParams{});
  EXPECT_NEAR(f.norm(), 500, 1e-9);
  EXPECT_NEAR(f.y(), 500, 1e-9);
}

TEST(ContactForce, ImmovableSideUsesOtherMass) {
  MassProperties wall;
  wall.immovable = true;
  const auto c = contact_with_normal(Vec3(0, 0, kEps / 4));
  const auto f = contact_force(c, wall, point_mass(4), ForceModelParams{});
  EXPECT_NEAR(f.norm(), 1000 * 0.75 * 2, 1e-9);
  const auto huge = contact_force(c, point_mass(1e300), point_mass(4), ForceModelParams{});
  EXPECT_NEAR(huge.norm(), f.norm(), 1e-9);
}

TEST(ContactForce, ContinuousTowardHaloEdge) {
  Real last = std::numeric_limits<Real>::infinity();
  for (Real s = 0.9; s < 1; s += 0.01) {
    const Real mag = contact_force(contact_with_normal(Vec3(s * kEps, 0, 0)), point_mass(1),
                                   point_mass(1), ForceModelParams{})
                         .norm();
    EXPECT_LT(mag, last);
    last = mag;
  }
  EXPECT_LT(last, 1000 * 0.011);
}

TEST(ContactForce, ZeroNormalThrows) {
  EXPECT_THROW(contact_force(contact_with_normal(Vec3::Zero()), point_mass(1), point_mass(1),
                             ForceModelParams{}),
               ZeroNormal);
  ForceModelParams p;
  p.k_s = 0;
  EXPECT_THROW(p.validate(), InvalidSpec);
}

TEST(Accumulate, NoForcesNoAcceleration) {
  const auto acc = accumulate({}, point_mass(1), Vec3::Zero(), Quat::Identity(), Vec3(1, 2, 3));
  EXPECT_EQ(acc.dv, Vec3::Zero());
  EXPECT_EQ(acc.domega, Vec3::Zero());
}

TEST(Accumulate, ForceThroughCentreHasNoTorque) {
  const auto m = mass_properties_from_mesh(unit_cube());
  const Vec3 center(3, 0, 0);
  const std::vector<AppliedForce> f{{center + Vec3(0.5, 0, 0), Vec3(-6, 0, 0)}};
  const auto acc = accumulate(f, m, center, Quat::Identity(), Vec3::Zero());
  EXPECT_NEAR((acc.dv - Vec3(-6, 0, 0)).norm(), 0, 1e-12);
  EXPECT_NEAR(acc.domega.norm(), 0, 1e-12);
}

TEST(Accumulate, MirroredContactsCancelTorque) {
  const auto m = mass_properties_from_mesh(unit_cube());
  const Quat q(Eigen::AngleAxis<Real>(0.7, Vec3(1, 2, 3).normalized()));
  const Vec3 arm(0.3, 0.4, 0.1);
  const Vec3 force(1, 0.5, -2);
  const std::vector<AppliedForce> one{{arm, force}};
  const std::vector<AppliedForce> two{{arm, force}, {-arm, force}};
  const auto a1 = accumulate(one, m, Vec3::Zero(), q, Vec3::Zero());
  const auto a2 = accumulate(two, m, Vec3::Zero(), q, Vec3::Zero());
  EXPECT_NEAR((a2.dv - 2 * a1.dv).norm(), 0, 1e-12);
  EXPECT_NEAR(a2.domega.norm(), 0, 1e-12);
  EXPECT_GT(a1.domega.norm(), 0);
}

TEST(Accumulate, NewtonThirdLawIsExact) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto c = contact_with_normal(kEps * Real(0.5) * random_vec(rng).normalized());
    const Vec3 fi = contact_force(c, point_mass(1.3), point_mass(0.7), ForceModelParams{});
    const Vec3 fj = -fi;
    EXPECT_EQ(fi + fj, Vec3::Zero());
  }
}

TEST(MassProperties, UnitCube) {
  const auto m = mass_properties_from_mesh(unit_cube());
  EXPECT_NEAR(m.mass, 1, 1e-12);
  EXPECT_NEAR((m.center_of_mass - Vec3(0.5, 0.5, 0.5)).norm(), 0, 1e-12);
  EXPECT_NEAR((m.inertia - Mat3::Identity() / 6).norm(), 0, 1e-12);
}

TEST(MassProperties, IcosphereVolume) {
  auto mesh = generate_noisy_sphere(3, 1, 0);
  const Real r = 0.5;
  mesh.scale(r);
  const auto m = mass_properties_from_mesh(mesh, 2);
  const Real exact = Real(4) / 3 * M_PI * r * r * r;
  EXPECT_NEAR(m.volume, exact, 0.02 * exact);
  EXPECT_NEAR(m.mass, 2 * m.volume, 1e-12);
  EXPECT_LT(m.center_of_mass.norm(), 1e-9);
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(m.inertia);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0);
}

TEST(MassProperties, TranslationInvariance) {
  auto mesh = generate_noisy_sphere(2, 1.4, 3);
  const auto m0 = mass_properties_from_mesh(mesh);
  const Vec3 d(1.5, -2, 0.25);
  mesh.translate(d);
  const auto m1 = mass_properties_from_mesh(mesh);
  EXPECT_NEAR((m1.center_of_mass - m0.center_of_mass - d).norm(), 0, 1e-9);
  EXPECT_NEAR((m1.inertia - m0.inertia).norm(), 0, 1e-6);
}

TEST(MassProperties, InvertedMeshThrows) {
  auto mesh = unit_cube();
  for (auto& f : mesh.faces) std::swap(f[1], f[2]);
  EXPECT_THROW(mass_properties_from_mesh(mesh), OpenMesh);
}

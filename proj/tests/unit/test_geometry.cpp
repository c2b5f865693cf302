#include <gtest/gtest.h>

#include <sstream>

#include "dem/geometry.hpp"
#include "dem/mesh_io.hpp"
#include "test_support.hpp"

using namespace dem;
using dem::testing::unit_cube;
using dem::testing::random_motion;
using dem::testing::random_triangle;

namespace {

Real max_relative_distance_change(const TriangleSoup& a, const TriangleSoup& b) {
  const std::size_t n = 3 * a.count;
  auto vertex = [](const TriangleSoup& s, std::size_t k) {
    return Vec3(s.coords[3 * k], s.coords[3 * k + 1], s.coords[3 * k + 2]);
  };
  Real worst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Real da = (vertex(a, i) - vertex(a, j)).norm();
      const Real db = (vertex(b, i) - vertex(b, j)).norm();
      if (da > 0) worst = std::max(worst, std::abs(da - db) / da);
    }
  }
  return worst;
}

}  // namespace

TEST(Barycentric, Vertices) {
  const Triangle t{Vec3(1, 2, 3), Vec3(4, 5, 7), Vec3(-1, 0, 2)};
  EXPECT_EQ(barycentric_point(t, 0, 0), t.v1);
  EXPECT_EQ(barycentric_point(t, 1, 0), t.v2);
  EXPECT_EQ(barycentric_point(t, 0, 1), t.v3);
}

TEST(Barycentric, ThirdIsCentroid) {
  const Triangle t{Vec3(1, 2, 3), Vec3(4, 5, 7), Vec3(-1, 0, 2)};
  EXPECT_LT((barycentric_point(t, Real(1) / 3, Real(1) / 3) - t.centroid()).norm(), 1e-12);
}

TEST(Triangle, DegeneratePredicate) {
  EXPECT_FALSE(dem::testing::unit_triangle().is_degenerate());
  const Triangle line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  EXPECT_TRUE(line.is_degenerate());
  const Triangle point{Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)};
  EXPECT_TRUE(point.is_degenerate());
}

TEST(Flatten, Empty) {
  const TriangleSoup s = flatten(std::span<const Triangle>{});
  EXPECT_EQ(s.count, 0u);
  EXPECT_TRUE(s.coords.empty());
}

TEST(Flatten, TwoTrianglesLayout) {
  std::vector<Triangle> tris{dem::testing::unit_triangle(),
                             {Vec3(1, 2, 3), Vec3(4, 5, 6), Vec3(7, 8, 9)}};
  const TriangleSoup s = flatten(tris);
  ASSERT_EQ(s.coords.size(), 18u);
  EXPECT_EQ(s.coords[9], 1);
  EXPECT_EQ(s.coords[17], 9);
  EXPECT_EQ(unflatten(s), tris);
}

TEST(Flatten, RoundTripProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Triangle> tris;
    const int n = static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) tris.push_back(random_triangle(rng));
    const TriangleSoup s = flatten(tris);
    EXPECT_TRUE(s.valid());
    EXPECT_EQ(unflatten(s), tris);
  }
}

TEST(ApplyMotion, IdentityIsBitwise) {
  std::mt19937_64 rng(3);
  std::vector<Triangle> tris;
  for (int i = 0; i < 10; ++i) tris.push_back(random_triangle(rng));
  const TriangleSoup s = flatten(tris);
  EXPECT_EQ(apply_motion(s, RigidMotion::identity()), s);
}

TEST(ApplyMotion, Translation) {
  std::vector<Triangle> tris{dem::testing::unit_triangle()};
  RigidMotion m;
  m.translation = Vec3(1, 0, 0);
  const TriangleSoup s = flatten(tris);
  const TriangleSoup out = apply_motion(s, m);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(out.coords[3 * k], s.coords[3 * k] + 1);
    EXPECT_EQ(out.coords[3 * k + 1], s.coords[3 * k + 1]);
    EXPECT_EQ(out.coords[3 * k + 2], s.coords[3 * k + 2]);
  }
}

TEST(ApplyMotion, IsometryProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Triangle> tris;
    for (int i = 0; i < 8; ++i) tris.push_back(random_triangle(rng, dem::testing::random_vec(rng)));
    const TriangleSoup s = flatten(tris);
    const TriangleSoup out = apply_motion(s, random_motion(rng));
    EXPECT_LT(max_relative_distance_change(s, out), 1e-6);
  }
}

TEST(ApplyMotion, Composition) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Triangle> tris;
    for (int i = 0; i < 5; ++i) tris.push_back(random_triangle(rng));
    const TriangleSoup s = flatten(tris);
    const RigidMotion m1 = random_motion(rng);
    const RigidMotion m2 = random_motion(rng);
    const TriangleSoup two = apply_motion(apply_motion(s, m1), m2);
    const TriangleSoup one = apply_motion(s, m2.compose(m1));
    for (std::size_t k = 0; k < s.coords.size(); ++k)
      EXPECT_NEAR(two.coords[k], one.coords[k], 1e-6);
    EXPECT_NEAR(m2.compose(m1).rotation.norm(), 1, 1e-9);
  }
}

TEST(RigidMotion, AdvancedRotatesAboutAxis) {
  const RigidMotion m = RigidMotion::identity().advanced(Vec3(1, 0, 0), Vec3(0, 0, M_PI / 2), 1);
  EXPECT_LT((m.apply(Vec3(1, 0, 0)) - Vec3(1, 1, 0)).norm(), 1e-12);
}

TEST(Mesh, CubeClosedAndVolume) {
  const TriangleMesh cube = unit_cube();
  EXPECT_TRUE(cube.is_closed());
  EXPECT_NEAR(cube.signed_volume(), 1, 1e-12);
  TriangleMesh open = cube;
  open.faces.pop_back();
  EXPECT_FALSE(open.is_closed());
}

TEST(MeshIo, ObjRoundTrip) {
  const TriangleMesh cube = unit_cube();
  std::stringstream buf;
  write_obj(buf, cube);
  const TriangleMesh back = read_obj(buf);
  EXPECT_EQ(back.vertices, cube.vertices);
  EXPECT_EQ(back.faces, cube.faces);
}

TEST(MeshIo, IgnoresNormalsAndTexcoords) {
  std::stringstream in(
      "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/1/1 3/1/1\n");
  const TriangleMesh m = read_obj(in);
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.faces[0], (std::array<Index, 3>{0, 1, 2}));
}

TEST(MeshIo, RejectsQuads) {
  std::stringstream in("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  EXPECT_THROW(read_obj(in), IoError);
}

#include "drg/error.hpp"
#include "drg/mesh.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numbers>

using namespace drg;
using namespace drg::test;

TEST_CASE("parse_obj reads vertices and triangles in several index styles") {
  const auto m = parse_obj(R"(# comment
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1

f 1 2 3
f 1/1/1 2/2/2 4/4/4
f -4 -1 -2
)");
  CHECK(m.vertices.rows() == 4);
  REQUIRE(m.n_triangles() == 3);
  CHECK(m.triangles.row(1) == Eigen::RowVector3i(0, 1, 3));
  CHECK(m.triangles.row(2) == Eigen::RowVector3i(0, 3, 2));
}

TEST_CASE("parse_obj errors and filtering") {
  CHECK_THROWS_AS(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4 3\n"), DataError);
  CHECK_THROWS_AS(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"), DataError);
  CHECK_THROWS_AS(parse_obj("v 0 0 x\n"), DataError);
  // Collinear triangle is dropped.
  const auto m = parse_obj("v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n");
  CHECK(m.n_triangles() == 1);
}

TEST_CASE("load_obj names a missing path") {
  try {
    load_obj("/nonexistent/dir/thing.obj");
    FAIL("no error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/thing.obj") != std::string::npos);
  }
}

TEST_CASE("to_obj round-trips bitwise") {
  TestRng rng(1);
  TriangleMesh m = transformed(make_icosphere(0.0371, 1), Pose(Eigen::Translation3d(rng.vec())));
  const auto back = parse_obj(to_obj(m));
  CHECK(back.vertices == m.vertices);
  CHECK(back.triangles == m.triangles);
}

TEST_CASE("primitive surface areas") {
  CHECK(surface_area(make_box(Vec3(1, 2, 3))) == doctest::Approx(22.0).epsilon(1e-14));
  const int n = 32;
  const double r = 0.3, l = 0.7;
  const double poly = n * 2 * r * std::sin(std::numbers::pi / n) * l + n * r * r * std::sin(2 * std::numbers::pi / n);
  CHECK(surface_area(make_cylinder(r, l, n)) == doctest::Approx(poly).epsilon(1e-12));
  const auto s = make_icosphere(2.0, 3);
  for (Eigen::Index i = 0; i < s.vertices.rows(); ++i) CHECK(s.vertices.row(i).norm() == doctest::Approx(2.0));
  CHECK(surface_area(s) == doctest::Approx(4 * std::numbers::pi * 4.0).epsilon(0.01));
}

TEST_CASE("closed primitives are watertight, a holed box is not") {
  CHECK(is_watertight(make_box(Vec3(1, 1, 1))));
  CHECK(is_watertight(make_cylinder(0.1, 0.2)));
  CHECK(is_watertight(make_icosphere(1.0, 2)));
  TriangleMesh open = make_box(Vec3(1, 1, 1));
  open.triangles.conservativeResize(open.n_triangles() - 1, 3);
  CHECK_FALSE(is_watertight(open));
  CHECK_FALSE(is_watertight(TriangleMesh{}));
}

TEST_CASE("winding number is 1 inside and 0 outside") {
  const auto box = make_box(Vec3(1, 1, 1));
  CHECK(winding_number(box, Vec3(0.1, -0.2, 0.3)) == doctest::Approx(1.0));
  CHECK(winding_number(box, Vec3(2, 0, 0)) == doctest::Approx(0.0));
  CHECK(signed_distance(box, Vec3(0, 0, 0)) == doctest::Approx(-0.5));
  CHECK(signed_distance(box, Vec3(1.5, 0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("closest point matches the projection oracle") {
  TestRng rng(6);
  for (int t = 0; t < 2000; ++t) {
    const Vec3 a = rng.vec(), b = rng.vec(), c = rng.vec(), p = rng.vec(-2, 2);
    if (triangle_area(a, b, c) < 1e-3) continue;
    const double got = (closest_point_on_triangle(p, a, b, c) - p).norm();
    CHECK(got == doctest::Approx(oracle_triangle_distance(p, a, b, c)).epsilon(1e-9));
  }
}

TEST_CASE("signed distance matches the brute-force oracle on an icosphere") {
  TestRng rng(12);
  const auto sphere = make_icosphere(1.0, 2);
  for (int t = 0; t < 300; ++t) {
    const Vec3 p = rng.vec(-1.5, 1.5);
    CHECK(std::abs(signed_distance(sphere, p) - oracle_sdf(sphere, p)) < 1e-9);
  }
}

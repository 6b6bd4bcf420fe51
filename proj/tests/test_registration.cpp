#include "drg/error.hpp"
#include "drg/registration.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numeric>

using namespace drg;
using namespace drg::test;

namespace {

Pose make_pose(const Mat3& r, const Vec3& t) {
  Pose p = Pose::Identity();
  p.linear() = r;
  p.translation() = t;
  return p;
}

// Residual of the best translation for a fixed rotation.
double residual_for_rotation(const Points& a, const Points& b, const Mat3& r) {
  const Vec3 t = b.colwise().mean().transpose() - r * a.colwise().mean().transpose();
  return registration_residual(a, b, make_pose(r, t));
}

LinkClouds sample(const KinematicModel& m) { return sample_link_clouds(m, link_meshes(m, data("")), SamplingConfig{}); }

}  // namespace

TEST_CASE("identity and a known transform") {
  TestRng rng(1);
  const Points a = rng.points(50, -0.05, 0.05);
  const Pose id = register_link(a, a);
  CHECK((id.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  const Mat3 rz = Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()).toRotationMatrix();
  const Vec3 t(0.1, 0, 0);
  const Pose p = register_link(a, transform_points(a, rz, t));
  CHECK((p.linear() - rz).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((p.translation() - t).norm() < 1e-10);
}

TEST_CASE("random exact transforms are recovered") {
  TestRng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Points a = rng.points(rng.integer(3, 100), -0.05, 0.05);
    const Mat3 r = rng.rotation();
    const Vec3 t = rng.vec(-0.3, 0.3);
    const Pose p = register_link(a, transform_points(a, r, t));
    CHECK((p.linear() - r).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((p.translation() - t).norm() < 1e-10);
  }
}

TEST_CASE("noisy registration is no worse than a dense rotation sweep") {
  TestRng rng(3);
  const Points a = rng.points(40, -0.05, 0.05);
  Points b = transform_points(a, rng.rotation(), rng.vec(-0.1, 0.1));
  for (Eigen::Index i = 0; i < b.rows(); ++i) b.row(i) += 0.005 * Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());
  const Pose p = register_link(a, b);
  const double got = registration_residual(a, b, p);
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 100000; ++s) best = std::min(best, residual_for_rotation(a, b, rng.rotation()));
  CHECK(got <= best);
  // Local perturbations of the answer never improve it either.
  for (int s = 0; s < 1000; ++s) {
    const Mat3 dr = Eigen::AngleAxisd(1e-3 * rng.uniform(), rng.unit()).toRotationMatrix();
    CHECK(got <= residual_for_rotation(a, b, dr * p.linear()) + 1e-15);
  }
}

TEST_CASE("result is a proper rotation even for reflected data") {
  TestRng rng(4);
  const Points a = rng.points(30);
  Points mirrored = a;
  mirrored.col(2) *= -1.0;
  const Pose p = register_link(a, mirrored);
  CHECK(p.linear().determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((p.linear().transpose() * p.linear() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("consistent permutation of correspondences does not matter") {
  TestRng rng(5);
  const Points a = rng.points(25);
  Points b = transform_points(a, rng.rotation(), rng.vec());
  for (Eigen::Index i = 0; i < b.rows(); ++i) b.row(i) += 0.01 * Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());
  std::vector<int> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.engine);
  Points ap(25, 3), bp(25, 3);
  for (int i = 0; i < 25; ++i) {
    ap.row(i) = a.row(perm[static_cast<std::size_t>(i)]);
    bp.row(i) = b.row(perm[static_cast<std::size_t>(i)]);
  }
  CHECK((register_link(a, b).matrix() - register_link(ap, bp).matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("register_link input errors") {
  TestRng rng(6);
  CHECK_THROWS_AS(register_link(rng.points(2), rng.points(2)), ContractError);
  CHECK_THROWS_AS(register_link(rng.points(5), rng.points(6)), ContractError);
  Points line(10, 3);
  for (int i = 0; i < 10; ++i) line.row(i) = Eigen::RowVector3d(0.01 * i, 0.02 * i, -0.01 * i);
  try {
    register_link(line, line, "finger_distal");
    FAIL("no error");
  } catch (const DegeneracyError& e) {
    CHECK(std::string(e.what()).find("finger_distal") != std::string::npos);
  }
}

TEST_CASE("register_all recovers forward kinematics") {
  for (const char* name : {"three_finger.urdf", "shadow_like_hand.urdf"}) {
    CAPTURE(name);
    const auto m = load(name);
    const auto canonical = sample(m);
    TestRng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
      const JointConfig q = random_in_limits(m, rng);
      const LinkPoseSet fk = forward_kinematics(m, q);
      const RegisteredLinks reg = register_all(m, canonical, cloud_fk(m, q, canonical));
      int checked = 0;
      for (int i = 0; i < m.n_links(); ++i) {
        const auto li = static_cast<std::size_t>(i);
        const bool has_points = canonical.per_link[li].rows() > 0;
        const bool is_tip = m.link(i).kind == LinkKind::tip_extension;
        CHECK(reg.valid[li] == (has_points || is_tip));
        CHECK_FALSE(reg.fallback[li]);
        if (!reg.valid[li]) continue;
        ++checked;
        CHECK((reg.poses[li].linear() - fk[li].linear()).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((reg.poses[li].translation() - fk[li].translation()).norm() < 1e-7);
      }
      CHECK(checked > 0);
    }
  }
}

TEST_CASE("register_all follows a rigid motion of the whole hand") {
  const auto m = load("three_finger.urdf");
  const auto canonical = sample(m);
  TestRng rng(8);
  const JointConfig q = random_in_limits(m, rng);
  const PointCloud cloud = cloud_fk(m, q, canonical);
  const Mat3 r = rng.rotation();
  const Vec3 t = rng.vec(-0.2, 0.2);
  PointCloud moved = cloud;
  moved.points = transform_points(cloud.points, r, t);
  const auto a = register_all(m, canonical, cloud);
  const auto b = register_all(m, canonical, moved);
  const Pose g = make_pose(r, t);
  for (int i = 0; i < m.n_links(); ++i) {
    const auto li = static_cast<std::size_t>(i);
    if (!a.valid[li]) continue;
    CHECK(((g * a.poses[li]).matrix() - b.poses[li].matrix()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("collinear link falls back to its ancestor rotation") {
  const auto m = load("planar2.urdf");
  auto canonical = sample(m);
  const int lower = m.link_index("lower");
  const int upper = m.link_index("upper");
  Points line(6, 3);
  for (int i = 0; i < 6; ++i) line.row(i) = Eigen::RowVector3d(0.01 * i, 0, 0);
  canonical.per_link[static_cast<std::size_t>(lower)] = line;

  JointConfig q = JointConfig::Zero(m.n_dof());
  q[0] = 0.05;
  q[6] = 0.4;
  q[7] = -0.9;
  const auto fk = forward_kinematics(m, q);
  const auto reg = register_all(m, canonical, cloud_fk(m, q, canonical));
  const auto lo = static_cast<std::size_t>(lower);
  CHECK(reg.valid[lo]);
  CHECK(reg.fallback[lo]);
  CHECK_FALSE(reg.fallback[static_cast<std::size_t>(upper)]);
  CHECK((reg.poses[lo].linear() - fk[static_cast<std::size_t>(upper)].linear()).cwiseAbs().maxCoeff() < 1e-9);
  // Centroids still line up.
  const Vec3 c = line.colwise().mean().transpose();
  CHECK((reg.poses[lo] * c - fk[lo] * c).norm() < 1e-9);

  // The tip rides on the fallback pose.
  const int tip = m.link_index("lower_tip");
  CHECK(reg.valid[static_cast<std::size_t>(tip)]);
  const Pose expect = reg.poses[lo] * m.joint(m.link(tip).parent_joint).origin;
  CHECK((reg.poses[static_cast<std::size_t>(tip)].matrix() - expect.matrix()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("register_all rejects inconsistent labels") {
  const auto m = load("three_finger.urdf");
  const auto canonical = sample(m);
  PointCloud cloud = cloud_fk(m, JointConfig::Zero(m.n_dof()), canonical);
  // Move one point to another link.
  const std::uint32_t first = cloud.labels.front();
  auto it = std::find_if(cloud.labels.begin(), cloud.labels.end(), [&](std::uint32_t l) { return l != first; });
  REQUIRE(it != cloud.labels.end());
  *it = first;
  CHECK_THROWS_AS(register_all(m, canonical, cloud), ContractError);
  LinkClouds short_set = canonical;
  short_set.per_link.pop_back();
  CHECK_THROWS_AS(register_all(m, short_set, cloud_fk(m, JointConfig::Zero(m.n_dof()), canonical)), ContractError);
}

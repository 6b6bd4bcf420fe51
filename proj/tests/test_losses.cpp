#include "drg/error.hpp"
#include "drg/losses.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numbers>

using namespace drg;
using namespace drg::test;

namespace {

FeatureMatrix random_features(TestRng& rng, Eigen::Index n, Eigen::Index d) {
  FeatureMatrix f(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) f(i, j) = rng.normal();
  return f;
}

Pose make_pose(const Mat3& r, const Vec3& t) {
  Pose p = Pose::Identity();
  p.linear() = r;
  p.translation() = t;
  return p;
}

}  // namespace

TEST_CASE("contrastive weights: small cases") {
  Points one(1, 3);
  one << 0.3, 0.1, 0.2;
  const auto w1 = contrastive_weights(one, 10.0);
  CHECK(w1.omega.rows() == 1);
  CHECK(w1.omega(0, 0) == 1.0);

  Points far(2, 3);
  far << 0, 0, 0, 10, 0, 0;
  const auto w2 = contrastive_weights(far, 10.0);
  CHECK(w2.omega(0, 1) == 1.0);
  CHECK(w2.omega(1, 0) == 1.0);

  Points line(3, 3);
  line << 0, 0, 0, 0.05, 0, 0, 0.1, 0, 0;
  const auto w3 = contrastive_weights(line, 10.0).omega;
  const double r = std::tanh(0.5) / std::tanh(1.0);
  CHECK(w3(0, 1) == doctest::Approx(r).epsilon(1e-14));
  CHECK(w3(1, 2) == doctest::Approx(r).epsilon(1e-14));
  CHECK(w3(0, 2) == 1.0);
  CHECK(w3.diagonal() == Eigen::Vector3d::Ones());
}

TEST_CASE("contrastive weights: symmetry, range and oracle") {
  TestRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Points p = rng.points(rng.integer(2, 40), -0.1, 0.1);
    const double lambda = rng.uniform(1.0, 30.0);
    const auto w = contrastive_weights(p, lambda);
    CHECK_FALSE(w.degenerate);
    CHECK((w.omega - w.omega.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((w.omega.array() > 0.0).all());
    CHECK((w.omega.array() <= 1.0).all());
    CHECK(w.omega.diagonal().isOnes());
    CHECK((w.omega - oracle_weights(p, lambda)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("contrastive weights: coincident points and options") {
  const Points same = Points::Constant(4, 3, 0.25);
  const auto w = contrastive_weights(same, 10.0);
  CHECK(w.degenerate);
  CHECK(w.omega.isOnes());
  CHECK_THROWS_AS(contrastive_weights(Points(0, 3), 10.0), ContractError);
  CHECK_THROWS_AS(contrastive_weights(same, 0.0), ContractError);

  // Per-row normalization: every row reaches 1 off the diagonal.
  TestRng rng(2);
  const Points p = rng.points(12, -0.1, 0.1);
  const auto row = contrastive_weights(p, 10.0, true).omega;
  for (Eigen::Index i = 0; i < row.rows(); ++i) {
    double mx = 0.0;
    for (Eigen::Index j = 0; j < row.cols(); ++j)
      if (j != i) mx = std::max(mx, row(i, j));
    CHECK(mx == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("contrastive loss: closed forms") {
  TestRng rng(3);
  SUBCASE("single point is zero") {
    const FeatureMatrix a = random_features(rng, 1, 8), b = random_features(rng, 1, 8);
    CHECK(contrastive_loss(a, b, rng.points(1)) == doctest::Approx(0.0));
  }
  SUBCASE("two orthogonal rows") {
    FeatureMatrix f = FeatureMatrix::Zero(2, 4);
    f(0, 0) = 1.0;
    f(1, 1) = 2.0;
    Points p(2, 3);
    p << 0, 0, 0, 0.03, 0, 0;  // a single pair is its own max, so w = 1
    const double tau = 0.1;
    const double w = 1.0;
    const double expected = std::log(1.0 + w * std::exp(-1.0 / tau));
    CHECK(contrastive_loss(f, f, p) == doctest::Approx(expected).epsilon(1e-12));
    // A third, far point lowers the pair weight below one.
    FeatureMatrix g = FeatureMatrix::Zero(3, 4);
    g(0, 0) = 1.0;
    g(1, 1) = 1.0;
    g(2, 2) = 1.0;
    Points q(3, 3);
    q << 0, 0, 0, 0.03, 0, 0, 0.2, 0, 0;
    const auto om = contrastive_weights(q, 10.0).omega;
    double exp_total = 0.0;
    for (int i = 0; i < 3; ++i) {
      double s = 1.0;
      for (int j = 0; j < 3; ++j)
        if (j != i) s += om(i, j) * std::exp(-1.0 / tau);
      exp_total += std::log(s);
    }
    CHECK(contrastive_loss(g, g, q) == doctest::Approx(exp_total / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("contrastive loss matches the brute-force oracle") {
  TestRng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = rng.integer(2, 30);
    const auto d = rng.integer(1, 16);
    const FeatureMatrix a = random_features(rng, n, d), b = random_features(rng, n, d);
    const Points p = rng.points(n, -0.1, 0.1);
    ContrastiveParams params;
    params.tau = rng.uniform(0.05, 1.0);
    params.lambda = rng.uniform(1.0, 20.0);
    CHECK(std::abs(contrastive_loss(a, b, p, params) - oracle_contrastive(a, b, p, params.tau, params.lambda)) < 1e-9);
  }
}

TEST_CASE("contrastive loss: rescaling invariance and monotonicity") {
  TestRng rng(5);
  const FeatureMatrix a = random_features(rng, 10, 6), b = random_features(rng, 10, 6);
  const Points p = rng.points(10, -0.1, 0.1);
  const double base = contrastive_loss(a, b, p);
  FeatureMatrix a2 = a, b2 = b;
  a2.row(3) *= 7.5;
  b2.row(6) *= 0.01;
  CHECK(std::abs(contrastive_loss(a2, b2, p) - base) < 1e-9);

  // Pull a positive pair together: loss drops.
  FeatureMatrix closer = a;
  closer.row(2) = 0.5 * a.row(2) / a.row(2).norm() + 0.5 * b.row(2) / b.row(2).norm();
  CHECK(contrastive_loss(closer, b, p) < base);
}

TEST_CASE("contrastive loss input errors") {
  TestRng rng(6);
  FeatureMatrix a = random_features(rng, 5, 4);
  const FeatureMatrix b = random_features(rng, 5, 4);
  const Points p = rng.points(5);
  CHECK_THROWS_AS(contrastive_loss(a, random_features(rng, 4, 4), p), ContractError);
  CHECK_THROWS_AS(contrastive_loss(a, random_features(rng, 5, 3), p), ContractError);
  CHECK_THROWS_AS(contrastive_loss(a, b, rng.points(4)), ContractError);
  ContrastiveParams bad;
  bad.tau = 0.0;
  CHECK_THROWS_AS(contrastive_loss(a, b, p, bad), ContractError);
  a.row(2).setZero();
  try {
    contrastive_loss(a, b, p);
    FAIL("no error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("pose loss examples and properties") {
  const Pose id = Pose::Identity();
  CHECK(pose_loss(id, id) == 0.0);
  const Mat3 rz = Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitZ()).toRotationMatrix();
  CHECK(pose_loss(make_pose(rz, Vec3::Zero()), id) == doctest::Approx(std::numbers::pi).epsilon(1e-12));
  CHECK(pose_loss(make_pose(Mat3::Identity(), Vec3(3, 4, 0)), id) == doctest::Approx(5.0).epsilon(1e-15));

  TestRng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose a = make_pose(rng.rotation(), rng.vec()), b = make_pose(rng.rotation(), rng.vec());
    CHECK(pose_loss(a, b) == doctest::Approx(pose_loss(b, a)).epsilon(1e-12));
    CHECK(pose_loss(a, a) < 1e-7);
    CHECK(std::abs(pose_loss(a, b) - oracle_pose_loss(a.matrix(), b.matrix())) < 1e-9);
    const double rot_term = pose_loss(a, b) - (a.translation() - b.translation()).norm();
    CHECK(rot_term >= -1e-12);
    CHECK(rot_term <= std::numbers::pi + 1e-12);
  }
  Pose skew = id;
  skew.linear()(0, 1) = 1e-3;
  CHECK_THROWS_AS(pose_loss(skew, id), ContractError);
  Pose reflect = id;
  reflect.linear()(2, 2) = -1.0;
  CHECK_THROWS_AS(pose_loss(id, reflect), ContractError);
}

TEST_CASE("penetration loss") {
  const auto sphere = make_icosphere(1.0, 3);
  SUBCASE("points outside give zero") {
    TestRng rng(8);
    Points out(50, 3);
    for (int i = 0; i < 50; ++i) out.row(i) = (rng.unit() * rng.uniform(1.1, 3.0)).transpose();
    CHECK(penetration_loss(out, sphere) == 0.0);
  }
  SUBCASE("centre of the unit sphere") {
    const Points c = Points::Zero(1, 3);
    CHECK(std::abs(penetration_loss(c, sphere) - 1.0) < 0.01);
  }
  SUBCASE("random points against the brute-force oracle") {
    TestRng rng(9);
    const auto ico = make_icosphere(0.8, 2);
    for (int trial = 0; trial < 20; ++trial) {
      const Points p = rng.points(30, -1.2, 1.2);
      const double got = penetration_loss(p, ico);
      CHECK(std::abs(got - oracle_penetration(p, ico)) < 1e-9);
      CHECK(got == reference::penetration_loss(p, ico));
    }
  }
  SUBCASE("zero exactly when nothing is inside") {
    TestRng rng(10);
    const auto ico = make_icosphere(0.5, 2);
    for (int trial = 0; trial < 50; ++trial) {
      const Points p = rng.points(5, -0.8, 0.8);
      bool inside = false;
      for (Eigen::Index i = 0; i < p.rows(); ++i) inside |= oracle_sdf(ico, p.row(i).transpose()) < 0.0;
      CHECK((penetration_loss(p, ico) > 0.0) == inside);
    }
  }
  SUBCASE("open mesh is rejected") {
    TriangleMesh open = make_box(Vec3(1, 1, 1));
    open.triangles.conservativeResize(open.n_triangles() - 2, 3);
    CHECK_THROWS_AS(penetration_loss(Points::Zero(1, 3), open), DataError);
  }
}

TEST_CASE("matrix L1 loss") {
  DroMatrix a(1, 1), b(1, 1);
  a << 2.0;
  b << 5.0;
  CHECK(dro_l1_loss(a, b) == 3.0);
  CHECK(dro_l1_loss(a, a) == 0.0);
  TestRng rng(11);
  DroMatrix p(17, 23), g(17, 23);
  double sum = 0.0;
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 23; ++j) {
      p(i, j) = rng.uniform();
      g(i, j) = rng.uniform();
      sum += std::abs(p(i, j) - g(i, j));
    }
  CHECK(std::abs(dro_l1_loss(p, g) - sum / (17.0 * 23.0)) < 1e-12);
  CHECK_THROWS_AS(dro_l1_loss(p, g.topRows(5)), ContractError);
}

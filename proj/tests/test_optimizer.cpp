#include "drg/error.hpp"
#include "drg/optimizer.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace drg;
using namespace drg::test;

namespace {

// One revolute joint about y at x = 0.05 on a base that carries two fixed
// markers, so three targets pin the floating wrist.
std::string arm_urdf(double upper) {
  std::ostringstream s;
  s << R"(<robot name="arm">
  <link name="base"><visual><geometry><box size="0.02 0.02 0.02"/></geometry></visual></link>
  <link name="mark_y"/>
  <link name="mark_z"/>
  <link name="arm"><visual><geometry><box size="0.02 0.01 0.01"/></geometry></visual></link>
  <joint name="fy" type="fixed"><parent link="base"/><child link="mark_y"/><origin xyz="0 0.05 0"/></joint>
  <joint name="fz" type="fixed"><parent link="base"/><child link="mark_z"/><origin xyz="0 0 0.05"/></joint>
  <joint name="hinge" type="revolute"><parent link="base"/><child link="arm"/><origin xyz="0.05 0 0"/>
    <axis xyz="0 1 0"/><limit lower="-1" upper=")"
    << upper << R"(" effort="1" velocity="1"/></joint>
</robot>)";
  return s.str();
}

std::vector<LinkTarget> all_origins(const KinematicModel& m, const LinkPoseSet& poses) {
  std::vector<LinkTarget> t;
  for (int i = 0; i < m.n_links(); ++i) {
    if (m.link(i).kind == LinkKind::wrist_frame) continue;
    t.push_back({i, poses[static_cast<std::size_t>(i)].translation()});
  }
  return t;
}

// Exhaustive active-set search: every variable free, at lower or at upper.
Eigen::VectorXd brute_force_box_lsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double damping,
                                     const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const auto n = a.cols();
  auto objective = [&](const Eigen::VectorXd& x) { return (a * x - b).squaredNorm() + damping * x.squaredNorm(); };
  int combos = 1;
  for (Eigen::Index i = 0; i < n; ++i) combos *= 3;
  Eigen::VectorXd best;
  double best_f = std::numeric_limits<double>::infinity();
  for (int c = 0; c < combos; ++c) {
    std::vector<int> state(static_cast<std::size_t>(n));
    int code = c;
    for (Eigen::Index i = 0; i < n; ++i) {
      state[static_cast<std::size_t>(i)] = code % 3;
      code /= 3;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      if (s == 0) free.push_back(i);
      if (s == 1) x[i] = lo[i];
      if (s == 2) x[i] = hi[i];
    }
    if (!free.empty()) {
      Eigen::MatrixXd af(a.rows(), static_cast<Eigen::Index>(free.size()));
      for (std::size_t k = 0; k < free.size(); ++k) af.col(static_cast<Eigen::Index>(k)) = a.col(free[k]);
      const Eigen::VectorXd r = b - a * x;
      Eigen::MatrixXd h = af.transpose() * af;
      h.diagonal().array() += damping;
      const Eigen::VectorXd xf = h.colPivHouseholderQr().solve(af.transpose() * r);
      for (std::size_t k = 0; k < free.size(); ++k) x[free[k]] = xf[static_cast<Eigen::Index>(k)];
    }
    if (((x - lo).array() < -1e-12).any() || ((x - hi).array() > 1e-12).any()) continue;
    const double f = objective(x);
    if (f < best_f) {
      best_f = f;
      best = x;
    }
  }
  return best;
}

struct Scene {
  KinematicModel model;
  LinkClouds canonical;
  Points object;
};

Scene make_scene(const std::string& urdf) {
  Scene s{load(urdf), {}, {}};
  s.canonical = sample_link_clouds(s.model, link_meshes(s.model, data("")), SamplingConfig{});
  SamplingConfig cfg;
  cfg.object_noise_sigma = 0.0;
  s.object = sample_object_cloud(make_icosphere(0.05, 3), cfg).points;
  return s;
}

JointConfig random_grasp(const KinematicModel& m, TestRng& rng) {
  JointConfig q = random_in_limits(m, rng);
  for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-0.15, 0.15);
  return q;
}

JointConfig open_hand(const KinematicModel& m, const JointConfig& q_star) {
  JointConfig q = mid_range_config(m);
  q.head<KinematicModel::kWristDofs>() = q_star.head<KinematicModel::kWristDofs>();
  return q;
}

double mean_link_error(const KinematicModel& m, const JointConfig& a, const JointConfig& b) {
  const auto pa = forward_kinematics(m, a), pb = forward_kinematics(m, b);
  double e = 0.0;
  const auto links = m.target_links();
  for (int l : links) e += (pa[static_cast<std::size_t>(l)].translation() - pb[static_cast<std::size_t>(l)].translation()).norm();
  return e / static_cast<double>(links.size());
}

}  // namespace

TEST_CASE("solve params validation") {
  SolveParams p;
  CHECK_NOTHROW(p.validate());
  p.step_bound = 0.0;
  CHECK_THROWS_AS(p.validate(), ContractError);
  p = {};
  p.max_iters = 0;
  CHECK_THROWS_AS(p.validate(), ContractError);
  p = {};
  p.damping = -1.0;
  CHECK_THROWS_AS(p.validate(), ContractError);
}

TEST_CASE("box damped least squares matches exhaustive active sets") {
  TestRng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = rng.integer(1, 5);
    const int rows = rng.integer(1, 8);
    Eigen::MatrixXd a(rows, n);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    Eigen::VectorXd b(rows), lo(n), hi(n);
    for (int i = 0; i < rows; ++i) b[i] = rng.normal(2.0);
    for (int j = 0; j < n; ++j) {
      lo[j] = -rng.uniform(0.0, 1.0);
      hi[j] = rng.uniform(0.0, 1.0);
    }
    const double damping = rng.uniform(1e-6, 0.1);
    const Eigen::VectorXd got = box_damped_least_squares(a, b, damping, lo, hi);
    const Eigen::VectorXd want = brute_force_box_lsq(a, b, damping, lo, hi);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("starting at the answer converges immediately") {
  const auto m = load("three_finger.urdf");
  TestRng rng(2);
  const JointConfig q = random_in_limits(m, rng);
  const auto result = solve_joints(m, all_origins(m, forward_kinematics(m, q)), q);
  CHECK(result.report.converged);
  CHECK(result.report.iterations == 1);
  CHECK(result.report.final_residual < 1e-12);
  CHECK(result.q == q);
}

TEST_CASE("one-joint arm") {
  const auto m = load_model(arm_urdf(1.0));
  REQUIRE(m.n_dof() == 7);
  REQUIRE(m.joint(m.dof_joints()[6]).name == "hinge");

  SUBCASE("recovers the hinge angle") {
    JointConfig q_star = JointConfig::Zero(7);
    q_star[6] = 0.3;
    const auto result = solve_joints(m, all_origins(m, forward_kinematics(m, q_star)), JointConfig::Zero(7));
    CHECK(result.report.converged);
    CHECK(std::abs(result.q[6] - 0.3) < 1e-3);
    CHECK(result.q.head<6>().cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("target past the upper limit stops at the limit") {
    const auto wide = load_model(arm_urdf(2.0));
    JointConfig q_far = JointConfig::Zero(7);
    q_far[6] = 1.3;
    std::vector<LinkTarget> targets;
    for (const auto& t : all_origins(wide, forward_kinematics(wide, q_far))) {
      targets.push_back({m.link_index(wide.link(t.link).name), t.position});
    }
    const auto result = solve_joints(m, targets, JointConfig::Zero(7));
    CHECK(result.report.converged);
    CHECK(result.q[6] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.q[6] <= 1.0);
    CHECK(result.report.final_residual > 0.0);
  }
}

TEST_CASE("iterates stay feasible and the objective never increases") {
  const auto m = load("shadow_like_hand.urdf");
  TestRng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const JointConfig q_star = random_grasp(m, rng);
    SolveParams params;
    params.step_bound = rng.uniform(0.05, 0.5);
    const auto result = solve_joints(m, all_origins(m, forward_kinematics(m, q_star)), open_hand(m, q_star), params);
    CHECK(within_limits(m, result.q));
    const auto& trace = result.report.residual_trace;
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
    for (double s : result.report.step_trace) CHECK(s <= params.step_bound + 1e-15);
    CHECK(result.report.final_residual == trace.back());
    CHECK(result.report.final_residual ==
          doctest::Approx(target_objective(m, all_origins(m, forward_kinematics(m, q_star)), result.q) /
                          static_cast<double>(all_origins(m, forward_kinematics(m, q_star)).size())));
  }
}

TEST_CASE("solve_joints input errors") {
  const auto m = load("three_finger.urdf");
  const JointConfig q0 = mid_range_config(m);
  const auto targets = all_origins(m, forward_kinematics(m, q0));
  JointConfig outside = q0;
  outside[7] = m.upper_limits()[7] + 0.1;
  CHECK_THROWS_AS(solve_joints(m, targets, outside), ContractError);
  CHECK_THROWS_AS(solve_joints(m, targets, JointConfig::Zero(3)), ContractError);
  CHECK_THROWS_AS(solve_joints(m, {}, q0), ContractError);
  auto bad = targets;
  bad[2].position.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_joints(m, bad, q0), DataError);
  auto unknown = targets;
  unknown[0].link = m.n_links();
  CHECK_THROWS_AS(solve_joints(m, unknown, q0), LookupError);
}

TEST_CASE("recover_grasp round trip") {
  for (const char* name : {"three_finger.urdf", "shadow_like_hand.urdf"}) {
    CAPTURE(name);
    const Scene s = make_scene(name);
    TestRng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
      const JointConfig q_star = random_grasp(s.model, rng);
      const PointCloud robot = cloud_fk(s.model, q_star, s.canonical);
      const DroMatrix dro = compute_dro(robot.points, s.object);
      const GraspResult r = recover_grasp(s.model, s.canonical, dro, s.object, open_hand(s.model, q_star));
      CHECK(mean_link_error(s.model, r.q, q_star) < 1e-3);
      CHECK(((r.recovered_cloud.points - robot.points).rowwise().norm().array() < 1e-8).all());
      CHECK(r.recovered_cloud.labels == robot.labels);
      CHECK(r.elapsed.total() >= 0.0);
    }
  }
}

TEST_CASE("recover_grasp default start uses the registered wrist") {
  const Scene s = make_scene("three_finger.urdf");
  TestRng rng(5);
  const JointConfig q_star = random_grasp(s.model, rng);
  const DroMatrix dro = compute_dro(cloud_fk(s.model, q_star, s.canonical).points, s.object);
  const GraspResult r = recover_grasp(s.model, s.canonical, dro, s.object);
  const JointConfig init = initial_guess(s.model, r.link_poses);
  // Euler triples are not unique; compare the poses.
  CHECK((wrist_pose(init).matrix() - wrist_pose(q_star).matrix()).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(r.report.residual_trace.size() >= 1);
}

TEST_CASE("recover_grasp tolerates matrix noise") {
  const Scene s = make_scene("three_finger.urdf");
  TestRng rng(6);
  double total = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const JointConfig q_star = random_grasp(s.model, rng);
    DroMatrix dro = compute_dro(cloud_fk(s.model, q_star, s.canonical).points, s.object);
    for (Eigen::Index i = 0; i < dro.size(); ++i) dro.data()[i] += rng.normal(1e-3);
    total += mean_link_error(s.model, recover_grasp(s.model, s.canonical, dro, s.object, open_hand(s.model, q_star)).q,
                             q_star);
  }
  CHECK(total / 20.0 < 5e-3);
}

TEST_CASE("recover_grasp errors name the stage") {
  const Scene s = make_scene("three_finger.urdf");
  const Points few = s.object.topRows(3);
  const DroMatrix dro = compute_dro(cloud_fk(s.model, mid_range_config(s.model), s.canonical).points, few);
  try {
    recover_grasp(s.model, s.canonical, dro, few);
    FAIL("no error");
  } catch (const DegeneracyError& e) {
    CHECK(std::string(e.what()).rfind("[multilateration]", 0) == 0);
  }
  CHECK_THROWS_AS(recover_grasp(s.model, s.canonical, dro.topRows(10), few), ContractError);
  CHECK_THROWS_AS(recover_grasp(s.model, s.canonical, dro, s.object), ContractError);
}

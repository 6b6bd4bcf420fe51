#pragma once

#include "drg/cloud.hpp"
#include "drg/distance_matrix.hpp"
#include "drg/kinematics.hpp"
#include "drg/registration.hpp"

#include <vector>

namespace drg {

struct SolveParams {
  double step_bound = 0.5;  // max |dq| per entry and iteration
  int max_iters = 100;
  double tol_step = 1e-4;
  double tol_residual = 1e-5;  // mean link translation error, meters
  double damping = 1e-6;

  void validate() const;
};

struct SolveReport {
  int iterations = 0;
  double final_residual = 0.0;  // mean link translation error
  bool converged = false;
  /// Mean link error at q_init and after every accepted step.
  std::vector<double> residual_trace;
  /// Largest |dq| entry of every accepted step.
  std::vector<double> step_trace;
};

struct LinkTarget {
  int link = -1;
  Vec3 position = Vec3::Zero();
};

struct SolveResult {
  JointConfig q;
  SolveReport report;
};

/// Move link origins onto target positions.
///
/// Each iteration linearizes the origins and solves the damped least-squares
/// step min |J dq - e|^2 + damping |dq|^2 under the box
///   max(q_min - q, -step_bound) <= dq <= min(q_max - q, step_bound)
/// with an active-set clamp. The step is then backtracked until the true
/// objective sum_i |x_i(q) - x_i*| does not increase. If no step survives,
/// one retry uses rows weighted by 1/|e_i| before declaring convergence.
SolveResult solve_joints(const KinematicModel& model, const std::vector<LinkTarget>& targets,
                         const JointConfig& q_init, const SolveParams& params = {});

/// Sum of link-origin distances to their targets.
double target_objective(const KinematicModel& model, const std::vector<LinkTarget>& targets, const JointConfig& q);

/// Damped least squares with box bounds (exposed for testing).
Eigen::VectorXd box_damped_least_squares(const Eigen::MatrixXd& jac, const Eigen::VectorXd& rhs, double damping,
                                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

struct StageTimes {
  double multilateration = 0.0;
  double registration = 0.0;
  double optimization = 0.0;
  double total() const { return multilateration + registration + optimization; }
};

struct GraspResult {
  JointConfig q;
  RegisteredLinks link_poses;
  PointCloud recovered_cloud;
  SolveReport report;
  StageTimes elapsed;  // seconds
};

/// Open hand for the registered wrist: wrist entries read off the registered
/// root-link pose (zero if the root has no points), actuated joints at mid-range.
JointConfig initial_guess(const KinematicModel& model, const RegisteredLinks& registered);

/// Matrix -> robot cloud -> link poses -> joint values. Errors carry the
/// stage name in their message.
GraspResult recover_grasp(const KinematicModel& model, const LinkClouds& canonical, const DroMatrix& dro,
                          const Points& object, const JointConfig& q_init, const SolveParams& params = {});

/// Same, starting from initial_guess() of the registered poses.
GraspResult recover_grasp(const KinematicModel& model, const LinkClouds& canonical, const DroMatrix& dro,
                          const Points& object, const SolveParams& params = {});

/// Registered link translations (plus tip extensions) as optimizer targets.
std::vector<LinkTarget> targets_from_registration(const KinematicModel& model, const RegisteredLinks& registered);

}  // namespace drg

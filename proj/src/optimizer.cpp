#include "drg/optimizer.hpp"

#include "drg/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace drg {

void SolveParams::validate() const {
  if (!(step_bound > 0.0)) throw ContractError("step bound must be positive");
  if (!(tol_step > 0.0) || !(tol_residual > 0.0)) throw ContractError("tolerances must be positive");
  if (!(damping >= 0.0)) throw ContractError("damping must be nonnegative");
  if (max_iters < 1) throw ContractError("max_iters must be at least 1");
}

Eigen::VectorXd box_damped_least_squares(const Eigen::MatrixXd& jac, const Eigen::VectorXd& rhs, double damping,
                                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  const Eigen::Index n = jac.cols();
  Eigen::MatrixXd h = jac.transpose() * jac;
  h.diagonal().array() += damping;
  const Eigen::VectorXd g = jac.transpose() * rhs;

  // state: 0 free, -1 held at lower, +1 held at upper
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const int max_rounds = 3 * static_cast<int>(n) + 3;
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      if (s == 0) {
        free.push_back(i);
      } else {
        x[i] = s < 0 ? lower[i] : upper[i];
      }
    }
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd hff(nf, nf);
      Eigen::VectorXd b(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        const Eigen::Index ia = free[static_cast<std::size_t>(a)];
        double v = g[ia];
        for (Eigen::Index k = 0; k < n; ++k) {
          if (state[static_cast<std::size_t>(k)] != 0) v -= h(ia, k) * x[k];
        }
        b[a] = v;
        for (Eigen::Index c = 0; c < nf; ++c) hff(a, c) = h(ia, free[static_cast<std::size_t>(c)]);
      }
      const Eigen::VectorXd xf = hff.ldlt().solve(b);
      for (Eigen::Index a = 0; a < nf; ++a) x[free[static_cast<std::size_t>(a)]] = xf[a];
    }
    bool clamped = false;
    for (Eigen::Index i : free) {
      if (x[i] < lower[i]) {
        state[static_cast<std::size_t>(i)] = -1;
        clamped = true;
      } else if (x[i] > upper[i]) {
        state[static_cast<std::size_t>(i)] = 1;
        clamped = true;
      }
    }
    if (clamped) continue;
    // Release the held variable whose multiplier has the wrong sign.
    const Eigen::VectorXd grad = h * x - g;
    Eigen::Index worst = -1;
    double worst_val = 1e-14;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int s = state[static_cast<std::size_t>(i)];
      const double pull = s < 0 ? -grad[i] : (s > 0 ? grad[i] : 0.0);
      if (pull > worst_val && lower[i] < upper[i]) {
        worst_val = pull;
        worst = i;
      }
    }
    if (worst < 0) break;
    state[static_cast<std::size_t>(worst)] = 0;
  }
  return x.cwiseMax(lower).cwiseMin(upper);
}

double target_objective(const KinematicModel& model, const std::vector<LinkTarget>& targets, const JointConfig& q) {
  const LinkPoseSet poses = forward_kinematics(model, q);
  double f = 0.0;
  for (const auto& t : targets) f += (poses[static_cast<std::size_t>(t.link)].translation() - t.position).norm();
  return f;
}

SolveResult solve_joints(const KinematicModel& model, const std::vector<LinkTarget>& targets,
                         const JointConfig& q_init, const SolveParams& params) {
  params.validate();
  if (q_init.size() != model.n_dof()) {
    throw ContractError("q_init has " + std::to_string(q_init.size()) + " entries, model has " +
                        std::to_string(model.n_dof()));
  }
  if (!within_limits(model, q_init, 1e-12)) throw ContractError("q_init lies outside the joint limits");
  if (targets.empty()) throw ContractError("solve_joints needs at least one target");
  for (const auto& t : targets) {
    if (t.link < 0 || t.link >= model.n_links()) throw LookupError("target names link " + std::to_string(t.link));
    if (!t.position.allFinite()) throw DataError("non-finite target for link '" + model.link(t.link).name + "'");
  }

  const Eigen::Index n = model.n_dof();
  const auto m = static_cast<Eigen::Index>(targets.size());
  const double inv_m = 1.0 / static_cast<double>(m);
  SolveResult result;
  JointConfig q = clamp_to_limits(model, q_init);
  SolveReport& report = result.report;

  LinkPoseSet poses = forward_kinematics(model, q);
  const auto objective_at = [&](const LinkPoseSet& p) {
    double f = 0.0;
    for (const auto& t : targets) f += (p[static_cast<std::size_t>(t.link)].translation() - t.position).norm();
    return f;
  };
  double f = objective_at(poses);
  report.residual_trace.push_back(f * inv_m);

  Eigen::MatrixXd jac(3 * m, n);
  Eigen::VectorXd err(3 * m);
  for (int it = 1; it <= params.max_iters; ++it) {
    report.iterations = it;
    if (f * inv_m < params.tol_residual) {
      report.converged = true;
      break;
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      const LinkTarget& t = targets[static_cast<std::size_t>(k)];
      jac.middleRows<3>(3 * k) = link_origin_jacobian(model, poses, t.link);
      err.segment<3>(3 * k) = t.position - poses[static_cast<std::size_t>(t.link)].translation();
    }
    const Eigen::VectorXd lo = (model.lower_limits() - q).cwiseMax(-params.step_bound);
    const Eigen::VectorXd hi = (model.upper_limits() - q).cwiseMin(params.step_bound);
    const Eigen::VectorXd step = box_damped_least_squares(jac, err, params.damping, lo, hi);
    if (step.lpNorm<Eigen::Infinity>() < params.tol_step) {
      report.converged = true;
      break;
    }
    // Backtrack on the unsquared objective.
    const auto line_search = [&](const Eigen::VectorXd& dir) {
      for (double alpha = 1.0; alpha * dir.lpNorm<Eigen::Infinity>() >= params.tol_step; alpha *= 0.5) {
        const JointConfig trial = clamp_to_limits(model, q + alpha * dir);
        LinkPoseSet trial_poses = forward_kinematics(model, trial);
        const double f_trial = objective_at(trial_poses);
        if (f_trial <= f) {
          report.step_trace.push_back((trial - q).lpNorm<Eigen::Infinity>());
          q = trial;
          poses = std::move(trial_poses);
          f = f_trial;
          return true;
        }
      }
      return false;
    };
    bool accepted = line_search(step);
    if (!accepted) {
      // Targets already met make the squared surrogate a poor model of the
      // sum of norms: it trades their zero error for others. Reweight rows by
      // 1/|e_k| and try once more.
      Eigen::MatrixXd wjac = jac;
      Eigen::VectorXd werr = err;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double w = 1.0 / std::sqrt(std::max(err.segment<3>(3 * k).norm(), 1e-9));
        wjac.middleRows<3>(3 * k) *= w;
        werr.segment<3>(3 * k) *= w;
      }
      const Eigen::VectorXd wstep = box_damped_least_squares(wjac, werr, params.damping, lo, hi);
      accepted = wstep.lpNorm<Eigen::Infinity>() >= params.tol_step && line_search(wstep);
    }
    if (!accepted) {
      // No step longer than tol_step decreases the objective.
      report.converged = true;
      break;
    }
    report.residual_trace.push_back(f * inv_m);
  }
  report.final_residual = f * inv_m;
  result.q = q;
  return result;
}

std::vector<LinkTarget> targets_from_registration(const KinematicModel& model, const RegisteredLinks& registered) {
  std::vector<LinkTarget> targets;
  for (int li : model.target_links()) {
    if (registered.valid[static_cast<std::size_t>(li)]) {
      targets.push_back({li, registered.poses[static_cast<std::size_t>(li)].translation()});
    }
  }
  return targets;
}

JointConfig initial_guess(const KinematicModel& model, const RegisteredLinks& registered) {
  JointConfig q = mid_range_config(model);
  const auto root = static_cast<std::size_t>(model.root_link());
  if (registered.valid[root]) {
    q.head<KinematicModel::kWristDofs>() = wrist_coordinates(registered.poses[root]);
  }
  return clamp_to_limits(model, q);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Re-throws library errors with the stage name prepended, preserving the category.
template <typename F>
auto tagged(const char* stage, F&& fn) -> decltype(fn()) {
  const std::string tag = std::string("[") + stage + "] ";
  try {
    return fn();
  } catch (const DegeneracyError& e) {
    throw DegeneracyError(tag + e.what());
  } catch (const LookupError& e) {
    throw LookupError(tag + e.what());
  } catch (const ContractError& e) {
    throw ContractError(tag + e.what());
  } catch (const DataError& e) {
    throw DataError(tag + e.what());
  }
}

void check_shapes(const KinematicModel& model, const LinkClouds& canonical, const DroMatrix& dro,
                  const Points& object) {
  if (static_cast<int>(canonical.per_link.size()) != model.n_links()) {
    throw ContractError("canonical clouds do not cover the model links");
  }
  if (dro.rows() != canonical.total_points()) {
    throw ContractError("matrix has " + std::to_string(dro.rows()) + " rows, robot cloud has " +
                        std::to_string(canonical.total_points()) + " points");
  }
  if (dro.cols() != object.rows()) {
    throw ContractError("matrix has " + std::to_string(dro.cols()) + " columns, object cloud has " +
                        std::to_string(object.rows()) + " points");
  }
}

GraspResult recover_impl(const KinematicModel& model, const LinkClouds& canonical, const DroMatrix& dro,
                         const Points& object, const JointConfig* q_init, const SolveParams& params) {
  check_shapes(model, canonical, dro, object);
  params.validate();
  GraspResult result;
  const PointCloud labels = to_point_cloud(model, canonical);

  auto start = Clock::now();
  result.recovered_cloud = tagged("multilateration", [&] {
    return recover_cloud(dro, object, labels.labels, labels.label_names);
  });
  result.elapsed.multilateration = seconds_since(start);

  start = Clock::now();
  result.link_poses = tagged("registration", [&] { return register_all(model, canonical, result.recovered_cloud); });
  result.elapsed.registration = seconds_since(start);

  start = Clock::now();
  SolveResult solved = tagged("optimization", [&] {
    const JointConfig init = q_init ? *q_init : initial_guess(model, result.link_poses);
    return solve_joints(model, targets_from_registration(model, result.link_poses), init, params);
  });
  result.elapsed.optimization = seconds_since(start);
  result.q = std::move(solved.q);
  result.report = std::move(solved.report);
  return result;
}

}  // namespace

GraspResult recover_grasp(const KinematicModel& model, const LinkClouds& canonical, const DroMatrix& dro,
                          const Points& object, const JointConfig& q_init, const SolveParams& params) {
  return recover_impl(model, canonical, dro, object, &q_init, params);
}

GraspResult recover_grasp(const KinematicModel& model, const LinkClouds& canonical, const DroMatrix& dro,
                          const Points& object, const SolveParams& params) {
  return recover_impl(model, canonical, dro, object, nullptr, params);
}

}  // namespace drg

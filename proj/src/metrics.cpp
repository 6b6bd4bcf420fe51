#include "drg/metrics.hpp"

#include "drg/error.hpp"

#include <cmath>

namespace drg {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::dataset: return "dataset";
    case Provenance::recovered: return "recovered";
    case Provenance::manual: return "manual";
  }
  return "dataset";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "dataset") return Provenance::dataset;
  if (name == "recovered") return Provenance::recovered;
  if (name == "manual") return Provenance::manual;
  throw DataError("unknown provenance '" + std::string(name) + "'");
}

DiversityStats diversity(const std::vector<GraspRecord>& grasps) {
  if (grasps.empty()) throw ContractError("diversity of an empty grasp list");
  const Eigen::Index dim = grasps.front().q.size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& g : grasps) {
    if (g.q.size() != dim) throw ContractError("grasp configurations have different lengths");
    mean += g.q;
  }
  const auto n = static_cast<double>(grasps.size());
  mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& g : grasps) var += (g.q - mean).cwiseAbs2();
  DiversityStats out;
  out.per_dim_std = (var / n).cwiseSqrt();
  out.mean_std = dim > 0 ? out.per_dim_std.mean() : 0.0;
  return out;
}

namespace {

std::vector<int> tips_below(const KinematicModel& model, int joint) {
  std::vector<int> tips;
  for (int li = 0; li < model.n_links(); ++li) {
    if (model.link(li).kind == LinkKind::tip_extension && model.is_ancestor_joint(joint, li)) tips.push_back(li);
  }
  return tips;
}

}  // namespace

double mean_tip_distance(const KinematicModel& model, const JointConfig& q, const Vec3& object_centroid, int dof) {
  const auto tips = tips_below(model, model.dof_joints().at(static_cast<std::size_t>(dof)));
  if (tips.empty()) return 0.0;
  const LinkPoseSet poses = forward_kinematics(model, q);
  double sum = 0.0;
  for (int t : tips) sum += (poses[static_cast<std::size_t>(t)].translation() - object_centroid).norm();
  return sum / static_cast<double>(tips.size());
}

ControllerTargets controller_targets(const KinematicModel& model, const JointConfig& q_pred,
                                     const Vec3& object_centroid, double delta) {
  if (!within_limits(model, q_pred, 1e-12)) throw ContractError("q_pred lies outside the joint limits");
  if (!(delta >= 0.0)) throw ContractError("delta must be nonnegative");
  const LinkPoseSet poses = forward_kinematics(model, q_pred);
  ControllerTargets out{q_pred, q_pred};
  for (int dof = KinematicModel::kWristDofs; dof < model.n_dof(); ++dof) {
    const auto tips = tips_below(model, model.dof_joints()[static_cast<std::size_t>(dof)]);
    if (tips.empty()) continue;
    double derivative = 0.0;
    for (int t : tips) {
      const Vec3 d = poses[static_cast<std::size_t>(t)].translation() - object_centroid;
      const double len = d.norm();
      if (len == 0.0) continue;
      derivative += (d / len).dot(link_origin_jacobian(model, poses, t).col(dof));
    }
    derivative /= static_cast<double>(tips.size());
    if (derivative == 0.0) continue;
    const double away = derivative > 0.0 ? 1.0 : -1.0;
    out.q_outer[dof] += away * delta;
    out.q_inner[dof] -= away * delta;
  }
  out.q_outer = clamp_to_limits(model, out.q_outer);
  out.q_inner = clamp_to_limits(model, out.q_inner);
  return out;
}

std::array<Vec3, 6> disturbance_forces(double object_mass) {
  if (!(object_mass > 0.0)) throw ContractError("object mass must be positive");
  constexpr double kAcceleration = 0.5;  // m/s^2
  const double f = kAcceleration * object_mass;
  return {Vec3(f, 0, 0), Vec3(-f, 0, 0), Vec3(0, f, 0), Vec3(0, -f, 0), Vec3(0, 0, f), Vec3(0, 0, -f)};
}

}  // namespace drg

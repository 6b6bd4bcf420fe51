#include "drg/kinematics.hpp"

#include "drg/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace drg {

std::string_view to_string(JointKind kind) {
  switch (kind) {
    case JointKind::revolute: return "revolute";
    case JointKind::prismatic: return "prismatic";
    case JointKind::fixed: return "fixed";
    case JointKind::virtual_prismatic: return "virtual_prismatic";
    case JointKind::virtual_revolute: return "virtual_revolute";
  }
  return "unknown";
}

int KinematicModel::link_index(std::string_view name) const {
  if (auto i = find_link(name)) return *i;
  throw LookupError("unknown link '" + std::string(name) + "'");
}

std::optional<int> KinematicModel::find_link(std::string_view name) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::vector<int> KinematicModel::target_links() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].kind != LinkKind::wrist_frame) out.push_back(static_cast<int>(i));
  }
  return out;
}

bool KinematicModel::is_ancestor_joint(int joint_index, int link_index) const {
  int ji = links_.at(static_cast<std::size_t>(link_index)).parent_joint;
  while (ji >= 0) {
    if (ji == joint_index) return true;
    const int parent = joints_[static_cast<std::size_t>(ji)].parent;
    if (parent < 0) break;
    ji = links_[static_cast<std::size_t>(parent)].parent_joint;
  }
  return false;
}

std::string KinematicModel::summary_json() const {
  nlohmann::ordered_json j;
  j["name"] = name_;
  auto& links = j["links"] = nlohmann::ordered_json::array();
  for (const auto& l : links_) links.push_back(l.name);
  auto& joints = j["joints"] = nlohmann::ordered_json::array();
  for (const auto& jt : joints_) {
    nlohmann::ordered_json e;
    e["name"] = jt.name;
    e["kind"] = std::string(to_string(jt.kind));
    if (jt.movable()) {
      e["limits"] = {jt.lower, jt.upper};
      e["dof"] = jt.dof;
    } else {
      e["limits"] = nullptr;
    }
    joints.push_back(std::move(e));
  }
  j["n_dof"] = n_dof();
  return j.dump(2);
}

namespace {

void check_size(const KinematicModel& model, const JointConfig& q) {
  if (q.size() != model.n_dof()) {
    throw ContractError("configuration has " + std::to_string(q.size()) + " entries, model '" +
                        model.name() + "' has " + std::to_string(model.n_dof()) + " dofs");
  }
}

Pose joint_motion(const JointSpec& j, double value) {
  Pose m = Pose::Identity();
  if (j.rotational()) {
    m.linear() = Eigen::AngleAxisd(value, j.axis).toRotationMatrix();
  } else {
    m.translation() = value * j.axis;
  }
  return m;
}

}  // namespace

LinkPoseSet forward_kinematics(const KinematicModel& model, const JointConfig& q) {
  check_size(model, q);
  LinkPoseSet poses(static_cast<std::size_t>(model.n_links()));
  for (int i = 0; i < model.n_links(); ++i) {
    const JointSpec& j = model.joint(model.link(i).parent_joint);
    Pose pose = j.parent < 0 ? j.origin : poses[static_cast<std::size_t>(j.parent)] * j.origin;
    if (j.movable()) pose = pose * joint_motion(j, q[j.dof]);
    poses[static_cast<std::size_t>(i)] = pose;
  }
  return poses;
}

Pose wrist_pose(const JointConfig& q) {
  Pose p = Pose::Identity();
  p.translation() = q.head<3>();
  p.linear() = (Eigen::AngleAxisd(q[5], Vec3::UnitZ()) * Eigen::AngleAxisd(q[4], Vec3::UnitY()) *
                Eigen::AngleAxisd(q[3], Vec3::UnitX()))
                   .toRotationMatrix();
  return p;
}

Eigen::Matrix<double, 6, 1> wrist_coordinates(const Pose& wrist) {
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = wrist.translation();
  const Mat3& r = wrist.linear();
  // R = Rz(yaw) Ry(pitch) Rx(roll)
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll, yaw;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    roll = 0.0;
    yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  out[3] = roll;
  out[4] = pitch;
  out[5] = yaw;
  return out;
}

Jacobian link_origin_jacobian(const KinematicModel& model, const LinkPoseSet& poses, int link_index) {
  Jacobian jac = Jacobian::Zero(3, model.n_dof());
  const Vec3 p = poses[static_cast<std::size_t>(link_index)].translation();
  int ji = model.link(link_index).parent_joint;
  while (ji >= 0) {
    const JointSpec& j = model.joint(ji);
    const Pose frame = j.parent < 0 ? j.origin : poses[static_cast<std::size_t>(j.parent)] * j.origin;
    if (j.movable()) {
      const Vec3 axis = frame.linear() * j.axis;
      jac.col(j.dof) = j.rotational() ? Vec3(axis.cross(p - frame.translation())) : axis;
    }
    if (j.parent < 0) break;
    ji = model.link(j.parent).parent_joint;
  }
  return jac;
}

Jacobian link_origin_jacobian(const KinematicModel& model, const JointConfig& q,
                              std::string_view link_id) {
  const int link = model.link_index(link_id);
  return link_origin_jacobian(model, forward_kinematics(model, q), link);
}

JointConfig clamp_to_limits(const KinematicModel& model, const JointConfig& q) {
  check_size(model, q);
  return q.cwiseMax(model.lower_limits()).cwiseMin(model.upper_limits());
}

bool within_limits(const KinematicModel& model, const JointConfig& q, double tol) {
  if (q.size() != model.n_dof()) return false;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (!std::isfinite(q[i])) return false;
    if (q[i] < model.lower_limits()[i] - tol || q[i] > model.upper_limits()[i] + tol) return false;
  }
  return true;
}

JointConfig mid_range_config(const KinematicModel& model) {
  JointConfig q = 0.5 * (model.lower_limits() + model.upper_limits());
  q.head<KinematicModel::kWristDofs>().setZero();
  return q;
}

}  // namespace drg

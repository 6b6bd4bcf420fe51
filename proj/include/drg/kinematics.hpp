#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Pose = Eigen::Isometry3d;
using JointConfig = Eigen::VectorXd;
using Jacobian = Eigen::Matrix<double, 3, Eigen::Dynamic>;

enum class JointKind { revolute, prismatic, fixed, virtual_prismatic, virtual_revolute };

enum class LinkKind {
  body,           // link from the source URDF
  wrist_frame,    // intermediate frame of the floating wrist chain
  tip_extension,  // virtual link appended past a leaf link
};

std::string_view to_string(JointKind kind);

/// Visual (or collision) geometry attached to a link, in the link frame.
struct Geometry {
  enum class Shape { box, cylinder, sphere, mesh };
  Shape shape = Shape::box;
  Vec3 size = Vec3::Zero();  // box extents
  double radius = 0.0;       // cylinder, sphere
  double length = 0.0;       // cylinder (along local z)
  std::string filename;      // mesh
  Vec3 scale = Vec3::Ones(); // mesh
  Pose origin = Pose::Identity();
};

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::fixed;
  Vec3 axis = Vec3::UnitX();
  Pose origin = Pose::Identity();
  double lower = 0.0;
  double upper = 0.0;
  std::string parent_link;  // empty for the world frame
  std::string child_link;
  int parent = -1;  // link index, -1 = world
  int child = -1;
  int dof = -1;     // configuration index, -1 for fixed joints

  bool movable() const { return dof >= 0; }
  bool rotational() const {
    return kind == JointKind::revolute || kind == JointKind::virtual_revolute;
  }
};

struct Link {
  std::string name;
  LinkKind kind = LinkKind::body;
  int parent_joint = -1;
  std::vector<int> child_joints;
  std::vector<Geometry> visuals;
};

struct ModelOptions {
  double virtual_tip_extension_length = 0.02;
  /// Direction of the tip extension in the leaf link's frame.
  Vec3 tip_extension_axis = Vec3::UnitX();
};

/// Articulated hand with a floating wrist.
///
/// The first six configuration entries are the virtual wrist joints
/// (x, y, z, roll, pitch, yaw). The wrist transform is
///   T = Trans(x, y, z) * Rz(yaw) * Ry(pitch) * Rx(roll)
/// applied to the URDF root link. Links are stored in topological order so a
/// single forward pass computes every pose. Immutable once built.
class KinematicModel {
public:
  static constexpr int kWristDofs = 6;

  const std::vector<Link>& links() const { return links_; }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const Link& link(int index) const { return links_.at(static_cast<std::size_t>(index)); }
  const JointSpec& joint(int index) const { return joints_.at(static_cast<std::size_t>(index)); }
  int n_dof() const { return static_cast<int>(dof_joints_.size()); }
  int n_links() const { return static_cast<int>(links_.size()); }
  /// Joint index driving each configuration entry.
  const std::vector<int>& dof_joints() const { return dof_joints_; }
  const std::string& name() const { return name_; }
  int root_link() const { return root_link_; }

  /// Throws LookupError for an unknown name.
  int link_index(std::string_view name) const;
  std::optional<int> find_link(std::string_view name) const;

  const Eigen::VectorXd& lower_limits() const { return lower_; }
  const Eigen::VectorXd& upper_limits() const { return upper_; }

  /// Links carrying optimizer targets: URDF bodies and tip extensions.
  std::vector<int> target_links() const;
  /// True when joint `joint_index` lies on the path from the world to `link_index`.
  bool is_ancestor_joint(int joint_index, int link_index) const;

  /// {links: [...], joints: [{name, kind, limits}], n_dof}
  std::string summary_json() const;

private:
  friend KinematicModel load_model(std::string_view urdf_text, const ModelOptions& options);
  friend class ModelBuilder;

  std::string name_;
  std::vector<Link> links_;
  std::vector<JointSpec> joints_;
  std::vector<int> dof_joints_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  int root_link_ = -1;
};

/// Parse URDF text and augment it with the floating wrist and tip extensions.
/// Throws ParseError (malformed XML), StructuralError (loops, missing limits,
/// unsupported joint types).
KinematicModel load_model(std::string_view urdf_text, const ModelOptions& options = {});

/// World pose of every link, indexed like `model.links()`.
using LinkPoseSet = std::vector<Pose>;

LinkPoseSet forward_kinematics(const KinematicModel& model, const JointConfig& q);

/// Wrist transform encoded by q[0..5].
Pose wrist_pose(const JointConfig& q);
/// Inverse of wrist_pose for the six wrist entries (roll, pitch in the
/// principal branch).
Eigen::Matrix<double, 6, 1> wrist_coordinates(const Pose& wrist);

/// Analytic Jacobian of a link origin with respect to every configuration
/// entry. Columns of joints off the root-to-link path are zero.
Jacobian link_origin_jacobian(const KinematicModel& model, const JointConfig& q,
                              std::string_view link_id);
/// Same, reusing poses from forward_kinematics(model, q).
Jacobian link_origin_jacobian(const KinematicModel& model, const LinkPoseSet& poses,
                              int link_index);

JointConfig clamp_to_limits(const KinematicModel& model, const JointConfig& q);
bool within_limits(const KinematicModel& model, const JointConfig& q, double tol = 0.0);

/// Wrist entries zero, actuated joints at the middle of their range.
JointConfig mid_range_config(const KinematicModel& model);

}  // namespace drg

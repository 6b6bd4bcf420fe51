#pragma once

#include "drg/kinematics.hpp"

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace drg {

enum class Provenance { dataset, recovered, manual };

struct GraspRecord {
  std::string robot_id;
  std::string object_id;
  JointConfig q;
  Provenance provenance = Provenance::dataset;
  std::optional<bool> success;
};

std::string_view to_string(Provenance p);
/// Throws DataError for an unknown name.
Provenance provenance_from_string(std::string_view name);

struct DiversityStats {
  double mean_std = 0.0;       // radians (meters for the wrist translation entries)
  Eigen::VectorXd per_dim_std; // population std of every configuration entry
};

/// Population standard deviation per configuration entry (wrist included),
/// averaged over entries.
DiversityStats diversity(const std::vector<GraspRecord>& grasps);

struct ControllerTargets {
  JointConfig q_outer;
  JointConfig q_inner;
};

/// Opening (outer) and closing (inner) targets around a predicted grasp.
/// Each actuated joint moves by `delta` along the sign of the derivative of
/// the mean distance between its descendant fingertips and the object
/// centroid; wrist entries are left unchanged and both results are clamped.
ControllerTargets controller_targets(const KinematicModel& model, const JointConfig& q_pred,
                                     const Vec3& object_centroid, double delta = 0.1);

/// Mean fingertip-to-centroid distance over the tip links downstream of
/// configuration entry `dof`.
double mean_tip_distance(const KinematicModel& model, const JointConfig& q, const Vec3& object_centroid, int dof);

/// Six disturbance forces, +x -x +y -y +z -z, of magnitude 0.5 m/s^2 * mass.
std::array<Vec3, 6> disturbance_forces(double object_mass);

}  // namespace drg

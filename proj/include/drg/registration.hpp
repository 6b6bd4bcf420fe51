#pragma once

#include "drg/cloud.hpp"
#include "drg/kinematics.hpp"
#include "drg/points.hpp"

#include <string>
#include <vector>

namespace drg {

/// Least-squares rigid transform mapping canonical points onto predicted
/// points with known correspondence (Kabsch). det(R) = +1 always.
/// Throws ContractError for fewer than 3 points or mismatched sizes, and
/// DegeneracyError (mentioning `name`) when the points are collinear.
Pose register_link(const Points& canonical, const Points& predicted, const std::string& name = "link");

/// Sum of squared correspondence residuals of `pose`.
double registration_residual(const Points& canonical, const Points& predicted, const Pose& pose);

struct RegisteredLinks {
  LinkPoseSet poses;
  /// Link had points and was registered (fully or by fallback).
  std::vector<bool> valid;
  /// Points were degenerate: translation estimated, rotation copied from the
  /// nearest registered ancestor.
  std::vector<bool> fallback;
};

/// Register every link that has canonical points. Tip extension links are
/// placed by their fixed offset from the registered parent. Labels of
/// `recovered` must partition it consistently with `canonical`.
RegisteredLinks register_all(const KinematicModel& model, const LinkClouds& canonical, const PointCloud& recovered);

}  // namespace drg

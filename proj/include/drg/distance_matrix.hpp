#pragma once

#include "drg/cloud.hpp"
#include "drg/kinematics.hpp"
#include "drg/points.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace drg {

/// Robot-object distance matrix: rows follow the robot cloud, columns the
/// object cloud. Entries are nonnegative Euclidean distances in meters.
using DroMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Pairwise distances computed tile by tile: the matrix is split into a
/// `grid` x `grid` arrangement of tiles that are evaluated in parallel. Every
/// entry is computed by the same expression, so the result is bitwise
/// independent of `grid` and of the thread count.
DroMatrix compute_dro(const Points& robot, const Points& object, Eigen::Index grid = 4);

namespace reference {
/// Plain double loop, single-threaded.
DroMatrix compute_dro(const Points& robot, const Points& object);
}  // namespace reference

/// Locates points from their distances to a fixed reference set.
///
/// With s = |p|^2 the range equations become linear:
///   -2 p_j . p + s = d_j^2 - |p_j|^2
/// The N x 4 system is factored once per reference set (references are
/// centered first for conditioning), so each query costs one 4 x N product
/// plus a few Gauss-Newton steps on the quartic objective
///   sum_j (|p - p_j|^2 - d_j^2)^2.
class Multilaterator {
public:
  static constexpr double kMaxCondition = 1e10;

  /// Throws DegeneracyError for fewer than 4 references or a reference set
  /// whose linearized system has condition number above `max_condition`.
  explicit Multilaterator(const Points& references, double max_condition = kMaxCondition);

  Vec3 locate(const Eigen::Ref<const Eigen::VectorXd>& distances, int refine_steps = 3) const;
  /// Linearized solution only (no refinement).
  Vec3 locate_linear(const Eigen::Ref<const Eigen::VectorXd>& distances) const;

  Eigen::Index size() const { return refs_.rows(); }
  double condition_number() const { return condition_; }

private:
  Points refs_;  // centered
  Vec3 center_;
  Eigen::VectorXd ref_sq_norm_;
  Eigen::Matrix<double, 4, Eigen::Dynamic> pinv_;
  double condition_ = 0.0;
};

Vec3 multilaterate_point(const Eigen::VectorXd& distances, const Points& object, int refine_steps = 3);

/// Row-wise multilateration of a whole matrix. The optional labels are
/// attached to the output unchanged.
PointCloud recover_cloud(const DroMatrix& dro, const Points& object,
                         std::vector<std::uint32_t> labels = {}, std::vector<std::string> label_names = {},
                         int refine_steps = 3);

namespace reference {
PointCloud recover_cloud(const DroMatrix& dro, const Points& object, int refine_steps = 3);
}  // namespace reference

}  // namespace drg

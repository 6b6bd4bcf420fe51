#pragma once

#include "drg/distance_matrix.hpp"
#include "drg/kinematics.hpp"
#include "drg/mesh.hpp"
#include "drg/points.hpp"

namespace drg {

/// N x D per-point feature rows.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ContrastiveParams {
  double tau = 0.1;
  double lambda = 10.0;
  /// Normalize the negative-pair weights by the maximum of each row instead
  /// of the maximum over the whole matrix.
  bool per_row_max = false;
};

struct ContrastiveWeights {
  Eigen::MatrixXd omega;
  /// Set when every pair was coincident and the weights fell back to 1.
  bool degenerate = false;
};

/// omega_ij = tanh(lambda |p_i - p_j|) / max tanh(lambda |.|) for i != j,
/// omega_ii = 1.
ContrastiveWeights contrastive_weights(const Points& points, double lambda, bool per_row_max = false);

/// Point-level weighted InfoNCE over cosine similarities,
///   -(1/N) sum_i log[ exp(s_ii / tau) / sum_j omega_ij exp(s_ij / tau) ],
/// normalized by the number of points.
double contrastive_loss(const FeatureMatrix& phi_a, const FeatureMatrix& phi_b, const Points& points_b,
                        const ContrastiveParams& params = {});

/// |x - x_gt| + geodesic rotation angle.
double pose_loss(const Pose& pose, const Pose& pose_gt);

/// |sum_i min(sdf(p_i), 0)| against a closed mesh. Throws DataError for an
/// open mesh.
double penetration_loss(const Points& robot, const TriangleMesh& object);

namespace reference {
double penetration_loss(const Points& robot, const TriangleMesh& object);
}  // namespace reference

/// Mean absolute elementwise difference.
double dro_l1_loss(const DroMatrix& pred, const DroMatrix& gt);

}  // namespace drg

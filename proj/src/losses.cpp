#include "drg/losses.hpp"

#include "drg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace drg {

ContrastiveWeights contrastive_weights(const Points& points, double lambda, bool per_row_max) {
  const Eigen::Index n = points.rows();
  if (n < 1) throw ContractError("contrastive_weights needs at least one point");
  if (!(lambda > 0.0)) throw ContractError("lambda must be positive");
  ContrastiveWeights out;
  out.omega = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      t(i, j) = t(j, i) = std::tanh(lambda * (points.row(i) - points.row(j)).norm());
    }
  }
  if (n == 1) return out;
  const double global_max = t.maxCoeff();
  if (!(global_max > 0.0)) {
    out.omega.setOnes();
    out.degenerate = true;
    return out;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double denom = per_row_max ? t.row(i).maxCoeff() : global_max;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      out.omega(i, j) = denom > 0.0 ? t(i, j) / denom : 1.0;
    }
    if (!(denom > 0.0)) out.degenerate = true;
  }
  return out;
}

double contrastive_loss(const FeatureMatrix& phi_a, const FeatureMatrix& phi_b, const Points& points_b,
                        const ContrastiveParams& params) {
  const Eigen::Index n = phi_a.rows();
  if (phi_b.rows() != n || points_b.rows() != n) throw ContractError("feature and point counts differ");
  if (phi_a.cols() != phi_b.cols()) throw ContractError("feature dimensions differ");
  if (!(params.tau > 0.0)) throw ContractError("tau must be positive");
  const Eigen::VectorXd norm_a = phi_a.rowwise().norm();
  const Eigen::VectorXd norm_b = phi_b.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(norm_a[i] > 0.0) || !(norm_b[i] > 0.0)) {
      throw ContractError("feature row " + std::to_string(i) + " has zero norm");
    }
  }
  const Eigen::MatrixXd omega = contrastive_weights(points_b, params.lambda, params.per_row_max).omega;
  const FeatureMatrix unit_a = norm_a.cwiseInverse().asDiagonal() * phi_a;
  const FeatureMatrix unit_b = norm_b.cwiseInverse().asDiagonal() * phi_b;
  const Eigen::MatrixXd logits = (unit_a * unit_b.transpose()) / params.tau;

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    // log sum_j omega_ij exp(l_ij), shifted by the row max over weighted terms
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (omega(i, j) > 0.0) shift = std::max(shift, logits(i, j));
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (omega(i, j) > 0.0) acc += omega(i, j) * std::exp(logits(i, j) - shift);
    }
    total += logits(i, i) - (shift + std::log(acc));
  }
  return -total / static_cast<double>(n);
}

double pose_loss(const Pose& pose, const Pose& pose_gt) {
  const auto proper = [](const Mat3& r) {
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-6 && r.determinant() > 0.0;
  };
  if (!proper(pose.linear()) || !proper(pose_gt.linear())) throw ContractError("pose_loss needs proper rotations");
  const double c = ((pose.linear().transpose() * pose_gt.linear()).trace() - 1.0) / 2.0;
  return (pose.translation() - pose_gt.translation()).norm() + std::acos(std::clamp(c, -1.0, 1.0));
}

double penetration_loss(const Points& robot, const TriangleMesh& object) {
  if (!is_watertight(object)) throw DataError("penetration loss needs a closed object mesh");
  std::vector<double> depth(static_cast<std::size_t>(robot.rows()));
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < robot.rows(); ++i) {
    depth[static_cast<std::size_t>(i)] = std::min(signed_distance(object, robot.row(i).transpose()), 0.0);
  }
  // Serial sum keeps the result independent of the thread count.
  return std::abs(std::accumulate(depth.begin(), depth.end(), 0.0));
}

namespace reference {

double penetration_loss(const Points& robot, const TriangleMesh& object) {
  if (!is_watertight(object)) throw DataError("penetration loss needs a closed object mesh");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < robot.rows(); ++i) {
    sum += std::min(signed_distance(object, robot.row(i).transpose()), 0.0);
  }
  return std::abs(sum);
}

}  // namespace reference

double dro_l1_loss(const DroMatrix& pred, const DroMatrix& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw ContractError("dro_l1_loss shape mismatch: " + std::to_string(pred.rows()) + "x" +
                        std::to_string(pred.cols()) + " vs " + std::to_string(gt.rows()) + "x" +
                        std::to_string(gt.cols()));
  }
  if (pred.size() == 0) throw ContractError("dro_l1_loss on empty matrices");
  return (pred - gt).cwiseAbs().sum() / static_cast<double>(pred.size());
}

}  // namespace drg

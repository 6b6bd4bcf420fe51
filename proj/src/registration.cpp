#include "drg/registration.hpp"

#include "drg/error.hpp"

#include <Eigen/SVD>

namespace drg {

Pose register_link(const Points& canonical, const Points& predicted, const std::string& name) {
  if (canonical.rows() != predicted.rows()) {
    throw ContractError(name + ": canonical and predicted point counts differ (" + std::to_string(canonical.rows()) +
                        " vs " + std::to_string(predicted.rows()) + ")");
  }
  if (canonical.rows() < 3) {
    throw ContractError(name + ": registration needs at least 3 points, got " + std::to_string(canonical.rows()));
  }
  const Vec3 c_mean = canonical.colwise().mean().transpose();
  const Vec3 p_mean = predicted.colwise().mean().transpose();
  const Mat3 h = (canonical.rowwise() - c_mean.transpose()).transpose() * (predicted.rowwise() - p_mean.transpose());

  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-10 * sv[0]) {
    throw DegeneracyError(name + ": points are collinear or coincident, rotation is undetermined");
  }
  Mat3 v = svd.matrixV();
  Mat3 r = v * svd.matrixU().transpose();
  if (r.determinant() < 0.0) {
    v.col(2) *= -1.0;
    r = v * svd.matrixU().transpose();
  }
  Pose pose = Pose::Identity();
  pose.linear() = r;
  pose.translation() = p_mean - r * c_mean;
  return pose;
}

double registration_residual(const Points& canonical, const Points& predicted, const Pose& pose) {
  const Points moved = (canonical * pose.linear().transpose()).rowwise() + pose.translation().transpose();
  return (moved - predicted).squaredNorm();
}

RegisteredLinks register_all(const KinematicModel& model, const LinkClouds& canonical, const PointCloud& recovered) {
  if (static_cast<int>(canonical.per_link.size()) != model.n_links()) {
    throw ContractError("canonical clouds do not cover the model links");
  }
  const LinkClouds predicted = from_point_cloud(model, recovered);
  for (int i = 0; i < model.n_links(); ++i) {
    const auto a = canonical.per_link[static_cast<std::size_t>(i)].rows();
    const auto b = predicted.per_link[static_cast<std::size_t>(i)].rows();
    if (a != b) {
      throw ContractError("label mismatch on link '" + model.link(i).name + "': " + std::to_string(a) +
                          " canonical points, " + std::to_string(b) + " recovered");
    }
  }

  const auto n = static_cast<std::size_t>(model.n_links());
  RegisteredLinks out;
  out.poses.assign(n, Pose::Identity());
  out.valid.assign(n, false);
  out.fallback.assign(n, false);
  std::vector<char> degenerate(n, 0);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < model.n_links(); ++i) {
    const auto li = static_cast<std::size_t>(i);
    const Points& c = canonical.per_link[li];
    if (c.rows() == 0) continue;
    try {
      out.poses[li] = register_link(c, predicted.per_link[li], model.link(i).name);
    } catch (const Error&) {
      degenerate[li] = 1;
    }
  }

  // Serial pass in topological order: fallbacks need registered ancestors,
  // tip extensions need their parent.
  for (int i = 0; i < model.n_links(); ++i) {
    const auto li = static_cast<std::size_t>(i);
    const Link& link = model.link(i);
    const JointSpec& in = model.joint(link.parent_joint);
    if (link.kind == LinkKind::tip_extension) {
      if (in.parent >= 0 && out.valid[static_cast<std::size_t>(in.parent)]) {
        out.poses[li] = out.poses[static_cast<std::size_t>(in.parent)] * in.origin;
        out.valid[li] = true;
      }
      continue;
    }
    const Points& c = canonical.per_link[li];
    if (c.rows() == 0) continue;
    if (degenerate[li]) {
      Mat3 rot = Mat3::Identity();
      for (int p = in.parent; p >= 0; p = model.joint(model.link(p).parent_joint).parent) {
        if (out.valid[static_cast<std::size_t>(p)]) {
          rot = out.poses[static_cast<std::size_t>(p)].linear();
          break;
        }
      }
      const Vec3 c_mean = c.colwise().mean().transpose();
      const Vec3 p_mean = predicted.per_link[li].colwise().mean().transpose();
      out.poses[li].linear() = rot;
      out.poses[li].translation() = p_mean - rot * c_mean;
      out.fallback[li] = true;
    }
    out.valid[li] = true;
  }
  return out;
}

}  // namespace drg

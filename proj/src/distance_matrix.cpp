#include "drg/distance_matrix.hpp"

#include "drg/error.hpp"

#include <algorithm>
#include <cmath>

namespace drg {

namespace {

inline double point_distance(const Points& a, Eigen::Index i, const Points& b, Eigen::Index j) {
  const double dx = a(i, 0) - b(j, 0), dy = a(i, 1) - b(j, 1), dz = a(i, 2) - b(j, 2);
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void check_clouds(const Points& robot, const Points& object) {
  if (robot.rows() == 0 || object.rows() == 0) throw ContractError("compute_dro needs nonempty clouds");
}

void check_matrix(const DroMatrix& dro, const Points& object) {
  if (dro.cols() != object.rows()) {
    throw ContractError("matrix has " + std::to_string(dro.cols()) + " columns but the object cloud has " +
                        std::to_string(object.rows()) + " points");
  }
  for (Eigen::Index r = 0; r < dro.rows(); ++r) {
    for (Eigen::Index c = 0; c < dro.cols(); ++c) {
      if (!std::isfinite(dro(r, c))) {
        throw DataError("row " + std::to_string(r) + ": non-finite distance in column " + std::to_string(c));
      }
    }
  }
}

}  // namespace

DroMatrix compute_dro(const Points& robot, const Points& object, Eigen::Index grid) {
  check_clouds(robot, object);
  if (grid < 1) throw ContractError("tile grid must be at least 1");
  const Eigen::Index rows = robot.rows(), cols = object.rows();
  const Eigen::Index gr = std::min(grid, rows), gc = std::min(grid, cols);
  const Eigen::Index tile_r = (rows + gr - 1) / gr, tile_c = (cols + gc - 1) / gc;
  DroMatrix out(rows, cols);
#pragma omp parallel for collapse(2) schedule(static)
  for (Eigen::Index br = 0; br < gr; ++br) {
    for (Eigen::Index bc = 0; bc < gc; ++bc) {
      const Eigen::Index r_end = std::min(rows, (br + 1) * tile_r);
      const Eigen::Index c_end = std::min(cols, (bc + 1) * tile_c);
      for (Eigen::Index i = br * tile_r; i < r_end; ++i) {
        for (Eigen::Index j = bc * tile_c; j < c_end; ++j) out(i, j) = point_distance(robot, i, object, j);
      }
    }
  }
  return out;
}

namespace reference {

DroMatrix compute_dro(const Points& robot, const Points& object) {
  check_clouds(robot, object);
  DroMatrix out(robot.rows(), object.rows());
  for (Eigen::Index i = 0; i < robot.rows(); ++i) {
    for (Eigen::Index j = 0; j < object.rows(); ++j) out(i, j) = point_distance(robot, i, object, j);
  }
  return out;
}

}  // namespace reference

Multilaterator::Multilaterator(const Points& references, double max_condition) {
  const Eigen::Index n = references.rows();
  if (n < 4) {
    throw DegeneracyError("multilateration needs at least 4 reference points, got " + std::to_string(n));
  }
  center_ = references.colwise().mean().transpose();
  refs_ = references.rowwise() - center_.transpose();
  ref_sq_norm_ = refs_.rowwise().squaredNorm();

  Eigen::MatrixXd a(n, 4);
  a.leftCols<3>() = -2.0 * refs_;
  a.col(3).setOnes();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::Matrix4d r = qr.matrixQR().topRows<4>().triangularView<Eigen::Upper>();
  const Eigen::Vector4d sv = Eigen::JacobiSVD<Eigen::Matrix4d>(r).singularValues();
  condition_ = sv[3] > 0.0 ? sv[0] / sv[3] : std::numeric_limits<double>::infinity();
  if (!(condition_ <= max_condition)) {
    throw DegeneracyError("reference points are degenerate (coplanar or coincident): condition number " +
                          std::to_string(condition_));
  }
  // Pseudo-inverse R^-1 Q1^T, applied per query with a fixed summation order.
  const Eigen::MatrixXd q1 = qr.householderQ() * Eigen::MatrixXd::Identity(n, 4);
  pinv_ = r.triangularView<Eigen::Upper>().solve(q1.transpose());
}

Vec3 Multilaterator::locate_linear(const Eigen::Ref<const Eigen::VectorXd>& distances) const {
  if (distances.size() != refs_.rows()) {
    throw ContractError("distance vector has " + std::to_string(distances.size()) + " entries, expected " +
                        std::to_string(refs_.rows()));
  }
  Vec3 u = Vec3::Zero();
  for (Eigen::Index j = 0; j < refs_.rows(); ++j) {
    const double b = distances[j] * distances[j] - ref_sq_norm_[j];
    u[0] += pinv_(0, j) * b;
    u[1] += pinv_(1, j) * b;
    u[2] += pinv_(2, j) * b;
  }
  return u + center_;
}

Vec3 Multilaterator::locate(const Eigen::Ref<const Eigen::VectorXd>& distances, int refine_steps) const {
  Vec3 u = locate_linear(distances) - center_;
  const Eigen::Index n = refs_.rows();
  const auto objective = [&](const Vec3& x) {
    double f = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = (x - refs_.row(j).transpose()).squaredNorm() - distances[j] * distances[j];
      f += r * r;
    }
    return f;
  };
  double f = objective(u);
  for (int step = 0; step < refine_steps && f > 0.0; ++step) {
    Mat3 h = Mat3::Zero();
    Vec3 g = Vec3::Zero();
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vec3 diff = u - refs_.row(j).transpose();
      const double r = diff.squaredNorm() - distances[j] * distances[j];
      const Vec3 jac = 2.0 * diff;
      h.noalias() += jac * jac.transpose();
      g += r * jac;
    }
    const Eigen::LDLT<Mat3> ldlt(h);
    if (ldlt.info() != Eigen::Success) break;
    const Vec3 delta = ldlt.solve(-g);
    if (!delta.allFinite()) break;
    const Vec3 next = u + delta;
    const double f_next = objective(next);
    if (!(f_next <= f)) break;
    u = next;
    f = f_next;
  }
  return u + center_;
}

Vec3 multilaterate_point(const Eigen::VectorXd& distances, const Points& object, int refine_steps) {
  if (distances.size() != object.rows()) {
    throw ContractError("distance vector length does not match the reference count");
  }
  return Multilaterator(object).locate(distances, refine_steps);
}

PointCloud recover_cloud(const DroMatrix& dro, const Points& object, std::vector<std::uint32_t> labels,
                         std::vector<std::string> label_names, int refine_steps) {
  check_matrix(dro, object);
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != dro.rows()) {
    throw ContractError("label count does not match matrix rows");
  }
  const Multilaterator solver = [&] {
    try {
      return Multilaterator(object);
    } catch (const DegeneracyError& e) {
      throw DegeneracyError(std::string("row 0: ") + e.what());
    }
  }();
  PointCloud out;
  out.points.resize(dro.rows(), 3);
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < dro.rows(); ++r) {
    out.points.row(r) = solver.locate(dro.row(r).transpose(), refine_steps).transpose();
  }
  out.labels = std::move(labels);
  out.label_names = std::move(label_names);
  return out;
}

namespace reference {

PointCloud recover_cloud(const DroMatrix& dro, const Points& object, int refine_steps) {
  check_matrix(dro, object);
  const Multilaterator solver(object);
  PointCloud out;
  out.points.resize(dro.rows(), 3);
  for (Eigen::Index r = 0; r < dro.rows(); ++r) {
    out.points.row(r) = solver.locate(dro.row(r).transpose(), refine_steps).transpose();
  }
  return out;
}

}  // namespace reference

}  // namespace drg

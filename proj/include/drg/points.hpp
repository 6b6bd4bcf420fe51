#pragma once

#include <Eigen/Core>

namespace drg {

/// N x 3 row-major point array (meters). Row-major matches the on-disk layout.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

}  // namespace drg

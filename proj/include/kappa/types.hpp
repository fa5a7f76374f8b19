#pragma once

#include <Eigen/Dense>

namespace kappa {

/// Row-major dense matrix. Sample matrices are channels x frames, so each
/// channel's time series is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

}  // namespace kappa

#pragma once

#include <Eigen/Core>

namespace greybox {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Read-only view of a point; accepts vectors and matrix columns without copying.
using ConstPoint = Eigen::Ref<const Eigen::VectorXd>;

/// Point sets are stored column-wise: a d x n matrix holds n points in R^d.
using PointSet = Eigen::MatrixXd;

}  // namespace greybox

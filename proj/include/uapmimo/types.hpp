#ifndef UAPMIMO_TYPES_HPP
#define UAPMIMO_TYPES_HPP

#include <Eigen/Dense>

namespace uapmimo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// One sample per row; matches the on-disk layout of datasets.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace uapmimo

#endif  // UAPMIMO_TYPES_HPP

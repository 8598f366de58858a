#pragma once

#include <Eigen/Dense>

namespace cdcp {

using Real = double;

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorT = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixT<Real>;
using Vector = VectorT<Real>;
using RowVector = RowVectorT<Real>;
using Point = Eigen::Matrix<Real, 2, 1>;

// true marks an excluded entry.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace cdcp

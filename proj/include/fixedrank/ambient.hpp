#pragma once

#include <concepts>

#include <Eigen/Dense>

#include "fixedrank/linalg.hpp"

namespace fixedrank {

/// A d1 x d2 matrix that is only ever touched through products with thin
/// dense blocks: Z * X and Z^T * Y. Sparse sampled matrices and dense
/// matrices both qualify.
template <typename Op>
concept AmbientAction = requires(const Op& op, const Eigen::MatrixXd& x) {
  { op.rows() } -> std::convertible_to<Eigen::Index>;
  { op.cols() } -> std::convertible_to<Eigen::Index>;
  { op.times(x) } -> std::convertible_to<Eigen::MatrixXd>;
  { op.transpose_times(x) } -> std::convertible_to<Eigen::MatrixXd>;
};

template <typename Scalar = double>
class DenseAmbient {
 public:
  DenseAmbient() = default;
  explicit DenseAmbient(MatrixX<Scalar> z) : z_(std::move(z)) {}

  Eigen::Index rows() const { return z_.rows(); }
  Eigen::Index cols() const { return z_.cols(); }
  MatrixX<Scalar> times(const MatrixX<Scalar>& x) const { return z_ * x; }
  MatrixX<Scalar> transpose_times(const MatrixX<Scalar>& y) const { return z_.transpose() * y; }
  const MatrixX<Scalar>& matrix() const { return z_; }

 private:
  MatrixX<Scalar> z_;
};

}  // namespace fixedrank

#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <utility>

#include <Eigen/Dense>

#include "fixedrank/linalg.hpp"

namespace fixedrank {

/// A fixed-size tuple of dense blocks. The tag keeps points, tangent vectors
/// and partial derivatives of different geometries from mixing even when
/// their shapes coincide; arithmetic is factor-wise.
template <typename Tag, typename Scalar_, std::size_t N>
struct FactorTuple {
  using Scalar = Scalar_;
  using Matrix = MatrixX<Scalar>;
  static constexpr std::size_t size = N;

  std::array<Matrix, N> blocks;

  FactorTuple() = default;
  explicit FactorTuple(std::array<Matrix, N> b) : blocks(std::move(b)) {}
  template <typename... M>
    requires(sizeof...(M) == N && N > 1)
  FactorTuple(M&&... m) : blocks{Matrix(std::forward<M>(m))...} {}

  Matrix& operator[](std::size_t i) { return blocks[i]; }
  const Matrix& operator[](std::size_t i) const { return blocks[i]; }

  FactorTuple& operator+=(const FactorTuple& o) {
    for (std::size_t i = 0; i < N; ++i) blocks[i] += o.blocks[i];
    return *this;
  }
  FactorTuple& operator-=(const FactorTuple& o) {
    for (std::size_t i = 0; i < N; ++i) blocks[i] -= o.blocks[i];
    return *this;
  }
  FactorTuple& operator*=(Scalar a) {
    for (auto& b : blocks) b *= a;
    return *this;
  }
  friend FactorTuple operator+(FactorTuple a, const FactorTuple& b) { return a += b; }
  friend FactorTuple operator-(FactorTuple a, const FactorTuple& b) { return a -= b; }
  friend FactorTuple operator*(Scalar s, FactorTuple a) { return a *= s; }
  friend FactorTuple operator*(FactorTuple a, Scalar s) { return a *= s; }
  friend FactorTuple operator-(FactorTuple a) { return a *= Scalar(-1); }

  /// Sum of Frobenius inner products of corresponding blocks.
  Scalar euclidean_dot(const FactorTuple& o) const {
    Scalar acc(0);
    for (std::size_t i = 0; i < N; ++i) acc += blocks[i].cwiseProduct(o.blocks[i]).sum();
    return acc;
  }
  Scalar euclidean_norm() const { return std::sqrt(euclidean_dot(*this)); }
  bool all_finite() const {
    for (const auto& b : blocks) {
      if (!b.allFinite()) return false;
    }
    return true;
  }

  /// Zero tuple with the same block shapes as `like` (any tag).
  template <typename OtherTag>
  static FactorTuple zeros_like(const FactorTuple<OtherTag, Scalar, N>& like) {
    FactorTuple out;
    for (std::size_t i = 0; i < N; ++i) out.blocks[i] = Matrix::Zero(like[i].rows(), like[i].cols());
    return out;
  }

  /// Same storage under a different tag.
  template <typename OtherTag>
  FactorTuple<OtherTag, Scalar, N> retag() const {
    return FactorTuple<OtherTag, Scalar, N>(blocks);
  }
};

template <typename Scalar, typename Rng>
MatrixX<Scalar> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixX<Scalar> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Scalar(normal(rng));
  }
  return m;
}

/// Gaussian tuple shaped like `like`.
template <typename Tuple, typename Like, typename Rng>
Tuple gaussian_like(const Like& like, Rng& rng) {
  Tuple out;
  for (std::size_t i = 0; i < Tuple::size; ++i) {
    out[i] = gaussian_matrix<typename Tuple::Scalar>(like[i].rows(), like[i].cols(), rng);
  }
  return out;
}

template <typename Scalar, typename Rng>
MatrixX<Scalar> random_orthonormal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const MatrixX<Scalar> g = gaussian_matrix<Scalar>(rows, cols, rng);
  return Eigen::HouseholderQR<MatrixX<Scalar>>(g).householderQ() * MatrixX<Scalar>::Identity(rows, cols);
}

template <typename Scalar, typename Rng>
MatrixX<Scalar> random_skew(Eigen::Index r, Rng& rng) {
  return skew_part(gaussian_matrix<Scalar>(r, r, rng));
}

}  // namespace fixedrank

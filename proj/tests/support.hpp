#pragma once

// Independent oracles and random instances shared by the unit tests and the
// acceptance binary. Nothing here calls the solvers being tested.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "fixedrank/completion.hpp"
#include "fixedrank/embedded.hpp"
#include "fixedrank/fullrank.hpp"
#include "fixedrank/polar.hpp"
#include "fixedrank/subspace.hpp"

namespace fixedrank::test {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_spd(Index r, Rng& rng) {
  const MatrixXd a = gaussian_matrix<double>(r, r, rng);
  return a * a.transpose() + double(r) * MatrixXd::Identity(r, r);
}

/// A X + X B = C through the (mn x mn) vectorized system
/// (I_n kron A + B^T kron I_m) vec X = vec C.
inline MatrixXd kron_sylvester(const MatrixXd& a, const MatrixXd& b, const MatrixXd& c) {
  const Index m = a.rows();
  const Index n = b.rows();
  const MatrixXd k = Eigen::kroneckerProduct(MatrixXd::Identity(n, n), a).eval() +
                     Eigen::kroneckerProduct(b.transpose(), MatrixXd::Identity(m, m)).eval();
  const VectorXd vec_c = Eigen::Map<const VectorXd>(c.data(), m * n);
  VectorXd x = k.fullPivLu().solve(vec_c);
  return Eigen::Map<MatrixXd>(x.data(), m, n);
}

/// exp(S) by scaling and squaring a 30-term Taylor series.
inline MatrixXd taylor_expm(const MatrixXd& s) {
  int squarings = 0;
  double norm = s.norm();
  while (norm > 0.5) {
    norm /= 2;
    ++squarings;
  }
  const MatrixXd a = s / std::pow(2.0, squarings);
  MatrixXd term = MatrixXd::Identity(s.rows(), s.cols());
  MatrixXd sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * a / double(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// Random points of the total spaces.

inline FullRankGeometry<double>::Point random_point(const FullRankGeometry<double>&, Index d1,
                                                     Index d2, Index r, Rng& rng) {
  return {gaussian_matrix<double>(d1, r, rng), gaussian_matrix<double>(d2, r, rng)};
}

inline PolarGeometry<double>::Point random_point(const PolarGeometry<double>& geo, Index d1,
                                                  Index d2, Index r, Rng& rng) {
  MatrixXd b = random_spd(r, rng);
  if (geo.scaling() == ScalingMode::Diagonal) b = MatrixXd(b.diagonal().asDiagonal());
  return {random_orthonormal<double>(d1, r, rng), b, random_orthonormal<double>(d2, r, rng)};
}

inline SubspaceGeometry<double>::Point random_point(const SubspaceGeometry<double>&, Index d1,
                                                     Index d2, Index r, Rng& rng) {
  return {random_orthonormal<double>(d1, r, rng), gaussian_matrix<double>(d2, r, rng)};
}

inline EmbeddedGeometry<double>::Point random_point(const EmbeddedGeometry<double>&, Index d1,
                                                     Index d2, Index r, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.5, 3.0);
  std::vector<double> s(static_cast<std::size_t>(r));
  for (auto& v : s) v = unit(rng);
  std::sort(s.rbegin(), s.rend());
  return EmbeddedGeometry<double>::make_point(random_orthonormal<double>(d1, r, rng),
                                              Eigen::Map<VectorXd>(s.data(), r),
                                              random_orthonormal<double>(d2, r, rng));
}

// Bases of the vertical space, one element per basis matrix of the Lie
// algebra of the fiber group.

inline std::vector<FullRankGeometry<double>::Tangent> vertical_basis(
    const FullRankGeometry<double>& geo, const FullRankGeometry<double>::Point& x) {
  const Index r = x[0].cols();
  std::vector<FullRankGeometry<double>::Tangent> out;
  for (Index j = 0; j < r; ++j) {
    for (Index i = 0; i < r; ++i) {
      MatrixXd e = MatrixXd::Zero(r, r);
      e(i, j) = 1;
      out.push_back(geo.vertical(x, e));
    }
  }
  return out;
}

template <typename G>
std::vector<typename G::Tangent> skew_vertical_basis(const G& geo, const typename G::Point& x,
                                                     Index r) {
  std::vector<typename G::Tangent> out;
  for (Index j = 0; j < r; ++j) {
    for (Index i = 0; i < j; ++i) {
      MatrixXd e = MatrixXd::Zero(r, r);
      e(i, j) = 1;
      e(j, i) = -1;
      out.push_back(geo.vertical(x, e));
    }
  }
  return out;
}

inline std::vector<PolarGeometry<double>::Tangent> vertical_basis(
    const PolarGeometry<double>& geo, const PolarGeometry<double>::Point& x) {
  return skew_vertical_basis(geo, x, x[1].rows());
}

inline std::vector<SubspaceGeometry<double>::Tangent> vertical_basis(
    const SubspaceGeometry<double>& geo, const SubspaceGeometry<double>::Point& x) {
  return skew_vertical_basis(geo, x, x[0].cols());
}

/// eta minus its g-orthogonal least-squares fit by the vertical basis.
template <typename G>
typename G::Tangent horizontal_by_least_squares(const G& geo, const typename G::Point& x,
                                                const typename G::Tangent& eta) {
  const auto basis = vertical_basis(geo, x);
  const Index n = static_cast<Index>(basis.size());
  if (n == 0) return eta;
  MatrixXd gram(n, n);
  VectorXd rhs(n);
  for (Index k = 0; k < n; ++k) {
    rhs(k) = geo.metric(x, basis[static_cast<std::size_t>(k)], eta);
    for (Index l = 0; l < n; ++l) {
      gram(k, l) = geo.metric(x, basis[static_cast<std::size_t>(k)], basis[static_cast<std::size_t>(l)]);
    }
  }
  const VectorXd c = gram.completeOrthogonalDecomposition().solve(rhs);
  auto out = eta;
  for (Index k = 0; k < n; ++k) out -= c(k) * basis[static_cast<std::size_t>(k)];
  return out;
}

/// Dense d1 x d2 matrix represented by a point.
template <typename G>
MatrixXd dense_matrix(const G& geo, const typename G::Point& x) {
  const auto [l, r] = geo.low_rank_factors(x);
  return l * r.transpose();
}

/// Random completion problem with exact rank-r data on a uniformly sampled
/// pattern of `n` entries (no test set).
inline CompletionProblem<double> random_problem(Index d1, Index d2, Index r, Index n, Rng& rng,
                                                MatrixXd* truth = nullptr) {
  const MatrixXd w = gaussian_matrix<double>(d1, r, rng) * gaussian_matrix<double>(d2, r, rng).transpose();
  std::vector<Index> all(static_cast<std::size_t>(d1 * d2));
  std::iota(all.begin(), all.end(), Index(0));
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<SampleEntry<double>> entries;
  for (Index k = 0; k < n; ++k) {
    const Index lin = all[static_cast<std::size_t>(k)];
    entries.push_back({lin / d2, lin % d2, w(lin / d2, lin % d2)});
  }
  if (truth) *truth = w;
  return {SampledMatrix<double>(d1, d2, std::move(entries)), std::nullopt, r};
}

}  // namespace fixedrank::test

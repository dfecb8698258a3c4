#pragma once

// Small dense kernels shared by every geometry. All routines cost at most
// O(d r^2) for d x r inputs or O(r^3) for r x r inputs.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fixedrank/errors.hpp"

namespace fixedrank {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Relative rank tolerance used everywhere a factor is tested for full rank.
inline constexpr double kRankTolerance = 1e-12;

/// Skew(A) is (A - A^T)/2 under `Standard` and (A^T - A)/2 under `Transposed`.
enum class SkewConvention { Standard, Transposed };

template <typename Derived>
MatrixX<typename Derived::Scalar> sym_part(const Eigen::MatrixBase<Derived>& a) {
  return (a + a.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
MatrixX<typename Derived::Scalar> skew_part(const Eigen::MatrixBase<Derived>& a,
                                            SkewConvention convention = SkewConvention::Standard) {
  using Scalar = typename Derived::Scalar;
  if (convention == SkewConvention::Standard) return (a - a.transpose()) / Scalar(2);
  return (a.transpose() - a) / Scalar(2);
}

/// Solves A X + X B = C for symmetric positive definite A (m x m) and B (n x n)
/// through the two eigendecompositions: X~_ij = C~_ij / (alpha_i + beta_j).
template <typename DerivedA, typename DerivedB, typename DerivedC>
MatrixX<typename DerivedA::Scalar> solve_sylvester_spd(const Eigen::MatrixBase<DerivedA>& a,
                                                       const Eigen::MatrixBase<DerivedB>& b,
                                                       const Eigen::MatrixBase<DerivedC>& c) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != a.cols() || b.rows() != b.cols() || c.rows() != a.rows() ||
      c.cols() != b.rows()) {
    throw std::invalid_argument("solve_sylvester_spd: shape mismatch");
  }
  const Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> ea(a.eval());
  const Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eb(b.eval());
  const auto& la = ea.eigenvalues();
  const auto& lb = eb.eigenvalues();
  const Scalar tol = Scalar(kRankTolerance);
  if (la(0) <= tol * la(la.size() - 1) || lb(0) <= tol * lb(lb.size() - 1)) {
    throw SingularCoefficientError("Lyapunov coefficient is not positive definite");
  }
  MatrixX<Scalar> ct = ea.eigenvectors().transpose() * c * eb.eigenvectors();
  for (Eigen::Index j = 0; j < ct.cols(); ++j) {
    for (Eigen::Index i = 0; i < ct.rows(); ++i) ct(i, j) /= la(i) + lb(j);
  }
  return ea.eigenvectors() * ct * eb.eigenvectors().transpose();
}

/// Solves A X + X A = Q for symmetric positive definite A.
template <typename DerivedA, typename DerivedQ>
MatrixX<typename DerivedA::Scalar> solve_lyapunov(const Eigen::MatrixBase<DerivedA>& a,
                                                  const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols()) {
    throw std::invalid_argument("solve_lyapunov: shape mismatch");
  }
  const Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(a.eval());
  const auto& lambda = eig.eigenvalues();
  if (lambda(0) <= Scalar(kRankTolerance) * lambda(lambda.size() - 1)) {
    throw SingularCoefficientError("Lyapunov coefficient is not positive definite");
  }
  const auto& basis = eig.eigenvectors();
  MatrixX<Scalar> qt = basis.transpose() * q * basis;
  for (Eigen::Index j = 0; j < qt.cols(); ++j) {
    for (Eigen::Index i = 0; i < qt.rows(); ++i) qt(i, j) /= lambda(i) + lambda(j);
  }
  return basis * qt * basis.transpose();
}

/// Throws RankDropError unless sigma_min(D) > kRankTolerance * sigma_max(D).
template <typename Derived>
void require_full_column_rank(const Eigen::MatrixBase<Derived>& d, const char* what) {
  using Scalar = typename Derived::Scalar;
  if (d.cols() == 0) return;
  if (!d.allFinite()) throw RankDropError(std::string(what) + ": non-finite entries");
  const Eigen::JacobiSVD<MatrixX<Scalar>> svd(d.eval());
  const auto& s = svd.singularValues();
  if (d.rows() < d.cols() || !(s(s.size() - 1) > Scalar(kRankTolerance) * s(0))) {
    throw RankDropError(std::string(what) + ": factor lost column rank");
  }
}

/// Thin SVD truncated to k triples, singular values descending. The entry of
/// largest magnitude in each left singular vector is made nonnegative.
template <typename Scalar>
struct ThinSvd {
  MatrixX<Scalar> u;
  VectorX<Scalar> s;
  MatrixX<Scalar> v;
};

template <typename Derived>
void canonicalize_signs(Eigen::MatrixBase<Derived>& u, Eigen::MatrixBase<Derived>& v) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }
}

template <typename Derived>
ThinSvd<typename Derived::Scalar> thin_svd(const Eigen::MatrixBase<Derived>& a, Eigen::Index k) {
  using Scalar = typename Derived::Scalar;
  if (k < 0 || k > std::min(a.rows(), a.cols())) {
    throw std::invalid_argument("thin_svd: k exceeds min(rows, cols)");
  }
  const Eigen::BDCSVD<MatrixX<Scalar>> svd(a.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd<Scalar> out{svd.matrixU().leftCols(k), svd.singularValues().head(k),
                      svd.matrixV().leftCols(k)};
  canonicalize_signs(out.u, out.v);
  return out;
}

/// uf(D) = D (D^T D)^{-1/2}, computed as U V^T from the thin SVD of D.
template <typename Derived>
MatrixX<typename Derived::Scalar> polar_factor(const Eigen::MatrixBase<Derived>& d) {
  using Scalar = typename Derived::Scalar;
  if (!d.allFinite()) throw RankDropError("polar_factor: non-finite entries");
  const Eigen::JacobiSVD<MatrixX<Scalar>> svd(d.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (d.rows() < d.cols() || (s.size() > 0 && !(s(s.size() - 1) > Scalar(kRankTolerance) * s(0)))) {
    throw RankDropError("polar_factor: rank-deficient input");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& s, const char* what) {
  using Scalar = typename Derived::Scalar;
  const Scalar scale = std::max(Scalar(1), s.norm());
  if (s.rows() != s.cols() || (s - s.transpose()).norm() > Scalar(1e-12) * scale) {
    throw SymmetryError(std::string(what) + ": input is not symmetric");
  }
}

/// Applies f to the eigenvalues of a symmetric matrix.
template <typename Derived, typename Fn>
MatrixX<typename Derived::Scalar> sym_function(const Eigen::MatrixBase<Derived>& s, Fn&& f) {
  using Scalar = typename Derived::Scalar;
  const Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(sym_part(s));
  const VectorX<Scalar> mapped = eig.eigenvalues().unaryExpr(f);
  return eig.eigenvectors() * mapped.asDiagonal() * eig.eigenvectors().transpose();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> sym_expm(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  require_symmetric(s, "sym_expm");
  return sym_function(s, [](Scalar x) { return std::exp(x); });
}

/// B^{1/2} and B^{-1/2} of an SPD matrix, eigenvalues floored at 1e-14 * trace.
template <typename Scalar>
struct SpdRoots {
  MatrixX<Scalar> sqrt;
  MatrixX<Scalar> inv_sqrt;
};

template <typename Derived>
SpdRoots<typename Derived::Scalar> spd_roots(const Eigen::MatrixBase<Derived>& b) {
  using Scalar = typename Derived::Scalar;
  const Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(sym_part(b));
  const Scalar floor = Scalar(1e-14) * std::max(b.trace(), std::numeric_limits<Scalar>::min());
  if (eig.eigenvalues()(0) <= Scalar(0)) throw SingularCoefficientError("matrix is not SPD");
  const VectorX<Scalar> lam = eig.eigenvalues().cwiseMax(floor);
  const auto& q = eig.eigenvectors();
  return {q * lam.cwiseSqrt().asDiagonal() * q.transpose(),
          q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose()};
}

// ---------------------------------------------------------------------------
// Univariate polynomials, coefficients in ascending powers.

template <typename Scalar>
Scalar polyval(std::span<const Scalar> coeffs, Scalar s) {
  Scalar acc(0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * s + *it;
  return acc;
}

template <typename Scalar>
struct PolynomialMinimum {
  Scalar argmin;
  Scalar value;
};

/// Global minimizer over [lower, inf) of a polynomial of degree at most 6
/// that is bounded below; the default bound searches all reals. Critical
/// points come from the companion matrix of the derivative and are polished
/// with Newton steps.
template <typename Scalar>
PolynomialMinimum<Scalar> minimize_polynomial(
    std::span<const Scalar> coeffs,
    Scalar lower = -std::numeric_limits<Scalar>::infinity()) {
  std::size_t n = coeffs.size();
  while (n > 0 && coeffs[n - 1] == Scalar(0)) --n;
  const bool bounded = std::isfinite(lower);
  if (n == 0) return {bounded ? lower : Scalar(0), Scalar(0)};
  const std::size_t degree = n - 1;
  if (degree == 0) return {bounded ? lower : Scalar(0), coeffs[0]};
  if (degree % 2 == 1 || coeffs[degree] < Scalar(0)) {
    throw UnboundedError("minimize_polynomial: polynomial is unbounded below");
  }
  const std::span<const Scalar> p = coeffs.first(n);
  std::vector<Scalar> dp(degree);
  for (std::size_t k = 1; k <= degree; ++k) dp[k - 1] = Scalar(k) * p[k];
  std::vector<Scalar> ddp(degree > 1 ? degree - 1 : 1, Scalar(0));
  for (std::size_t k = 2; k <= degree; ++k) ddp[k - 2] = Scalar(k * (k - 1)) * p[k];

  // Companion matrix of the monic derivative (degree - 1 roots).
  const Eigen::Index m = static_cast<Eigen::Index>(degree - 1);
  std::vector<Scalar> candidates;
  if (m == 1) {
    candidates.push_back(-dp[0] / dp[1]);
  } else {
    MatrixX<Scalar> companion = MatrixX<Scalar>::Zero(m, m);
    for (Eigen::Index i = 1; i < m; ++i) companion(i, i - 1) = Scalar(1);
    for (Eigen::Index i = 0; i < m; ++i) companion(i, m - 1) = -dp[i] / dp[m];
    const Eigen::EigenSolver<MatrixX<Scalar>> eig(companion, false);
    // Real parts of every root are harmless extra candidates: the minimum over
    // candidates is still attained at a true real critical point.
    for (Eigen::Index i = 0; i < m; ++i) candidates.push_back(eig.eigenvalues()(i).real());
  }

  const std::span<const Scalar> dspan(dp);
  const std::span<const Scalar> ddspan(ddp);
  PolynomialMinimum<Scalar> best{Scalar(0), std::numeric_limits<Scalar>::infinity()};
  if (bounded) best = {lower, polyval(p, lower)};
  for (Scalar s : candidates) {
    for (int it = 0; it < 8; ++it) {
      const Scalar g = polyval(dspan, s);
      const Scalar h = polyval(ddspan, s);
      if (h == Scalar(0) || !std::isfinite(g / h)) break;
      const Scalar next = s - g / h;
      if (!(std::abs(polyval(dspan, next)) < std::abs(g))) break;
      s = next;
    }
    if (s < lower) continue;
    const Scalar value = polyval(p, s);
    if (value < best.value || (value == best.value && s < best.argmin)) best = {s, value};
  }
  return best;
}

template <typename Scalar>
PolynomialMinimum<Scalar> minimize_polynomial(
    const std::vector<Scalar>& coeffs, Scalar lower = -std::numeric_limits<Scalar>::infinity()) {
  return minimize_polynomial(std::span<const Scalar>(coeffs), lower);
}

}  // namespace fixedrank

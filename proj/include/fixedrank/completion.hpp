#pragma once

// Low-rank matrix completion: cost (1/|Omega|) ||P_Omega(W) - P_Omega(W*)||^2
// for every geometry, with S = (2/|Omega|) P_Omega(W - W*) as the Euclidean
// gradient in R^{d1 x d2} and S_* its directional derivative.

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fixedrank/embedded.hpp"
#include "fixedrank/fullrank.hpp"
#include "fixedrank/polar.hpp"
#include "fixedrank/sampled_matrix.hpp"
#include "fixedrank/subspace.hpp"

namespace fixedrank {

template <typename Scalar = double>
struct CompletionProblem {
  SampledMatrix<Scalar> train;
  std::optional<SampledMatrix<Scalar>> test;
  Eigen::Index rank = 0;
};

template <typename Scalar>
using FactorPair = std::pair<MatrixX<Scalar>, MatrixX<Scalar>>;

namespace detail {
template <typename Scalar>
FactorPair<Scalar> hcat(std::initializer_list<FactorPair<Scalar>> terms) {
  Eigen::Index k = 0;
  for (const auto& t : terms) k += t.first.cols();
  FactorPair<Scalar> out{MatrixX<Scalar>(terms.begin()->first.rows(), k),
                         MatrixX<Scalar>(terms.begin()->second.rows(), k)};
  Eigen::Index at = 0;
  for (const auto& t : terms) {
    out.first.middleCols(at, t.first.cols()) = t.first;
    out.second.middleCols(at, t.first.cols()) = t.second;
    at += t.first.cols();
  }
  return out;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// W(x + s xi) along the straight line in factor space, as coefficients of
// s^k, each a thin product L_k R_k^T.

template <typename S>
std::vector<FactorPair<S>> path_coefficients(const FullRankGeometry<S>&,
                                             const typename FullRankGeometry<S>::Point& x,
                                             const typename FullRankGeometry<S>::Tangent& xi) {
  const auto& g = x[0];
  const auto& h = x[1];
  return {{g, h}, detail::hcat<S>({{g, xi[1]}, {xi[0], h}}), {xi[0], xi[1]}};
}

template <typename S>
std::vector<FactorPair<S>> path_coefficients(const PolarGeometry<S>&,
                                             const typename PolarGeometry<S>::Point& x,
                                             const typename PolarGeometry<S>::Tangent& xi) {
  const auto& u = x[0];
  const auto& b = x[1];
  const auto& v = x[2];
  const MatrixX<S> ub = u * b;
  const MatrixX<S> uxb = u * xi[1];
  const MatrixX<S> xub = xi[0] * b;
  const MatrixX<S> xuxb = xi[0] * xi[1];
  return {{ub, v},
          detail::hcat<S>({{ub, xi[2]}, {uxb, v}, {xub, v}}),
          detail::hcat<S>({{uxb, xi[2]}, {xub, xi[2]}, {xuxb, v}}),
          {xuxb, xi[2]}};
}

template <typename S>
std::vector<FactorPair<S>> path_coefficients(const SubspaceGeometry<S>&,
                                             const typename SubspaceGeometry<S>::Point& x,
                                             const typename SubspaceGeometry<S>::Tangent& xi) {
  const auto& u = x[0];
  const auto& y = x[1];
  return {{u, y}, detail::hcat<S>({{u, xi[1]}, {xi[0], y}}), {xi[0], xi[1]}};
}

/// The embedded manifold sits in the ambient space, so the path W + s xi is
/// linear in s.
template <typename S>
std::vector<FactorPair<S>> path_coefficients(const EmbeddedGeometry<S>& geo,
                                             const typename EmbeddedGeometry<S>::Point& x,
                                             const typename EmbeddedGeometry<S>::Tangent& xi) {
  return {geo.low_rank_factors(x), geo.tangent_factors(x, xi)};
}

/// Thin factors of DW[xi].
template <typename G>
FactorPair<typename G::Scalar> direction_factors(const G& geo, const typename G::Point& x,
                                                 const typename G::Tangent& xi) {
  return path_coefficients(geo, x, xi)[1];
}

// ---------------------------------------------------------------------------
// Sampling, cost and the sparse Euclidean gradient.

template <typename G>
VectorX<typename G::Scalar> apply_sampling(const G& geo, const typename G::Point& x,
                                           const SampledMatrix<typename G::Scalar>& omega) {
  const auto [l, r] = geo.low_rank_factors(x);
  return omega.sample(l, r);
}

template <typename G>
typename G::Scalar completion_cost(const G& geo, const typename G::Point& x,
                                   const CompletionProblem<typename G::Scalar>& problem) {
  const auto n = problem.train.size();
  if (n == 0) return typename G::Scalar(0);
  return (apply_sampling(geo, x, problem.train) - problem.train.values()).squaredNorm() /
         typename G::Scalar(n);
}

template <typename G>
SampledMatrix<typename G::Scalar> residual_S(const G& geo, const typename G::Point& x,
                                             const CompletionProblem<typename G::Scalar>& problem) {
  using Scalar = typename G::Scalar;
  const auto& omega = problem.train;
  const Scalar scale = omega.size() == 0 ? Scalar(0) : Scalar(2) / Scalar(omega.size());
  return omega.with_values(scale * (apply_sampling(geo, x, omega) - omega.values()));
}

/// S_* = (2/|Omega|) P_Omega(DW[xi]).
template <typename G>
SampledMatrix<typename G::Scalar> directional_residual_Sstar(
    const G& geo, const typename G::Point& x, const typename G::Tangent& xi,
    const CompletionProblem<typename G::Scalar>& problem) {
  using Scalar = typename G::Scalar;
  const auto& omega = problem.train;
  const Scalar scale = omega.size() == 0 ? Scalar(0) : Scalar(2) / Scalar(omega.size());
  const auto [l, r] = direction_factors(geo, x, xi);
  return omega.with_values(scale * omega.sample(l, r));
}

// ---------------------------------------------------------------------------
// Euclidean partial derivatives and their directional derivatives. For the
// embedded geometry the "partials" are S and S_* themselves.

template <typename S>
typename FullRankGeometry<S>::Partials euclidean_partials(
    const FullRankGeometry<S>&, const typename FullRankGeometry<S>::Point& x,
    const SampledMatrix<S>& s) {
  return {s.times(x[1]), s.transpose_times(x[0])};
}

template <typename S>
typename PolarGeometry<S>::Partials euclidean_partials(const PolarGeometry<S>&,
                                                       const typename PolarGeometry<S>::Point& x,
                                                       const SampledMatrix<S>& s) {
  const MatrixX<S> sv = s.times(x[2]);
  return {sv * x[1], x[0].transpose() * sv, s.transpose_times(x[0] * x[1])};
}

template <typename S>
typename SubspaceGeometry<S>::Partials euclidean_partials(
    const SubspaceGeometry<S>&, const typename SubspaceGeometry<S>::Point& x,
    const SampledMatrix<S>& s) {
  return {s.times(x[1]), s.transpose_times(x[0])};
}

template <typename S>
const SampledMatrix<S>& euclidean_partials(const EmbeddedGeometry<S>&,
                                           const typename EmbeddedGeometry<S>::Point&,
                                           const SampledMatrix<S>& s) {
  return s;
}

template <typename S>
typename FullRankGeometry<S>::Partials directional_partials(
    const FullRankGeometry<S>&, const typename FullRankGeometry<S>::Point& x,
    const typename FullRankGeometry<S>::Tangent& xi, const SampledMatrix<S>& s,
    const SampledMatrix<S>& sstar) {
  return {sstar.times(x[1]) + s.times(xi[1]), sstar.transpose_times(x[0]) + s.transpose_times(xi[0])};
}

template <typename S>
typename PolarGeometry<S>::Partials directional_partials(
    const PolarGeometry<S>&, const typename PolarGeometry<S>::Point& x,
    const typename PolarGeometry<S>::Tangent& xi, const SampledMatrix<S>& s,
    const SampledMatrix<S>& sstar) {
  const auto& u = x[0];
  const auto& b = x[1];
  const auto& v = x[2];
  const MatrixX<S> sv = s.times(v);
  const MatrixX<S> sstar_v = sstar.times(v);
  const MatrixX<S> s_xv = s.times(xi[2]);
  const MatrixX<S> dphi_u = sstar_v * b + s_xv * b + sv * xi[1];
  const MatrixX<S> dphi_b = xi[0].transpose() * sv + u.transpose() * sstar_v + u.transpose() * s_xv;
  const MatrixX<S> dphi_v = sstar.transpose_times(u * b) + s.transpose_times(xi[0] * b) +
                            s.transpose_times(u * xi[1]);
  return {dphi_u, dphi_b, dphi_v};
}

template <typename S>
typename SubspaceGeometry<S>::Partials directional_partials(
    const SubspaceGeometry<S>&, const typename SubspaceGeometry<S>::Point& x,
    const typename SubspaceGeometry<S>::Tangent& xi, const SampledMatrix<S>& s,
    const SampledMatrix<S>& sstar) {
  return {sstar.times(x[1]) + s.times(xi[1]), sstar.transpose_times(x[0]) + s.transpose_times(xi[0])};
}

template <typename S>
const SampledMatrix<S>& directional_partials(const EmbeddedGeometry<S>&,
                                             const typename EmbeddedGeometry<S>::Point&,
                                             const typename EmbeddedGeometry<S>::Tangent&,
                                             const SampledMatrix<S>&, const SampledMatrix<S>& sstar) {
  return sstar;
}

// ---------------------------------------------------------------------------
// Psi(D grad[xi]) written out directly in terms of S and S_*, one formula per
// factorization. This is an independent route to what hess_apply assembles
// from the partials by the product rule.

template <typename S>
typename FullRankGeometry<S>::Tangent hess_directional_partials(
    const FullRankGeometry<S>& geo, const typename FullRankGeometry<S>::Point& x,
    const typename FullRankGeometry<S>::Tangent& xi, const SampledMatrix<S>& s,
    const SampledMatrix<S>& sstar) {
  const auto& g = x[0];
  const auto& h = x[1];
  const MatrixX<S> sh = s.times(h);
  const MatrixX<S> stg = s.transpose_times(g);
  if (geo.mode() == MetricMode::Euclidean) {
    return {sstar.times(h) + s.times(xi[1]), sstar.transpose_times(g) + s.transpose_times(xi[0])};
  }
  const MatrixX<S> gg = g.transpose() * g;
  const MatrixX<S> hh = h.transpose() * h;
  return geo.psi_project(
      x, {sstar.times(h) * gg + s.times(xi[1]) * gg + S(2) * sh * sym_part(g.transpose() * xi[0]),
          sstar.transpose_times(g) * hh + s.transpose_times(xi[0]) * hh +
              S(2) * stg * sym_part(h.transpose() * xi[1])});
}

template <typename S>
typename PolarGeometry<S>::Tangent hess_directional_partials(
    const PolarGeometry<S>& geo, const typename PolarGeometry<S>::Point& x,
    const typename PolarGeometry<S>::Tangent& xi, const SampledMatrix<S>& s,
    const SampledMatrix<S>& sstar) {
  const auto& u = x[0];
  const auto& b = x[1];
  const auto& v = x[2];
  const MatrixX<S> sv = s.times(v);
  const MatrixX<S> stub = s.transpose_times(u * b);
  const auto restrict_b = [&](const MatrixX<S>& m) -> MatrixX<S> {
    if (geo.scaling() == ScalingMode::Diagonal) return m.diagonal().asDiagonal();
    return sym_part(m);
  };
  const MatrixX<S> scale = restrict_b(u.transpose() * sv);
  const MatrixX<S> zu = sstar.times(v) * b + s.times(xi[2]) * b + sv * xi[1] -
                        xi[0] * sym_part(u.transpose() * sv * b);
  const MatrixX<S> zb =
      S(2) * sym_part(b * scale * xi[1]) +
      b * restrict_b(xi[0].transpose() * sv + u.transpose() * sstar.times(v) + u.transpose() * s.times(xi[2])) * b;
  const MatrixX<S> zv = sstar.transpose_times(u * b) + s.transpose_times(xi[0] * b) +
                        s.transpose_times(u) * xi[1] - xi[2] * sym_part(v.transpose() * stub);
  return geo.psi_project(x, {zu, zb, zv});
}

template <typename S>
typename SubspaceGeometry<S>::Tangent hess_directional_partials(
    const SubspaceGeometry<S>& geo, const typename SubspaceGeometry<S>::Point& x,
    const typename SubspaceGeometry<S>::Tangent& xi, const SampledMatrix<S>& s,
    const SampledMatrix<S>& sstar) {
  const auto& u = x[0];
  const auto& y = x[1];
  const MatrixX<S> sy = s.times(y);
  const MatrixX<S> zu = sstar.times(y) + s.times(xi[1]) - xi[0] * sym_part(u.transpose() * sy);
  MatrixX<S> zy = sstar.transpose_times(u) + s.transpose_times(xi[0]);
  if (geo.mode() == MetricMode::ScaleInvariant) {
    const MatrixX<S> yy = y.transpose() * y;
    zy = zy * yy + S(2) * s.transpose_times(u) * sym_part(y.transpose() * xi[1]);
  }
  return geo.psi_project(x, {zu, zy});
}

// ---------------------------------------------------------------------------
// The cost model consumed by make_objective.

template <GeometryContract G>
class CompletionCost {
 public:
  using Scalar = typename G::Scalar;
  using Point = typename G::Point;
  using Tangent = typename G::Tangent;

  class State {
   public:
    Scalar value() const { return value_; }
    const SampledMatrix<Scalar>& residual() const { return s_; }
    const auto& partials() const { return partials_; }
    auto directional_partials(const Tangent& xi) const {
      const auto sstar = directional_residual_Sstar(*geo_, x_, xi, *problem_);
      return std::decay_t<decltype(fixedrank::directional_partials(*geo_, x_, xi, s_, sstar))>(
          fixedrank::directional_partials(*geo_, x_, xi, s_, sstar));
    }

   private:
    friend class CompletionCost;
    State(const G& geo, const CompletionProblem<Scalar>& problem, const Point& x)
        : geo_(&geo),
          problem_(&problem),
          x_(x),
          s_(residual_S(geo, x, problem)),
          partials_(euclidean_partials(geo, x, s_)) {
      const auto n = problem.train.size();
      value_ = n == 0 ? Scalar(0) : s_.values().squaredNorm() * Scalar(n) / Scalar(4);
    }

    const G* geo_;
    const CompletionProblem<Scalar>* problem_;
    Point x_;
    SampledMatrix<Scalar> s_;
    std::decay_t<decltype(euclidean_partials(std::declval<const G&>(), std::declval<const Point&>(),
                                             std::declval<const SampledMatrix<Scalar>&>()))>
        partials_;
    Scalar value_{};
  };

  /// Both arguments must outlive the cost model.
  CompletionCost(const G& geo, const CompletionProblem<Scalar>& problem)
      : geo_(&geo), problem_(&problem) {}

  Scalar value(const Point& x) const { return completion_cost(*geo_, x, *problem_); }
  State linearize(const Point& x) const { return State(*geo_, *problem_, x); }

 private:
  const G* geo_;
  const CompletionProblem<Scalar>* problem_;
};

// ---------------------------------------------------------------------------
// Initialization and step-size seeds.

/// Dominant rank-k SVD of the sampled matrix by block subspace iteration with
/// sparse products only.
template <typename Scalar>
ThinSvd<Scalar> sparse_truncated_svd(const SampledMatrix<Scalar>& a, Eigen::Index k,
                                     std::uint64_t seed = 0x5eed5eedULL, int max_iters = 200) {
  using Matrix = MatrixX<Scalar>;
  const Eigen::Index m = std::min(a.rows(), a.cols());
  if (k <= 0 || k > m) throw std::invalid_argument("sparse_truncated_svd: bad rank");
  const Eigen::Index block = std::min(m, 2 * k + 8);
  Rng rng(seed);
  const auto orth = [](const Matrix& z) -> Matrix {
    const Eigen::HouseholderQR<Matrix> qr(z);
    return qr.householderQ() * Matrix::Identity(z.rows(), z.cols());
  };
  Matrix q = orth(gaussian_matrix<Scalar>(a.cols(), block, rng));
  VectorX<Scalar> previous = VectorX<Scalar>::Zero(k);
  Matrix left;
  Matrix right_t;
  for (int it = 0; it < max_iters; ++it) {
    left = orth(a.times(q));
    right_t = a.transpose_times(left);  // (left^T A)^T
    q = orth(right_t);
    const Eigen::JacobiSVD<Matrix> small(right_t.transpose());
    const VectorX<Scalar> current = small.singularValues().head(k);
    const Scalar scale = std::max(current(0), std::numeric_limits<Scalar>::min());
    if (it > 0 && (current - previous).cwiseAbs().maxCoeff() <= Scalar(1e-14) * scale) break;
    previous = current;
  }
  // A ~ left (left^T A) = left B, B = right_t^T.
  const Eigen::JacobiSVD<Matrix> svd(right_t.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd<Scalar> out{left * svd.matrixU().leftCols(k), svd.singularValues().head(k),
                      svd.matrixV().leftCols(k)};
  canonicalize_signs(out.u, out.v);
  return out;
}

namespace detail {
template <typename Scalar>
ThinSvd<Scalar> spectral_factors(const CompletionProblem<Scalar>& problem) {
  auto svd = sparse_truncated_svd(problem.train, problem.rank);
  const auto& s = svd.s;
  if (!(s(0) > Scalar(0)) || !(s(s.size() - 1) > Scalar(kRankTolerance) * s(0))) {
    throw RankDropError("init_spectral: observed matrix has rank below r");
  }
  return svd;
}
}  // namespace detail

template <typename S>
typename FullRankGeometry<S>::Point init_spectral(const FullRankGeometry<S>&,
                                                  const CompletionProblem<S>& problem) {
  const auto svd = detail::spectral_factors(problem);
  const VectorX<S> root = svd.s.cwiseSqrt();
  return {svd.u * root.asDiagonal(), svd.v * root.asDiagonal()};
}

template <typename S>
typename PolarGeometry<S>::Point init_spectral(const PolarGeometry<S>&,
                                               const CompletionProblem<S>& problem) {
  const auto svd = detail::spectral_factors(problem);
  return {svd.u, MatrixX<S>(svd.s.asDiagonal()), svd.v};
}

template <typename S>
typename SubspaceGeometry<S>::Point init_spectral(const SubspaceGeometry<S>&,
                                                  const CompletionProblem<S>& problem) {
  const auto svd = detail::spectral_factors(problem);
  return {svd.u, svd.v * svd.s.asDiagonal()};
}

template <typename S>
typename EmbeddedGeometry<S>::Point init_spectral(const EmbeddedGeometry<S>&,
                                                  const CompletionProblem<S>& problem) {
  const auto svd = detail::spectral_factors(problem);
  return EmbeddedGeometry<S>::make_point(svd.u, svd.s, svd.v);
}

/// Minimizer s0 >= 0 of the completion cost along x + s xi (straight line in
/// factor space), floored at 1e-16. The residual on each observed entry is a
/// polynomial in s of degree 3 for U B V^T, 2 for the two-factor forms and 1
/// for the embedded form; the cost is its square summed over Omega.
template <typename G>
typename G::Scalar linearized_step(const G& geo, const typename G::Point& x,
                                   const typename G::Tangent& xi,
                                   const CompletionProblem<typename G::Scalar>& problem) {
  using Scalar = typename G::Scalar;
  if (!(xi.euclidean_norm() > Scalar(0))) {
    throw std::invalid_argument("linearized_step: direction is zero");
  }
  const auto& omega = problem.train;
  const auto coeffs = path_coefficients(geo, x, xi);
  std::vector<VectorX<Scalar>> sampled;
  for (const auto& [l, r] : coeffs) sampled.push_back(omega.sample(l, r));
  sampled[0] -= omega.values();
  const std::size_t degree = 2 * (sampled.size() - 1);
  std::vector<Scalar> poly(degree + 1, Scalar(0));
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    for (std::size_t j = 0; j < sampled.size(); ++j) poly[i + j] += sampled[i].dot(sampled[j]);
  }
  const Scalar n = omega.size() == 0 ? Scalar(1) : Scalar(omega.size());
  for (auto& c : poly) c /= n;
  const auto best = minimize_polynomial(poly, Scalar(0));
  return std::max(best.argmin, Scalar(1e-16));
}

template <typename Scalar>
struct RadiusSeed {
  Scalar initial;
  Scalar maximum;
};

/// Delta_0 = s0 / 4^3 * ||grad||_g and Delta_bar = 2^10 Delta_0.
template <typename Scalar>
RadiusSeed<Scalar> tr_radius_seed(Scalar s0, Scalar grad_norm) {
  if (!(s0 > Scalar(0))) throw std::invalid_argument("tr_radius_seed: s0 must be positive");
  if (!(grad_norm > Scalar(0))) throw std::invalid_argument("tr_radius_seed: gradient is zero");
  const Scalar initial = s0 / Scalar(64) * grad_norm;
  return {initial, Scalar(1024) * initial};
}

/// Root-mean-square error on the held-out entries, evaluated on the factors.
template <typename G>
typename G::Scalar test_rmse(const G& geo, const typename G::Point& x,
                             const CompletionProblem<typename G::Scalar>& problem) {
  using Scalar = typename G::Scalar;
  if (!problem.test || problem.test->size() == 0) return std::numeric_limits<Scalar>::quiet_NaN();
  const auto& t = *problem.test;
  return std::sqrt((apply_sampling(geo, x, t) - t.values()).squaredNorm() / Scalar(t.size()));
}

}  // namespace fixedrank

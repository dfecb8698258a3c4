#pragma once

// The rank-r matrices as an embedded submanifold of R^{d1 x d2}, stored as a
// thin SVD W = U diag(sigma) V^T. A tangent vector (N, U_p, V_p) stands for
// U N V^T + U_p V^T + U V_p^T with U^T U_p = 0 and V^T V_p = 0.

#include <string>

#include "fixedrank/ambient.hpp"
#include "fixedrank/manifold.hpp"

namespace fixedrank {

namespace usv {
struct PointTag;
struct VectorTag;
}  // namespace usv

template <typename Scalar_ = double>
class EmbeddedGeometry {
 public:
  using Scalar = Scalar_;
  using Matrix = MatrixX<Scalar>;
  using Point = FactorTuple<usv::PointTag, Scalar, 3>;     // (U, sigma as r x 1, V)
  using Tangent = FactorTuple<usv::VectorTag, Scalar, 3>;  // (N, U_p, V_p)
  using GroupElement = Matrix;                             // trivial fiber

  std::string name() const { return "embedded"; }

  static Point make_point(Matrix u, const VectorX<Scalar>& sigma, Matrix v) {
    return Point(std::move(u), Matrix(sigma), std::move(v));
  }

  void validate(const Point& x) const {
    for (std::size_t k : {std::size_t{0}, std::size_t{2}}) {
      const auto r = x[k].cols();
      if (!x[k].allFinite() ||
          (x[k].transpose() * x[k] - Matrix::Identity(r, r)).norm() > Scalar(1e-10)) {
        throw RankDropError("singular vectors are not orthonormal");
      }
    }
    const auto s = x[1].col(0);
    if (s.size() == 0) return;
    if (!(s(s.size() - 1) > Scalar(kRankTolerance) * s(0))) {
      throw RankDropError("smallest singular value collapsed");
    }
    for (Eigen::Index i = 1; i < s.size(); ++i) {
      if (s(i) > s(i - 1)) throw std::invalid_argument("singular values are not descending");
    }
  }

  /// Frobenius inner product of the represented d1 x d2 matrices.
  Scalar metric(const Point&, const Tangent& xi, const Tangent& eta) const {
    return xi.euclidean_dot(eta);
  }

  /// Restores U^T U_p = 0 and V^T V_p = 0.
  Tangent psi_project(const Point& x, const Tangent& z) const {
    return Tangent(z[0], z[1] - x[0] * (x[0].transpose() * z[1]),
                   z[2] - x[2] * (x[2].transpose() * z[2]));
  }

  Tangent pi_project(const Point&, const Tangent& eta) const { return eta; }

  /// P_U Z P_V + P_U_perp Z P_V + P_U Z P_V_perp, using only Z V and Z^T U.
  template <AmbientAction Z>
  Tangent project_ambient(const Point& x, const Z& z) const {
    const Matrix& u = x[0];
    const Matrix& v = x[2];
    const Matrix zv = z.times(v);
    const Matrix ztu = z.transpose_times(u);
    Matrix n = u.transpose() * zv;
    Matrix up = zv - u * n;
    Matrix vp = ztu - v * n.transpose();
    return Tangent(std::move(n), std::move(up), std::move(vp));
  }

  /// The Riemannian gradient is the tangent projection of the Euclidean one.
  template <AmbientAction Z>
  Tangent rgrad_from_partials(const Point& x, const Z& euclidean_grad) const {
    return project_ambient(x, euclidean_grad);
  }

  /// Projection of D(P_W grad f)[xi]; `euclidean_grad_dot` is the Euclidean
  /// directional derivative of the Euclidean gradient along xi.
  template <AmbientAction Z, AmbientAction ZDot>
  Tangent hess_apply(const Point& x, const Tangent& xi, const Z& euclidean_grad,
                     const ZDot& euclidean_grad_dot) const {
    const Matrix& u = x[0];
    const Matrix& v = x[2];
    const VectorX<Scalar> inv_sigma = x[1].col(0).cwiseInverse();
    const Matrix dv = euclidean_grad_dot.times(v);
    const Matrix dtu = euclidean_grad_dot.transpose_times(u);
    Matrix n = u.transpose() * dv;
    Matrix tu = dv + euclidean_grad.times(xi[2]) * inv_sigma.asDiagonal();
    Matrix tv = dtu + euclidean_grad.transpose_times(xi[1]) * inv_sigma.asDiagonal();
    tu -= u * (u.transpose() * tu);
    tv -= v * (v.transpose() * tv);
    return Tangent(std::move(n), std::move(tu), std::move(tv));
  }

  /// Rank-r truncation of W + xi, computed from the 2r x 2r core
  /// [[Sigma + N, R_v^T], [R_u, 0]] in the bases [U Q_u] and [V Q_v].
  Point retract(const Point& x, const Tangent& xi) const {
    const Matrix& u = x[0];
    const Matrix& v = x[2];
    const auto r = u.cols();
    const auto [qu, ru] = thin_qr(xi[1] - u * (u.transpose() * xi[1]));
    const auto [qv, rv] = thin_qr(xi[2] - v * (v.transpose() * xi[2]));
    Matrix core = Matrix::Zero(2 * r, 2 * r);
    core.topLeftCorner(r, r) = Matrix(x[1].col(0).asDiagonal()) + xi[0];
    core.topRightCorner(r, r) = rv.transpose();
    core.bottomLeftCorner(r, r) = ru;
    if (!core.allFinite()) throw RankDropError("retract: non-finite step");
    const Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorX<Scalar> s = svd.singularValues().head(r);
    if (!(s(r - 1) > Scalar(kRankTolerance) * s(0))) {
      throw RankDropError("retract: rank of W + xi fell below r");
    }
    Matrix u_new(u.rows(), r);
    Matrix v_new(v.rows(), r);
    u_new.noalias() = u * svd.matrixU().topLeftCorner(r, r) + qu * svd.matrixU().bottomLeftCorner(r, r);
    v_new.noalias() = v * svd.matrixV().topLeftCorner(r, r) + qv * svd.matrixV().bottomLeftCorner(r, r);
    canonicalize_signs(u_new, v_new);
    return make_point(std::move(u_new), s, std::move(v_new));
  }

  Tangent zero_tangent(const Point& x) const {
    const auto r = x[0].cols();
    return Tangent(Matrix::Zero(r, r), Matrix::Zero(x[0].rows(), r), Matrix::Zero(x[2].rows(), r));
  }

  Tangent random_tangent(const Point& x, Rng& rng) const {
    const auto r = x[0].cols();
    return psi_project(x, Tangent(gaussian_matrix<Scalar>(r, r, rng),
                                  gaussian_matrix<Scalar>(x[0].rows(), r, rng),
                                  gaussian_matrix<Scalar>(x[2].rows(), r, rng)));
  }

  Tangent random_vertical(const Point& x, Rng&) const { return zero_tangent(x); }
  GroupElement random_group_element(const Point& x, Rng&) const {
    return Matrix::Identity(x[0].cols(), x[0].cols());
  }
  Point act(const Point& x, const GroupElement&) const { return x; }
  Tangent act_tangent(const Tangent& xi, const GroupElement&) const { return xi; }

  std::pair<Matrix, Matrix> low_rank_factors(const Point& x) const {
    return {x[0] * x[1].col(0).asDiagonal(), x[2]};
  }

  /// Thin factors (L, R) with L R^T equal to the represented tangent matrix.
  std::pair<Matrix, Matrix> tangent_factors(const Point& x, const Tangent& xi) const {
    const Matrix& u = x[0];
    const auto r = u.cols();
    Matrix l(u.rows(), 2 * r);
    Matrix rr(x[2].rows(), 2 * r);
    l << u * xi[0] + xi[1], u;
    rr << x[2], xi[2];
    return {std::move(l), std::move(rr)};
  }

 private:
  static std::pair<Matrix, Matrix> thin_qr(const Matrix& a) {
    const auto r = a.cols();
    const Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), r);
    Matrix rr = qr.matrixQR().topRows(r).template triangularView<Eigen::Upper>();
    return {std::move(q), std::move(rr)};
  }
};

}  // namespace fixedrank

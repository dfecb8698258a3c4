#pragma once

// Quotient geometry of W = U Y^T on St(r, d1) x R*^{d2 x r} modulo O(r):
// (U, Y) ~ (U O, Y O).

#include <string>

#include "fixedrank/manifold.hpp"

namespace fixedrank {

namespace uy {
struct PointTag;
struct VectorTag;
struct PartialsTag;
}  // namespace uy

template <typename Scalar_ = double>
class SubspaceGeometry {
 public:
  using Scalar = Scalar_;
  using Matrix = MatrixX<Scalar>;
  using Point = FactorTuple<uy::PointTag, Scalar, 2>;        // (U, Y)
  using Tangent = FactorTuple<uy::VectorTag, Scalar, 2>;     // (xi_U, xi_Y)
  using Partials = FactorTuple<uy::PartialsTag, Scalar, 2>;  // (phi_U, phi_Y)
  using GroupElement = Matrix;                               // O in O(r)

  explicit SubspaceGeometry(MetricMode mode = MetricMode::ScaleInvariant,
                            SkewConvention skew = SkewConvention::Standard)
      : mode_(mode), skew_(skew) {}

  MetricMode mode() const { return mode_; }
  std::string name() const {
    return mode_ == MetricMode::ScaleInvariant ? "subspace" : "subspace-euclidean";
  }

  void validate(const Point& x) const {
    const auto r = x[0].cols();
    if (!x[0].allFinite() ||
        (x[0].transpose() * x[0] - Matrix::Identity(r, r)).norm() > Scalar(1e-10)) {
      throw RankDropError("U is not orthonormal");
    }
    require_full_column_rank(x[1], "Y");
  }

  /// Tr(xi_U^T eta_U) + Tr((Y^T Y)^{-1} xi_Y^T eta_Y); plain traces in
  /// Euclidean mode.
  Scalar metric(const Point& x, const Tangent& xi, const Tangent& eta) const {
    const Scalar u_term = xi[0].cwiseProduct(eta[0]).sum();
    if (mode_ == MetricMode::Euclidean) return u_term + xi[1].cwiseProduct(eta[1]).sum();
    const Eigen::LLT<Matrix> gram(x[1].transpose() * x[1]);
    if (gram.info() != Eigen::Success) throw RankDropError("metric: singular Y^T Y");
    return u_term + gram.solve(xi[1].transpose() * eta[1]).trace();
  }

  Tangent psi_project(const Point& x, const Tangent& z) const {
    return Tangent(z[0] - x[0] * sym_part(x[0].transpose() * z[0]), z[1]);
  }

  /// Removes the vertical component (U Omega, Y Omega). Scale-invariant mode
  /// solves the two Lyapunov equations
  ///   P W + W P = 2 Skew(P (U^T eta_U) P) - 2 Skew((eta_Y^T Y) P),
  ///   P Omega + Omega P = W,                  with P = Y^T Y,
  /// together in the eigenbasis of P taken from the SVD of Y, where both are
  /// diagonal: Omega_ij = rhs_ij / (l_i + l_j)^2. Euclidean mode solves
  /// (I + P) Omega + Omega (I + P) = 2 Skew(U^T eta_U) - 2 Skew(eta_Y^T Y).
  Tangent pi_project(const Point& x, const Tangent& eta) const {
    const Matrix& u = x[0];
    const Matrix& y = x[1];
    Matrix omega;
    if (mode_ == MetricMode::ScaleInvariant) {
      const Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Matrix& e = svd.matrixV();
      const VectorX<Scalar> sv = svd.singularValues();
      const VectorX<Scalar> l = sv.cwiseAbs2();
      if (!(l.minCoeff() > Scalar(0))) throw SingularCoefficientError("pi_project: Y lost rank");
      // In the eigenbasis: Y E = Q S, so E^T Y^T eta_Y E = S Q^T eta_Y E.
      const Matrix b = e.transpose() * (u.transpose() * eta[0]) * e;
      const Matrix a = sv.asDiagonal() * (svd.matrixU().transpose() * (eta[1] * e));
      const Matrix rhs = Scalar(2) * skew_part(l.asDiagonal() * b * l.asDiagonal(), skew_) -
                         Scalar(2) * skew_part(a.transpose() * l.asDiagonal(), skew_);
      Matrix w(rhs.rows(), rhs.cols());
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
          const Scalar sum = l(i) + l(j);
          w(i, j) = rhs(i, j) / (sum * sum);
        }
      }
      omega = e * w * e.transpose();
    } else {
      const Matrix p = y.transpose() * y;
      const Matrix rhs = Scalar(2) * skew_part(u.transpose() * eta[0], skew_) -
                         Scalar(2) * skew_part(eta[1].transpose() * y, skew_);
      omega = solve_lyapunov(Matrix::Identity(p.rows(), p.cols()) + p, rhs);
    }
    return Tangent(eta[0] - u * omega, eta[1] - y * omega);
  }

  Point retract(const Point& x, const Tangent& xi) const {
    Point out(polar_factor(x[0] + xi[0]), x[1] + xi[1]);
    require_full_column_rank(out[1], "Y");
    return out;
  }

  Tangent rgrad_from_partials(const Point& x, const Partials& phi) const {
    Matrix y_slot = phi[1];
    if (mode_ == MetricMode::ScaleInvariant) y_slot = phi[1] * (x[1].transpose() * x[1]);
    return Tangent(phi[0] - x[0] * sym_part(x[0].transpose() * phi[0]), std::move(y_slot));
  }

  Tangent grad_derivative(const Point& x, const Tangent& xi, const Partials& phi,
                          const Partials& dphi) const {
    const Matrix& u = x[0];
    const Matrix& y = x[1];
    Matrix u_slot = dphi[0] - xi[0] * sym_part(u.transpose() * phi[0]) -
                    u * sym_part(xi[0].transpose() * phi[0] + u.transpose() * dphi[0]);
    Matrix y_slot = dphi[1];
    if (mode_ == MetricMode::ScaleInvariant) {
      const Matrix cross = xi[1].transpose() * y;
      y_slot = dphi[1] * (y.transpose() * y) + phi[1] * (cross + cross.transpose());
    }
    return Tangent(std::move(u_slot), std::move(y_slot));
  }

  Tangent connection_correction(const Point& x, const Tangent& xi, const Tangent& eta) const {
    const Matrix& u = x[0];
    const Matrix& y = x[1];
    Matrix y_slot = Matrix::Zero(y.rows(), y.cols());
    if (mode_ == MetricMode::ScaleInvariant) {
      const Eigen::LLT<Matrix> gram(y.transpose() * y);
      y_slot = -eta[1] * gram.solve(sym_part(y.transpose() * xi[1])) -
               xi[1] * gram.solve(sym_part(y.transpose() * eta[1])) +
               y * gram.solve(sym_part(eta[1].transpose() * xi[1]));
    }
    return Tangent(-xi[0] * sym_part(u.transpose() * eta[0]), std::move(y_slot));
  }

  Tangent hess_apply(const Point& x, const Tangent& xi, const Partials& phi,
                     const Partials& dphi) const {
    const Tangent grad = rgrad_from_partials(x, phi);
    return pi_project(x, psi_project(x, grad_derivative(x, xi, phi, dphi) +
                                            connection_correction(x, xi, grad)));
  }

  Tangent zero_tangent(const Point& x) const { return Tangent::zeros_like(x); }

  Tangent vertical(const Point& x, const Matrix& omega) const {
    return Tangent(x[0] * omega, x[1] * omega);
  }

  Tangent random_tangent(const Point& x, Rng& rng) const {
    return pi_project(x, psi_project(x, gaussian_like<Tangent>(x, rng)));
  }

  Tangent random_vertical(const Point& x, Rng& rng) const {
    return vertical(x, random_skew<Scalar>(x[0].cols(), rng));
  }

  GroupElement random_group_element(const Point& x, Rng& rng) const {
    return random_orthonormal<Scalar>(x[0].cols(), x[0].cols(), rng);
  }

  Point act(const Point& x, const GroupElement& o) const { return Point(x[0] * o, x[1] * o); }
  Tangent act_tangent(const Tangent& xi, const GroupElement& o) const {
    return Tangent(xi[0] * o, xi[1] * o);
  }

  std::pair<Matrix, Matrix> low_rank_factors(const Point& x) const { return {x[0], x[1]}; }

 private:
  MetricMode mode_;
  SkewConvention skew_;
};

}  // namespace fixedrank

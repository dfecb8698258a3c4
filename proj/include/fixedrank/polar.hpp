#pragma once

// Quotient geometry of W = U B V^T on St(r, d1) x S++(r) x St(r, d2) modulo
// O(r): (U, B, V) ~ (U O, O^T B O, V O). The diagonal-scaling mode restricts
// B to positive diagonal matrices with otherwise unchanged formulas.

#include <cmath>
#include <string>

#include "fixedrank/manifold.hpp"

namespace fixedrank {

namespace ubv {
struct PointTag;
struct VectorTag;
struct PartialsTag;
}  // namespace ubv

enum class ScalingMode { Spd, Diagonal };

template <typename Scalar_ = double>
class PolarGeometry {
 public:
  using Scalar = Scalar_;
  using Matrix = MatrixX<Scalar>;
  using Point = FactorTuple<ubv::PointTag, Scalar, 3>;        // (U, B, V)
  using Tangent = FactorTuple<ubv::VectorTag, Scalar, 3>;     // (xi_U, xi_B, xi_V)
  using Partials = FactorTuple<ubv::PartialsTag, Scalar, 3>;  // (phi_U, phi_B, phi_V)
  using GroupElement = Matrix;                                // O in O(r)

  explicit PolarGeometry(ScalingMode scaling = ScalingMode::Spd,
                         SkewConvention skew = SkewConvention::Standard)
      : scaling_(scaling), skew_(skew) {}

  ScalingMode scaling() const { return scaling_; }
  std::string name() const { return scaling_ == ScalingMode::Spd ? "polar" : "polar-diagonal"; }

  void validate(const Point& x) const {
    check_orthonormal(x[0], "U");
    check_orthonormal(x[2], "V");
    const Matrix& b = x[1];
    if (!b.allFinite() || (b - b.transpose()).norm() > Scalar(1e-10) * b.norm()) {
      throw SymmetryError("B is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(b, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues()(0) > Scalar(kRankTolerance) * eig.eigenvalues().maxCoeff())) {
      throw RankDropError("B left the positive definite cone");
    }
  }

  /// Tr(xi_U^T eta_U) + Tr(B^{-1} xi_B B^{-1} eta_B) + Tr(xi_V^T eta_V).
  Scalar metric(const Point& x, const Tangent& xi, const Tangent& eta) const {
    const Eigen::LLT<Matrix> b(x[1]);
    if (b.info() != Eigen::Success) throw SingularCoefficientError("metric: B is not SPD");
    return xi[0].cwiseProduct(eta[0]).sum() + (b.solve(xi[1]) * b.solve(eta[1])).trace() +
           xi[2].cwiseProduct(eta[2]).sum();
  }

  Tangent psi_project(const Point& x, const Tangent& z) const {
    return Tangent(stiefel_project(x[0], z[0]), scaling_project(z[1]), stiefel_project(x[2], z[2]));
  }

  /// Removes the vertical component (U Omega, B Omega - Omega B, V Omega)
  /// with Omega B^2 + B^2 Omega = B (Skew(U^T eta_U) - 2 Skew(B^{-1} eta_B)
  /// + Skew(V^T eta_V)) B. With B diagonal the fiber is discrete and every
  /// tangent vector is horizontal.
  Tangent pi_project(const Point& x, const Tangent& eta) const {
    if (scaling_ == ScalingMode::Diagonal) return eta;
    const Matrix& u = x[0];
    const Matrix& b = x[1];
    const Matrix& v = x[2];
    const Eigen::LLT<Matrix> bllt(b);
    const Matrix rhs = b *
                       (skew_part(u.transpose() * eta[0], skew_) -
                        Scalar(2) * skew_part(bllt.solve(eta[1]), skew_) +
                        skew_part(v.transpose() * eta[2], skew_)) *
                       b;
    const Matrix omega = solve_lyapunov(sym_part(b * b), rhs);
    return Tangent(eta[0] - u * omega, eta[1] - (b * omega - omega * b), eta[2] - v * omega);
  }

  Point retract(const Point& x, const Tangent& xi) const {
    Matrix b_new;
    if (scaling_ == ScalingMode::Diagonal) {
      const VectorX<Scalar> d = x[1].diagonal();
      b_new = (d.array() * (xi[1].diagonal().array() / d.array()).exp()).matrix().asDiagonal();
    } else {
      const auto roots = spd_roots(x[1]);
      b_new = sym_part(roots.sqrt * sym_expm(sym_part(roots.inv_sqrt * xi[1] * roots.inv_sqrt)) *
                       roots.sqrt);
    }
    return Point(polar_factor(x[0] + xi[0]), std::move(b_new), polar_factor(x[2] + xi[2]));
  }

  Tangent rgrad_from_partials(const Point& x, const Partials& phi) const {
    const Matrix& b = x[1];
    return Tangent(stiefel_project(x[0], phi[0]), b * scaling_project(phi[1]) * b,
                   stiefel_project(x[2], phi[2]));
  }

  /// B-slot of the gradient restricted to diagonal scalings: B diag(phi_B) B.
  Matrix diagonal_mode_rgrad(const Point& x, const Matrix& phi_b) const {
    if (scaling_ != ScalingMode::Diagonal) {
      throw std::logic_error("diagonal_mode_rgrad: geometry is not in diagonal mode");
    }
    return x[1] * Matrix(phi_b.diagonal().asDiagonal()) * x[1];
  }

  /// Product-rule derivative of the gradient field along xi (before Psi).
  Tangent grad_derivative(const Point& x, const Tangent& xi, const Partials& phi,
                          const Partials& dphi) const {
    const Matrix& b = x[1];
    const Matrix sphi_b = scaling_project(phi[1]);
    Tangent out;
    for (std::size_t k : {std::size_t{0}, std::size_t{2}}) {
      const Matrix& f = x[k];
      out[k] = dphi[k] - xi[k] * sym_part(f.transpose() * phi[k]) -
               f * sym_part(xi[k].transpose() * phi[k] + f.transpose() * dphi[k]);
    }
    out[1] = xi[1] * sphi_b * b + b * sphi_b * xi[1] + b * scaling_project(dphi[1]) * b;
    return out;
  }

  Tangent connection_correction(const Point& x, const Tangent& xi, const Tangent& eta) const {
    const Eigen::LLT<Matrix> b(x[1]);
    return Tangent(-xi[0] * sym_part(x[0].transpose() * eta[0]),
                   -sym_part(xi[1] * b.solve(eta[1])),
                   -xi[2] * sym_part(x[2].transpose() * eta[2]));
  }

  Tangent hess_apply(const Point& x, const Tangent& xi, const Partials& phi,
                     const Partials& dphi) const {
    const Tangent grad = rgrad_from_partials(x, phi);
    return pi_project(x, psi_project(x, grad_derivative(x, xi, phi, dphi) +
                                            connection_correction(x, xi, grad)));
  }

  Tangent zero_tangent(const Point& x) const { return Tangent::zeros_like(x); }

  /// Vertical vector (U Omega, B Omega - Omega B, V Omega), Omega skew.
  Tangent vertical(const Point& x, const Matrix& omega) const {
    return Tangent(x[0] * omega, x[1] * omega - omega * x[1], x[2] * omega);
  }

  Tangent random_tangent(const Point& x, Rng& rng) const {
    return pi_project(x, psi_project(x, gaussian_like<Tangent>(x, rng)));
  }

  Tangent random_vertical(const Point& x, Rng& rng) const {
    if (scaling_ == ScalingMode::Diagonal) return zero_tangent(x);
    return vertical(x, random_skew<Scalar>(x[1].rows(), rng));
  }

  /// Random orthogonal O; a random sign matrix in diagonal mode.
  GroupElement random_group_element(const Point& x, Rng& rng) const {
    const auto r = x[1].rows();
    if (scaling_ == ScalingMode::Diagonal) {
      std::bernoulli_distribution coin(0.5);
      VectorX<Scalar> s(r);
      for (Eigen::Index i = 0; i < r; ++i) s(i) = coin(rng) ? Scalar(1) : Scalar(-1);
      return s.asDiagonal();
    }
    return random_orthonormal<Scalar>(r, r, rng);
  }

  Point act(const Point& x, const GroupElement& o) const {
    return Point(x[0] * o, o.transpose() * x[1] * o, x[2] * o);
  }
  Tangent act_tangent(const Tangent& xi, const GroupElement& o) const {
    return Tangent(xi[0] * o, o.transpose() * xi[1] * o, xi[2] * o);
  }

  std::pair<Matrix, Matrix> low_rank_factors(const Point& x) const { return {x[0] * x[1], x[2]}; }

 private:
  static Matrix stiefel_project(const Matrix& u, const Matrix& z) {
    return z - u * sym_part(u.transpose() * z);
  }

  Matrix scaling_project(const Matrix& z) const {
    if (scaling_ == ScalingMode::Diagonal) return z.diagonal().asDiagonal();
    return sym_part(z);
  }

  static void check_orthonormal(const Matrix& u, const char* what) {
    const auto r = u.cols();
    if (!u.allFinite() || (u.transpose() * u - Matrix::Identity(r, r)).norm() > Scalar(1e-10)) {
      throw RankDropError(std::string(what) + " is not orthonormal");
    }
  }

  ScalingMode scaling_;
  SkewConvention skew_;
};

}  // namespace fixedrank

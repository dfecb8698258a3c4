#pragma once

// Quotient geometry of W = G H^T, (G, H) full column rank, modulo GL(r):
// (G, H) ~ (G M^{-1}, H M^T).

#include <cmath>
#include <string>

#include "fixedrank/manifold.hpp"

namespace fixedrank {

namespace gh {
struct PointTag;
struct VectorTag;
struct PartialsTag;
}  // namespace gh

template <typename Scalar_ = double>
class FullRankGeometry {
 public:
  using Scalar = Scalar_;
  using Matrix = MatrixX<Scalar>;
  using Point = FactorTuple<gh::PointTag, Scalar, 2>;        // (G, H)
  using Tangent = FactorTuple<gh::VectorTag, Scalar, 2>;     // (xi_G, xi_H)
  using Partials = FactorTuple<gh::PartialsTag, Scalar, 2>;  // (phi_G, phi_H)
  using GroupElement = Matrix;                               // M in GL(r)

  explicit FullRankGeometry(MetricMode mode = MetricMode::ScaleInvariant) : mode_(mode) {}

  MetricMode mode() const { return mode_; }
  std::string name() const {
    return mode_ == MetricMode::ScaleInvariant ? "fullrank" : "fullrank-euclidean";
  }

  void validate(const Point& x) const {
    check_rank(x[0], "G");
    check_rank(x[1], "H");
  }

  /// Tr((G^T G)^{-1} xi_G^T eta_G) + Tr((H^T H)^{-1} xi_H^T eta_H), or the
  /// plain trace pairing in Euclidean mode.
  Scalar metric(const Point& x, const Tangent& xi, const Tangent& eta) const {
    if (mode_ == MetricMode::Euclidean) return xi.euclidean_dot(eta);
    Scalar total(0);
    for (std::size_t k = 0; k < 2; ++k) {
      const Eigen::LLT<Matrix> gram(x[k].transpose() * x[k]);
      if (gram.info() != Eigen::Success) throw RankDropError("metric: singular Gram matrix");
      total += gram.solve(xi[k].transpose() * eta[k]).trace();
    }
    return total;
  }

  /// The total space is open in R^{d1 x r} x R^{d2 x r}.
  Tangent psi_project(const Point&, const Tangent& z) const { return z; }

  Tangent pi_project(const Point& x, const Tangent& eta) const {
    const Matrix& g = x[0];
    const Matrix& h = x[1];
    const Matrix p = g.transpose() * g;
    const Matrix q = h.transpose() * h;
    Matrix lambda_t;
    if (mode_ == MetricMode::ScaleInvariant) {
      // Lambda^T (PQ) + (PQ) Lambda^T = P H^T eta_H - eta_G^T G Q. PQ is not
      // symmetric; with M = P^{1/2} Q P^{1/2} the equation becomes an SPD
      // Lyapunov equation in Y = P^{-1/2} Lambda^T P^{1/2}.
      const Matrix rhs = p * h.transpose() * eta[1] - eta[0].transpose() * g * q;
      const auto roots = spd_roots(p);
      const Matrix m = roots.sqrt * q * roots.sqrt;
      const Matrix y = solve_lyapunov(sym_part(m), roots.inv_sqrt * rhs * roots.sqrt);
      lambda_t = roots.sqrt * y * roots.inv_sqrt;
    } else {
      // Euclidean orthogonality to the same vertical space:
      // (H^T H) Lambda^T + Lambda^T (G^T G) = H^T eta_H - eta_G^T G.
      lambda_t = solve_sylvester_spd(q, p, h.transpose() * eta[1] - eta[0].transpose() * g);
    }
    return Tangent(eta[0] + g * lambda_t.transpose(), eta[1] - h * lambda_t);
  }

  Point retract(const Point& x, const Tangent& xi) const {
    Point out(x[0] + xi[0], x[1] + xi[1]);
    validate(out);
    return out;
  }

  Tangent rgrad_from_partials(const Point& x, const Partials& phi) const {
    if (mode_ == MetricMode::Euclidean) return phi.template retag<gh::VectorTag>();
    return Tangent(phi[0] * (x[0].transpose() * x[0]), phi[1] * (x[1].transpose() * x[1]));
  }

  /// D grad[xi] by the product rule on (phi_G G^T G, phi_H H^T H); dphi is the
  /// Euclidean directional derivative of the partials along xi.
  Tangent grad_derivative(const Point& x, const Tangent& xi, const Partials& phi,
                          const Partials& dphi) const {
    if (mode_ == MetricMode::Euclidean) return dphi.template retag<gh::VectorTag>();
    Tangent out;
    for (std::size_t k = 0; k < 2; ++k) {
      const Matrix& f = x[k];
      const Matrix cross = xi[k].transpose() * f;
      out[k] = dphi[k] * (f.transpose() * f) + phi[k] * (cross + cross.transpose());
    }
    return out;
  }

  /// Correction term of the total-space Riemannian connection for the
  /// scale-invariant metric (zero in Euclidean mode).
  Tangent connection_correction(const Point& x, const Tangent& xi, const Tangent& eta) const {
    if (mode_ == MetricMode::Euclidean) return zero_tangent(x);
    Tangent out;
    for (std::size_t k = 0; k < 2; ++k) {
      const Matrix& f = x[k];
      const Eigen::LLT<Matrix> gram(f.transpose() * f);
      out[k] = -eta[k] * gram.solve(sym_part(f.transpose() * xi[k])) -
               xi[k] * gram.solve(sym_part(f.transpose() * eta[k])) +
               f * gram.solve(sym_part(eta[k].transpose() * xi[k]));
    }
    return out;
  }

  Tangent hess_apply(const Point& x, const Tangent& xi, const Partials& phi,
                     const Partials& dphi) const {
    const Tangent grad = rgrad_from_partials(x, phi);
    return pi_project(x, psi_project(x, grad_derivative(x, xi, phi, dphi) +
                                            connection_correction(x, xi, grad)));
  }

  Tangent zero_tangent(const Point& x) const { return Tangent::zeros_like(x); }

  /// Vertical vector (-G Lambda, H Lambda^T).
  Tangent vertical(const Point& x, const Matrix& lambda) const {
    return Tangent(-x[0] * lambda, x[1] * lambda.transpose());
  }

  Tangent random_tangent(const Point& x, Rng& rng) const {
    return pi_project(x, psi_project(x, gaussian_like<Tangent>(x, rng)));
  }

  Tangent random_vertical(const Point& x, Rng& rng) const {
    const auto r = x[0].cols();
    return vertical(x, gaussian_matrix<Scalar>(r, r, rng));
  }

  /// Random M with condition number at most 1e3.
  GroupElement random_group_element(const Point& x, Rng& rng) const {
    const auto r = x[0].cols();
    std::uniform_real_distribution<double> exponent(-1.5, 1.5);
    VectorX<Scalar> s(r);
    for (Eigen::Index i = 0; i < r; ++i) s(i) = Scalar(std::pow(10.0, exponent(rng)));
    return random_orthonormal<Scalar>(r, r, rng) * s.asDiagonal() *
           random_orthonormal<Scalar>(r, r, rng).transpose();
  }

  Point act(const Point& x, const GroupElement& m) const {
    return Point(x[0] * m.inverse(), x[1] * m.transpose());
  }
  Tangent act_tangent(const Tangent& xi, const GroupElement& m) const {
    return Tangent(xi[0] * m.inverse(), xi[1] * m.transpose());
  }

  /// Left and right thin factors with W = L R^T.
  std::pair<Matrix, Matrix> low_rank_factors(const Point& x) const { return {x[0], x[1]}; }

 private:
  static void check_rank(const Matrix& f, const char* what) {
    if (f.cols() <= 16) {
      require_full_column_rank(f, what);
      return;
    }
    const Eigen::LLT<Matrix> gram(f.transpose() * f);
    if (!f.allFinite() || gram.info() != Eigen::Success) {
      throw RankDropError(std::string(what) + ": factor lost column rank");
    }
  }

  MetricMode mode_;
};

}  // namespace fixedrank

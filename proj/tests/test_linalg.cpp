#include <gtest/gtest.h>

#include "support.hpp"

using namespace fixedrank;
using namespace fixedrank::test;

TEST(Lyapunov, IdentityCoefficientHalvesRhs) {
  const MatrixXd q = (MatrixXd(2, 2) << 1, 2, 3, 4).finished();
  EXPECT_LE((solve_lyapunov(MatrixXd::Identity(2, 2), q) - q / 2).norm(), 1e-15);
}

TEST(Lyapunov, DiagonalClosedForm) {
  const MatrixXd a = VectorXd::LinSpaced(2, 1, 2).asDiagonal();
  MatrixXd q = MatrixXd::Zero(2, 2);
  q(0, 1) = 3;
  EXPECT_NEAR(solve_lyapunov(a, q)(0, 1), 1.0, 1e-15);
}

TEST(Lyapunov, MatchesKroneckerSolve) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Index r = 1 + trial % 8;
    const MatrixXd a = random_spd(r, rng);
    const MatrixXd q = gaussian_matrix<double>(r, r, rng);
    const MatrixXd x = solve_lyapunov(a, q);
    const MatrixXd oracle = kron_sylvester(a, a, q);
    EXPECT_LE((x - oracle).norm(), 1e-10 * std::max(1.0, oracle.norm())) << "r=" << r;
  }
}

TEST(Lyapunov, SylvesterMatchesKroneckerSolve) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Index m = 1 + trial % 5;
    const Index n = 1 + (trial / 5) % 4;
    const MatrixXd a = random_spd(m, rng);
    const MatrixXd b = random_spd(n, rng);
    const MatrixXd c = gaussian_matrix<double>(m, n, rng);
    EXPECT_LE((solve_sylvester_spd(a, b, c) - kron_sylvester(a, b, c)).norm(), 1e-10);
  }
}

TEST(Lyapunov, RejectsIndefiniteCoefficient) {
  const MatrixXd a = VectorXd::LinSpaced(2, -1, 1).asDiagonal();
  EXPECT_THROW(solve_lyapunov(a, MatrixXd::Identity(2, 2)), SingularCoefficientError);
}

TEST(PolarFactor, OrthonormalInputIsFixed) {
  Rng rng(3);
  const MatrixXd q = random_orthonormal<double>(7, 3, rng);
  EXPECT_LE((polar_factor(q) - q).norm(), 1e-14);
}

TEST(PolarFactor, SingleColumnIsNormalized) {
  const MatrixXd d = (MatrixXd(2, 1) << 3, 4).finished();
  const MatrixXd expected = (MatrixXd(2, 1) << 0.6, 0.8).finished();
  EXPECT_LE((polar_factor(d) - expected).norm(), 1e-15);
}

TEST(PolarFactor, MatchesInverseSquareRootOfGram) {
  Rng rng(4);
  const MatrixXd d = gaussian_matrix<double>(50, 5, rng);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(d.transpose() * d);
  const MatrixXd oracle = d * eig.operatorInverseSqrt();
  EXPECT_LE((polar_factor(d) - oracle).norm(), 1e-12);
}

TEST(PolarFactor, RankDeficientInputThrows) {
  MatrixXd d = MatrixXd::Zero(4, 2);
  d(0, 0) = 1;
  EXPECT_THROW(polar_factor(d), RankDropError);
}

TEST(SymExpm, ZeroGivesIdentity) {
  EXPECT_LE((sym_expm(MatrixXd::Zero(3, 3)) - MatrixXd::Identity(3, 3)).norm(), 1e-15);
}

TEST(SymExpm, DiagonalCase) {
  const MatrixXd s = (VectorXd(2) << 1, -1).finished().asDiagonal();
  const MatrixXd e = sym_expm(s);
  EXPECT_NEAR(e(0, 0), std::exp(1.0), 1e-14);
  EXPECT_NEAR(e(1, 1), std::exp(-1.0), 1e-15);
  EXPECT_EQ(e(0, 1), 0.0);
}

TEST(SymExpm, MatchesTaylorSeries) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd s = sym_part(gaussian_matrix<double>(4, 4, rng));
    const MatrixXd oracle = taylor_expm(s);
    EXPECT_LE((sym_expm(s) - oracle).norm(), 1e-10 * oracle.norm());
  }
}

TEST(SymExpm, RejectsNonSymmetric) {
  const MatrixXd a = (MatrixXd(2, 2) << 0, 1, 0, 0).finished();
  EXPECT_THROW(sym_expm(a), SymmetryError);
}

TEST(SymSkew, Decomposition) {
  const MatrixXd a = (MatrixXd(2, 2) << 0, 1, 0, 0).finished();
  const MatrixXd expected = (MatrixXd(2, 2) << 0, 0.5, 0.5, 0).finished();
  EXPECT_EQ(sym_part(a), expected);
  Rng rng(6);
  const MatrixXd b = gaussian_matrix<double>(4, 4, rng);
  EXPECT_LE((sym_part(b) + skew_part(b) - b).norm(), 1e-15);
  EXPECT_LE((skew_part(b, SkewConvention::Transposed) + skew_part(b)).norm(), 1e-15);
  const MatrixXd s = sym_part(b);
  EXPECT_EQ(sym_part(s), s);
  EXPECT_EQ(skew_part(s).norm(), 0.0);
}

TEST(ThinSvd, IdentityAndRankOne) {
  EXPECT_LE((thin_svd(MatrixXd::Identity(3, 3), 3).s - VectorXd::Ones(3)).norm(), 1e-15);
  const VectorXd a = VectorXd::LinSpaced(4, 1, 4);
  const VectorXd b = VectorXd::LinSpaced(3, -1, 2);
  EXPECT_NEAR(thin_svd(a * b.transpose(), 1).s(0), a.norm() * b.norm(), 1e-12);
}

TEST(ThinSvd, TruncationErrorMatchesTail) {
  Rng rng(7);
  const MatrixXd a = gaussian_matrix<double>(30, 20, rng);
  const auto t = thin_svd(a, 5);
  const Eigen::JacobiSVD<MatrixXd> full(a);
  const double tail = full.singularValues().tail(15).norm();
  EXPECT_NEAR((a - t.u * t.s.asDiagonal() * t.v.transpose()).norm(), tail, 1e-10);
  for (Index j = 0; j < 5; ++j) {
    Index imax = 0;
    t.u.col(j).cwiseAbs().maxCoeff(&imax);
    EXPECT_GT(t.u(imax, j), 0.0);
  }
}

TEST(Polynomial, SimpleMinima) {
  const std::vector<double> shifted{9, -6, 1};
  auto m = minimize_polynomial(shifted);
  EXPECT_NEAR(m.argmin, 3.0, 1e-12);
  EXPECT_NEAR(m.value, 0.0, 1e-12);
  const std::vector<double> sixth{0, 0, 0, 0, 0, 0, 1};
  EXPECT_NEAR(minimize_polynomial(sixth).argmin, 0.0, 1e-12);
}

TEST(Polynomial, UnboundedThrows) {
  const std::vector<double> cubic{0, 0, 0, 1};
  EXPECT_THROW(minimize_polynomial(cubic), UnboundedError);
  const std::vector<double> negative{0, 0, -1};
  EXPECT_THROW(minimize_polynomial(negative), UnboundedError);
}

TEST(Polynomial, MatchesGridSearch) {
  Rng rng(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> p(7, 0.0);
    for (auto& c : p) c = normal(rng);
    p[6] = 0.05 + std::abs(p[6]);
    const std::span<const double> coeffs(p);
    double best_s = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (long k = -1000000; k <= 1000000; ++k) {
      const double s = 1e-4 * double(k);
      const double v = polyval(coeffs, s);
      if (v < best_v) {
        best_v = v;
        best_s = s;
      }
    }
    const auto m = minimize_polynomial(p);
    EXPECT_NEAR(m.argmin, best_s, 1e-3) << "trial " << trial;
    EXPECT_LE(m.value, best_v + 1e-12);
  }
}

TEST(Polynomial, LowerBoundRestrictsSearch) {
  // (s+2)^2 (s-1)^2 tilted so the well at s = -2 is the deeper one.
  std::vector<double> a{4, 4, 1};   // (s+2)^2
  std::vector<double> b{1, -2, 1};  // (s-1)^2
  std::vector<double> p(5, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) p[i + j] += a[i] * b[j];
  }
  p[1] += 0.3;  // tilt toward negative s
  const auto global = minimize_polynomial(p);
  EXPECT_LT(global.argmin, 0.0);
  const auto bounded = minimize_polynomial(p, 0.0);
  EXPECT_GT(bounded.argmin, 0.5);
  EXPECT_GE(bounded.value, global.value);
}

#include <gtest/gtest.h>

#include "fixedrank/experiment.hpp"
#include "support.hpp"

using namespace fixedrank;
using namespace fixedrank::test;

namespace {

MatrixXd ambient(const EmbeddedGeometry<double>::Point& x, const EmbeddedGeometry<double>::Tangent& xi) {
  return x[0] * xi[0] * x[2].transpose() + xi[1] * x[2].transpose() + x[0] * xi[2].transpose();
}

/// Pairs a partials tuple with a tangent-shaped tuple block by block.
template <typename A, typename B>
double pairing(const A& a, const B& b) {
  double acc = 0;
  for (std::size_t k = 0; k < A::size; ++k) acc += a[k].cwiseProduct(b[k]).sum();
  return acc;
}

template <typename G>
void expect_partials_match_finite_differences(const G& geo, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd truth;
  const auto problem = random_problem(8, 7, 2, 30, rng, &truth);
  const auto x = random_point(geo, 8, 7, 2, rng);
  const auto s = residual_S(geo, x, problem);
  const auto phi = euclidean_partials(geo, x, s);
  const auto xi = gaussian_like<typename G::Tangent>(x, rng);
  const double t = 1e-5;
  auto along = [&](double step) {
    auto y = x;
    for (std::size_t k = 0; k < G::Point::size; ++k) y[k] += step * xi[k];
    return y;
  };
  const double fd = (completion_cost(geo, along(t), problem) - completion_cost(geo, along(-t), problem)) / (2 * t);
  EXPECT_NEAR(pairing(phi, xi), fd, 1e-7 * std::max(1.0, std::abs(fd))) << geo.name();

  // S_* and the directional partials against central differences of S and phi.
  const auto sstar = directional_residual_Sstar(geo, x, xi, problem);
  const VectorXd ds = (residual_S(geo, along(t), problem).values() -
                       residual_S(geo, along(-t), problem).values()) / (2 * t);
  EXPECT_LE((sstar.values() - ds).norm(), 1e-7 * std::max(1.0, ds.norm())) << geo.name();
  const auto dphi = directional_partials(geo, x, xi, s, sstar);
  const auto plus = euclidean_partials(geo, along(t), residual_S(geo, along(t), problem));
  const auto minus = euclidean_partials(geo, along(-t), residual_S(geo, along(-t), problem));
  for (std::size_t k = 0; k < G::Tangent::size; ++k) {
    const MatrixXd fdk = (plus[k] - minus[k]) / (2 * t);
    EXPECT_LE((dphi[k] - fdk).norm(), 1e-6 * std::max(1.0, fdk.norm())) << geo.name() << " block " << k;
  }

  // Dense chain rule: the slope along xi is <S, DW[xi]>.
  const auto [l, r] = direction_factors(geo, x, xi);
  const MatrixXd dw = l * r.transpose();
  EXPECT_NEAR(s.to_dense().cwiseProduct(dw).sum(), fd, 1e-7 * std::max(1.0, std::abs(fd)));
}

template <typename G>
void expect_dual_hessian_routes_agree(const G& geo, std::uint64_t seed) {
  Rng rng(seed);
  const auto problem = random_problem(9, 8, 3, 50, rng);
  const auto x = random_point(geo, 9, 8, 3, rng);
  const auto xi = geo.random_tangent(x, rng);
  const auto s = residual_S(geo, x, problem);
  const auto sstar = directional_residual_Sstar(geo, x, xi, problem);
  const auto phi = euclidean_partials(geo, x, s);
  const auto dphi = directional_partials(geo, x, xi, s, sstar);
  const auto direct = hess_directional_partials(geo, x, xi, s, sstar);
  const auto assembled = geo.psi_project(x, geo.grad_derivative(x, xi, phi, dphi));
  EXPECT_LE((direct - assembled).euclidean_norm(), 1e-11 * std::max(1.0, assembled.euclidean_norm()))
      << geo.name();
}

template <typename G>
void expect_spectral_start_is_exact(const G& geo) {
  Rng rng(77);
  MatrixXd truth;
  const auto problem = random_problem(12, 10, 3, 120, rng, &truth);
  const auto x = init_spectral(geo, problem);
  EXPECT_NO_THROW(geo.validate(x));
  EXPECT_LE(completion_cost(geo, x, problem), 1e-20) << geo.name();
  EXPECT_LE((dense_matrix(geo, x) - truth).norm(), 1e-9 * truth.norm()) << geo.name();
}

}  // namespace

TEST(SampledMatrix, ProductsMatchDense) {
  Rng rng(1);
  const auto problem = random_problem(9, 6, 2, 25, rng);
  const auto& a = problem.train;
  const MatrixXd dense = a.to_dense();
  const MatrixXd x = gaussian_matrix<double>(6, 3, rng);
  const MatrixXd y = gaussian_matrix<double>(9, 3, rng);
  EXPECT_LE((a.times(x) - dense * x).norm(), 1e-13);
  EXPECT_LE((a.transpose_times(y) - dense.transpose() * y).norm(), 1e-13);
  const MatrixXd l = gaussian_matrix<double>(9, 2, rng);
  const MatrixXd r = gaussian_matrix<double>(6, 2, rng);
  const MatrixXd lr = l * r.transpose();
  const VectorXd picked = a.sample(l, r);
  for (Index k = 0; k < a.size(); ++k) EXPECT_NEAR(picked(k), lr(a.row(k), a.col(k)), 1e-13);
  for (Index k = 1; k < a.size(); ++k) {
    EXPECT_TRUE(a.row(k - 1) < a.row(k) || (a.row(k - 1) == a.row(k) && a.col(k - 1) < a.col(k)));
  }
  EXPECT_TRUE(a.with_values(VectorXd::Zero(a.size())).shares_pattern(a));
}

TEST(SampledMatrix, RejectsBadEntries) {
  EXPECT_THROW(SampledMatrix<double>(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), std::invalid_argument);
  EXPECT_THROW(SampledMatrix<double>(2, 2, {{2, 0, 1.0}}), std::out_of_range);
  EXPECT_THROW(SampledMatrix<double>(2, 2, {{0, 0, 1.0}}).with_values(VectorXd::Zero(2)),
               std::invalid_argument);
}

TEST(Cost, SingleObservedEntry) {
  const FullRankGeometry<double> gh;
  const CompletionProblem<double> problem{SampledMatrix<double>(2, 2, {{0, 0, 0.0}}), std::nullopt, 1};
  const FullRankGeometry<double>::Point x((MatrixXd(2, 1) << 2, 0).finished(),
                                          (MatrixXd(2, 1) << 1, 0).finished());
  EXPECT_DOUBLE_EQ(completion_cost(gh, x, problem), 4.0);
  EXPECT_DOUBLE_EQ(residual_S(gh, x, problem).values()(0), 4.0);
  const CompletionCost<FullRankGeometry<double>> cost(gh, problem);
  EXPECT_DOUBLE_EQ(cost.linearize(x).value(), 4.0);
  EXPECT_DOUBLE_EQ(cost.value(x), 4.0);
}

TEST(Cost, PartialsMatchFiniteDifferences) {
  expect_partials_match_finite_differences(FullRankGeometry<double>(), 11);
  expect_partials_match_finite_differences(PolarGeometry<double>(), 12);
  expect_partials_match_finite_differences(SubspaceGeometry<double>(), 13);
}

TEST(Cost, ObjectiveGradientIsRiemannianGradientOfPartials) {
  Rng rng(14);
  const PolarGeometry<double> geo;
  const auto problem = random_problem(10, 9, 2, 60, rng);
  const CompletionCost<PolarGeometry<double>> cost(geo, problem);
  const auto obj = make_objective(geo, cost);
  const auto x = random_point(geo, 10, 9, 2, rng);
  const auto model = obj.evaluate(x);
  EXPECT_NEAR(model.cost, completion_cost(geo, x, problem), 1e-14);
  const auto expected = geo.rgrad_from_partials(x, euclidean_partials(geo, x, residual_S(geo, x, problem)));
  EXPECT_LE((model.gradient - expected).euclidean_norm(), 1e-14);
  EXPECT_NEAR(model.gradient_norm, tangent_norm(geo, x, expected), 1e-14);
}

TEST(Hessian, DirectFormulaMatchesProductRule) {
  expect_dual_hessian_routes_agree(FullRankGeometry<double>(MetricMode::ScaleInvariant), 21);
  expect_dual_hessian_routes_agree(FullRankGeometry<double>(MetricMode::Euclidean), 22);
  expect_dual_hessian_routes_agree(PolarGeometry<double>(), 23);
  expect_dual_hessian_routes_agree(PolarGeometry<double>(ScalingMode::Diagonal), 24);
  expect_dual_hessian_routes_agree(SubspaceGeometry<double>(MetricMode::ScaleInvariant), 25);
  expect_dual_hessian_routes_agree(SubspaceGeometry<double>(MetricMode::Euclidean), 26);
}

TEST(Hessian, EmbeddedMatchesDifferentiatedProjectedGradient) {
  Rng rng(27);
  const EmbeddedGeometry<double> geo;
  const auto problem = random_problem(9, 8, 2, 50, rng);
  const CompletionCost<EmbeddedGeometry<double>> cost(geo, problem);
  const auto obj = make_objective(geo, cost);
  const auto x = random_point(geo, 9, 8, 2, rng);
  const auto xi = geo.random_tangent(x, rng);
  const double t = 1e-6;
  auto grad_at = [&](double step) {
    const auto y = geo.retract(x, step * xi);
    return MatrixXd(ambient(y, obj.evaluate(y).gradient));
  };
  const MatrixXd fd = (grad_at(t) - grad_at(-t)) / (2 * t);
  const auto oracle = geo.project_ambient(x, DenseAmbient<double>(fd));
  const auto hess = obj.evaluate(x).hessian(xi);
  EXPECT_LE((hess - oracle).euclidean_norm(), 1e-6 * std::max(1.0, oracle.euclidean_norm()));
}

TEST(LinearizedStep, ClosedFormForSingleFactorDirection) {
  Rng rng(31);
  const FullRankGeometry<double> gh;
  const auto problem = random_problem(10, 9, 2, 50, rng);
  const auto x = random_point(gh, 10, 9, 2, rng);
  const MatrixXd dense_s = residual_S(gh, x, problem).to_dense();
  const FullRankGeometry<double>::Tangent xi(-dense_s * x[1], MatrixXd::Zero(9, 2));
  MatrixXd observed = MatrixXd::Zero(10, 9);
  for (Index k = 0; k < problem.train.size(); ++k) observed(problem.train.row(k), problem.train.col(k)) = 1;
  const MatrixXd dir = (xi[0] * x[1].transpose()).cwiseProduct(observed);
  MatrixXd target = MatrixXd::Zero(10, 9);
  for (Index k = 0; k < problem.train.size(); ++k) {
    target(problem.train.row(k), problem.train.col(k)) = problem.train.values()(k);
  }
  const MatrixXd res = (x[0] * x[1].transpose()).cwiseProduct(observed) - target;
  const double expected = -dir.cwiseProduct(res).sum() / dir.squaredNorm();
  ASSERT_GT(expected, 0.0);
  EXPECT_NEAR(linearized_step(gh, x, xi, problem), expected, 1e-10 * expected);
}

TEST(LinearizedStep, MinimizesCostAlongTheLine) {
  Rng rng(32);
  const PolarGeometry<double> geo;
  const auto problem = random_problem(10, 9, 2, 60, rng);
  const auto x = random_point(geo, 10, 9, 2, rng);
  const CompletionCost<PolarGeometry<double>> cost(geo, problem);
  const auto xi = -make_objective(geo, cost).evaluate(x).gradient;
  const double s0 = linearized_step(geo, x, xi, problem);
  auto along = [&](double s) {
    return completion_cost(geo, PolarGeometry<double>::Point(x[0] + s * xi[0], x[1] + s * xi[1], x[2] + s * xi[2]),
                           problem);
  };
  const double best = along(s0);
  for (int k = 0; k <= 3000; ++k) EXPECT_LE(best, along(3.0 * s0 * k / 3000.0) + 1e-12 * (1 + best));
  EXPECT_THROW(linearized_step(geo, x, geo.zero_tangent(x), problem), std::invalid_argument);
}

TEST(LinearizedStep, NeverReturnsANegativeStep) {
  Rng rng(33);
  const SubspaceGeometry<double> geo;
  const auto problem = random_problem(8, 8, 2, 40, rng);
  const auto x = random_point(geo, 8, 8, 2, rng);
  const CompletionCost<SubspaceGeometry<double>> cost(geo, problem);
  const auto ascent = make_objective(geo, cost).evaluate(x).gradient;
  EXPECT_GT(linearized_step(geo, x, ascent, problem), 0.0);
  EXPECT_LE(linearized_step(geo, x, ascent, problem), 1e-3);
}

TEST(SparseSvd, MatchesDenseSvd) {
  Rng rng(41);
  std::vector<SampleEntry<double>> entries;
  std::normal_distribution<double> normal;
  for (Index i = 0; i < 30; ++i) {
    for (Index j = 0; j < 20; ++j) {
      if ((i + 3 * j) % 4 != 0) entries.push_back({i, j, normal(rng)});
    }
  }
  const SampledMatrix<double> a(30, 20, entries);
  const auto svd = sparse_truncated_svd(a, 4);
  const Eigen::JacobiSVD<MatrixXd> dense(a.to_dense(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  EXPECT_LE((svd.s - dense.singularValues().head(4)).norm(), 1e-9 * dense.singularValues()(0));
  const MatrixXd pu = svd.u * svd.u.transpose();
  const MatrixXd pu_dense = dense.matrixU().leftCols(4) * dense.matrixU().leftCols(4).transpose();
  EXPECT_LE((pu - pu_dense).norm(), 1e-6);
  EXPECT_THROW(sparse_truncated_svd(a, 0), std::invalid_argument);
  EXPECT_THROW(sparse_truncated_svd(a, 21), std::invalid_argument);
}

TEST(SpectralStart, FullObservationRecoversTheMatrix) {
  expect_spectral_start_is_exact(FullRankGeometry<double>());
  expect_spectral_start_is_exact(PolarGeometry<double>());
  expect_spectral_start_is_exact(SubspaceGeometry<double>());
  expect_spectral_start_is_exact(EmbeddedGeometry<double>());
}

TEST(SpectralStart, ZeroObservationsThrow) {
  const CompletionProblem<double> problem{SampledMatrix<double>(4, 4, {{0, 0, 0.0}, {1, 2, 0.0}}),
                                          std::nullopt, 1};
  EXPECT_THROW(init_spectral(FullRankGeometry<double>(), problem), RankDropError);
}

TEST(RadiusSeed, ScalesWithStepAndGradient) {
  const auto seed = tr_radius_seed(64.0, 1.0);
  EXPECT_DOUBLE_EQ(seed.initial, 1.0);
  EXPECT_DOUBLE_EQ(seed.maximum, 1024.0);
  EXPECT_THROW(tr_radius_seed(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(tr_radius_seed(0.0, 1.0), std::invalid_argument);
}

TEST(SampleCount, OversampledDegreesOfFreedom) {
  EXPECT_EQ(sample_count(32000, 32000, 5, 8.0), 2559800);
  EXPECT_EQ(sample_count(1000, 1000, 5, 8.0), 79800);
}

TEST(TestError, RmseOnHeldOutEntries) {
  const FullRankGeometry<double> gh;
  CompletionProblem<double> problem{SampledMatrix<double>(2, 2, {{0, 0, 1.0}}), std::nullopt, 1};
  const FullRankGeometry<double>::Point x(MatrixXd::Ones(2, 1), MatrixXd::Ones(2, 1));
  EXPECT_TRUE(std::isnan(test_rmse(gh, x, problem)));
  problem.test = SampledMatrix<double>(2, 2, {{0, 1, 3.0}, {1, 1, 1.0}});
  EXPECT_DOUBLE_EQ(test_rmse(gh, x, problem), std::sqrt(2.0));
}

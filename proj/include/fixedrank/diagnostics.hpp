#pragma once

// Numerical checks of a geometry + objective pair: Taylor-remainder slopes
// for the gradient and Hessian, Hessian symmetry, and projection defects.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fixedrank/manifold.hpp"

namespace fixedrank {

struct TaylorFit {
  std::vector<double> steps;
  std::vector<double> residuals;
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t points_used = 0;
  bool below_floor = false;  // every residual under the floor
};

struct DiagnosticsReport {
  std::string geometry;
  double cost = 0;
  std::optional<TaylorFit> gradient;
  std::optional<TaylorFit> hessian;
  std::optional<double> symmetry_defect;
  std::optional<double> idempotence_defect;
  std::optional<double> vertical_defect;
  std::optional<double> orthogonality_defect;
  bool gradient_pass = true;
  bool hessian_pass = true;
  bool projection_pass = true;

  bool passed() const { return gradient_pass && hessian_pass && projection_pass; }
};

struct DiagnosticsOptions {
  double t_min = 1e-6;
  double t_max = 1e-2;
  int num_steps = 6;
  double floor = 1e-14;
  double gradient_slope_min = 1.9;
  double hessian_slope_min = 2.9;
  double symmetry_max = 1e-8;
  int symmetry_probes = 5;
  double projection_max = 1e-10;
};

/// Least-squares slope of log(residual) against log(t). The two smallest
/// steps are dropped when their residuals sit below the floor.
inline TaylorFit fit_taylor_slope(std::vector<double> steps, std::vector<double> residuals,
                                  double floor) {
  TaylorFit fit{std::move(steps), std::move(residuals)};
  const std::size_t n = fit.steps.size();
  fit.below_floor = true;
  for (double r : fit.residuals) fit.below_floor = fit.below_floor && r <= floor;
  std::size_t first = 0;
  while (first < 2 && first < n && fit.residuals[first] < floor) ++first;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = first; i < n; ++i) {
    if (!(fit.residuals[i] > 0)) continue;
    const double lx = std::log(fit.steps[i]);
    const double ly = std::log(fit.residuals[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  fit.points_used = m;
  if (m >= 2) fit.slope = (double(m) * sxy - sx * sy) / (double(m) * sxx - sx * sx);
  return fit;
}

inline std::vector<double> log_spaced_steps(const DiagnosticsOptions& opt) {
  std::vector<double> t(static_cast<std::size_t>(opt.num_steps));
  const double a = std::log10(opt.t_min);
  const double b = std::log10(opt.t_max);
  for (int i = 0; i < opt.num_steps; ++i) {
    t[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (opt.num_steps - 1));
  }
  return t;
}

namespace detail {
template <GeometryContract G>
typename G::Tangent unit_direction(const G& geo, const typename G::Point& x, Rng& rng) {
  auto xi = geo.random_tangent(x, rng);
  const auto n = tangent_norm(geo, x, xi);
  return n > 0 ? (typename G::Scalar(1) / n) * xi : xi;
}

template <typename Scalar>
Scalar checked_cost(Scalar v, double t) {
  if (!std::isfinite(double(v))) throw DiagnosticsError("non-finite cost value", t);
  return v;
}
}  // namespace detail

/// Taylor test of the gradient along `xi`: |phi(R(t xi)) - phi(x) - t g(grad, xi)|.
template <GeometryContract G>
DiagnosticsReport check_gradient(const G& geo, const Objective<G>& objective,
                                 const typename G::Point& x, const typename G::Tangent& xi,
                                 const DiagnosticsOptions& opt = {}) {
  DiagnosticsReport report;
  report.geometry = geo.name();
  const auto model = objective.evaluate(x);
  const double f0 = detail::checked_cost(double(model.cost), 0.0);
  report.cost = f0;
  const double slope0 = double(geo.metric(x, model.gradient, xi));
  const auto steps = log_spaced_steps(opt);
  std::vector<double> residuals;
  for (double t : steps) {
    const double ft =
        detail::checked_cost(double(objective.cost(geo.retract(x, typename G::Scalar(t) * xi))), t);
    residuals.push_back(std::abs(ft - f0 - t * slope0));
  }
  report.gradient = fit_taylor_slope(steps, std::move(residuals), opt.floor);
  report.gradient_pass = report.gradient->slope > opt.gradient_slope_min ||
                         (report.gradient->below_floor && report.gradient->points_used < 2);
  return report;
}

template <GeometryContract G>
DiagnosticsReport check_gradient(const G& geo, const Objective<G>& objective,
                                 const typename G::Point& x, std::uint64_t seed,
                                 const DiagnosticsOptions& opt = {}) {
  Rng rng(seed);
  return check_gradient(geo, objective, x, detail::unit_direction(geo, x, rng), opt);
}

/// Hessian symmetry over random probe pairs and the second-order Taylor test
/// |phi(R(t xi)) - phi(x) - t g(grad, xi) - t^2/2 g(H xi, xi)|.
template <GeometryContract G>
DiagnosticsReport check_hessian(const G& geo, const Objective<G>& objective,
                                const typename G::Point& x, std::uint64_t seed,
                                const DiagnosticsOptions& opt = {}) {
  using Scalar = typename G::Scalar;
  Rng rng(seed);
  DiagnosticsReport report;
  report.geometry = geo.name();
  const auto model = objective.evaluate(x);
  const double f0 = detail::checked_cost(double(model.cost), 0.0);
  report.cost = f0;

  double defect = 0;
  for (int k = 0; k < opt.symmetry_probes; ++k) {
    const auto xi = detail::unit_direction(geo, x, rng);
    const auto eta = detail::unit_direction(geo, x, rng);
    const auto hxi = model.hessian(xi);
    const auto heta = model.hessian(eta);
    const double num = std::abs(double(geo.metric(x, hxi, eta) - geo.metric(x, heta, xi)));
    const double den = double(tangent_norm(geo, x, hxi) * tangent_norm(geo, x, eta) +
                              tangent_norm(geo, x, heta) * tangent_norm(geo, x, xi));
    if (den > 0) defect = std::max(defect, num / den);
  }
  report.symmetry_defect = defect;

  const auto xi = detail::unit_direction(geo, x, rng);
  const double lin = double(geo.metric(x, model.gradient, xi));
  const double quad = double(geo.metric(x, model.hessian(xi), xi));
  const auto steps = log_spaced_steps(opt);
  std::vector<double> residuals;
  for (double t : steps) {
    const double ft = detail::checked_cost(double(objective.cost(geo.retract(x, Scalar(t) * xi))), t);
    residuals.push_back(std::abs(ft - f0 - t * lin - 0.5 * t * t * quad));
  }
  report.hessian = fit_taylor_slope(steps, std::move(residuals), opt.floor);
  report.hessian_pass = defect <= opt.symmetry_max &&
                        (report.hessian->slope >= opt.hessian_slope_min ||
                         (report.hessian->below_floor && report.hessian->points_used < 2));
  return report;
}

/// Defects of the horizontal projection at x: idempotence, annihilation of a
/// vertical vector and metric orthogonality of the output to it, each
/// relative to the input size.
template <GeometryContract G>
DiagnosticsReport check_projections(const G& geo, const typename G::Point& x, std::uint64_t seed,
                                    const DiagnosticsOptions& opt = {}) {
  Rng rng(seed);
  DiagnosticsReport report;
  report.geometry = geo.name();
  const auto raw = geo.psi_project(x, gaussian_like<typename G::Tangent>(x, rng));
  const auto h = geo.pi_project(x, raw);
  const auto hh = geo.pi_project(x, h);
  const auto v = geo.random_vertical(x, rng);
  const double raw_norm = std::max(double(tangent_norm(geo, x, raw)), 1e-300);
  report.idempotence_defect = double(tangent_norm(geo, x, hh - h)) / raw_norm;
  const double v_norm = double(tangent_norm(geo, x, v));
  report.vertical_defect =
      v_norm > 0 ? double(tangent_norm(geo, x, geo.pi_project(x, v))) / v_norm : 0.0;
  report.orthogonality_defect =
      v_norm > 0 ? std::abs(double(geo.metric(x, h, v))) / (raw_norm * v_norm) : 0.0;
  report.projection_pass = *report.idempotence_defect <= opt.projection_max &&
                           *report.vertical_defect <= opt.projection_max &&
                           *report.orthogonality_defect <= opt.projection_max;
  return report;
}

}  // namespace fixedrank

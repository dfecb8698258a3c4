#pragma once

// Riemannian gradient descent with Armijo backtracking and an adaptive
// initial step, and the Riemannian trust-region method with truncated CG.
// Both work on horizontal lifts through any GeometryContract.

#include <chrono>
#include <cstdio>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fixedrank/manifold.hpp"

namespace fixedrank {

struct TraceRow {
  int iter = 0;
  double cost = 0;
  double grad_norm = 0;
  double step_or_radius = 0;
  int backtracks = 0;
  int inner_iters = 0;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double time_s = 0;
};

/// Row 0 is the starting point; row t is the state after iteration t.
struct SolverTrace {
  static constexpr const char* kHeader =
      "iter,cost,grad_norm,step_or_radius,backtracks,inner_iters,rho,time_s";

  std::vector<TraceRow> rows;
  std::string stop_reason;

  int iterations() const { return rows.empty() ? 0 : rows.back().iter; }

  /// First iteration whose cost is at or below `level`, or -1.
  int iterations_to(double level) const {
    for (const auto& r : rows) {
      if (r.cost <= level) return r.iter;
    }
    return -1;
  }

  void write_csv(std::ostream& out) const {
    out << kHeader << '\n';
    char line[512];
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%d,%d,%.17g,%.6f\n", r.iter, r.cost,
                    r.grad_norm, r.step_or_radius, r.backtracks, r.inner_iters, r.rho, r.time_s);
      out << line;
    }
  }
};

/// A solver failure with the partial trace that led to it.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, SolverTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const SolverTrace& trace() const { return trace_; }

 private:
  SolverTrace trace_;
};

struct GDConfig {
  int max_iters = 200;
  double cost_stop = 1e-20;
  double grad_norm_stop = 1e-12;
  double armijo_c1 = 1e-4;
  double contraction = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 50;
  bool record_time = true;

  void validate() const {
    if (!(armijo_c1 > 0 && armijo_c1 < 1) || !(contraction > 0 && contraction < 1) ||
        !(initial_step > 0) || max_iters < 0 || max_backtracks < 0) {
      throw std::invalid_argument("GDConfig: parameter out of range");
    }
  }
};

struct TRConfig {
  int max_outer = 100;
  int max_inner = 100;
  double theta = 1.0;
  double kappa = 0.1;
  double initial_radius = 1.0;
  double max_radius = 1024.0;
  double accept_ratio = 0.1;
  double shrink_ratio = 0.25;
  double grow_ratio = 0.75;
  double shrink_factor = 0.25;
  double grow_factor = 2.0;
  double cost_stop = 1e-20;
  double grad_norm_stop = 1e-12;
  double rho_regularization = 1e-15;
  bool record_time = true;

  void validate() const {
    if (!(kappa > 0 && kappa < 1) || !(theta > 0) || !(initial_radius > 0) ||
        !(initial_radius <= max_radius) || max_outer < 0 || max_inner < 1) {
      throw std::invalid_argument("TRConfig: parameter out of range");
    }
  }
};

/// Initial step guess for the next iteration: 2 s_hat after an immediate
/// acceptance, 2 s otherwise.
inline double adaptive_step_update(double s_hat, double s, int backtracks) {
  if (!(s_hat > 0) || !(s > 0) || backtracks < 0) {
    throw std::invalid_argument("adaptive_step_update: inputs must be positive");
  }
  if (backtracks == 0) return 2.0 * s_hat;
  return 2.0 * s;
}

template <GeometryContract G>
struct LineSearchResult {
  typename G::Scalar step;
  int backtracks;
  typename G::Point x;
  typename G::Scalar cost;
};

/// Largest s = s_hat rho^j with phi(R_x(s d)) <= phi(x) + c1 s g(grad, d). A
/// retraction that loses rank counts as one more contraction.
template <GeometryContract G>
LineSearchResult<G> armijo_backtrack(const G& geo, const Objective<G>& objective,
                                     const typename G::Point& x, typename G::Scalar cost,
                                     const typename G::Tangent& grad,
                                     const typename G::Tangent& direction,
                                     typename G::Scalar s_hat, const GDConfig& config) {
  using Scalar = typename G::Scalar;
  const Scalar slope = geo.metric(x, grad, direction);
  if (!(slope < Scalar(0))) {
    throw std::invalid_argument("armijo_backtrack: direction is not a descent direction");
  }
  if (!(s_hat > Scalar(0))) throw std::invalid_argument("armijo_backtrack: step must be positive");
  Scalar s = s_hat;
  for (int j = 0;; ++j) {
    try {
      auto candidate = geo.retract(x, s * direction);
      const Scalar value = objective.cost(candidate);
      if (std::isfinite(value) && value <= cost + Scalar(config.armijo_c1) * s * slope) {
        return {s, j, std::move(candidate), value};
      }
    } catch (const RankDropError&) {
    }
    if (j >= config.max_backtracks) {
      throw LineSearchError("armijo_backtrack: no sufficient decrease after " +
                            std::to_string(config.max_backtracks) + " contractions");
    }
    s *= Scalar(config.contraction);
  }
}

namespace detail {
class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};
}  // namespace detail

template <GeometryContract G>
struct SolverResult {
  typename G::Point x;
  SolverTrace trace;
};

template <GeometryContract G>
SolverResult<G> gradient_descent(const G& geo, const Objective<G>& objective,
                                 typename G::Point x0, const GDConfig& config) {
  config.validate();
  geo.validate(x0);
  const detail::Stopwatch clock(config.record_time);
  SolverResult<G> out{std::move(x0), {}};
  auto model = objective.evaluate(out.x);
  double s_hat = config.initial_step;
  out.trace.rows.push_back({0, double(model.cost), double(model.gradient_norm), s_hat, 0, 0,
                            std::numeric_limits<double>::quiet_NaN(), clock.seconds()});
  for (int t = 1;; ++t) {
    if (model.cost <= config.cost_stop) {
      out.trace.stop_reason = "cost";
      break;
    }
    if (model.gradient_norm <= config.grad_norm_stop) {
      out.trace.stop_reason = "grad_norm";
      break;
    }
    if (t > config.max_iters) {
      out.trace.stop_reason = "max_iters";
      break;
    }
    LineSearchResult<G> step;
    try {
      step = armijo_backtrack(geo, objective, out.x, model.cost, model.gradient, -model.gradient,
                              typename G::Scalar(s_hat), config);
    } catch (const NumericalError& e) {
      throw SolverError(e.what(), out.trace);
    }
    s_hat = adaptive_step_update(s_hat, double(step.step), step.backtracks);
    out.x = std::move(step.x);
    model = objective.evaluate(out.x);
    out.trace.rows.push_back({t, double(model.cost), double(model.gradient_norm), double(step.step),
                              step.backtracks, 0, std::numeric_limits<double>::quiet_NaN(),
                              clock.seconds()});
  }
  return out;
}

/// Inner stopping threshold ||r_0|| min(||r_0||^theta, kappa).
inline double tcg_stop_threshold(double r0_norm, double theta, double kappa) {
  return r0_norm * std::min(std::pow(r0_norm, theta), kappa);
}

enum class TcgStatus { Converged, Boundary, NegativeCurvature, MaxInner };

inline const char* to_string(TcgStatus s) {
  switch (s) {
    case TcgStatus::Converged: return "converged";
    case TcgStatus::Boundary: return "boundary";
    case TcgStatus::NegativeCurvature: return "negative-curvature";
    case TcgStatus::MaxInner: return "max-inner";
  }
  return "unknown";
}

template <GeometryContract G>
struct TcgResult {
  typename G::Tangent eta;
  typename G::Tangent hess_eta;
  TcgStatus status = TcgStatus::MaxInner;
  int inner_iters = 0;
};

/// Steihaug-Toint truncated CG for min g(grad, eta) + g(eta, H eta)/2 subject
/// to g(eta, eta) <= delta^2, all in the metric at x.
template <GeometryContract G, typename Hessian>
TcgResult<G> tcg_subproblem(const G& geo, const typename G::Point& x,
                            const typename G::Tangent& grad, const Hessian& hessian,
                            typename G::Scalar delta, double theta, double kappa, int max_inner) {
  using Scalar = typename G::Scalar;
  if (!(delta > Scalar(0))) throw std::invalid_argument("tcg_subproblem: radius must be positive");
  TcgResult<G> out{geo.zero_tangent(x), geo.zero_tangent(x), TcgStatus::MaxInner, 0};
  auto r = grad;
  Scalar r_r = geo.metric(x, r, r);
  const Scalar r0_norm = std::sqrt(r_r);
  if (r0_norm == Scalar(0)) {
    out.status = TcgStatus::Converged;
    return out;
  }
  const Scalar threshold = Scalar(tcg_stop_threshold(double(r0_norm), theta, kappa));
  auto d = -r;
  Scalar e_e(0);
  Scalar e_d(0);
  Scalar d_d = r_r;
  const Scalar delta2 = delta * delta;
  for (int j = 0; j < max_inner; ++j) {
    out.inner_iters = j + 1;
    const auto hd = hessian(d);
    const Scalar d_hd = geo.metric(x, d, hd);
    const Scalar alpha = r_r / d_hd;
    const Scalar e_e_next = e_e + Scalar(2) * alpha * e_d + alpha * alpha * d_d;
    if (!(d_hd > Scalar(0)) || e_e_next >= delta2) {
      const Scalar tau = (-e_d + std::sqrt(e_d * e_d + d_d * (delta2 - e_e))) / d_d;
      out.eta += tau * d;
      out.hess_eta += tau * hd;
      out.status = d_hd > Scalar(0) ? TcgStatus::Boundary : TcgStatus::NegativeCurvature;
      return out;
    }
    out.eta += alpha * d;
    out.hess_eta += alpha * hd;
    e_e = e_e_next;
    r += alpha * hd;
    const Scalar r_r_next = geo.metric(x, r, r);
    if (std::sqrt(r_r_next) <= threshold) {
      out.status = TcgStatus::Converged;
      return out;
    }
    const Scalar beta = r_r_next / r_r;
    r_r = r_r_next;
    d = beta * d - r;
    e_d = beta * (e_d + alpha * d_d);
    d_d = r_r + beta * beta * d_d;
  }
  out.status = TcgStatus::MaxInner;
  return out;
}

/// Riemannian trust-region: shrink by 1/4 when rho < 1/4, grow by 2 (capped)
/// when rho > 3/4 on the boundary, accept when rho > 0.1 and the cost did not
/// increase.
template <GeometryContract G>
SolverResult<G> trust_region(const G& geo, const Objective<G>& objective, typename G::Point x0,
                             const TRConfig& config) {
  using Scalar = typename G::Scalar;
  config.validate();
  geo.validate(x0);
  const detail::Stopwatch clock(config.record_time);
  SolverResult<G> out{std::move(x0), {}};
  auto model = objective.evaluate(out.x);
  double radius = config.initial_radius;
  out.trace.rows.push_back({0, double(model.cost), double(model.gradient_norm), radius, 0, 0,
                            std::numeric_limits<double>::quiet_NaN(), clock.seconds()});
  for (int k = 1;; ++k) {
    if (model.cost <= config.cost_stop) {
      out.trace.stop_reason = "cost";
      break;
    }
    if (model.gradient_norm <= config.grad_norm_stop) {
      out.trace.stop_reason = "grad_norm";
      break;
    }
    if (k > config.max_outer) {
      out.trace.stop_reason = "max_outer";
      break;
    }
    const auto sub = tcg_subproblem(geo, out.x, model.gradient, model.hessian, Scalar(radius),
                                    config.theta, config.kappa, config.max_inner);
    const double used_radius = radius;
    const Scalar predicted = -(geo.metric(out.x, model.gradient, sub.eta) +
                               Scalar(0.5) * geo.metric(out.x, sub.eta, sub.hess_eta));
    double rho = -std::numeric_limits<double>::infinity();
    std::optional<typename G::Point> candidate;
    Scalar candidate_cost = std::numeric_limits<Scalar>::infinity();
    try {
      candidate = geo.retract(out.x, sub.eta);
      candidate_cost = objective.cost(*candidate);
      const Scalar fudge = Scalar(config.rho_regularization) * std::abs(model.cost);
      if (std::isfinite(candidate_cost)) {
        rho = double((model.cost - candidate_cost + fudge) / (predicted + fudge));
      }
    } catch (const RankDropError&) {
      candidate.reset();
    }
    if (!(rho >= config.shrink_ratio)) {
      radius *= config.shrink_factor;
    } else if (rho > config.grow_ratio && sub.status != TcgStatus::Converged &&
               sub.status != TcgStatus::MaxInner) {
      radius = std::min(config.grow_factor * radius, config.max_radius);
    }
    if (candidate && rho > config.accept_ratio && candidate_cost <= model.cost) {
      out.x = std::move(*candidate);
      model = objective.evaluate(out.x);
    }
    out.trace.rows.push_back({k, double(model.cost), double(model.gradient_norm), used_radius, 0,
                              sub.inner_iters, rho, clock.seconds()});
    if (!(radius > 0) || !std::isfinite(double(model.cost))) {
      throw SolverError("trust_region: radius collapsed", out.trace);
    }
  }
  return out;
}

}  // namespace fixedrank

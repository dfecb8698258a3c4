#pragma once

// The contract every factorization geometry implements, and the objective
// wrapper that the solvers and diagnostics consume.

#include <cmath>
#include <concepts>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "fixedrank/factor_tuple.hpp"

namespace fixedrank {

enum class MetricMode { ScaleInvariant, Euclidean };

using Rng = std::mt19937_64;

/// Operations shared by the four geometries. Points and tangent vectors are
/// factor tuples; `psi_project` takes an arbitrary factor-shaped ambient
/// tuple (stored in the Tangent type) and returns a tangent vector of the
/// total space; `pi_project` extracts its horizontal part.
template <typename G>
concept GeometryContract = requires(const G& geo, const typename G::Point& x,
                                    const typename G::Tangent& v,
                                    const typename G::GroupElement& q, Rng& rng) {
  typename G::Scalar;
  { geo.name() } -> std::convertible_to<std::string>;
  { geo.metric(x, v, v) } -> std::convertible_to<typename G::Scalar>;
  { geo.psi_project(x, v) } -> std::same_as<typename G::Tangent>;
  { geo.pi_project(x, v) } -> std::same_as<typename G::Tangent>;
  { geo.retract(x, v) } -> std::same_as<typename G::Point>;
  { geo.zero_tangent(x) } -> std::same_as<typename G::Tangent>;
  { geo.random_tangent(x, rng) } -> std::same_as<typename G::Tangent>;
  { geo.random_vertical(x, rng) } -> std::same_as<typename G::Tangent>;
  { geo.random_group_element(x, rng) } -> std::same_as<typename G::GroupElement>;
  { geo.act(x, q) } -> std::same_as<typename G::Point>;
  { geo.act_tangent(v, q) } -> std::same_as<typename G::Tangent>;
  { geo.validate(x) };
};

template <GeometryContract G>
typename G::Scalar tangent_norm(const G& geo, const typename G::Point& x,
                                const typename G::Tangent& v) {
  return std::sqrt(std::max(typename G::Scalar(0), geo.metric(x, v, v)));
}

/// Cost value, Riemannian gradient and Hessian action at one point.
template <GeometryContract G>
struct LocalModel {
  typename G::Scalar cost{};
  typename G::Tangent gradient;
  typename G::Scalar gradient_norm{};
  std::function<typename G::Tangent(const typename G::Tangent&)> hessian;
};

template <GeometryContract G>
struct Objective {
  std::function<typename G::Scalar(const typename G::Point&)> cost;
  std::function<LocalModel<G>(const typename G::Point&)> evaluate;
};

/// A cost model evaluates at a point and linearizes there: the returned state
/// exposes value(), partials() (Euclidean partial derivatives, or the
/// Euclidean gradient operator for the embedded geometry) and
/// directional_partials(xi).
template <typename C, typename G>
concept CostModelFor = GeometryContract<G> &&
    requires(const C& cost, const typename G::Point& x, const typename G::Tangent& v) {
      { cost.value(x) } -> std::convertible_to<typename G::Scalar>;
      cost.linearize(x);
      cost.linearize(x).directional_partials(v);
      cost.linearize(x).partials();
      { cost.linearize(x).value() } -> std::convertible_to<typename G::Scalar>;
    };

/// Binds a geometry to a cost model. `cost` must outlive the objective.
template <GeometryContract G, typename C>
  requires CostModelFor<C, G>
Objective<G> make_objective(const G& geo, const C& cost) {
  using Point = typename G::Point;
  using Tangent = typename G::Tangent;
  Objective<G> obj;
  obj.cost = [&cost](const Point& x) { return cost.value(x); };
  obj.evaluate = [geo, &cost](const Point& x) {
    using State = decltype(cost.linearize(x));
    auto state = std::make_shared<const State>(cost.linearize(x));
    LocalModel<G> model;
    model.cost = state->value();
    model.gradient = geo.rgrad_from_partials(x, state->partials());
    model.gradient_norm = tangent_norm(geo, x, model.gradient);
    model.hessian = [geo, x, state](const Tangent& xi) {
      return geo.hess_apply(x, xi, state->partials(), state->directional_partials(xi));
    };
    return model;
  };
  return obj;
}

}  // namespace fixedrank

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "ccfel/errors.hpp"

namespace ccfel {

using Vec2 = std::array<double, 2>;

/// Result of the empirical-likelihood dual solve at one frequency node.
struct LambdaSolve {
  Vec2 lambda{0.0, 0.0};
  bool converged = false;
  double residual_norm = 0.0;  // |Q1n| = |(1/n) sum eps_t / (1 + lambda . eps_t)|
  int iterations = 0;
};

inline constexpr double kLambdaTolerance = 1e-10;
inline constexpr int kLambdaMaxIterations = 100;

namespace detail {

/// True when the origin is strictly inside the convex hull of the nonzero
/// vectors (largest angular gap below pi), or when the vectors are
/// collinear with both signs present.
inline bool origin_in_hull(std::span<const Vec2> eps) {
  std::vector<double> angles;
  angles.reserve(eps.size());
  for (const auto& e : eps) {
    if (e[0] != 0.0 || e[1] != 0.0) angles.push_back(std::atan2(e[1], e[0]));
  }
  if (angles.size() < 2) return false;
  std::sort(angles.begin(), angles.end());
  double gap = angles.front() + 2.0 * std::numbers::pi - angles.back();
  for (std::size_t k = 1; k < angles.size(); ++k) gap = std::max(gap, angles[k] - angles[k - 1]);
  return gap < std::numbers::pi + 1e-12;
}

struct DualPass {
  Vec2 grad{0.0, 0.0};            // sum eps / d
  std::array<double, 3> hess{};   // sum eps eps^T / d^2 (xx, xy, yy)
  double min_d = 0.0;
  double mass = 0.0;              // sum 1 / d, equal to n at a finite root
};

inline DualPass dual_pass(std::span<const Vec2> eps, const Vec2& lambda) {
  DualPass p;
  double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0, mass = 0.0;
  double min_d = std::numeric_limits<double>::infinity();
  for (const auto& e : eps) {
    const double d = 1.0 + lambda[0] * e[0] + lambda[1] * e[1];
    min_d = std::min(min_d, d);
    const double inv = 1.0 / d;
    mass += inv;
    const double w0 = e[0] * inv;
    const double w1 = e[1] * inv;
    g0 += w0;
    g1 += w1;
    h00 += w0 * w0;
    h01 += w0 * w1;
    h11 += w1 * w1;
  }
  p.grad = {g0, g1};
  p.hess = {h00, h01, h11};
  p.min_d = min_d;
  p.mass = mass;
  return p;
}

}  // namespace detail

/// Solves Q1n(lambda) = (1/n) sum eps_t / (1 + lambda . eps_t) = 0 by damped
/// Newton on the concave dual sum log(1 + lambda . eps_t), halving steps until
/// every 1 + lambda . eps_t > 1/n and |Q1n| decreases.
///
/// Throws ConvexHullError when the origin is outside the convex hull of the
/// vectors and MaxIterError when Newton stalls for another reason.
inline LambdaSolve solve_lambda(std::span<const Vec2> eps, Vec2 start = {0.0, 0.0}) {
  const std::size_t n = eps.size();
  if (n < 2) throw DataError("solve_lambda: need at least 2 residual vectors");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double floor_d = inv_n;

  LambdaSolve out;
  Vec2 lambda = start;
  auto pass = detail::dual_pass(eps, lambda);
  if (!(pass.min_d > floor_d)) {
    lambda = {0.0, 0.0};
    pass = detail::dual_pass(eps, lambda);
  }

  const double tr0 = pass.hess[0] + pass.hess[2];
  if (tr0 == 0.0) {
    // every vector is zero: lambda = 0 is the root
    out.converged = true;
    return out;
  }

  for (int it = 0; it <= kLambdaMaxIterations; ++it) {
    const double res = std::hypot(pass.grad[0], pass.grad[1]) * inv_n;
    out.iterations = it;
    out.residual_norm = res;
    // Q1n also vanishes as |lambda| -> inf when the origin is outside the
    // hull, and early on tiny residuals; a finite root has
    // sum_t p_t = sum_t 1 / (n d_t) = 1, so keep going until that holds too
    if (res <= kLambdaTolerance && std::abs(pass.mass * inv_n - 1.0) <= 1e-6) {
      out.lambda = lambda;
      out.converged = true;
      return out;
    }
    if (it == kLambdaMaxIterations) break;

    // Newton direction H^{-1} g with a tiny ridge for the collinear case.
    const double tr = pass.hess[0] + pass.hess[2];
    const double ridge = 1e-13 * tr;
    const double a = pass.hess[0] + ridge, b = pass.hess[1], c = pass.hess[2] + ridge;
    const double det = a * c - b * b;
    if (!(det > 0.0) || !std::isfinite(det)) break;
    const Vec2 step{(c * pass.grad[0] - b * pass.grad[1]) / det, (a * pass.grad[1] - b * pass.grad[0]) / det};

    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, scale *= 0.5) {
      const Vec2 trial{lambda[0] + scale * step[0], lambda[1] + scale * step[1]};
      auto next = detail::dual_pass(eps, trial);
      if (!(next.min_d > floor_d)) continue;
      const double next_res = std::hypot(next.grad[0], next.grad[1]) * inv_n;
      if (next_res < res || next_res <= kLambdaTolerance) {
        lambda = trial;
        pass = next;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (std::hypot(lambda[0], lambda[1]) * std::sqrt(tr0 * inv_n) > 1e12) break;  // runaway
  }

  if (!detail::origin_in_hull(eps)) {
    throw ConvexHullError("origin outside the convex hull of the residual vectors");
  }
  throw MaxIterError("solve_lambda: no convergence after " + std::to_string(out.iterations) +
                     " Newton iterations (|Q1n| = " + std::to_string(out.residual_norm) + ")");
}

/// Local log-EL ratio 2 sum log(1 + lambda . eps_t).
inline double local_el_ratio(std::span<const Vec2> eps, const Vec2& lambda) {
  if (lambda[0] == 0.0 && lambda[1] == 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& e : eps) {
    const double d = 1.0 + lambda[0] * e[0] + lambda[1] * e[1];
    if (!(d > 0.0)) throw FeasibilityError("local_el_ratio: 1 + lambda . eps <= 0");
    sum += std::log(d);
  }
  // the dual optimum dominates lambda = 0; anything below is rounding
  return std::max(0.0, 2.0 * sum);
}

/// Convenience: solve and evaluate in one go.
inline double el_ratio(std::span<const Vec2> eps) {
  return local_el_ratio(eps, solve_lambda(eps).lambda);
}

}  // namespace ccfel

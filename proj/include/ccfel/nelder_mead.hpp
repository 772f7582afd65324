#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "ccfel/errors.hpp"

namespace ccfel {

struct NelderMeadOptions {
  double initial_step = 0.1;  // simplex edge, in the caller's scaled coordinates
  double tolerance = 1e-6;    // stop when every vertex is this close to the best
  int max_iterations = 2000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> trace;  // best value after each iteration
};

/// Plain Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
/// The objective may return +inf to reject a point; every comparison is
/// ordered so that infinite vertices are replaced first.
template <typename F>
NelderMeadResult nelder_mead(F&& f, const std::vector<double>& start, const NelderMeadOptions& opt = {}) {
  const std::size_t p = start.size();
  std::vector<std::vector<double>> simplex(p + 1, start);
  std::vector<double> values(p + 1);
  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  values[0] = eval(start);
  if (!std::isfinite(values[0])) throw OptimizerError("Nelder-Mead: objective is not finite at the start point");
  for (std::size_t i = 0; i < p; ++i) {
    simplex[i + 1][i] += opt.initial_step;
    values[i + 1] = eval(simplex[i + 1]);
    if (!std::isfinite(values[i + 1])) {
      simplex[i + 1][i] = start[i] - opt.initial_step;
      values[i + 1] = eval(simplex[i + 1]);
    }
  }

  std::vector<std::size_t> order(p + 1);
  std::vector<double> centroid(p), trial(p), trial2(p);
  auto point = [&](double coeff, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t j = 0; j < p; ++j) out[j] = centroid[j] + coeff * (worst[j] - centroid[j]);
  };

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[p - 1];
    res.trace.push_back(values[best]);

    double diameter = 0.0;
    for (std::size_t v = 0; v <= p; ++v)
      for (std::size_t j = 0; j < p; ++j) diameter = std::max(diameter, std::abs(simplex[v][j] - simplex[best][j]));
    if (diameter < opt.tolerance) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v <= p; ++v) {
      if (v == worst) continue;
      for (std::size_t j = 0; j < p; ++j) centroid[j] += simplex[v][j] / static_cast<double>(p);
    }

    point(-1.0, trial, simplex[worst]);
    const double reflected = eval(trial);
    if (reflected < values[best]) {
      point(-2.0, trial2, simplex[worst]);
      const double expanded = eval(trial2);
      if (expanded < reflected) {
        simplex[worst] = trial2;
        values[worst] = expanded;
      } else {
        simplex[worst] = trial;
        values[worst] = reflected;
      }
      continue;
    }
    if (reflected < values[second]) {
      simplex[worst] = trial;
      values[worst] = reflected;
      continue;
    }
    const bool outside = reflected < values[worst];
    point(outside ? -0.5 : 0.5, trial2, simplex[worst]);
    const double contracted = eval(trial2);
    if (contracted < (outside ? reflected : values[worst])) {
      simplex[worst] = trial2;
      values[worst] = contracted;
      continue;
    }
    for (std::size_t v = 0; v <= p; ++v) {
      if (v == best) continue;
      for (std::size_t j = 0; j < p; ++j) simplex[v][j] = simplex[best][j] + 0.5 * (simplex[v][j] - simplex[best][j]);
      values[v] = eval(simplex[v]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  res.x = simplex[best];
  res.value = values[best];
  return res;
}

/// Nelder-Mead, then one restart from the best vertex with a fresh simplex.
/// Throws OptimizerError only if neither run converged.
template <typename F>
NelderMeadResult nelder_mead_restarted(F&& f, const std::vector<double>& start, const NelderMeadOptions& opt = {}) {
  auto first = nelder_mead(f, start, opt);
  auto second = nelder_mead(f, first.x, opt);
  if (!first.converged && !second.converged) {
    throw OptimizerError("Nelder-Mead did not converge within " + std::to_string(opt.max_iterations) +
                         " iterations after one restart");
  }
  NelderMeadResult out = second.value <= first.value ? second : first;
  out.converged = true;
  out.iterations = first.iterations + second.iterations;
  out.evaluations = first.evaluations + second.evaluations;
  out.trace = first.trace;
  out.trace.insert(out.trace.end(), second.trace.begin(), second.trace.end());
  return out;
}

}  // namespace ccfel

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "ccfel/errors.hpp"
#include "ccfel/model.hpp"
#include "ccfel/path.hpp"

namespace ccfel {

enum class GridMode { Estimate, Test };

/// Quadrature representation of the weight measure pi on a box S.
struct FrequencyGrid {
  int dim = 1;
  GridMode mode = GridMode::Estimate;
  std::vector<FrequencyPoint> nodes;
  std::vector<double> weights;
  State u_max{0.0, 0.0};  // S = prod_k [-u_max_k, u_max_k] x [-r_max_k, r_max_k]
  State r_max{0.0, 0.0};

  std::size_t size() const { return nodes.size(); }
  InstrumentMode instrument() const {
    return mode == GridMode::Estimate ? InstrumentMode::Estimate : InstrumentMode::Test;
  }
};

struct GridShape {
  int u_nodes = 21;  // per u axis
  int r_nodes = 5;   // per r axis (estimate mode only)
  double threshold = 0.05;
  double cap_multiplier = 10.0;
  int scan_points = 400;
  int x_points = 5;
};

/// Default tensor sizes; the bivariate model uses 11 x 3 per axis so the
/// grid stays at ~10^3 nodes instead of 21^2 x 5^2.
inline GridShape default_grid_shape(int dim) {
  GridShape s;
  if (dim == 2) {
    s.u_nodes = 11;
    s.r_nodes = 3;
  }
  return s;
}

namespace detail {

inline double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Frequency beyond which the Nadaraya-Watson estimate of the conditional CF
/// is negligible, taking the union over `x_points` conditioning values.
///
/// A conditioning point's support ends at the first scanned u where the
/// estimate's modulus drops below max(threshold, 3 / sqrt(n_eff)): with a
/// finite neighbourhood the estimate never falls below its own sampling
/// noise, so the bare threshold would always run to the cap.
inline double empirical_support(const std::vector<double>& x, const std::vector<double>& y,
                                const GridShape& shape) {
  const std::size_t n = x.size();
  std::vector<double> incr(n);
  for (std::size_t t = 0; t < n; ++t) incr[t] = y[t] - x[t];
  const double incr_sd = sample_sd(incr);
  const double x_sd = sample_sd(x);
  double scale = 0.0;
  for (double v : incr) scale = std::max(scale, std::abs(v));
  if (!(incr_sd > 1e-12 * scale) || !(x_sd > 0.0) || !std::isfinite(incr_sd)) {
    throw DataError("build_grid: path has constant increments");
  }
  const double cap = shape.cap_multiplier / incr_sd;
  const double h = 1.06 * x_sd * std::pow(static_cast<double>(n), -0.2);
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;

  const int g_count = shape.x_points;
  std::vector<std::vector<double>> w(static_cast<std::size_t>(g_count), std::vector<double>(n));
  std::vector<double> thr(static_cast<std::size_t>(g_count));
  for (int g = 0; g < g_count; ++g) {
    const double xg = lo + (hi - lo) * g / (g_count - 1);
    auto& wg = w[static_cast<std::size_t>(g)];
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double z = (xg - x[t]) / h;
      wg[t] = std::exp(-0.5 * z * z);
      s1 += wg[t];
    }
    for (auto& v : wg) {
      v /= s1;
      s2 += v * v;
    }
    const double n_eff = 1.0 / s2;
    thr[static_cast<std::size_t>(g)] = std::max(shape.threshold, 3.0 / std::sqrt(n_eff));
  }

  const double du = cap / shape.scan_points;
  std::vector<std::complex<double>> step(n), power(n, {1.0, 0.0});
  for (std::size_t t = 0; t < n; ++t) step[t] = {std::cos(du * y[t]), std::sin(du * y[t])};
  std::vector<double> crossed(static_cast<std::size_t>(g_count), -1.0);
  int remaining = g_count;
  for (int k = 1; k <= shape.scan_points && remaining > 0; ++k) {
    for (std::size_t t = 0; t < n; ++t) power[t] *= step[t];
    for (int g = 0; g < g_count; ++g) {
      auto gi = static_cast<std::size_t>(g);
      if (crossed[gi] >= 0.0) continue;
      std::complex<double> acc{0.0, 0.0};
      const auto& wg = w[gi];
      for (std::size_t t = 0; t < n; ++t) acc += wg[t] * power[t];
      if (std::abs(acc) < thr[gi]) {
        crossed[gi] = du * k;
        --remaining;
      }
    }
  }
  double support = 0.0;
  for (double c : crossed) support = std::max(support, c < 0.0 ? cap : c);
  return std::min(support, cap);
}

inline std::vector<double> axis(double half_width, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  if (count == 1) {
    v[0] = 0.0;
    return v;
  }
  for (int k = 0; k < count; ++k) {
    // symmetric by construction: node k and count-1-k are exact negatives
    const int j = 2 * k - (count - 1);
    v[static_cast<std::size_t>(k)] = half_width * j / (count - 1);
  }
  return v;
}

}  // namespace detail

/// Builds the uniform-weight tensor grid on the empirical CCF support.
/// Estimate mode spans the instrument frequency r over the same box as u;
/// test mode fixes r = 0 (unit instrument).
inline FrequencyGrid build_grid(const SamplePath& data, ModelKind kind, GridMode mode,
                                const GridShape& shape) {
  const int dim = dimension(kind);
  if (data.dim != dim) throw DataError("build_grid: path dimension does not match the model");
  if (data.size() < 30) throw DataError("build_grid: need at least 30 observations");
  FrequencyGrid grid;
  grid.dim = dim;
  grid.mode = mode;
  for (int k = 0; k < dim; ++k) {
    std::vector<double> x(data.size() - 1), y(data.size() - 1);
    for (std::size_t t = 0; t + 1 < data.size(); ++t) {
      x[t] = data[t][static_cast<std::size_t>(k)];
      y[t] = data[t + 1][static_cast<std::size_t>(k)];
    }
    const double u = detail::empirical_support(x, y, shape);
    grid.u_max[static_cast<std::size_t>(k)] = u;
    grid.r_max[static_cast<std::size_t>(k)] = mode == GridMode::Estimate ? u : 0.0;
  }

  const int r_count = mode == GridMode::Estimate ? shape.r_nodes : 1;
  const auto u0 = detail::axis(grid.u_max[0], shape.u_nodes);
  const auto r0 = detail::axis(grid.r_max[0], r_count);
  if (dim == 1) {
    for (double u : u0)
      for (double r : r0) grid.nodes.push_back({{u, 0.0}, {r, 0.0}});
  } else {
    const auto u1 = detail::axis(grid.u_max[1], shape.u_nodes);
    const auto r1 = detail::axis(grid.r_max[1], r_count);
    for (double ua : u0)
      for (double ub : u1)
        for (double ra : r0)
          for (double rb : r1) grid.nodes.push_back({{ua, ub}, {ra, rb}});
  }
  grid.weights.assign(grid.nodes.size(), 1.0 / static_cast<double>(grid.nodes.size()));
  return grid;
}

inline FrequencyGrid build_grid(const SamplePath& data, ModelKind kind, GridMode mode) {
  return build_grid(data, kind, mode, default_grid_shape(dimension(kind)));
}

}  // namespace ccfel

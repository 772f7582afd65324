#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ccfel/el_dual.hpp"
#include "ccfel/el_estimator.hpp"
#include "ccfel/errors.hpp"
#include "ccfel/grid.hpp"
#include "ccfel/model.hpp"
#include "ccfel/parallel.hpp"
#include "ccfel/path.hpp"
#include "ccfel/rng.hpp"
#include "ccfel/simulate.hpp"

namespace ccfel {

enum class KernelForm { Biweight, Uniform };

/// K_h(d) = K(d / h) / h with K the biweight 15/16 (1 - z^2)^2 or the
/// uniform 1/2 on [-1, 1].
struct KernelSpec {
  KernelForm form = KernelForm::Biweight;
  double h = 1.0;

  static double profile(KernelForm form, double z) {
    if (!(std::abs(z) < 1.0)) return 0.0;
    if (form == KernelForm::Uniform) return 0.5;
    const double s = 1.0 - z * z;
    return 15.0 / 16.0 * s * s;
  }
  double operator()(double d) const { return profile(form, d / h) / h; }
};

inline const std::vector<double>& default_bandwidth_multipliers() {
  static const std::vector<double> m{0.7, 0.85, 1.0, 1.2, 1.45};
  return m;
}

struct BandwidthSet {
  double reference = 1.0;
  std::vector<double> multipliers = default_bandwidth_multipliers();

  std::vector<double> values() const {
    std::vector<double> v;
    for (double c : multipliers) v.push_back(c * reference);
    return v;
  }
};

/// Smoothed local log-EL ratio at state x from residuals eps_t observed at
/// states xs_t: the EL dual on K_h(x - X_t) (Re eps_t, Im eps_t) over the
/// kernel window. `xs` must be sorted ascending.
///
/// Throws SparseNeighborhoodError with fewer than 3 in-window points;
/// ConvexHullError and MaxIterError propagate from the dual solve.
inline double local_smoothed_el(std::span<const double> xs, std::span<const cplx> eps, double x,
                                const KernelSpec& kernel, std::vector<Vec2>* scratch = nullptr) {
  std::vector<Vec2> local;
  std::vector<Vec2>& g = scratch ? *scratch : local;
  g.clear();
  const auto lo = std::upper_bound(xs.begin(), xs.end(), x - kernel.h) - xs.begin();
  const auto hi = std::lower_bound(xs.begin(), xs.end(), x + kernel.h) - xs.begin();
  for (auto t = lo; t < hi; ++t) {
    const double k = kernel(x - xs[static_cast<std::size_t>(t)]);
    if (!(k > 0.0)) continue;
    const cplx e = eps[static_cast<std::size_t>(t)];
    g.push_back({k * e.real(), k * e.imag()});
  }
  if (g.size() < 3) {
    throw SparseNeighborhoodError("local_smoothed_el: " + std::to_string(g.size()) + " points within h of x");
  }
  return local_el_ratio(g, solve_lambda(g).lambda);
}

/// Same, evaluating the unit-instrument residuals of `m` from the data.
inline double local_smoothed_el(const FrequencyPoint& tau, double x, const ModelSpec& m, const SamplePath& data,
                                const KernelSpec& kernel) {
  if (m.dim() != 1) throw ConfigError("local_smoothed_el: univariate models only");
  std::vector<std::pair<double, cplx>> rows;
  for (std::size_t t = 0; t + 1 < data.size(); ++t)
    rows.emplace_back(data[t][0], residual(m, tau, data[t], data[t + 1], InstrumentMode::Test));
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> xs;
  std::vector<cplx> eps;
  for (const auto& [xv, e] : rows) {
    xs.push_back(xv);
    eps.push_back(e);
  }
  return local_smoothed_el(xs, eps, x, kernel);
}

/// State quadrature pi_2: uniform weights on equispaced nodes spanning the
/// central `central` fraction of the sample (between its (1-central)/2 and
/// (1+central)/2 quantiles, linear interpolation).
struct StateGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline StateGrid state_grid(const SamplePath& data, int count = 21, double central = 0.9) {
  if (data.size() == 0 || count < 1) throw DataError("state_grid: empty path or grid");
  std::vector<double> v;
  v.reserve(data.size());
  for (const auto& x : data.obs) v.push_back(x[0]);
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] + f * (v[i + 1] - v[i]) : v[i];
  };
  const double lo = quantile(0.5 * (1.0 - central)), hi = quantile(0.5 * (1.0 + central));
  StateGrid g;
  for (int k = 0; k < count; ++k) {
    g.nodes.push_back(count == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * k / (count - 1));
    g.weights.push_back(1.0 / count);
  }
  return g;
}

struct SmoothedValue {
  double value = 0.0;
  std::size_t skipped = 0;
  std::size_t cells = 0;
};

/// Residual columns for every frequency node, sorted by conditioning state,
/// ready for repeated smoothing at different bandwidths. Mirror nodes share
/// a column.
class SmoothedPanel {
 public:
  /// columns[g][t] is the residual of transition t at node g; counts[g] is
  /// the number of original grid nodes column g stands for.
  SmoothedPanel(const std::vector<double>& xs, const std::vector<std::vector<cplx>>& columns,
                std::vector<double> weights, std::vector<std::size_t> counts = {})
      : weights_(std::move(weights)), counts_(std::move(counts)) {
    if (counts_.empty()) counts_.assign(columns.size(), 1);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    for (std::size_t i : order) xs_.push_back(xs[i]);
    for (const auto& col : columns) {
      std::vector<cplx> sorted;
      sorted.reserve(order.size());
      for (std::size_t i : order) sorted.push_back(col[i]);
      columns_.push_back(std::move(sorted));
    }
  }

  static SmoothedPanel from_model(const ModelSpec& m, const SamplePath& data, const FrequencyGrid& grid) {
    if (m.dim() != 1 || data.dim != 1) throw ConfigError("smoothed EL: univariate models only");
    validate(m);
    const std::size_t rows = data.size() - 1;
    std::vector<double> xs(rows);
    for (std::size_t t = 0; t < rows; ++t) xs[t] = data[t][0];
    std::map<std::tuple<double, double, double, double>, std::size_t> canon;
    std::vector<std::vector<cplx>> columns;
    std::vector<double> weights;
    std::vector<std::size_t> counts;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto key = detail::mirror_key(grid.nodes[g]);
      if (auto it = canon.find(key); it != canon.end()) {
        weights[it->second] += grid.weights[g];
        counts[it->second] += 1;
        continue;
      }
      const FrequencyPoint tau{{std::get<0>(key), 0.0}, {std::get<2>(key), 0.0}};
      const AffineCcf coef = ccf_coefficients(m, tau.u);
      std::vector<cplx> col(rows);
      for (std::size_t t = 0; t < rows; ++t) {
        const cplx w = instrument_weight(tau, data[t], grid.instrument(), 1);
        col[t] = w * (detail::phase(tau.u, data[t + 1], 1) - coef(data[t], 1));
      }
      canon.emplace(key, columns.size());
      columns.push_back(std::move(col));
      weights.push_back(grid.weights[g]);
      counts.push_back(1);
    }
    return SmoothedPanel(xs, columns, weights, counts);
  }

  /// Integrated smoothed ratio over the (tau, x) cells; skipped cells are
  /// dropped and the weights renormalised. More than half skipped throws
  /// DegenerateError.
  SmoothedValue integrate(const KernelSpec& kernel, const StateGrid& sg) const {
    SmoothedValue out;
    std::size_t total_nodes = 0;
    for (auto c : counts_) total_nodes += c;
    out.cells = total_nodes * sg.nodes.size();
    double acc = 0.0, mass = 0.0;
    std::vector<Vec2> scratch;
    for (std::size_t i = 0; i < sg.nodes.size(); ++i) {
      for (std::size_t g = 0; g < columns_.size(); ++g) {
        const double w = sg.weights[i] * weights_[g];
        try {
          acc += w * local_smoothed_el(xs_, columns_[g], sg.nodes[i], kernel, &scratch);
          mass += w;
        } catch (const SparseNeighborhoodError&) {
          out.skipped += counts_[g];
        } catch (const ConvexHullError&) {
          out.skipped += counts_[g];
        } catch (const MaxIterError&) {
          out.skipped += counts_[g];
        }
      }
    }
    if (2 * out.skipped > out.cells) {
      throw DegenerateError("integrated smoothed EL: " + std::to_string(out.skipped) + " of " +
                            std::to_string(out.cells) + " cells skipped");
    }
    out.value = acc / mass;
    return out;
  }

 private:
  std::vector<double> xs_;
  std::vector<std::vector<cplx>> columns_;
  std::vector<double> weights_;
  std::vector<std::size_t> counts_;
};

inline SmoothedValue integrated_smoothed_el(const ModelSpec& m, const SamplePath& data, const KernelSpec& kernel,
                                            const FrequencyGrid& grid_tau, const StateGrid& grid_x) {
  if (grid_tau.mode != GridMode::Test) throw ConfigError("integrated_smoothed_el: needs a test-mode grid");
  return SmoothedPanel::from_model(m, data, grid_tau).integrate(kernel, grid_x);
}

/// Test-mode frequency grid on the union of the empirical CCF support and
/// the support of the fitted model's CCF (first u where |psi| < threshold
/// at each of the conditioning points, capped like the empirical one).
inline FrequencyGrid build_test_grid(const SamplePath& data, const ModelSpec& fit,
                                     const GridShape& shape = default_grid_shape(1)) {
  if (fit.dim() != 1) throw ConfigError("specification test: univariate models only");
  FrequencyGrid grid = build_grid(data, fit.kind, GridMode::Test, shape);
  std::vector<double> x(data.size() - 1), incr(data.size() - 1);
  for (std::size_t t = 0; t + 1 < data.size(); ++t) {
    x[t] = data[t][0];
    incr[t] = data[t + 1][0] - data[t][0];
  }
  const double cap = shape.cap_multiplier / detail::sample_sd(incr);
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  std::vector<bool> crossed(static_cast<std::size_t>(shape.x_points), false);
  double model_support = 0.0;
  int remaining = shape.x_points;
  for (int k = 1; k <= shape.scan_points && remaining > 0; ++k) {
    const double u = cap * k / shape.scan_points;
    const AffineCcf coef = ccf_coefficients(fit, State{u, 0.0});
    for (int g = 0; g < shape.x_points; ++g) {
      if (crossed[static_cast<std::size_t>(g)]) continue;
      const double xg = *lo_it + (*hi_it - *lo_it) * g / (shape.x_points - 1);
      if (std::abs(coef(State{xg, 0.0}, 1)) < shape.threshold) {
        crossed[static_cast<std::size_t>(g)] = true;
        model_support = std::max(model_support, u);
        --remaining;
      }
    }
  }
  if (remaining > 0) model_support = cap;
  const double u_max = std::min(cap, std::max(grid.u_max[0], model_support));
  grid.u_max = {u_max, 0.0};
  grid.nodes.clear();
  for (double u : detail::axis(u_max, shape.u_nodes)) grid.nodes.push_back({{u, 0.0}, {0.0, 0.0}});
  grid.weights.assign(grid.nodes.size(), 1.0 / static_cast<double>(grid.nodes.size()));
  return grid;
}

/// Least-squares leave-one-out cross-validation bandwidth for the
/// Nadaraya-Watson regression of e^{i u0 X_{t+1}} on X_t (biweight kernel),
/// u0 half the empirical u-support, over 30 log-spaced bandwidths in
/// [0.1, 3] x sd(X) n^{-1/5}. Ties go to the smaller bandwidth.
inline double cv_bandwidth(const SamplePath& data) {
  if (data.dim != 1) throw DataError("cv_bandwidth: univariate data only");
  if (data.size() < 50) throw DataError("cv_bandwidth: need at least 50 observations");
  const std::size_t n = data.size() - 1;
  std::vector<double> x(n), y(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = data[t][0];
    y[t] = data[t + 1][0];
  }
  const double u0 = 0.5 * detail::empirical_support(x, y, default_grid_shape(1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> xs(n);
  std::vector<cplx> target(n);
  cplx total{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    target[i] = std::polar(1.0, u0 * y[order[i]]);
    total += target[i];
  }
  const double base = detail::sample_sd(x) * std::pow(static_cast<double>(data.size()), -0.2);
  const int count = 30;
  double best_h = 0.0, best_score = std::numeric_limits<double>::infinity();
  for (int k = 0; k < count; ++k) {
    const double h = base * 0.1 * std::pow(30.0, static_cast<double>(k) / (count - 1));
    double score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cplx num{0.0, 0.0};
      double den = 0.0;
      const auto lo = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), xs[i] - h) - xs.begin());
      const auto hi = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), xs[i] + h) - xs.begin());
      for (std::size_t j = lo; j < hi; ++j) {
        if (j == i) continue;
        const double w = KernelSpec::profile(KernelForm::Biweight, (xs[i] - xs[j]) / h);
        num += w * target[j];
        den += w;
      }
      const cplx fit = den > 0.0 ? num / den : (total - target[i]) / static_cast<double>(n - 1);
      score += std::norm(target[i] - fit);
    }
    if (score < best_score) {
      best_score = score;
      best_h = h;
    }
  }
  return best_h;
}

struct MultiBandwidthStat {
  std::vector<double> bandwidths;
  std::vector<double> raw;           // l_nh_i(theta_hat)
  std::vector<double> standardized;  // h_i^{-1/2} (l_nh_i - 2)
  double t_n = -std::numeric_limits<double>::infinity();
  std::size_t skipped = 0;
  std::size_t cells = 0;
};

inline MultiBandwidthStat multi_bandwidth_stat(const SmoothedPanel& panel, const std::vector<double>& bandwidths,
                                               const StateGrid& sg, KernelForm form = KernelForm::Biweight) {
  if (bandwidths.empty()) throw ConfigError("multi_bandwidth_stat: empty bandwidth set");
  MultiBandwidthStat s;
  s.bandwidths = bandwidths;
  for (double h : bandwidths) {
    if (!(h > 0.0)) throw ConfigError("bandwidths must be positive");
    const auto v = panel.integrate(KernelSpec{form, h}, sg);
    s.raw.push_back(v.value);
    s.standardized.push_back((v.value - 2.0) / std::sqrt(h));
    s.t_n = std::max(s.t_n, s.standardized.back());
    s.skipped += v.skipped;
    s.cells += v.cells;
  }
  return s;
}

inline MultiBandwidthStat multi_bandwidth_stat(const ModelSpec& fit, const SamplePath& data,
                                               const std::vector<double>& bandwidths,
                                               KernelForm form = KernelForm::Biweight) {
  const auto grid = build_test_grid(data, fit);
  return multi_bandwidth_stat(SmoothedPanel::from_model(fit, data, grid), bandwidths, state_grid(data), form);
}

struct BootstrapOptions {
  std::size_t replicates = 99;  // B
  double alpha = 0.05;
  std::vector<double> bandwidths;  // empty: CV reference times the default multipliers
  std::uint64_t seed = 0;
  std::uint64_t stream_base = 0;  // replicate b draws from stream stream_base + 1 + b
  unsigned workers = 1;
  KernelForm kernel = KernelForm::Biweight;
  std::optional<std::vector<double>> theta_hat;  // reuse an existing fit
};

struct TestResult {
  ModelKind null_kind = ModelKind::VSK;
  std::vector<double> theta_hat;
  MultiBandwidthStat observed;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::uint64_t stream_base = 0;
  std::vector<double> t_star;                     // by replicate index; NaN where it failed
  std::vector<std::vector<double>> standardized_star;
  double p_value = 1.0;
  std::vector<double> p_values;   // per bandwidth
  double critical = 0.0;          // T*_([B(1-alpha)]+1)
  std::vector<double> criticals;  // per bandwidth
  bool reject = false;            // T_n >= critical
  bool reject_by_p = false;       // p_value <= alpha
};

namespace detail {

struct Calibration {
  double p_value;
  double critical;
};

inline Calibration calibrate(double observed, std::vector<double> draws, double alpha) {
  std::erase_if(draws, [](double v) { return std::isnan(v); });
  std::size_t exceed = 0;
  for (double v : draws) exceed += v >= observed ? 1 : 0;
  Calibration c;
  c.p_value = (1.0 + static_cast<double>(exceed)) / (static_cast<double>(draws.size()) + 1.0);
  std::sort(draws.begin(), draws.end());
  const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(draws.size()) * (1.0 - alpha))) + 1;
  c.critical = k <= draws.size() ? draws[k - 1] : std::numeric_limits<double>::infinity();
  return c;
}

inline EstimateOptions quick_fit() {
  EstimateOptions o;
  o.covariance = false;
  o.diagnostics = false;
  return o;
}

}  // namespace detail

/// Parametric bootstrap calibration of T_n under the null model.
///
/// Fits theta_hat by EL, then for b = 1..B simulates a path of the same
/// length at theta_hat, refits, rebuilds both grids and recomputes T_n with
/// the same bandwidths. p = (1 + #{T* >= T_n}) / (B + 1) over successful
/// replicates; more than 5% failed replicates throws BootstrapError.
inline TestResult bootstrap_test(ModelKind null_kind, const SamplePath& data, const BootstrapOptions& opt) {
  if (opt.replicates < 99) throw ConfigError("bootstrap_test: B must be >= 99");
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw ConfigError("bootstrap_test: alpha must be in (0, 1)");
  if (dimension(null_kind) != 1) throw ConfigError("bootstrap_test: univariate null models only");

  TestResult res;
  res.null_kind = null_kind;
  res.replicates = opt.replicates;
  res.alpha = opt.alpha;
  res.seed = opt.seed;
  res.stream_base = opt.stream_base;
  res.theta_hat = opt.theta_hat ? *opt.theta_hat : estimate_el(null_kind, data, detail::quick_fit()).theta_hat;
  const ModelSpec fit{null_kind, res.theta_hat, data.delta};
  std::vector<double> bandwidths = opt.bandwidths;
  if (bandwidths.empty()) bandwidths = BandwidthSet{cv_bandwidth(data), default_bandwidth_multipliers()}.values();
  res.observed = multi_bandwidth_stat(fit, data, bandwidths, opt.kernel);

  const std::size_t k = bandwidths.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  res.t_star.assign(opt.replicates, nan);
  res.standardized_star.assign(opt.replicates, std::vector<double>(k, nan));
  parallel_for(
      opt.replicates,
      [&](std::size_t b) {
        Philox rng(opt.seed, opt.stream_base + 1 + b);
        try {
          const auto path = simulate_path(fit, data.size(), rng);
          const auto refit = estimate_el(null_kind, path, detail::quick_fit());
          const ModelSpec star{null_kind, refit.theta_hat, data.delta};
          const auto stat = multi_bandwidth_stat(star, path, bandwidths, opt.kernel);
          res.t_star[b] = stat.t_n;
          res.standardized_star[b] = stat.standardized;
        } catch (const NumericalError&) {
        } catch (const DataError&) {
        }
      },
      opt.workers);

  for (double v : res.t_star) res.failures += std::isnan(v) ? 1 : 0;
  if (20 * res.failures > opt.replicates) {
    throw BootstrapError("bootstrap_test: " + std::to_string(res.failures) + " of " +
                         std::to_string(opt.replicates) + " replicates failed");
  }
  const auto overall = detail::calibrate(res.observed.t_n, res.t_star, opt.alpha);
  res.p_value = overall.p_value;
  res.critical = overall.critical;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> col(opt.replicates);
    for (std::size_t b = 0; b < opt.replicates; ++b) col[b] = res.standardized_star[b][i];
    const auto c = detail::calibrate(res.observed.standardized[i], col, opt.alpha);
    res.p_values.push_back(c.p_value);
    res.criticals.push_back(c.critical);
  }
  res.reject = res.observed.t_n >= res.critical;
  res.reject_by_p = res.p_value <= opt.alpha;
  return res;
}

}  // namespace ccfel

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>

#include <Eigen/Cholesky>

#include "ccfel/errors.hpp"
#include "ccfel/model.hpp"
#include "ccfel/path.hpp"
#include "ccfel/rng.hpp"

namespace ccfel {

/// Euler sub-steps per sampling interval for VSK_MJ.
inline constexpr int kJumpDiffusionSubsteps = 32;

struct SimulationStats {
  std::size_t jump_count = 0;
};

namespace draw {

inline double normal(Philox& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double gamma(Philox& rng, double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

inline long poisson(Philox& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<long>(mean)(rng);
}

/// Inverse Gaussian with mean `mu` and shape `shape` (Michael, Schucany and
/// Haas). The small root is taken as mu^2 / (large root) to avoid the
/// cancellation that bites for very skewed laws.
inline double inverse_gaussian(Philox& rng, double mu, double shape) {
  const double z = normal(rng);
  const double y = z * z;
  const double my = mu * y;
  const double large = mu + (mu * my + mu * std::sqrt(4.0 * mu * shape * y + my * my)) / (2.0 * shape);
  const double small = mu * mu / large;
  return uniform_open(rng) <= mu / (mu + small) ? small : large;
}

/// IG(a, b) in the (a, b) parametrisation with mean a/b and variance a/b^3.
inline double ig_ab(Philox& rng, double a, double b) { return inverse_gaussian(rng, a / b, a * a); }

}  // namespace draw

namespace detail {

inline double vskmj_advance(const std::vector<double>& t, double x, double span, int substeps,
                            Philox& rng, SimulationStats* stats) {
  const double kappa = t[0], alpha = t[1], sigma = t[2], lambda = t[3], eta = t[4];
  const double h = span / substeps;
  const double sh = sigma * std::sqrt(h);
  for (int s = 0; s < substeps; ++s) {
    x += kappa * (alpha - x) * h + sh * draw::normal(rng);
    const long jumps = draw::poisson(rng, lambda * h);
    for (long j = 0; j < jumps; ++j) x += eta * draw::normal(rng);
    if (stats) stats->jump_count += static_cast<std::size_t>(jumps);
  }
  return x;
}

/// One exact IG-OU transition.
///
/// With s = e^{-lambda delta} the increment X_{t+1} - s X_t has log-CF
/// -a(sqrt(b^2 - 2iu) - sqrt(b^2 - 2ius)), which splits into an
/// IG(a(1 - sqrt(s)), b) variable plus a compound Poisson sum with rate
/// a b (1 - sqrt(s)) whose jumps have density proportional to
/// y^{-3/2} (e^{-b^2 y / 2} - e^{-b^2 y / (2s)}). That density is a
/// Gamma(1/2, rate r) mixture with r drawn from density ~ r^{-1/2} on
/// [b^2/2, b^2/(2s)], i.e. sqrt(r) uniform.
inline double igou_step(const std::vector<double>& t, double x, double delta, Philox& rng,
                        SimulationStats* stats) {
  const double lambda = t[0], a = t[1], b = t[2];
  const double s = std::exp(-lambda * delta);
  const double root_s = std::sqrt(s);
  const double shape = a * (1.0 - root_s);
  double next = s * x + draw::ig_ab(rng, shape, b);
  const long jumps = draw::poisson(rng, a * b * (1.0 - root_s));
  const double lo = b / std::sqrt(2.0);
  const double hi = lo / root_s;
  for (long j = 0; j < jumps; ++j) {
    const double root_rate = lo + (hi - lo) * uniform_open(rng);
    next += draw::gamma(rng, 0.5, 1.0 / (root_rate * root_rate));
  }
  if (stats) stats->jump_count += static_cast<std::size_t>(jumps);
  return next;
}

inline double cir_step(const std::vector<double>& t, double x, double delta, Philox& rng) {
  const double kappa = t[0], alpha = t[1], sigma = t[2];
  const double decay = std::exp(-kappa * delta);
  const double c = 4.0 * kappa / (sigma * sigma * (-std::expm1(-kappa * delta)));
  const double dof = 4.0 * kappa * alpha / (sigma * sigma);
  const double noncentrality = c * x * decay;
  const long mix = draw::poisson(rng, 0.5 * noncentrality);
  return draw::gamma(rng, 0.5 * dof + static_cast<double>(mix), 2.0) / c;
}

}  // namespace detail

/// Draws X_0 from the model's stationary law.
inline State stationary_init(const ModelSpec& m, Philox& rng) {
  validate(m);
  const auto& t = m.theta;
  switch (m.kind) {
    case ModelKind::VSK:
      return {t[1] + std::sqrt(t[2] * t[2] / (2.0 * t[0])) * draw::normal(rng), 0.0};
    case ModelKind::CIR: {
      const double shape = 2.0 * t[0] * t[1] / (t[2] * t[2]);
      return {draw::gamma(rng, shape, t[2] * t[2] / (2.0 * t[0])), 0.0};
    }
    case ModelKind::VSK_MJ: {
      double x = t[1];
      for (int k = 0; k < 1000; ++k) {
        x = detail::vskmj_advance(t, x, 10.0 * m.delta, kJumpDiffusionSubsteps, rng, nullptr);
      }
      return {x, 0.0};
    }
    case ModelKind::IG_OU:
      return {draw::ig_ab(rng, t[1], t[2]), 0.0};
    case ModelKind::BI_OU: {
      const auto tr = biou::transition(t, m.delta);
      const Eigen::Matrix2d chol = tr.stationary.llt().matrixL();
      const Eigen::Vector2d z(draw::normal(rng), draw::normal(rng));
      const Eigen::Vector2d x = Eigen::Vector2d(t[3], t[4]) + chol * z;
      return {x[0], x[1]};
    }
  }
  return {0.0, 0.0};
}

/// One transition X_{t+1} | X_t = x.
inline State transition_draw(const ModelSpec& m, const State& x, Philox& rng,
                             SimulationStats* stats = nullptr) {
  const auto& t = m.theta;
  switch (m.kind) {
    case ModelKind::VSK: {
      const auto g = gaussian_step(t[0], t[2], m.delta);
      return {g.mean(x[0], t[1]) + std::sqrt(g.variance) * draw::normal(rng), 0.0};
    }
    case ModelKind::CIR:
    case ModelKind::IG_OU: {
      for (int attempt = 0; attempt < 2; ++attempt) {
        const double next = m.kind == ModelKind::CIR ? detail::cir_step(t, x[0], m.delta, rng)
                                                     : detail::igou_step(t, x[0], m.delta, rng, stats);
        if (next > 0.0 && std::isfinite(next)) return {next, 0.0};
      }
      throw NumericalError(std::string(to_string(m.kind)) + " transition produced a non-positive draw twice");
    }
    case ModelKind::VSK_MJ:
      return {detail::vskmj_advance(t, x[0], m.delta, kJumpDiffusionSubsteps, rng, stats), 0.0};
    case ModelKind::BI_OU: {
      // recomputed per call; simulate_path hoists it
      const auto tr = biou::transition(t, m.delta);
      const Eigen::Matrix2d chol = tr.covariance.llt().matrixL();
      const Eigen::Vector2d alpha(t[3], t[4]);
      const Eigen::Vector2d mean = alpha + tr.decay * (Eigen::Vector2d(x[0], x[1]) - alpha);
      const Eigen::Vector2d z(draw::normal(rng), draw::normal(rng));
      const Eigen::Vector2d next = mean + chol * z;
      return {next[0], next[1]};
    }
  }
  return x;
}

/// Simulates n observations at spacing m.delta. X_1 is `x0` when given,
/// otherwise a stationary draw.
inline SamplePath simulate_path(const ModelSpec& m, std::size_t n, Philox& rng,
                                std::optional<State> x0 = std::nullopt,
                                SimulationStats* stats = nullptr) {
  validate(m);
  if (n < 2) throw ParameterError("simulate_path: n must be >= 2");
  SamplePath path;
  path.dim = m.dim();
  path.delta = m.delta;
  path.seed = rng.seed();
  path.obs.reserve(n);
  State x = x0 ? *x0 : stationary_init(m, rng);
  check_state(m, x);
  path.obs.push_back(x);
  if (m.kind == ModelKind::BI_OU) {
    const auto& t = m.theta;
    const auto tr = biou::transition(t, m.delta);
    const Eigen::Matrix2d chol = tr.covariance.llt().matrixL();
    const Eigen::Vector2d alpha(t[3], t[4]);
    for (std::size_t k = 1; k < n; ++k) {
      const Eigen::Vector2d mean = alpha + tr.decay * (Eigen::Vector2d(x[0], x[1]) - alpha);
      const Eigen::Vector2d z(draw::normal(rng), draw::normal(rng));
      const Eigen::Vector2d next = mean + chol * z;
      x = {next[0], next[1]};
      path.obs.push_back(x);
    }
    return path;
  }
  for (std::size_t k = 1; k < n; ++k) {
    x = transition_draw(m, x, rng, stats);
    path.obs.push_back(x);
  }
  return path;
}

}  // namespace ccfel

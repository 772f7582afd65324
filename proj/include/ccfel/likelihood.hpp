#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccfel/errors.hpp"
#include "ccfel/model.hpp"
#include "ccfel/nelder_mead.hpp"
#include "ccfel/path.hpp"

namespace ccfel {

namespace detail {

inline double log_normal_pdf(double y, double mean, double variance) {
  const double z = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + z * z / variance);
}

inline void require_observations(const SamplePath& data, int dim) {
  if (data.size() < 2) throw DataError("log-likelihood: need at least 2 observations");
  if (data.dim != dim) throw DataError("log-likelihood: path dimension does not match the model");
}

}  // namespace detail

/// log I_nu(z) for nu > -1, z >= 0, by the power series summed outward from
/// its largest term. Terms are ratios to the peak, so nothing overflows.
inline double log_bessel_i(double nu, double z) {
  if (!(nu > -1.0) || !(z >= 0.0)) throw ParameterError("log_bessel_i: requires nu > -1, z >= 0");
  if (z == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double half = 0.5 * z;
  const double q = half * half;
  // term ratio t_{m+1}/t_m = q / ((m+1)(m+nu+1)); the peak is where it crosses 1
  const double disc = nu * nu + 4.0 * q;
  double peak = std::floor(0.5 * (-(nu + 2.0) + std::sqrt(disc)) + 1.0);
  if (peak < 0.0) peak = 0.0;
  const double log_peak = (2.0 * peak + nu) * std::log(half) - std::lgamma(peak + 1.0) - std::lgamma(peak + nu + 1.0);

  double sum = 1.0, carry = 0.0;
  auto kahan = [&](double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  };
  double term = 1.0;
  for (double m = peak; ; m += 1.0) {
    term *= q / ((m + 1.0) * (m + nu + 1.0));
    kahan(term);
    if (term < 1e-17 * sum) break;
  }
  term = 1.0;
  for (double m = peak; m >= 1.0; m -= 1.0) {
    term *= m * (m + nu) / q;
    kahan(term);
    if (term < 1e-17 * sum) break;
  }
  return log_peak + std::log(sum);
}

/// Log density of the noncentral chi-square law with `dof` degrees of
/// freedom and noncentrality `nc` at z > 0.
inline double noncentral_chi2_log_pdf(double z, double dof, double nc) {
  if (!(z > 0.0)) return -std::numeric_limits<double>::infinity();
  const double nu = 0.5 * dof - 1.0;
  if (nc == 0.0) {
    return (0.5 * dof - 1.0) * std::log(z) - 0.5 * z - 0.5 * dof * std::log(2.0) - std::lgamma(0.5 * dof);
  }
  return std::log(0.5) - 0.5 * (z + nc) + 0.5 * nu * std::log(z / nc) + log_bessel_i(nu, std::sqrt(nc * z));
}

/// One-step transition log densities.
inline double vsk_log_transition(const std::vector<double>& t, double delta, double x, double y) {
  const auto g = gaussian_step(t[0], t[2], delta);
  return detail::log_normal_pdf(y, g.mean(x, t[1]), g.variance);
}

inline double cir_log_transition(const std::vector<double>& t, double delta, double x, double y) {
  const double kappa = t[0], alpha = t[1], sigma = t[2];
  const double c = 4.0 * kappa / (sigma * sigma * (-std::expm1(-kappa * delta)));
  const double dof = 4.0 * kappa * alpha / (sigma * sigma);
  const double nc = c * x * std::exp(-kappa * delta);
  return std::log(c) + noncentral_chi2_log_pdf(c * y, dof, nc);
}

inline double vskmj_approx_log_transition(const std::vector<double>& t, double delta, double x, double y) {
  const auto g = gaussian_step(t[0], t[2], delta);
  const double mean = g.mean(x, t[1]);
  const double p = t[3] * delta;
  const double lo = detail::log_normal_pdf(y, mean, g.variance);
  if (p == 0.0) return lo;
  const double hi = detail::log_normal_pdf(y, mean, g.variance + t[4] * t[4]);
  const double a = std::log1p(-p) + lo, b = std::log(p) + hi;
  const double top = std::max(a, b);
  return top + std::log(std::exp(a - top) + std::exp(b - top));
}

inline double vsk_loglik(const std::vector<double>& theta, const SamplePath& data) {
  validate(ModelSpec{ModelKind::VSK, theta, data.delta});
  detail::require_observations(data, 1);
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < data.size(); ++t) s += vsk_log_transition(theta, data.delta, data[t][0], data[t + 1][0]);
  return s;
}

inline double cir_loglik(const std::vector<double>& theta, const SamplePath& data) {
  const ModelSpec m{ModelKind::CIR, theta, data.delta};
  validate(m);
  detail::require_observations(data, 1);
  for (const auto& x : data.obs) check_state(m, x);
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < data.size(); ++t) s += cir_log_transition(theta, data.delta, data[t][0], data[t + 1][0]);
  return s;
}

/// First-order normal-mixture approximation
/// (1 - lambda delta) N(mu, s^2) + lambda delta N(mu, s^2 + eta^2).
inline double vskmj_approx_loglik(const std::vector<double>& theta, const SamplePath& data) {
  validate(ModelSpec{ModelKind::VSK_MJ, theta, data.delta});
  if (!(theta[3] * data.delta < 1.0)) throw ParameterError("vskmj_approx_loglik: lambda * delta must be < 1");
  detail::require_observations(data, 1);
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < data.size(); ++t)
    s += vskmj_approx_log_transition(theta, data.delta, data[t][0], data[t + 1][0]);
  return s;
}

inline double biou_loglik(const std::vector<double>& theta, const SamplePath& data) {
  validate(ModelSpec{ModelKind::BI_OU, theta, data.delta});
  detail::require_observations(data, 2);
  const auto tr = biou::transition(theta, data.delta);
  const double det = tr.covariance.determinant();
  const double scale = tr.covariance.trace();
  if (!(det > 1e-14 * scale * scale)) throw SingularError("biou_loglik: Omega(delta) is near-singular");
  const Eigen::Matrix2d inv = tr.covariance.inverse();
  const Eigen::Vector2d alpha(theta[3], theta[4]);
  const double norm = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det);
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < data.size(); ++t) {
    const Eigen::Vector2d x(data[t][0], data[t][1]);
    const Eigen::Vector2d y(data[t + 1][0], data[t + 1][1]);
    const Eigen::Vector2d z = y - alpha - tr.decay * (x - alpha);
    s += norm - 0.5 * z.dot(inv * z);
  }
  return s;
}

enum class Estimator { EL, MLE, AMLE };

inline std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::EL: return "el";
    case Estimator::MLE: return "mle";
    case Estimator::AMLE: return "amle";
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view s) {
  if (s == "el") return Estimator::EL;
  if (s == "mle") return Estimator::MLE;
  if (s == "amle") return Estimator::AMLE;
  throw ConfigError("unknown estimator '" + std::string(s) + "' (expected el, mle or amle)");
}

/// Log-likelihood used by the maximum-likelihood baseline for `kind`:
/// exact for VSK, CIR and BI_OU, the mixture approximation for VSK_MJ.
inline double model_loglik(ModelKind kind, const std::vector<double>& theta, const SamplePath& data) {
  switch (kind) {
    case ModelKind::VSK: return vsk_loglik(theta, data);
    case ModelKind::CIR: return cir_loglik(theta, data);
    case ModelKind::VSK_MJ: return vskmj_approx_loglik(theta, data);
    case ModelKind::BI_OU: return biou_loglik(theta, data);
    case ModelKind::IG_OU: break;
  }
  throw ConfigError("no likelihood baseline for igou (transition density unavailable)");
}

struct LogLikResult {
  ModelKind kind = ModelKind::VSK;
  Estimator method = Estimator::MLE;
  std::vector<double> theta_hat;
  double loglik = 0.0;
  std::vector<double> hessian_se;  // empty when not requested
  int iterations = 0;
  int evaluations = 0;
};

/// Standard errors from the inverse of the negative central-difference
/// Hessian of `f` at `x`. Throws SingularError unless it is positive definite.
template <typename F>
std::vector<double> hessian_standard_errors(F&& f, const std::vector<double>& x) {
  const std::size_t p = x.size();
  std::vector<double> h(p);
  for (std::size_t i = 0; i < p; ++i) h[i] = 1e-4 * (x[i] != 0.0 ? std::abs(x[i]) : 1.0);
  const double f0 = f(x);
  Eigen::MatrixXd hess(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  auto at = [&](std::size_t i, double si, std::size_t j, double sj) {
    auto y = x;
    y[i] += si * h[i];
    y[j] += sj * h[j];
    return f(y);
  };
  for (std::size_t i = 0; i < p; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    hess(ii, ii) = (at(i, 1, i, 0) - 2.0 * f0 + at(i, -1, i, 0)) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double v = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) / (4.0 * h[i] * h[j]);
      hess(ii, jj) = v;
      hess(jj, ii) = v;
    }
  }
  const Eigen::MatrixXd info = -hess;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success || !info.allFinite()) {
    throw SingularError("observed information is not positive definite");
  }
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  std::vector<double> se(p);
  for (std::size_t i = 0; i < p; ++i) se[i] = std::sqrt(cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
  return se;
}

/// Maximum (or approximate maximum) likelihood by Nelder-Mead with the same
/// scaling, barrier and restart as the EL estimator.
inline LogLikResult mle_fit(ModelKind kind, const SamplePath& data, const std::vector<double>& theta_init,
                            bool standard_errors = true, const NelderMeadOptions& opt = {}) {
  const ModelSpec init{kind, theta_init, data.delta};
  if (!is_admissible(init)) throw ParameterError("mle_fit: theta_init outside the parameter space");
  const std::size_t p = theta_init.size();
  double biggest = 0.0;
  for (double v : theta_init) biggest = std::max(biggest, std::abs(v));
  std::vector<double> scale(p);
  for (std::size_t i = 0; i < p; ++i) scale[i] = std::max({std::abs(theta_init[i]), 1e-3 * biggest, 1e-12});
  auto to_theta = [&](const std::vector<double>& z) {
    std::vector<double> th(p);
    for (std::size_t i = 0; i < p; ++i) th[i] = z[i] * scale[i];
    return th;
  };
  auto loglik = [&](const std::vector<double>& th) {
    if (!is_admissible(ModelSpec{kind, th, data.delta})) return -std::numeric_limits<double>::infinity();
    try {
      const double v = model_loglik(kind, th, data);
      return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const SingularError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  auto f = [&](const std::vector<double>& z) { return -loglik(to_theta(z)); };
  std::vector<double> z0(p);
  for (std::size_t i = 0; i < p; ++i) z0[i] = theta_init[i] / scale[i];
  const auto nm = nelder_mead_restarted(f, z0, opt);

  LogLikResult res;
  res.kind = kind;
  res.method = kind == ModelKind::VSK_MJ ? Estimator::AMLE : Estimator::MLE;
  res.theta_hat = to_theta(nm.x);
  res.loglik = -nm.value;
  res.iterations = nm.iterations;
  res.evaluations = nm.evaluations;
  if (standard_errors) res.hessian_se = hessian_standard_errors(loglik, res.theta_hat);
  return res;
}

}  // namespace ccfel

#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ccfel/bivariate_ou.hpp"
#include "ccfel/errors.hpp"

namespace ccfel {

using cplx = std::complex<double>;

/// The five parametric models. Parameter order:
///   VSK, CIR : kappa, alpha, sigma
///   VSK_MJ   : kappa, alpha, sigma, lambda, eta
///   IG_OU    : lambda, a, b
///   BI_OU    : kappa11, kappa21, kappa22, alpha1, alpha2, sigma11, sigma22
enum class ModelKind { VSK, CIR, VSK_MJ, IG_OU, BI_OU };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::VSK: return "vsk";
    case ModelKind::CIR: return "cir";
    case ModelKind::VSK_MJ: return "vskmj";
    case ModelKind::IG_OU: return "igou";
    case ModelKind::BI_OU: return "biou";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "vsk" || key == "vasicek") return ModelKind::VSK;
  if (key == "cir") return ModelKind::CIR;
  if (key == "vskmj") return ModelKind::VSK_MJ;
  if (key == "igou") return ModelKind::IG_OU;
  if (key == "biou") return ModelKind::BI_OU;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

inline int dimension(ModelKind kind) { return kind == ModelKind::BI_OU ? 2 : 1; }

inline const std::vector<std::string>& parameter_names(ModelKind kind) {
  static const std::vector<std::string> diffusion = {"kappa", "alpha", "sigma"};
  static const std::vector<std::string> jump = {"kappa", "alpha", "sigma", "lambda", "eta"};
  static const std::vector<std::string> igou = {"lambda", "a", "b"};
  static const std::vector<std::string> biou = {"kappa11", "kappa21", "kappa22", "alpha1",
                                                "alpha2",  "sigma11", "sigma22"};
  switch (kind) {
    case ModelKind::VSK:
    case ModelKind::CIR: return diffusion;
    case ModelKind::VSK_MJ: return jump;
    case ModelKind::IG_OU: return igou;
    case ModelKind::BI_OU: return biou;
  }
  return diffusion;
}

inline std::size_t parameter_count(ModelKind kind) { return parameter_names(kind).size(); }

/// A point of the state space; univariate models use only the first slot.
using State = std::array<double, 2>;

struct ModelSpec {
  ModelKind kind = ModelKind::VSK;
  std::vector<double> theta;
  double delta = 1.0 / 12.0;

  int dim() const { return dimension(kind); }
};

namespace detail {

inline std::string describe(const ModelSpec& m) {
  std::string s(to_string(m.kind));
  s += "(";
  for (std::size_t i = 0; i < m.theta.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(m.theta[i]);
  }
  return s + ")";
}

}  // namespace detail

/// Throws ParameterError when the model's invariants fail.
///
/// VSK_MJ accepts lambda == 0 and eta == 0 (the jump-free limit) so the
/// reduction identities can be evaluated; estimation uses `is_admissible`,
/// which requires both to be strictly positive.
inline void validate(const ModelSpec& m) {
  if (m.theta.size() != parameter_count(m.kind)) {
    throw ParameterError(std::string(to_string(m.kind)) + " expects " +
                         std::to_string(parameter_count(m.kind)) + " parameters, got " +
                         std::to_string(m.theta.size()));
  }
  for (double v : m.theta) {
    if (!std::isfinite(v)) throw ParameterError("non-finite parameter in " + detail::describe(m));
  }
  if (!(m.delta > 0.0) || !std::isfinite(m.delta)) throw ParameterError("delta must be > 0");
  const auto& t = m.theta;
  auto fail = [&](const char* why) { throw ParameterError(std::string(why) + ": " + detail::describe(m)); };
  switch (m.kind) {
    case ModelKind::VSK:
      if (!(t[0] > 0.0) || !(t[2] > 0.0)) fail("kappa and sigma must be positive");
      break;
    case ModelKind::CIR:
      if (!(t[0] > 0.0) || !(t[2] > 0.0) || !(t[1] > 0.0)) fail("kappa, alpha, sigma must be positive");
      if (!(2.0 * t[0] * t[1] / (t[2] * t[2]) > 1.0)) fail("Feller condition 2 kappa alpha / sigma^2 > 1 violated");
      break;
    case ModelKind::VSK_MJ:
      if (!(t[0] > 0.0) || !(t[2] > 0.0)) fail("kappa and sigma must be positive");
      if (!(t[3] >= 0.0) || !(t[4] >= 0.0)) fail("lambda and eta must be non-negative");
      break;
    case ModelKind::IG_OU:
      if (!(t[0] > 0.0) || !(t[1] > 0.0) || !(t[2] > 0.0)) fail("lambda, a, b must be positive");
      break;
    case ModelKind::BI_OU:
      if (!(t[0] > 0.0) || !(t[2] > 0.0) || !(t[5] > 0.0) || !(t[6] > 0.0))
        fail("kappa11, kappa22, sigma11, sigma22 must be positive");
      break;
  }
}

/// Strict version of `validate` used as the optimizer barrier.
inline bool is_admissible(const ModelSpec& m) noexcept {
  try {
    validate(m);
  } catch (const ParameterError&) {
    return false;
  }
  if (m.kind == ModelKind::VSK_MJ) {
    const double lam_delta = m.theta[3] * m.delta;
    if (!(m.theta[3] > 0.0) || !(m.theta[4] > 0.0) || !(lam_delta < 1.0)) return false;
  }
  return true;
}

inline void check_state(const ModelSpec& m, const State& x) {
  for (int k = 0; k < m.dim(); ++k) {
    if (!std::isfinite(x[k])) throw DomainError("non-finite state");
  }
  if ((m.kind == ModelKind::CIR || m.kind == ModelKind::IG_OU) && !(x[0] > 0.0)) {
    throw DomainError(std::string(to_string(m.kind)) + " state must be positive, got " +
                      std::to_string(x[0]));
  }
}

/// Mean and variance of the Gaussian one-step law shared by VSK and the
/// diffusion part of VSK_MJ.
struct GaussianStep {
  double decay;     // e^{-kappa delta}
  double variance;  // sigma^2 (1 - e^{-2 kappa delta}) / (2 kappa)
  double mean(double x, double alpha) const { return alpha + (x - alpha) * decay; }
};

inline GaussianStep gaussian_step(double kappa, double sigma, double delta) {
  return {std::exp(-kappa * delta), sigma * sigma * (-std::expm1(-2.0 * kappa * delta)) / (2.0 * kappa)};
}

/// gamma(u) = lambda / (2 kappa) * integral_{e^{-2 kappa delta}}^{1} exp(-eta^2 u^2 y / 2) / y dy,
/// the jump contribution to the VSK_MJ log-CCF. Adaptive 15-point
/// Gauss-Kronrod to relative tolerance 1e-10; u == 0 or eta == 0 return
/// lambda * delta exactly.
inline double vskmj_gamma(double kappa, double lambda, double eta, double delta, double u) {
  if (!(kappa > 0.0) || !(lambda >= 0.0) || !(eta >= 0.0) || !(delta > 0.0) || !std::isfinite(u)) {
    throw ParameterError("vskmj_gamma: requires kappa > 0, lambda >= 0, eta >= 0, delta > 0");
  }
  const double c = 0.5 * eta * eta * u * u;
  if (c == 0.0) return lambda * delta;
  const double lower = std::exp(-2.0 * kappa * delta);
  auto integrand = [c](double y) { return std::exp(-c * y) / y; };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, lower, 1.0, 15, 1e-10);
  return lambda / (2.0 * kappa) * integral;
}

/// Every model's CCF is exponential-affine in the conditioning state:
/// psi(u; x) = exp(a + b . x). Computing (a, b) once per frequency lets the
/// estimators evaluate psi over a whole sample path with one exp per point.
struct AffineCcf {
  cplx a{0.0, 0.0};
  std::array<cplx, 2> b{cplx{0.0, 0.0}, cplx{0.0, 0.0}};

  cplx operator()(const State& x, int dim) const {
    cplx e = a + b[0] * x[0];
    if (dim == 2) e += b[1] * x[1];
    return std::exp(e);
  }
};

/// CCF coefficients at frequency u. Assumes `m` already validated.
inline AffineCcf ccf_coefficients(const ModelSpec& m, const State& u) {
  const auto& t = m.theta;
  const double d = m.delta;
  const cplx i{0.0, 1.0};
  AffineCcf out;
  switch (m.kind) {
    case ModelKind::VSK: {
      const auto g = gaussian_step(t[0], t[2], d);
      out.a = cplx{-0.5 * u[0] * u[0] * g.variance, u[0] * t[1] * (1.0 - g.decay)};
      out.b[0] = cplx{0.0, u[0] * g.decay};
      break;
    }
    case ModelKind::CIR: {
      const double kappa = t[0], alpha = t[1], sigma = t[2];
      const double decay = std::exp(-kappa * d);
      const double c = 4.0 * kappa / (sigma * sigma * (-std::expm1(-kappa * d)));
      const double dof = 4.0 * kappa * alpha / (sigma * sigma);
      const cplx z{1.0, -2.0 * u[0] / c};
      out.a = -0.5 * dof * std::log(z);
      out.b[0] = i * u[0] * decay / z;
      break;
    }
    case ModelKind::VSK_MJ: {
      const double kappa = t[0], alpha = t[1], sigma = t[2], lambda = t[3], eta = t[4];
      const double decay = std::exp(-kappa * d);
      const double gamma = vskmj_gamma(kappa, lambda, eta, d, u[0]);
      const double re = sigma * sigma * u[0] * u[0] / (4.0 * kappa) * std::expm1(-2.0 * kappa * d) -
                        lambda * d + gamma;
      out.a = cplx{re, alpha * u[0] * (1.0 - decay)};
      out.b[0] = cplx{0.0, u[0] * decay};
      break;
    }
    case ModelKind::IG_OU: {
      const double lambda = t[0], a = t[1], b = t[2];
      const double decay = std::exp(-lambda * d);
      // principal branch; both radicands have real part b^2 > 0
      const cplx r1 = std::sqrt(cplx{b * b, -2.0 * u[0]});
      const cplx r2 = std::sqrt(cplx{b * b, -2.0 * u[0] * decay});
      out.a = -a * (r1 - r2);
      out.b[0] = cplx{0.0, u[0] * decay};
      break;
    }
    case ModelKind::BI_OU: {
      const auto tr = biou::transition(t, d);
      const Eigen::Vector2d uu(u[0], u[1]);
      const Eigen::Vector2d alpha(t[3], t[4]);
      const Eigen::Vector2d drift = alpha - tr.decay * alpha;
      const Eigen::Vector2d slope = tr.decay.transpose() * uu;
      out.a = cplx{-0.5 * uu.dot(tr.covariance * uu), uu.dot(drift)};
      out.b[0] = cplx{0.0, slope[0]};
      out.b[1] = cplx{0.0, slope[1]};
      break;
    }
  }
  return out;
}

/// Transition CCF psi(u; theta) = E[exp(i u . X_{t+1}) | X_t = x].
inline cplx ccf(const ModelSpec& m, const State& u, const State& x) {
  validate(m);
  check_state(m, x);
  return ccf_coefficients(m, u)(x, m.dim());
}

/// Frequency node tau = (u, r): u is the CCF frequency, r the instrument frequency.
struct FrequencyPoint {
  State u{0.0, 0.0};
  State r{0.0, 0.0};
};

/// Estimation uses w = exp(i r . x); testing uses the unit instrument.
enum class InstrumentMode { Estimate, Test };

inline cplx instrument_weight(const FrequencyPoint& tau, const State& x, InstrumentMode mode,
                              int dim = 1) {
  if (mode == InstrumentMode::Test) return {1.0, 0.0};
  double phase = tau.r[0] * x[0];
  if (dim == 2) phase += tau.r[1] * x[1];
  return {std::cos(phase), std::sin(phase)};
}

/// CCF residual w(u, r; x_t) (exp(i u . x_next) - psi(u; x_t)).
inline cplx residual(const ModelSpec& m, const FrequencyPoint& tau, const State& x_t,
                     const State& x_next, InstrumentMode mode = InstrumentMode::Estimate) {
  const int dim = m.dim();
  const cplx psi = ccf(m, tau.u, x_t);
  double phase = tau.u[0] * x_next[0];
  if (dim == 2) phase += tau.u[1] * x_next[1];
  return instrument_weight(tau, x_t, mode, dim) * (cplx{std::cos(phase), std::sin(phase)} - psi);
}

}  // namespace ccfel

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "ccfel/el_dual.hpp"
#include "ccfel/errors.hpp"
#include "ccfel/grid.hpp"
#include "ccfel/model.hpp"
#include "ccfel/nelder_mead.hpp"
#include "ccfel/path.hpp"

namespace ccfel {

/// Complex residuals eps_t(tau_g; theta) for the n - 1 transitions of a path
/// (rows) and every grid node (columns).
struct ResidualPanel {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<cplx> eps;  // row-major

  cplx at(std::size_t t, std::size_t g) const { return eps[t * cols + g]; }
  Vec2 vec(std::size_t t, std::size_t g) const {
    const cplx e = at(t, g);
    return {e.real(), e.imag()};
  }
  std::vector<Vec2> column(std::size_t g) const {
    std::vector<Vec2> out(rows);
    for (std::size_t t = 0; t < rows; ++t) out[t] = vec(t, g);
    return out;
  }
};

namespace detail {

inline cplx phase(const State& u, const State& x, int dim) {
  double p = u[0] * x[0];
  if (dim == 2) p += u[1] * x[1];
  return {std::cos(p), std::sin(p)};
}

inline bool is_zero(const State& v) { return v[0] == 0.0 && v[1] == 0.0; }

/// Key identifying a node up to the conjugation (u, r) -> (-u, -r), under
/// which the local EL ratio is invariant.
inline std::tuple<double, double, double, double> mirror_key(const FrequencyPoint& tau) {
  std::array<double, 4> k{tau.u[0] + 0.0, tau.u[1] + 0.0, tau.r[0] + 0.0, tau.r[1] + 0.0};
  for (double v : k) {
    if (v == 0.0) continue;
    if (v < 0.0)
      for (double& w : k) w = -w + 0.0;
    break;
  }
  return {k[0], k[1], k[2], k[3]};
}

inline void check_path_states(ModelKind kind, const SamplePath& data) {
  ModelSpec probe{kind, {}, data.delta};
  for (const auto& x : data.obs) check_state(probe, x);
}

}  // namespace detail

inline ResidualPanel residual_panel(const ModelSpec& m, const SamplePath& data, const FrequencyGrid& grid) {
  validate(m);
  const int dim = m.dim();
  ResidualPanel panel;
  panel.rows = data.size() - 1;
  panel.cols = grid.size();
  panel.eps.resize(panel.rows * panel.cols);
  std::map<std::pair<double, double>, AffineCcf> cache;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& tau = grid.nodes[g];
    const auto key = std::make_pair(tau.u[0], tau.u[1]);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, ccf_coefficients(m, tau.u)).first;
    const AffineCcf& coef = it->second;
    for (std::size_t t = 0; t < panel.rows; ++t) {
      const cplx w = instrument_weight(tau, data[t], grid.instrument(), dim);
      panel.eps[t * panel.cols + g] = w * (detail::phase(tau.u, data[t + 1], dim) - coef(data[t], dim));
    }
  }
  return panel;
}

/// Integrated EL ratio l_n(theta) = sum_g pi_g l_n(tau_g; theta) for one data
/// set and grid, with all theta-independent pieces precomputed.
///
/// Mirror nodes (u, r) / (-u, -r) share a local ratio and are solved once;
/// nodes with u = 0 have identically zero residuals. Infeasible nodes are
/// dropped and the weights renormalised; more than half infeasible throws
/// DegenerateError.
class ElObjective {
 public:
  struct Value {
    double value = 0.0;
    std::size_t infeasible = 0;
  };

  ElObjective(ModelKind kind, const SamplePath& data, const FrequencyGrid& grid)
      : kind_(kind), dim_(dimension(kind)), delta_(data.delta), total_nodes_(grid.size()) {
    if (data.dim != dim_ || grid.dim != dim_) throw DataError("ElObjective: dimension mismatch");
    if (data.size() < 4) throw DataError("ElObjective: need at least 4 observations");
    detail::check_path_states(kind, data);
    rows_ = data.size() - 1;
    states_.assign(data.obs.begin(), data.obs.end() - 1);

    std::map<std::tuple<double, double, double, double>, std::size_t> canon_index;
    std::map<std::pair<double, double>, int> u_index, r_index;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto key = detail::mirror_key(grid.nodes[g]);
      auto it = canon_index.find(key);
      if (it != canon_index.end()) {
        nodes_[it->second].weight += grid.weights[g];
        nodes_[it->second].count += 1;
        continue;
      }
      const State u{std::get<0>(key), std::get<1>(key)};
      const State r{std::get<2>(key), std::get<3>(key)};
      Node node;
      node.weight = grid.weights[g];
      node.count = 1;
      if (!detail::is_zero(u)) {
        auto [ui, fresh] = u_index.emplace(std::make_pair(u[0], u[1]), static_cast<int>(freqs_.size()));
        if (fresh) {
          freqs_.push_back(u);
          std::vector<cplx> e(rows_);
          for (std::size_t t = 0; t < rows_; ++t) e[t] = detail::phase(u, data[t + 1], dim_);
          next_phase_.push_back(std::move(e));
        }
        node.u = ui->second;
      }
      if (grid.mode == GridMode::Estimate && !detail::is_zero(r)) {
        auto [ri, fresh] = r_index.emplace(std::make_pair(r[0], r[1]), static_cast<int>(instruments_.size()));
        if (fresh) {
          std::vector<cplx> w(rows_);
          for (std::size_t t = 0; t < rows_; ++t) w[t] = detail::phase(r, data[t], dim_);
          instruments_.push_back(std::move(w));
        }
        node.r = ri->second;
      }
      canon_index.emplace(key, nodes_.size());
      nodes_.push_back(node);
    }
  }

  ModelKind kind() const { return kind_; }
  std::size_t rows() const { return rows_; }

  /// Throws ParameterError for invalid theta and DegenerateError when more
  /// than half of the nodes are infeasible.
  Value evaluate(const std::vector<double>& theta) const {
    const ModelSpec m{kind_, theta, delta_};
    validate(m);
    std::vector<std::vector<cplx>> diff(freqs_.size(), std::vector<cplx>(rows_));
    for (std::size_t k = 0; k < freqs_.size(); ++k) {
      const AffineCcf coef = ccf_coefficients(m, freqs_[k]);
      auto& dk = diff[k];
      const auto& ek = next_phase_[k];
      for (std::size_t t = 0; t < rows_; ++t) dk[t] = ek[t] - coef(states_[t], dim_);
    }
    std::vector<Vec2> eps(rows_);
    double weighted = 0.0, feasible_weight = 0.0;
    std::size_t infeasible = 0;
    for (const auto& node : nodes_) {
      if (node.u < 0) {
        feasible_weight += node.weight;
        continue;
      }
      const auto& dk = diff[static_cast<std::size_t>(node.u)];
      if (node.r < 0) {
        for (std::size_t t = 0; t < rows_; ++t) eps[t] = {dk[t].real(), dk[t].imag()};
      } else {
        const auto& w = instruments_[static_cast<std::size_t>(node.r)];
        for (std::size_t t = 0; t < rows_; ++t) {
          const cplx e = w[t] * dk[t];
          eps[t] = {e.real(), e.imag()};
        }
      }
      try {
        const auto sol = solve_lambda(eps);
        weighted += node.weight * local_el_ratio(eps, sol.lambda);
        feasible_weight += node.weight;
      } catch (const ConvexHullError&) {
        infeasible += node.count;
      } catch (const MaxIterError&) {
        infeasible += node.count;
      }
    }
    if (2 * infeasible > total_nodes_) {
      throw DegenerateError("integrated EL: " + std::to_string(infeasible) + " of " +
                            std::to_string(total_nodes_) + " nodes infeasible");
    }
    return {weighted / feasible_weight, infeasible};
  }

 private:
  struct Node {
    int u = -1;  // index into freqs_, -1 for u = 0
    int r = -1;  // index into instruments_, -1 for the unit instrument
    double weight = 0.0;
    std::size_t count = 0;
  };

  ModelKind kind_;
  int dim_;
  double delta_;
  std::size_t total_nodes_;
  std::size_t rows_ = 0;
  std::vector<State> states_;
  std::vector<State> freqs_;
  std::vector<std::vector<cplx>> next_phase_;
  std::vector<std::vector<cplx>> instruments_;
  std::vector<Node> nodes_;
};

struct IntegratedEl {
  double value = 0.0;
  std::size_t infeasible = 0;
};

inline IntegratedEl integrated_el_ratio(ModelKind kind, const std::vector<double>& theta,
                                        const SamplePath& data, const FrequencyGrid& grid) {
  const auto v = ElObjective(kind, data, grid).evaluate(theta);
  return {v.value, v.infeasible};
}

struct EstimateResult {
  ModelKind kind = ModelKind::VSK;
  std::vector<double> theta_hat;
  double el_value = 0.0;
  Eigen::MatrixXd covariance;  // Sigma_hat / n; empty when not requested
  double q2n_norm = 0.0;
  std::size_t infeasible = 0;
  int iterations = 0;
  int evaluations = 0;
  std::vector<double> trace;

  std::vector<double> standard_errors() const {
    std::vector<double> se;
    for (Eigen::Index i = 0; i < covariance.rows(); ++i) se.push_back(std::sqrt(std::max(0.0, covariance(i, i))));
    return se;
  }
};

struct EstimateOptions {
  bool covariance = true;
  bool diagnostics = true;  // q2n_norm
  NelderMeadOptions optimizer{};
};

namespace detail {

inline std::vector<double> optimizer_scale(const std::vector<double>& theta) {
  double biggest = 0.0;
  for (double v : theta) biggest = std::max(biggest, std::abs(v));
  std::vector<double> s(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) s[i] = std::max({std::abs(theta[i]), 1e-3 * biggest, 1e-12});
  return s;
}

inline double fd_step(double v) { return 1e-5 * (v != 0.0 ? std::abs(v) : 1.0); }

/// Central difference of the residual panel in parameter i, falling back to
/// a one-sided difference when theta +- h leaves the parameter space.
inline std::vector<cplx> panel_derivative(const ModelSpec& m, const SamplePath& data, const FrequencyGrid& grid,
                                          std::size_t i, double step, const ResidualPanel* at_theta = nullptr) {
  ModelSpec plus = m, minus = m;
  plus.theta[i] += step;
  minus.theta[i] -= step;
  bool minus_ok = true;
  try {
    validate(minus);
  } catch (const ParameterError&) {
    minus_ok = false;
  }
  bool plus_ok = true;
  try {
    validate(plus);
  } catch (const ParameterError&) {
    plus_ok = false;
  }
  ResidualPanel base;
  if ((!plus_ok || !minus_ok) && !at_theta) {
    base = residual_panel(m, data, grid);
    at_theta = &base;
  }
  std::vector<cplx> d;
  if (plus_ok && minus_ok) {
    const auto p = residual_panel(plus, data, grid);
    const auto q = residual_panel(minus, data, grid);
    d.resize(p.eps.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = (p.eps[k] - q.eps[k]) / (2.0 * step);
  } else if (plus_ok) {
    const auto p = residual_panel(plus, data, grid);
    d.resize(p.eps.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = (p.eps[k] - at_theta->eps[k]) / step;
  } else if (minus_ok) {
    const auto q = residual_panel(minus, data, grid);
    d.resize(q.eps.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = (at_theta->eps[k] - q.eps[k]) / step;
  } else {
    throw ParameterError("finite difference: theta +- h both outside the parameter space");
  }
  return d;
}

}  // namespace detail

/// Sample mean over t of d eps_t(tau_g) / d theta_i by central differences
/// with relative step `step_rel`; returns a G x p complex matrix.
inline Eigen::MatrixXcd mean_residual_derivative(ModelKind kind, const std::vector<double>& theta,
                                                 const SamplePath& data, const FrequencyGrid& grid,
                                                 double step_rel = 1e-5) {
  const ModelSpec m{kind, theta, data.delta};
  validate(m);
  const std::size_t p = theta.size();
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) {
    const double step = step_rel * (theta[i] != 0.0 ? std::abs(theta[i]) : 1.0);
    const auto d = detail::panel_derivative(m, data, grid, i, step);
    const std::size_t rows = data.size() - 1, cols = grid.size();
    for (std::size_t g = 0; g < cols; ++g) {
      cplx acc{0.0, 0.0};
      for (std::size_t t = 0; t < rows; ++t) acc += d[t * cols + g];
      out(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(i)) = acc / static_cast<double>(rows);
    }
  }
  return out;
}

/// |integral Q2n(tau; theta, lambda(tau; theta)) pi(tau) dtau|, the
/// first-order optimality residual of the integrated EL ratio.
inline double q2n_norm(ModelKind kind, const std::vector<double>& theta, const SamplePath& data,
                       const FrequencyGrid& grid) {
  const ModelSpec m{kind, theta, data.delta};
  const auto panel = residual_panel(m, data, grid);
  const std::size_t rows = panel.rows, cols = panel.cols, p = theta.size();
  std::vector<Vec2> lambdas(cols, Vec2{0.0, 0.0});
  std::vector<bool> feasible(cols, false);
  double feasible_weight = 0.0;
  for (std::size_t g = 0; g < cols; ++g) {
    try {
      lambdas[g] = solve_lambda(panel.column(g)).lambda;
      feasible[g] = true;
      feasible_weight += grid.weights[g];
    } catch (const NumericalError&) {
    }
  }
  if (!(feasible_weight > 0.0)) throw DegenerateError("q2n_norm: no feasible node");
  Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) {
    const auto d = detail::panel_derivative(m, data, grid, i, detail::fd_step(theta[i]), &panel);
    double acc = 0.0;
    for (std::size_t g = 0; g < cols; ++g) {
      if (!feasible[g]) continue;
      const Vec2& lam = lambdas[g];
      double node = 0.0;
      for (std::size_t t = 0; t < rows; ++t) {
        const cplx e = panel.eps[t * cols + g];
        const cplx de = d[t * cols + g];
        node += (de.real() * lam[0] + de.imag() * lam[1]) / (1.0 + lam[0] * e.real() + lam[1] * e.imag());
      }
      acc += grid.weights[g] / feasible_weight * node / static_cast<double>(rows);
    }
    q[static_cast<Eigen::Index>(i)] = acc;
  }
  return q.norm();
}

/// Plug-in covariance Gamma^{-1} V Gamma^{-1} / n of the MELE, with
/// Gamma = sum_g pi_g D_g^* A_gg^{-1} D_g and
/// V = sum_{g,h} pi_g pi_h D_g^* A_gg^{-1} A_gh A_hh^{-1} D_h, where
/// eps~ = (eps(tau), eps(-tau)) = (eps, conj eps), D_g = E d eps~ / d theta
/// and A_gh the sample cross-covariance of eps~ at nodes g and h.
///
/// V is accumulated as the sample second moment of
/// z_t = sum_g pi_g D_g^* A_gg^{-1} eps~_t(tau_g), which avoids forming the
/// G x G block matrix A.
inline Eigen::MatrixXd asymptotic_covariance(ModelKind kind, const std::vector<double>& theta,
                                             const SamplePath& data, const FrequencyGrid& grid) {
  const ModelSpec m{kind, theta, data.delta};
  const auto panel = residual_panel(m, data, grid);
  const std::size_t rows = panel.rows, cols = panel.cols;
  const auto p = static_cast<Eigen::Index>(theta.size());
  const double inv_rows = 1.0 / static_cast<double>(rows);

  Eigen::MatrixXcd deriv(static_cast<Eigen::Index>(cols), p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto d = detail::panel_derivative(m, data, grid, ui, detail::fd_step(theta[ui]), &panel);
    for (std::size_t g = 0; g < cols; ++g) {
      cplx acc{0.0, 0.0};
      for (std::size_t t = 0; t < rows; ++t) acc += d[t * cols + g];
      deriv(static_cast<Eigen::Index>(g), i) = acc * inv_rows;
    }
  }

  std::vector<cplx> mean(cols, {0.0, 0.0});
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t g = 0; g < cols; ++g) mean[g] += panel.eps[t * cols + g];
  for (auto& v : mean) v *= inv_rows;

  Eigen::MatrixXcd gamma = Eigen::MatrixXcd::Zero(p, p);
  // loading_g = pi_g A_gg^{-1} D~_g (2 x p); z_t = sum_g loading_g^* eps~_tg
  std::vector<Eigen::MatrixXcd> loading(cols);
  std::vector<bool> active(cols, false);
  for (std::size_t g = 0; g < cols; ++g) {
    if (detail::is_zero(grid.nodes[g].u)) continue;
    cplx s1{0.0, 0.0}, s2{0.0, 0.0};
    for (std::size_t t = 0; t < rows; ++t) {
      const cplx c = panel.eps[t * cols + g] - mean[g];
      s1 += c * std::conj(c);
      s2 += c * c;
    }
    s1 *= inv_rows;
    s2 *= inv_rows;
    Eigen::Matrix2cd a;
    a << s1, s2, std::conj(s2), std::conj(s1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> eig(a);
    if (eig.eigenvalues().minCoeff() < 1e-12) a += 1e-10 * Eigen::Matrix2cd::Identity();
    Eigen::MatrixXcd dt(2, p);
    dt.row(0) = deriv.row(static_cast<Eigen::Index>(g));
    dt.row(1) = deriv.row(static_cast<Eigen::Index>(g)).conjugate();
    const Eigen::MatrixXcd solved = a.inverse() * dt;
    gamma += grid.weights[g] * dt.adjoint() * solved;
    loading[g] = grid.weights[g] * solved;
    active[g] = true;
  }

  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(p, p);
  Eigen::VectorXcd z(p);
  for (std::size_t t = 0; t < rows; ++t) {
    z.setZero();
    for (std::size_t g = 0; g < cols; ++g) {
      if (!active[g]) continue;
      const cplx c = panel.eps[t * cols + g] - mean[g];
      z += loading[g].row(0).adjoint() * c + loading[g].row(1).adjoint() * std::conj(c);
    }
    v += z * z.adjoint();
  }
  v *= inv_rows;

  Eigen::MatrixXd gamma_re = gamma.real();
  gamma_re = 0.5 * (gamma_re + gamma_re.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> geig(gamma_re);
  const double big = geig.eigenvalues().cwiseAbs().maxCoeff();
  const double small = geig.eigenvalues().cwiseAbs().minCoeff();
  if (!(small > 0.0) || big / small > 1e12) {
    throw SingularError("asymptotic_covariance: Gamma is ill-conditioned (condition " +
                        std::to_string(small > 0.0 ? big / small : INFINITY) + ")");
  }
  const Eigen::MatrixXd gamma_inv = gamma_re.inverse();
  Eigen::MatrixXd cov = gamma_inv * v.real() * gamma_inv * inv_rows;
  return 0.5 * (cov + cov.transpose());
}

/// Moment-based starting values for the optimizers (AR(1) regression,
/// stationary moments), clamped into the admissible region.
inline std::vector<double> initial_guess(ModelKind kind, const SamplePath& data) {
  const double delta = data.delta;
  const std::size_t n = data.size();
  auto ar1 = [&](std::size_t k) {
    double mx = 0, my = 0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
      mx += data[t][k];
      my += data[t + 1][k];
    }
    mx /= static_cast<double>(n - 1);
    my /= static_cast<double>(n - 1);
    double sxy = 0, sxx = 0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
      sxy += (data[t][k] - mx) * (data[t + 1][k] - my);
      sxx += (data[t][k] - mx) * (data[t][k] - mx);
    }
    double slope = sxx > 0 ? sxy / sxx : 0.5;
    slope = std::clamp(slope, 0.05, 0.995);
    const double intercept = my - slope * mx;
    std::vector<double> resid(n - 1);
    for (std::size_t t = 0; t + 1 < n; ++t) resid[t] = data[t + 1][k] - intercept - slope * data[t][k];
    return std::make_tuple(slope, intercept, resid);
  };
  auto moments = [](const std::vector<double>& r) {
    double m2 = 0, m4 = 0;
    for (double e : r) {
      m2 += e * e;
      m4 += e * e * e * e;
    }
    return std::make_pair(m2 / static_cast<double>(r.size()), m4 / static_cast<double>(r.size()));
  };

  switch (kind) {
    case ModelKind::VSK:
    case ModelKind::CIR:
    case ModelKind::VSK_MJ: {
      auto [slope, intercept, resid] = ar1(0);
      const double kappa = -std::log(slope) / delta;
      const double alpha = intercept / (1.0 - slope);
      auto [var, m4] = moments(resid);
      const double scale = 2.0 * kappa / (1.0 - slope * slope);
      if (kind == ModelKind::VSK) return {kappa, alpha, std::sqrt(var * scale)};
      if (kind == ModelKind::CIR) {
        const double a = std::max(alpha, 1e-6);
        double s2 = var * scale / a;
        s2 = std::min(s2, 1.8 * kappa * a);
        return {kappa, a, std::sqrt(s2)};
      }
      // split the residual variance between diffusion and jumps using the
      // fourth cumulant of a two-component normal mixture
      const double lambda = 1.0;
      const double pj = lambda * delta;
      const double k4 = std::max(m4 - 3.0 * var * var, 0.0);
      double eta2 = k4 > 0.0 ? std::sqrt(k4 / (3.0 * pj)) : 0.5 * var / pj;
      eta2 = std::min(eta2, 0.8 * var / pj);
      const double diff_var = var - pj * eta2;
      return {kappa, alpha, std::sqrt(diff_var * scale), lambda, std::sqrt(eta2)};
    }
    case ModelKind::IG_OU: {
      auto [slope, intercept, resid] = ar1(0);
      (void)intercept;
      (void)resid;
      const auto s = summarize(data);
      const double b = std::sqrt(s.mean / (s.sd * s.sd));
      return {-std::log(slope) / delta, s.mean * b, b};
    }
    case ModelKind::BI_OU: {
      // equation-by-equation least squares respecting the triangular drift
      auto [s1, c1, r1] = ar1(0);
      // second coordinate on (1, x1, x2)
      Eigen::MatrixXd design(static_cast<Eigen::Index>(n - 1), 3);
      Eigen::VectorXd target(static_cast<Eigen::Index>(n - 1));
      for (std::size_t t = 0; t + 1 < n; ++t) {
        design(static_cast<Eigen::Index>(t), 0) = 1.0;
        design(static_cast<Eigen::Index>(t), 1) = data[t][0];
        design(static_cast<Eigen::Index>(t), 2) = data[t][1];
        target[static_cast<Eigen::Index>(t)] = data[t + 1][1];
      }
      const Eigen::Vector3d beta = design.colPivHouseholderQr().solve(target);
      const double e22 = std::clamp(beta[2], 0.05, 0.995);
      const double e21 = beta[1];
      const double k11 = -std::log(s1) / delta;
      const double k22 = -std::log(e22) / delta;
      const double divided = std::abs(k11 - k22) < 1e-8 ? -delta * e22 : (s1 - e22) / (k11 - k22);
      const double k21 = e21 / divided;
      Eigen::Matrix2d decay;
      decay << s1, 0.0, e21, e22;
      const Eigen::Vector2d drift(c1, beta[0]);
      const Eigen::Vector2d alpha = (Eigen::Matrix2d::Identity() - decay).inverse() * drift;
      auto [v1, m41] = moments(r1);
      (void)m41;
      Eigen::VectorXd r2 = target - design * beta;
      const double v2 = r2.squaredNorm() / static_cast<double>(n - 1);
      const double sg1 = std::sqrt(v1 * 2.0 * k11 / (1.0 - s1 * s1));
      const double sg2 = std::sqrt(v2 * 2.0 * k22 / (1.0 - e22 * e22));
      return {k11, k21, k22, alpha[0], alpha[1], sg1, sg2};
    }
  }
  return {};
}

/// Maximum empirical likelihood estimator: Nelder-Mead on l_n(theta) in
/// coordinates scaled by |theta_init|, with inadmissible or degenerate
/// points mapped to +inf, restarted once from the best vertex.
inline EstimateResult minimize_el(ModelKind kind, const SamplePath& data, const FrequencyGrid& grid,
                                  const std::vector<double>& theta_init, const EstimateOptions& opt = {}) {
  const ModelSpec init{kind, theta_init, data.delta};
  if (!is_admissible(init)) throw ParameterError("minimize_el: theta_init outside the parameter space");
  const ElObjective objective(kind, data, grid);
  const auto scale = detail::optimizer_scale(theta_init);
  const std::size_t p = theta_init.size();
  auto to_theta = [&](const std::vector<double>& z) {
    std::vector<double> th(p);
    for (std::size_t i = 0; i < p; ++i) th[i] = z[i] * scale[i];
    return th;
  };
  auto f = [&](const std::vector<double>& z) {
    const auto th = to_theta(z);
    if (!is_admissible(ModelSpec{kind, th, data.delta})) return std::numeric_limits<double>::infinity();
    try {
      return objective.evaluate(th).value;
    } catch (const DegenerateError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  std::vector<double> z0(p);
  for (std::size_t i = 0; i < p; ++i) z0[i] = theta_init[i] / scale[i];
  const auto nm = nelder_mead_restarted(f, z0, opt.optimizer);

  EstimateResult res;
  res.kind = kind;
  res.theta_hat = to_theta(nm.x);
  const auto at = objective.evaluate(res.theta_hat);
  res.el_value = at.value;
  res.infeasible = at.infeasible;
  res.iterations = nm.iterations;
  res.evaluations = nm.evaluations;
  res.trace = nm.trace;
  if (opt.diagnostics) res.q2n_norm = q2n_norm(kind, res.theta_hat, data, grid);
  if (opt.covariance) res.covariance = asymptotic_covariance(kind, res.theta_hat, data, grid);
  return res;
}

/// Builds the estimation grid from the data and fits from `initial_guess`.
inline EstimateResult estimate_el(ModelKind kind, const SamplePath& data, const EstimateOptions& opt = {}) {
  const auto grid = build_grid(data, kind, GridMode::Estimate);
  auto init = initial_guess(kind, data);
  return minimize_el(kind, data, grid, init, opt);
}

}  // namespace ccfel

#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace ccfel::biou {

/// exp(-kappa * delta) for lower-triangular kappa = [[k11, 0], [k21, k22]].
///
/// The off-diagonal entry k21 (e^{-k11 d} - e^{-k22 d}) / (k11 - k22) has a
/// removable singularity at k11 == k22; below 1e-8 separation a third-order
/// series in (k11 - k22) replaces the divided difference.
inline Eigen::Matrix2d decay_matrix(double k11, double k21, double k22, double delta) {
  const double e1 = std::exp(-k11 * delta);
  const double e2 = std::exp(-k22 * delta);
  double divided;
  const double gap = k11 - k22;
  if (std::abs(gap) < 1e-8) {
    const double z = -gap * delta;
    divided = -delta * e2 * (1.0 + z / 2.0 + z * z / 6.0);
  } else {
    divided = (e1 - e2) / gap;
  }
  Eigen::Matrix2d m;
  m << e1, 0.0, k21 * divided, e2;
  return m;
}

/// Stationary covariance Sigma solving kappa Sigma + Sigma kappa^T = sigma sigma^T
/// (closed form valid for any 2x2 kappa with eigenvalues of positive real part).
inline Eigen::Matrix2d stationary_covariance(const Eigen::Matrix2d& kappa,
                                             const Eigen::Matrix2d& sigma) {
  const double tr = kappa.trace();
  const double det = kappa.determinant();
  const Eigen::Matrix2d ss = sigma * sigma.transpose();
  const Eigen::Matrix2d shifted = kappa - tr * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d out = (det * ss + shifted * ss * shifted.transpose()) / (2.0 * tr * det);
  return 0.5 * (out + out.transpose());
}

struct Transition {
  Eigen::Matrix2d decay;       // e^{-kappa delta}
  Eigen::Matrix2d stationary;  // Sigma
  Eigen::Matrix2d covariance;  // Omega(delta) = Sigma - E Sigma E^T
};

/// theta = (k11, k21, k22, a1, a2, s11, s22).
template <typename Theta>
Transition transition(const Theta& theta, double delta) {
  Eigen::Matrix2d kappa;
  kappa << theta[0], 0.0, theta[1], theta[2];
  Eigen::Matrix2d sigma;
  sigma << theta[5], 0.0, 0.0, theta[6];
  Transition t;
  t.decay = decay_matrix(theta[0], theta[1], theta[2], delta);
  t.stationary = stationary_covariance(kappa, sigma);
  Eigen::Matrix2d omega = t.stationary - t.decay * t.stationary * t.decay.transpose();
  t.covariance = 0.5 * (omega + omega.transpose());
  return t;
}

}  // namespace ccfel::biou

#pragma once

#include <Eigen/Dense>

#include "recon/ssm.hpp"

namespace recon {

/// Univariate two-release news/noise model:
///   y^i_t = ytilde_t + nu^i_t + zeta^i_t,  ytilde_t = rho ytilde_{t-1} + ...
/// parameterized by variances.
struct UnivariateTheta {
  double rho = 0.0;
  double var_truth = 1.0;
  double var_news1 = 0.0;
  double var_news2 = 0.0;
  double var_noise1 = 1.0;
  double var_noise2 = 1.0;

  Eigen::Matrix<double, 6, 1> vector() const;
  friend bool operator==(const UnivariateTheta&, const UnivariateTheta&) = default;
};

/// Covariances of the reduced-form shocks entering the truth (B) and the
/// two releases (D).
struct UnivariateMoments {
  double Sigma_BB = 0.0;
  Eigen::RowVector2d Sigma_BD = Eigen::RowVector2d::Zero();
  Eigen::Matrix2d Sigma_DD = Eigen::Matrix2d::Zero();
};

UnivariateMoments univariate_moments(const UnivariateTheta& theta);

/// Same moments assembled from the structural 5x5 covariance of the
/// omega shocks and the loadings B = e_1', D.
UnivariateMoments univariate_moments_from_sigma(const UnivariateTheta& theta);
Eigen::Matrix<double, 5, 5> univariate_omega_covariance(const UnivariateTheta& theta);

/// Five-state (truth, nu1, nu2, zeta1, zeta2) model for the filter module.
StateSpaceModel build_univariate_model(const UnivariateTheta& theta);

struct RiccatiQuadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Coefficients of a p^2 + b p + c = 0 satisfied by the stationary filtered
/// truth variance.
RiccatiQuadratic riccati_coefficients(const UnivariateTheta& theta);

/// Positive root (-b - sqrt(b^2 - 4ac)) / 2a, evaluated in the cancellation
/// free form 2c / (-b + sqrt(b^2 - 4ac)) so that a = 0 (rho = 0) is covered.
double riccati_quadratic(const UnivariateTheta& theta);

}  // namespace recon

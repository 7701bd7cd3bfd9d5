#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "recon/config.hpp"
#include "recon/ssm.hpp"
#include "recon/univariate.hpp"
#include "recon/vintages.hpp"

namespace oracle {

/// Log density of the stacked observed entries under the joint normal law
/// built directly from the state moments: E[a_t], Cov(a_t, a_s) = T^{t-s} V_s.
inline double dense_loglik(const recon::StateSpaceModel& model, const recon::ObservationMatrix& obs) {
  const Eigen::Index T_len = obs.rows();
  const int m = model.m();
  const Eigen::MatrixXd Q = model.R * model.R.transpose();

  std::vector<Eigen::VectorXd> mean(T_len);
  std::vector<Eigen::MatrixXd> var(T_len);
  mean[0] = model.a1;
  var[0] = model.P1;
  for (Eigen::Index t = 1; t < T_len; ++t) {
    mean[t] = model.c + model.T * mean[t - 1];
    var[t] = model.T * var[t - 1] * model.T.transpose() + Q;
  }
  Eigen::MatrixXd big_cov = Eigen::MatrixXd::Zero(T_len * m, T_len * m);
  Eigen::VectorXd big_mean(T_len * m);
  for (Eigen::Index s = 0; s < T_len; ++s) {
    big_mean.segment(s * m, m) = mean[s];
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m, m);
    for (Eigen::Index t = s; t < T_len; ++t) {
      const Eigen::MatrixXd block = power * var[s];
      big_cov.block(t * m, s * m, m, m) = block;
      big_cov.block(s * m, t * m, m, m) = block.transpose();
      power = model.T * power;
    }
  }
  std::vector<Eigen::Index> rows;
  std::vector<double> y;
  const Eigen::Index n = model.n();
  Eigen::MatrixXd big_Z = Eigen::MatrixXd::Zero(T_len * n, T_len * m);
  for (Eigen::Index t = 0; t < T_len; ++t) big_Z.block(t * n, t * m, n, m) = model.Z;
  for (Eigen::Index t = 0; t < T_len; ++t)
    for (Eigen::Index j = 0; j < n; ++j)
      if (obs.observed(t, j)) {
        rows.push_back(t * n + j);
        y.push_back(obs.values(t, j));
      }
  const auto k = static_cast<Eigen::Index>(rows.size());
  if (k == 0) return 0.0;
  Eigen::MatrixXd S(k, T_len * m);
  for (Eigen::Index i = 0; i < k; ++i) S.row(i) = big_Z.row(rows[i]);
  const Eigen::MatrixXd cov = S * big_cov * S.transpose();
  const Eigen::VectorXd mu = S * big_mean;
  const Eigen::VectorXd dev = Eigen::Map<const Eigen::VectorXd>(y.data(), k) - mu;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * (static_cast<double>(k) * std::log(2.0 * std::numbers::pi) + logdet + dev.dot(ldlt.solve(dev)));
}

/// Filtered truth variance by iterating the scalar Riccati map p -> f(p) of
/// the univariate two-release model, from the moment matrices directly.
inline double riccati_fixed_point(const recon::UnivariateTheta& th, int max_iter = 200000) {
  const recon::UnivariateMoments mo = recon::univariate_moments_from_sigma(th);
  const Eigen::Vector2d C(th.rho, th.rho);
  double p = th.var_truth;
  for (int i = 0; i < max_iter; ++i) {
    // x_{t+1} = rho x_t + B w,  z_{t+1} = C x_t + D w; p = Var(x_{t+1} | z_{1..t+1})
    const double prior = th.rho * th.rho * p + mo.Sigma_BB;
    const Eigen::RowVector2d cross = th.rho * p * C.transpose() + mo.Sigma_BD;
    const Eigen::Matrix2d vz = p * C * C.transpose() + mo.Sigma_DD;
    const double next = prior - (cross * vz.inverse() * cross.transpose())(0, 0);
    if (std::abs(next - p) < 1e-15) return next;
    p = next;
  }
  return p;
}

inline recon::UnivariateTheta random_univariate(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.5);
  std::uniform_real_distribution<double> r(0.0, 0.95);
  recon::UnivariateTheta th;
  th.rho = r(rng);
  th.var_truth = u(rng);
  th.var_news1 = u(rng);
  th.var_news2 = u(rng);
  th.var_noise1 = u(rng);
  th.var_noise2 = u(rng);
  return th;
}

/// Random stationary parameters with every scale strictly positive, so
/// innovation covariances are full rank.
inline recon::ParamVector random_params(const recon::ReconConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(0.2, 1.2);
  std::uniform_real_distribution<double> coef(-0.6, 0.6);
  recon::ParamVector p = recon::ParamVector::zeros(config);
  do {
    for (int j = 0; j < config.p; ++j) p.rho(j) = coef(rng) / (j + 1);
  } while (!recon::is_stationary(p.rho));
  p.sigma_e = scale(rng);
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < config.l; ++i) {
      p.sigma_news(s, i) = scale(rng);
      p.sigma_noise(s, i) = scale(rng);
    }
  if (config.center) p.mean = coef(rng) * 3.0;
  if (config.spillovers)
    for (Eigen::Index k = 0; k < p.ts_diag->size(); ++k) (*p.ts_diag)(k) = coef(rng);
  return p;
}

}  // namespace oracle

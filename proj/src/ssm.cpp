#include "recon/ssm.hpp"

#include <cmath>
#include <random>

#include "recon/error.hpp"

namespace recon {

StateSpaceModel build_state_space(const ReconConfig& config, const ParamVector& params) {
  config.validate();
  params.validate(config);
  if (!is_stationary(params.rho)) throw InputError("build_state_space: AR coefficients are not stationary");
  if (params.ts_diag && (params.ts_diag->array().abs() >= 1.0).any())
    throw InputError("build_state_space: spillover coefficients must lie in (-1, 1)");

  const StateLayout lay{config.p, config.l};
  const int l = config.l;
  const int p = config.p;
  const int m = lay.state_dim();
  const int r = lay.shock_dim();
  const int n = 2 * l;

  StateSpaceModel model;
  model.layout = lay;

  model.Z = Eigen::MatrixXd::Zero(n, m);
  model.Z.col(0).setOnes();
  model.Z.block(0, p, n, n).setIdentity();
  model.Z.block(0, p + n, n, n).setIdentity();

  model.T = Eigen::MatrixXd::Zero(m, m);
  model.T.row(0).head(p) = params.rho.transpose();
  if (p > 1) model.T.block(1, 0, p - 1, p - 1).setIdentity();
  if (params.ts_diag) model.T.block(p, p, 4 * l, 4 * l) = params.ts_diag->asDiagonal();

  Eigen::MatrixXd& R = model.R;
  R = Eigen::MatrixXd::Zero(m, r);
  R(0, 0) = params.sigma_e;
  for (int s = 0; s < 2; ++s) {
    for (int i = 1; i <= l; ++i) {
      const double news = params.sigma_news(s, i - 1);
      R(0, lay.news_shock(s, i)) = news;
      // Upper-triangular U_l: release i carries every news shock from i onward.
      for (int k = 1; k <= i; ++k) R(lay.news(s, k), lay.news_shock(s, i)) = -news;
      R(lay.noise(s, i), lay.noise_shock(s, i)) = params.sigma_noise(s, i - 1);
    }
  }
  if (params.psi) {
    for (int i = 1; i <= l; ++i)
      for (int j = 1; j <= l; ++j) R(lay.news(0, i), lay.news_shock(1, j)) = (*params.psi)(i - 1, j - 1);
  }
  if (params.phi) {
    for (int i = 1; i <= l; ++i)
      for (int j = 1; j <= l; ++j) R(lay.noise(0, i), lay.noise_shock(1, j)) = (*params.phi)(i - 1, j - 1);
  }

  model.c = Eigen::VectorXd::Zero(m);
  model.a1 = Eigen::VectorXd::Zero(m);
  if (params.mean) {
    model.c(0) = *params.mean * (1.0 - params.rho.sum());
    model.a1.head(p).setConstant(*params.mean);
  }
  model.P1 = solve_discrete_lyapunov(model.T, model.RRt());
  return model;
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& T, const Eigen::MatrixXd& Q) {
  Eigen::MatrixXd P = Q;
  Eigen::MatrixXd A = T;
  for (int it = 0; it < 200; ++it) {
    const Eigen::MatrixXd step = A * P * A.transpose();
    P += step;
    const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if (step.cwiseAbs().maxCoeff() <= 1e-16 * scale) {
      return 0.5 * (P + P.transpose());
    }
    A = A * A;
    if (!A.allFinite()) break;
  }
  throw NumericalError("discrete Lyapunov equation did not converge (transition not stable)");
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (P + P.transpose()));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

Simulation simulate(const StateSpaceModel& model, int horizon, std::uint64_t seed) {
  return simulate(model, horizon, std::mt19937_64(seed));
}

}  // namespace recon

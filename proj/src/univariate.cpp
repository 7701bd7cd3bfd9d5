#include "recon/univariate.hpp"

#include <cmath>

#include "recon/error.hpp"

namespace recon {

namespace {

void check_theta(const UnivariateTheta& th) {
  if (!th.vector().allFinite()) throw InputError("univariate theta: non-finite values");
  if (!(th.rho >= 0.0 && th.rho < 1.0)) throw InputError("univariate theta: rho must lie in [0, 1)");
  if (th.var_truth < 0 || th.var_news1 < 0 || th.var_news2 < 0 || th.var_noise1 < 0 || th.var_noise2 < 0)
    throw InputError("univariate theta: variances must be nonnegative");
}

Eigen::Matrix<double, 2, 5> loading_D() {
  Eigen::Matrix<double, 2, 5> D;
  D << 1, 1, 0, 1, 0,
       1, 0, 1, 0, 1;
  return D;
}

}  // namespace

Eigen::Matrix<double, 6, 1> UnivariateTheta::vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << rho, var_truth, var_news1, var_news2, var_noise1, var_noise2;
  return v;
}

UnivariateMoments univariate_moments(const UnivariateTheta& th) {
  check_theta(th);
  UnivariateMoments m;
  m.Sigma_BB = th.var_truth + th.var_news1 + th.var_news2;
  m.Sigma_BD << th.var_truth, th.var_truth + th.var_news1;
  m.Sigma_DD << th.var_truth + th.var_noise1, th.var_truth,
                th.var_truth, th.var_truth + th.var_news1 + th.var_noise2;
  return m;
}

Eigen::Matrix<double, 5, 5> univariate_omega_covariance(const UnivariateTheta& th) {
  check_theta(th);
  const double n1 = th.var_news1;
  const double n2 = th.var_news2;
  Eigen::Matrix<double, 5, 5> S = Eigen::Matrix<double, 5, 5>::Zero();
  S(0, 0) = th.var_truth + n1 + n2;
  S(0, 1) = S(1, 0) = -n1 - n2;
  S(0, 2) = S(2, 0) = -n2;
  S(1, 1) = n1 + n2;
  S(1, 2) = S(2, 1) = n2;
  S(2, 2) = n2;
  S(3, 3) = th.var_noise1;
  S(4, 4) = th.var_noise2;
  return S;
}

UnivariateMoments univariate_moments_from_sigma(const UnivariateTheta& th) {
  const Eigen::Matrix<double, 5, 5> S = univariate_omega_covariance(th);
  Eigen::Matrix<double, 1, 5> B = Eigen::Matrix<double, 1, 5>::Zero();
  B(0) = 1.0;
  const Eigen::Matrix<double, 2, 5> D = loading_D();
  UnivariateMoments m;
  m.Sigma_BB = (B * S * B.transpose())(0, 0);
  m.Sigma_BD = B * S * D.transpose();
  m.Sigma_DD = D * S * D.transpose();
  return m;
}

StateSpaceModel build_univariate_model(const UnivariateTheta& th) {
  check_theta(th);
  StateSpaceModel model;
  model.layout = StateLayout{1, 1};
  model.Z = loading_D();
  model.T = Eigen::MatrixXd::Zero(5, 5);
  model.T(0, 0) = th.rho;
  Eigen::MatrixXd pattern(5, 5);
  pattern << 1,  1,  1, 0, 0,
             0, -1, -1, 0, 0,
             0,  0, -1, 0, 0,
             0,  0,  0, 1, 0,
             0,  0,  0, 0, 1;
  Eigen::VectorXd scales(5);
  scales << std::sqrt(th.var_truth), std::sqrt(th.var_news1), std::sqrt(th.var_news2), std::sqrt(th.var_noise1),
      std::sqrt(th.var_noise2);
  model.R = pattern * scales.asDiagonal();
  model.c = Eigen::VectorXd::Zero(5);
  model.a1 = Eigen::VectorXd::Zero(5);
  model.P1 = solve_discrete_lyapunov(model.T, model.RRt());
  return model;
}

RiccatiQuadratic riccati_coefficients(const UnivariateTheta& th) {
  const UnivariateMoments mom = univariate_moments(th);
  Eigen::LLT<Eigen::Matrix2d> llt(mom.Sigma_DD);
  if (llt.info() != Eigen::Success || mom.Sigma_DD.determinant() <= 0.0)
    throw DegenerateParameterError("riccati: Sigma_DD is not positive definite");
  const Eigen::Matrix2d W = llt.solve(Eigen::Matrix2d::Identity());
  const Eigen::Vector2d C = Eigen::Vector2d::Constant(th.rho);
  const double q = C.dot(W * C);                                  // tr(C C' W)
  const double u = (mom.Sigma_BD * W * C)(0, 0);                  // Sigma_BD W C
  const double schur = mom.Sigma_BB - (mom.Sigma_BD * W * mom.Sigma_BD.transpose())(0, 0);
  RiccatiQuadratic out;
  out.a = -q;
  out.b = (th.rho - u) * (th.rho - u) + q * schur - 1.0;
  out.c = schur;
  return out;
}

double riccati_quadratic(const UnivariateTheta& th) {
  const RiccatiQuadratic qd = riccati_coefficients(th);
  const double disc = qd.b * qd.b - 4.0 * qd.a * qd.c;
  if (!(disc > 0.0)) throw NumericalError("riccati: discriminant is not positive");
  const double denom = -qd.b + std::sqrt(disc);
  if (!(denom > 0.0)) throw NumericalError("riccati: no positive root");
  const double p = 2.0 * qd.c / denom;
  if (!(p > 0.0)) throw NumericalError("riccati: positivity conditions violated (p <= 0)");
  return p;
}

}  // namespace recon

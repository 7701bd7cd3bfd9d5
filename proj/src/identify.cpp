#include "recon/identify.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "recon/error.hpp"

namespace recon {

namespace {

long cross_params(CrossMode mode, int l0, int l1) {
  switch (mode) {
    case CrossMode::none: return 0;
    case CrossMode::contemporaneous: return std::min(l0, l1);
    case CrossMode::unrestricted: return static_cast<long>(l0) * l1;
  }
  return 0;
}

}  // namespace

MomentCount count_moments(int l, int p, const IdentifyFlags& flags) {
  return count_moments(l, l, p, flags);
}

MomentCount count_moments(int l0, int l1, int p, const IdentifyFlags& flags) {
  if (l0 < 1 || l1 < 1) throw InputError("count_moments: l must be >= 1");
  if (p < 1) throw InputError("count_moments: p must be >= 1");
  const long n = l0 + l1;  // observed columns

  MomentCount out;
  out.extension = l0 != l1;
  auto& b = out.breakdown;
  b.push_back({"contemporaneous cross moments", n * (n + 1) / 2, 0});
  b.push_back({"first-order autocorrelations", n, 0});
  b.push_back({"AR coefficient", 0, 1});
  b.push_back({"truth innovation scale", 0, 1});
  b.push_back({"news scales", 0, n});
  b.push_back({"noise scales", 0, n});
  if (p > 1) b.push_back({"higher-order AR lags", 2L * (p - 1), p - 1});
  if (flags.spillovers) b.push_back({"spillovers (T_S diagonal)", (l0 - 1) + (l1 - 1), 2 * n});
  if (flags.cross_news != CrossMode::none)
    b.push_back({"cross-series news (" + to_string(flags.cross_news) + ")", 0,
                 cross_params(flags.cross_news, l0, l1)});
  if (flags.cross_noise != CrossMode::none)
    b.push_back({"cross-series noise (" + to_string(flags.cross_noise) + ")", 0,
                 cross_params(flags.cross_noise, l0, l1)});

  for (const auto& term : b) {
    out.n_moments += term.moments;
    out.n_params += term.params;
  }
  out.order_condition_met = out.n_moments >= out.n_params;
  return out;
}

nlohmann::json to_json(const MomentCount& count) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : count.breakdown) terms.push_back({{"term", t.name}, {"moments", t.moments}, {"params", t.params}});
  return {{"n_moments", count.n_moments},
          {"n_params", count.n_params},
          {"order_condition_met", count.order_condition_met},
          {"unequal_release_extension", count.extension},
          {"breakdown", terms}};
}

std::string format_table(const MomentCount& count) {
  std::ostringstream out;
  out << std::left << std::setw(40) << "term" << std::right << std::setw(10) << "moments" << std::setw(10)
      << "params" << '\n';
  for (const auto& t : count.breakdown)
    out << std::left << std::setw(40) << t.name << std::right << std::setw(10) << t.moments << std::setw(10)
        << t.params << '\n';
  out << std::left << std::setw(40) << "total" << std::right << std::setw(10) << count.n_moments << std::setw(10)
      << count.n_params << '\n';
  out << "order condition " << (count.order_condition_met ? "met" : "NOT met") << " (" << count.n_moments
      << " moments vs " << count.n_params << " parameters)\n";
  if (count.extension) out << "note: unequal release counts per series extend the closed-form counts\n";
  return out.str();
}

InnovationRep innovation_representation(const UnivariateTheta& theta) {
  const UnivariateMoments mom = univariate_moments(theta);
  InnovationRep rep;
  rep.p = riccati_quadratic(theta);
  rep.A = theta.rho;
  rep.C = Eigen::Vector2d::Constant(theta.rho);
  rep.Sigma_a = rep.p * rep.C * rep.C.transpose() + mom.Sigma_DD;
  const Eigen::RowVector2d cross = rep.p * theta.rho * rep.C.transpose() + mom.Sigma_BD;
  rep.K = cross * rep.Sigma_a.inverse();
  return rep;
}

DeltaInterval admissible_delta(const UnivariateTheta& theta0) {
  const double p0 = riccati_quadratic(theta0);
  DeltaInterval out;
  out.lo = std::max(-theta0.var_news2, -p0);
  const double rho2 = theta0.rho * theta0.rho;
  out.hi = rho2 > 0.0 ? theta0.var_truth / rho2 : std::numeric_limits<double>::infinity();
  return out;
}

UnivariateTheta equivalent_theta(const UnivariateTheta& theta0, double delta) {
  if (!std::isfinite(delta)) throw InputError("equivalent_theta: delta must be finite");
  const DeltaInterval range = admissible_delta(theta0);
  if (!range.contains(delta)) {
    std::ostringstream msg;
    msg << "equivalent_theta: delta " << delta << " outside admissible interval [" << range.lo << ", " << range.hi
        << "]";
    throw InputError(msg.str());
  }
  UnivariateTheta theta1 = theta0;
  theta1.var_truth = std::max(0.0, theta0.var_truth - delta * theta0.rho * theta0.rho);
  theta1.var_news2 = std::max(0.0, theta0.var_news2 + delta);
  return theta1;
}

Eigen::Matrix<double, 5, 5> omega_covariance(const UnivariateTheta& theta) {
  return univariate_omega_covariance(theta);
}

Minimality check_minimality(const UnivariateTheta& theta) {
  const InnovationRep rep = innovation_representation(theta);
  Eigen::RowVectorXd ctrb(4);
  ctrb << rep.K, rep.A * rep.K;
  Eigen::VectorXd obsv(4);
  obsv << rep.C, rep.C * rep.A;

  const auto smallest_sv = [](const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues().minCoeff();
  };
  const auto full_rank = [](const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double top = sv.maxCoeff();
    if (!(top > 0.0)) return false;
    return (sv.array() > Minimality::kRankTolerance * top).count() == std::min(m.rows(), m.cols());
  };

  Minimality out;
  out.controllability_sv = smallest_sv(ctrb);
  out.observability_sv = smallest_sv(obsv);
  out.controllable = full_rank(ctrb);
  out.observable = full_rank(obsv);
  return out;
}

}  // namespace recon

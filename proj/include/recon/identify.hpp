#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "recon/config.hpp"
#include "recon/univariate.hpp"

namespace recon {

struct MomentTerm {
  std::string name;
  long moments = 0;
  long params = 0;
};

struct MomentCount {
  long n_moments = 0;
  long n_params = 0;
  bool order_condition_met = false;
  bool extension = false;  // unequal release counts: not covered by the closed forms
  std::vector<MomentTerm> breakdown;
};

struct IdentifyFlags {
  bool spillovers = false;
  CrossMode cross_news = CrossMode::none;
  CrossMode cross_noise = CrossMode::none;
};

/// Order-condition bookkeeping for the two-series model with l releases
/// each and an AR(p) truth.
MomentCount count_moments(int l, int p, const IdentifyFlags& flags = {});

/// Per-series release counts (l0, l1). Equal counts reproduce count_moments.
MomentCount count_moments(int l0, int l1, int p, const IdentifyFlags& flags);

nlohmann::json to_json(const MomentCount& count);
std::string format_table(const MomentCount& count);

struct InnovationRep {
  double A = 0.0;                                     // truth dynamics
  Eigen::RowVector2d K = Eigen::RowVector2d::Zero();  // steady gain
  Eigen::Vector2d C = Eigen::Vector2d::Zero();        // observation loading
  Eigen::Matrix2d Sigma_a = Eigen::Matrix2d::Zero();  // innovation covariance
  double p = 0.0;                                     // filtered truth variance
};

InnovationRep innovation_representation(const UnivariateTheta& theta);

struct DeltaInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double delta) const { return delta >= lo && delta <= hi; }
};

/// Deltas for which equivalent_theta yields nonnegative variances and
/// p0 + delta > 0 with a valid Riccati solution.
DeltaInterval admissible_delta(const UnivariateTheta& theta0);

/// Observationally equivalent point: var_truth - delta rho^2, var_news2 + delta.
UnivariateTheta equivalent_theta(const UnivariateTheta& theta0, double delta);

/// Structural covariance of the omega shocks; the equivalence family shifts
/// the truth/news cells by multiples of delta.
Eigen::Matrix<double, 5, 5> omega_covariance(const UnivariateTheta& theta);

struct Minimality {
  bool controllable = false;
  bool observable = false;
  double controllability_sv = 0.0;  // smallest singular value of [K, A K]
  double observability_sv = 0.0;    // smallest singular value of [C; C A]
  static constexpr double kRankTolerance = 1e-10;
};

Minimality check_minimality(const UnivariateTheta& theta);

}  // namespace recon

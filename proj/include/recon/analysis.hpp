#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "recon/sampler.hpp"

namespace recon {

struct DecompositionSeries {
  Quarter first_period;
  int series = 0;
  int first_release = 1;
  int last_release = 2;
  Eigen::VectorXd total;  // NaN where either release is unobserved
  Eigen::VectorXd news;
  Eigen::VectorXd noise;
  std::vector<bool> flagged;      // true where total is unobservable
  double max_identity_error = 0;  // over draws and unflagged periods
};

/// Total revision between two releases split into news and noise
/// components, averaged over state draws.
DecompositionSeries historical_decomposition(const PosteriorDraws& draws, int series,
                                             int first_release, int last_release);

struct ReconciledSeries {
  Quarter first_period;
  Eigen::VectorXd mean;
  Eigen::VectorXd lo90;
  Eigen::VectorXd hi90;
};

ReconciledSeries reconciled_series(const PosteriorDraws& draws);

struct DynamicsPair {
  double rho = 0.0;
  double sigma2 = 0.0;
};

enum class LagConvention { first_lag, sum_of_lags };

struct DynamicsSummary {
  std::vector<DynamicsPair> pairs;
  DynamicsPair mean;
};

/// One (rho, sigma^2) pair per kept draw; sigma^2 is the full one-step
/// innovation variance of the truth (sigma_e^2 plus all news variances).
DynamicsSummary dynamics_pairs(const PosteriorDraws& draws,
                               LagConvention convention = LagConvention::first_lag);

std::string decomposition_csv(const DecompositionSeries& series);
std::string reconciled_csv(const ReconciledSeries& series);
nlohmann::json to_json(const DynamicsSummary& dynamics);

}  // namespace recon

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "recon/ssm.hpp"
#include "recon/vintages.hpp"

namespace recon {

/// Data-independent part of the filter: covariance recursion, innovation
/// factorizations and gains for a given model and missingness pattern.
///
/// Each period keeps only the observed rows of Z. The innovation covariance
/// F_t = Z_t P_t Z_t' is inverted through Cholesky; when it is rank
/// deficient (redundant exact measurements), the null directions are split
/// off and F_t^+ is the pseudo-inverse on the remaining subspace. Data must
/// then have zero innovation along the null directions, otherwise the point
/// is degenerate.
struct FilterCovariances {
  std::vector<std::vector<int>> observed;   // observed columns per period
  std::vector<Eigen::MatrixXd> Zt;          // observed rows of Z
  std::vector<Eigen::MatrixXd> P_pred;      // P_t = Var(alpha_t | Y_{t-1})
  std::vector<Eigen::MatrixXd> P_filt;      // Var(alpha_t | Y_t)
  std::vector<Eigen::MatrixXd> F_inv;       // (pseudo-)inverse innovation covariance
  std::vector<Eigen::MatrixXd> gain;        // P_t Z_t' F_t^+ (filtered update gain)
  std::vector<Eigen::MatrixXd> null_basis;  // directions with zero innovation variance
  std::vector<double> log_det;              // log pseudo-determinant of F_t
  std::vector<int> rank;

  std::size_t periods() const { return observed.size(); }
};

FilterCovariances filter_covariances(const StateSpaceModel& model, const ObservationMatrix& obs);

struct FilterResult {
  double loglik = 0.0;
  std::vector<Eigen::VectorXd> predicted_mean;
  std::vector<Eigen::VectorXd> filtered_mean;
  std::vector<Eigen::VectorXd> innovations;  // dimension = observed rows that period
  FilterCovariances cov;

  std::size_t periods() const { return predicted_mean.size(); }
  const Eigen::MatrixXd& predicted_cov(std::size_t t) const { return cov.P_pred[t]; }
  const Eigen::MatrixXd& filtered_cov(std::size_t t) const { return cov.P_filt[t]; }
  const Eigen::MatrixXd& gain(std::size_t t) const { return cov.gain[t]; }
};

/// Exact Kalman filter with missing observations. Throws
/// DegenerateParameterError when data fall outside the model's support.
FilterResult kalman_filter(const StateSpaceModel& model, const ObservationMatrix& obs);

/// Mean pass over a precomputed covariance recursion. With `homogeneous`
/// the state intercept and initial mean are treated as zero.
FilterResult kalman_filter(const StateSpaceModel& model, const ObservationMatrix& obs,
                           FilterCovariances cov, bool homogeneous = false);

struct SmootherResult {
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::MatrixXd> cov;
};

/// Fixed-interval smoother (backward r/N recursion; no state covariance is inverted).
SmootherResult kalman_smoother(const StateSpaceModel& model, const FilterResult& filtered);

/// Smoothed means only, as a T x m matrix.
Eigen::MatrixXd smoothed_state_means(const StateSpaceModel& model, const FilterResult& filtered);

/// Writes per-period filtered/smoothed truth and innovations as CSV.
std::string filter_result_csv(const StateSpaceModel& model, const FilterResult& filtered,
                              const SmootherResult& smoothed, Quarter first_period);

struct SteadyState {
  Eigen::MatrixXd P_filtered;   // stationary Var(alpha_t | Y_t)
  Eigen::MatrixXd P_predicted;  // stationary Var(alpha_t | Y_{t-1})
  Eigen::MatrixXd K;            // m x n update gain
  Eigen::MatrixXd Sigma_a;      // n x n innovation covariance
  int iterations = 0;

  /// Filtered variance of the truth state (the scalar p of the univariate case).
  double p() const { return P_filtered(0, 0); }
};

/// Iterates the Riccati map from P1 until the max-abs change falls below
/// 1e-12 (at most 10,000 iterations). Every series/release is observed.
SteadyState steady_state(const StateSpaceModel& model);

struct ReleaseWeight {
  int series = 0;
  int release = 1;
  double weight = 0.0;
};

/// Row of the steady update gain for the truth state, one entry per column
/// of the observation vector.
std::vector<ReleaseWeight> kalman_gain_weights(const StateSpaceModel& model);

/// (A + B)^{-1} from A^{-1} for rank-one B.
Eigen::MatrixXd rank1_inverse_update(const Eigen::MatrixXd& A_inv, const Eigen::MatrixXd& B);

}  // namespace recon

#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "recon/config.hpp"

namespace recon {

/// Offsets of the state blocks. Truth occupies [0, p): current value then lags.
struct StateLayout {
  int p = 1;
  int l = 1;

  int truth() const { return 0; }
  int news(int series, int release) const { return p + series * l + (release - 1); }
  int noise(int series, int release) const { return p + 2 * l + series * l + (release - 1); }
  int state_dim() const { return p + 4 * l; }
  int shock_dim() const { return 1 + 4 * l; }
  /// Shock columns of R: e, news s0, news s1, noise s0, noise s1.
  int news_shock(int series, int release) const { return 1 + series * l + (release - 1); }
  int noise_shock(int series, int release) const { return 1 + 2 * l + series * l + (release - 1); }
  int column(int series, int release) const { return series * l + (release - 1); }
};

/// alpha_{t+1} = c + T alpha_t + R eta_t,  eta_t ~ N(0, I_r);  Y_t = Z alpha_t.
/// alpha_1 ~ N(a1, P1), the stationary law.
struct StateSpaceModel {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd T;
  Eigen::MatrixXd R;
  Eigen::VectorXd c;
  Eigen::VectorXd a1;
  Eigen::MatrixXd P1;
  StateLayout layout;

  int m() const { return static_cast<int>(T.rows()); }
  int r() const { return static_cast<int>(R.cols()); }
  int n() const { return static_cast<int>(Z.rows()); }
  Eigen::MatrixXd RRt() const { return R * R.transpose(); }
};

StateSpaceModel build_state_space(const ReconConfig& config, const ParamVector& params);

/// Solves P = T P T' + Q for stable T by doubling.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& T, const Eigen::MatrixXd& Q);

struct Simulation {
  Eigen::MatrixXd states;        // T x m
  Eigen::MatrixXd observations;  // T x 2l
  Eigen::MatrixXd shocks;        // T x r, standardized eta_t driving alpha_{t+1}
};

/// Draws a path from the stationary law. The Generator is taken by value so
/// concurrent simulations with distinct seeds never share state.
template <std::uniform_random_bit_generator Generator>
Simulation simulate(const StateSpaceModel& model, int horizon, Generator rng);

Simulation simulate(const StateSpaceModel& model, int horizon, std::uint64_t seed);

/// Draws alpha_1..alpha_T and Z alpha_t into preallocated outputs.
template <std::uniform_random_bit_generator Generator>
void simulate_into(const StateSpaceModel& model, Generator& rng, Eigen::MatrixXd& states,
                   Eigen::MatrixXd* shocks = nullptr);

/// Cholesky-like factor of a PSD matrix that tolerates rank deficiency.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& P);

}  // namespace recon

#include "recon/detail/simulate_impl.hpp"

#pragma once

#include <random>

#include "recon/error.hpp"

namespace recon {

template <std::uniform_random_bit_generator Generator>
void simulate_into(const StateSpaceModel& model, Generator& rng, Eigen::MatrixXd& states,
                   Eigen::MatrixXd* shocks) {
  const int m = model.m();
  const int r = model.r();
  const Eigen::Index horizon = states.rows();
  std::normal_distribution<double> normal(0.0, 1.0);

  const Eigen::MatrixXd L1 = psd_factor(model.P1);
  Eigen::VectorXd z(m);
  for (int i = 0; i < m; ++i) z(i) = normal(rng);
  Eigen::VectorXd alpha = model.a1 + L1 * z;

  Eigen::VectorXd eta(r);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    states.row(t) = alpha.transpose();
    for (int k = 0; k < r; ++k) eta(k) = normal(rng);
    if (shocks) shocks->row(t) = eta.transpose();
    alpha = model.c + model.T * alpha + model.R * eta;
  }
}

template <std::uniform_random_bit_generator Generator>
Simulation simulate(const StateSpaceModel& model, int horizon, Generator rng) {
  if (horizon < 1) throw InputError("simulate: horizon must be >= 1");
  if (!model.T.allFinite() || !model.R.allFinite() || !model.c.allFinite())
    throw InputError("simulate: non-finite parameter values");
  Simulation sim;
  sim.states.resize(horizon, model.m());
  sim.shocks.resize(horizon, model.r());
  simulate_into(model, rng, sim.states, &sim.shocks);
  sim.observations = sim.states * model.Z.transpose();
  return sim;
}

}  // namespace recon

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "recon/config.hpp"
#include "recon/filter.hpp"
#include "recon/ssm.hpp"
#include "recon/vintages.hpp"

namespace recon {

using Rng = std::mt19937_64;

struct McmcSettings {
  long iterations = 100000;
  long burn_in = 90000;
  long thin = 10;
  int chains = 1;
  std::uint64_t seed = 20180801;
  bool store_states = true;

  void validate() const;
  long kept_per_chain() const { return (iterations - burn_in) / thin; }
  long kept_total() const { return kept_per_chain() * chains; }
};

nlohmann::json to_json(const McmcSettings& settings);

struct InverseGammaPrior {
  double shape = 3.0;
  double rate = 2.0;
};

/// Priors: normal on AR coefficients, spillover coefficients and the mean;
/// inverse gamma on every structural variance. Restricted coefficients get
/// a near-dogmatic zero prior, restricted scales are held at exactly zero.
struct PriorSpec {
  static constexpr double kRestrictedVariance = 1e-10;

  Eigen::VectorXd rho_mean;
  Eigen::VectorXd rho_var;
  double mean_mean = 0.0;
  double mean_var = 100.0;
  double ts_mean = 0.0;
  double ts_var = 1.0;
  std::vector<InverseGammaPrior> scale_priors;  // 1 + 4l, shock order
  std::vector<bool> restricted_scales;          // 1 + 4l, shock order

  static PriorSpec defaults(const ReconConfig& config);
  void restrict_coefficient(int lag);  // 1-based AR lag
  void validate(const ReconConfig& config) const;
};

PriorSpec priors_from_json(const nlohmann::json& j, const ReconConfig& config);
nlohmann::json to_json(const PriorSpec& priors, const ReconConfig& config);
PriorSpec read_priors_file(const std::string& path, const ReconConfig& config);

/// Scales in structural shock order: sigma_e, news s0, news s1, noise s0, noise s1.
Eigen::VectorXd shock_scales(const ParamVector& params, const ReconConfig& config);
void set_shock_scales(ParamVector& params, const ReconConfig& config, const Eigen::VectorXd& scales);
std::vector<std::string> shock_names(const ReconConfig& config);

/// Structural shock contributions (sigma_k * eta_k) implied by a state path:
/// row t holds the shocks moving alpha_t to alpha_{t+1}. Recovered exactly by
/// inverting the unit loading pattern (news telescoping, noise states
/// directly, truth residual minus all news contributions).
Eigen::MatrixXd structural_contributions(const Eigen::MatrixXd& states, const ReconConfig& config,
                                         const ParamVector& params);

/// Repeated joint draws of alpha_1..alpha_T | Y for fixed parameters.
/// Uses the mean-correction simulation smoother: simulate (alpha+, Y+) from
/// the model, then alpha+ + E[alpha | Y] - E[alpha+ | Y+]. Only innovation
/// covariances are inverted, so rank-deficient R R' and the exact
/// measurement equation need no special treatment.
class StateSampler {
 public:
  StateSampler(const StateSpaceModel& model, const ObservationMatrix& obs);

  Eigen::MatrixXd draw(Rng& rng) const;
  const FilterResult& filtered() const { return filtered_; }
  const Eigen::MatrixXd& smoothed_mean() const { return smoothed_; }

 private:
  const StateSpaceModel& model_;
  const ObservationMatrix& obs_;
  FilterResult filtered_;
  Eigen::MatrixXd smoothed_;
};

/// One draw of the state path (T x m).
Eigen::MatrixXd draw_states(const StateSpaceModel& model, const ObservationMatrix& obs, Rng& rng);

/// AR coefficients (and spillover coefficients, and the mean when enabled)
/// from their Gaussian full conditional given the state path and scales.
/// Non-stationary draws are redrawn up to 1,000 times, then the previous
/// values are kept.
ParamVector draw_coefficients(const Eigen::MatrixXd& states, const ReconConfig& config,
                              const PriorSpec& priors, const ParamVector& current, Rng& rng);

/// Every free structural variance from its inverse-gamma full conditional.
ParamVector draw_scales(const Eigen::MatrixXd& states, const ReconConfig& config,
                        const PriorSpec& priors, const ParamVector& current, Rng& rng);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

struct PosteriorDraws {
  ReconConfig config;
  McmcSettings settings;
  std::vector<std::string> names;
  Eigen::MatrixXd theta;                // n_kept x theta_size, chain-major
  std::vector<Eigen::MatrixXd> states;  // n_kept entries of T x m (empty if not stored)
  std::vector<int> chain;               // chain index per kept draw
  ObservationMatrix observations;       // data as supplied (uncentered)
  double data_offset = 0.0;             // subtracted from data before sampling
  std::vector<ParamVector> initial;     // starting values per chain
  long rejected_sweeps = 0;

  long num_draws() const { return static_cast<long>(theta.rows()); }
  bool has_states() const { return !states.empty(); }
  ParamVector params(long draw) const;
  std::vector<ParameterSummary> summaries() const;
};

/// Starting values: rho from an AR(p) least-squares fit to the last
/// release of series 0; scales from revision moments.
ParamVector initial_params(const ReconConfig& config, const ObservationMatrix& centered,
                           const PriorSpec& priors);

/// Gibbs sampler: per sweep draw states, then coefficients, then scales.
PosteriorDraws run_gibbs(const ReconConfig& config, const ObservationMatrix& obs,
                         const PriorSpec& priors, const McmcSettings& settings);

/// Element k is the mean of the first k+1 kept draws of one parameter.
Eigen::VectorXd recursive_mean(const PosteriorDraws& draws, Eigen::Index parameter);
Eigen::VectorXd recursive_mean(const Eigen::VectorXd& values);

/// Linear-interpolation sample quantile (type 7).
double quantile(std::vector<double> values, double prob);

/// draws.csv (flat-theta columns), states.bin, observations.csv, config.json.
void write_posterior(const PosteriorDraws& draws, const std::string& dir);
PosteriorDraws read_posterior(const std::string& dir);
std::string draws_csv(const PosteriorDraws& draws);

}  // namespace recon

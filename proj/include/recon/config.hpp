#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace recon {

enum class CrossMode { none, contemporaneous, unrestricted };

std::string to_string(CrossMode mode);
CrossMode parse_cross_mode(const std::string& text);

/// Shape of the reconciliation model: two series with l releases each and an
/// AR(p) truth.
struct ReconConfig {
  int l = 2;
  int p = 1;
  bool center = false;  // estimate a common mean; otherwise data are demeaned
  bool spillovers = false;
  CrossMode cross_news = CrossMode::none;
  CrossMode cross_noise = CrossMode::none;
  bool restrict_final_news = true;
  /// Optional display labels per series and release; metadata only.
  std::array<std::vector<std::string>, 2> release_labels;

  void validate() const;
  int num_series_columns() const { return 2 * l; }
  std::string release_label(int series, int release) const;
};

ReconConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReconConfig& config);
ReconConfig read_config_file(const std::string& path);

/// Model parameters. Scales are standard deviations of the structural
/// shocks; the shock vector itself has identity covariance.
struct ParamVector {
  Eigen::VectorXd rho;          // p AR coefficients
  double sigma_e = 0.0;         // truth innovation scale
  Eigen::MatrixXd sigma_news;   // 2 x l, series x release
  Eigen::MatrixXd sigma_noise;  // 2 x l
  std::optional<double> mean;
  std::optional<Eigen::VectorXd> ts_diag;  // 4l spillover coefficients
  std::optional<Eigen::MatrixXd> psi;      // l x l cross-news loadings
  std::optional<Eigen::MatrixXd> phi;      // l x l cross-noise loadings

  /// Zero scales, rho = 0, optional blocks zero-filled per the config.
  static ParamVector zeros(const ReconConfig& config);
  void validate(const ReconConfig& config) const;
  /// sigma_e^2 plus every news variance: the one-step innovation variance of the truth.
  double truth_innovation_variance() const;
};

ParamVector params_from_json(const nlohmann::json& j, const ReconConfig& config);
nlohmann::json to_json(const ParamVector& params, const ReconConfig& config);
ParamVector read_params_file(const std::string& path, const ReconConfig& config);

/// Flat layout: rho(p), sigma_e, news s0 (l), news s1 (l), noise s0 (l),
/// noise s1 (l), then mean, ts_diag(4l), psi, phi when enabled. Contemporaneous
/// cross modes store the l diagonal entries, unrestricted ones l*l row-major.
Eigen::Index theta_size(const ReconConfig& config);
Eigen::VectorXd theta_pack(const ParamVector& params, const ReconConfig& config);
ParamVector theta_unpack(const Eigen::Ref<const Eigen::VectorXd>& flat, const ReconConfig& config);
std::vector<std::string> theta_names(const ReconConfig& config);

/// Spectral radius of the AR companion matrix.
double companion_spectral_radius(const Eigen::VectorXd& rho);
bool is_stationary(const Eigen::VectorXd& rho);

}  // namespace recon

#include "recon/sampler.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>

#include "recon/error.hpp"

namespace recon {

using nlohmann::json;

void McmcSettings::validate() const {
  if (iterations < 1) throw InputError("mcmc: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) throw InputError("mcmc: burn_in must satisfy 0 <= burn_in < iterations");
  if (thin < 1) throw InputError("mcmc: thin must be >= 1");
  if (chains < 1) throw InputError("mcmc: chains must be >= 1");
}

json to_json(const McmcSettings& s) {
  return {{"iterations", s.iterations}, {"burn_in", s.burn_in}, {"thin", s.thin},
          {"chains", s.chains},         {"seed", s.seed},       {"store_states", s.store_states}};
}

std::vector<std::string> shock_names(const ReconConfig& config) {
  const auto names = theta_names(config);
  // sigma_e, news, noise occupy positions p .. p + 4l in the flat layout.
  return {names.begin() + config.p, names.begin() + config.p + 1 + 4 * config.l};
}

Eigen::VectorXd shock_scales(const ParamVector& params, const ReconConfig& config) {
  const int l = config.l;
  Eigen::VectorXd s(1 + 4 * l);
  s(0) = params.sigma_e;
  for (int k = 0; k < 2; ++k) {
    s.segment(1 + k * l, l) = params.sigma_news.row(k).transpose();
    s.segment(1 + 2 * l + k * l, l) = params.sigma_noise.row(k).transpose();
  }
  return s;
}

void set_shock_scales(ParamVector& params, const ReconConfig& config, const Eigen::VectorXd& s) {
  const int l = config.l;
  if (s.size() != 1 + 4 * l) throw InputError("shock scale vector has wrong length");
  params.sigma_e = s(0);
  for (int k = 0; k < 2; ++k) {
    params.sigma_news.row(k) = s.segment(1 + k * l, l).transpose();
    params.sigma_noise.row(k) = s.segment(1 + 2 * l + k * l, l).transpose();
  }
}

PriorSpec PriorSpec::defaults(const ReconConfig& config) {
  PriorSpec p;
  p.rho_mean = Eigen::VectorXd::Zero(config.p);
  p.rho_var = Eigen::VectorXd::Constant(config.p, 100.0);
  const int r = 1 + 4 * config.l;
  p.scale_priors.assign(static_cast<std::size_t>(r), InverseGammaPrior{});
  p.restricted_scales.assign(static_cast<std::size_t>(r), false);
  if (config.restrict_final_news) {
    const StateLayout lay{config.p, config.l};
    for (int s = 0; s < 2; ++s) p.restricted_scales[static_cast<std::size_t>(lay.news_shock(s, config.l))] = true;
  }
  return p;
}

void PriorSpec::restrict_coefficient(int lag) {
  if (lag < 1 || lag > rho_mean.size()) throw InputError("restricted coefficient lag out of range");
  rho_mean(lag - 1) = 0.0;
  rho_var(lag - 1) = kRestrictedVariance;
}

void PriorSpec::validate(const ReconConfig& config) const {
  const auto r = static_cast<std::size_t>(1 + 4 * config.l);
  if (rho_mean.size() != config.p || rho_var.size() != config.p)
    throw InputError("priors: rho_mean/rho_var must have p entries");
  if ((rho_var.array() <= 0).any() || !(mean_var > 0) || !(ts_var > 0))
    throw InputError("priors: normal prior variances must be positive");
  if (scale_priors.size() != r || restricted_scales.size() != r)
    throw InputError("priors: one scale prior per structural shock required");
  for (const auto& ig : scale_priors)
    if (!(ig.shape > 0) || !(ig.rate > 0)) throw InputError("priors: inverse-gamma shape and rate must be positive");
}

PriorSpec priors_from_json(const json& j, const ReconConfig& config) {
  PriorSpec p = PriorSpec::defaults(config);
  if (!j.is_object()) throw InputError("priors: expected a JSON object");
  const auto names = shock_names(config);
  const auto shock_index = [&](const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InputError("priors: unknown scale '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
  };
  try {
    for (const auto& item : j.items()) {
      const std::string& key = item.key();
      const json& v = item.value();
      if (key == "rho_mean" || key == "rho_var") {
        const auto vals = v.get<std::vector<double>>();
        if (static_cast<int>(vals.size()) != config.p) throw InputError("priors: " + key + " must have p entries");
        Eigen::VectorXd& dst = key == "rho_mean" ? p.rho_mean : p.rho_var;
        dst = Eigen::Map<const Eigen::VectorXd>(vals.data(), config.p);
      } else if (key == "mean_mean") {
        p.mean_mean = v.get<double>();
      } else if (key == "mean_var") {
        p.mean_var = v.get<double>();
      } else if (key == "ts_mean") {
        p.ts_mean = v.get<double>();
      } else if (key == "ts_var") {
        p.ts_var = v.get<double>();
      } else if (key == "scale_shape" || key == "scale_rate") {
        for (auto& ig : p.scale_priors) (key == "scale_shape" ? ig.shape : ig.rate) = v.get<double>();
      } else if (key == "scales") {
        for (const auto& s : v.items()) {
          auto& ig = p.scale_priors[shock_index(s.key())];
          ig.shape = s.value().value("shape", ig.shape);
          ig.rate = s.value().value("rate", ig.rate);
        }
      } else if (key == "restricted_scales") {
        std::fill(p.restricted_scales.begin(), p.restricted_scales.end(), false);
        for (const auto& name : v.get<std::vector<std::string>>()) p.restricted_scales[shock_index(name)] = true;
      } else if (key == "restricted_coefficients") {
        for (const auto& name : v.get<std::vector<std::string>>()) {
          if (name.rfind("rho_", 0) != 0) throw InputError("priors: only rho_k coefficients can be restricted");
          p.restrict_coefficient(std::stoi(name.substr(4)));
        }
      } else {
        throw InputError("priors: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("priors: ") + e.what());
  }
  p.validate(config);
  return p;
}

json to_json(const PriorSpec& p, const ReconConfig& config) {
  const auto names = shock_names(config);
  json scales = json::object();
  json restricted = json::array();
  for (std::size_t k = 0; k < names.size(); ++k) {
    scales[names[k]] = {{"shape", p.scale_priors[k].shape}, {"rate", p.scale_priors[k].rate}};
    if (p.restricted_scales[k]) restricted.push_back(names[k]);
  }
  return {{"rho_mean", std::vector<double>(p.rho_mean.data(), p.rho_mean.data() + p.rho_mean.size())},
          {"rho_var", std::vector<double>(p.rho_var.data(), p.rho_var.data() + p.rho_var.size())},
          {"mean_mean", p.mean_mean},
          {"mean_var", p.mean_var},
          {"ts_mean", p.ts_mean},
          {"ts_var", p.ts_var},
          {"scales", scales},
          {"restricted_scales", restricted}};
}

PriorSpec read_priors_file(const std::string& path, const ReconConfig& config) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return priors_from_json(json::parse(in), config);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

namespace {

void require_estimable(const ReconConfig& config) {
  config.validate();
  if (config.cross_news != CrossMode::none || config.cross_noise != CrossMode::none)
    throw InputError("sampler: cross-series news/noise loadings are not estimable by the Gibbs sampler");
}

/// r x m map from a transition residual alpha_{t+1} - c - T alpha_t to the
/// structural contributions sigma_k eta_k. Rows of R carrying shocks (truth
/// and measurement-error rows) form an invertible unit-triangular pattern.
Eigen::MatrixXd contribution_map(const ReconConfig& config) {
  const StateLayout lay{config.p, config.l};
  const int m = lay.state_dim();
  const int r = lay.shock_dim();
  ReconConfig plain = config;
  plain.center = false;
  plain.spillovers = false;
  ParamVector unit = ParamVector::zeros(plain);
  unit.sigma_e = 1.0;
  unit.sigma_news.setOnes();
  unit.sigma_noise.setOnes();
  const Eigen::MatrixXd R = build_state_space(plain, unit).R;

  Eigen::MatrixXd select = Eigen::MatrixXd::Zero(r, m);
  select(0, 0) = 1.0;
  for (int k = 0; k < 4 * config.l; ++k) select(1 + k, config.p + k) = 1.0;
  const Eigen::MatrixXd square = select * R;
  return square.partialPivLu().solve(select);
}

Eigen::VectorXd normal_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

/// Draw from N(precision^{-1} rhs, precision^{-1}).
Eigen::VectorXd draw_gaussian_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& rhs, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError("coefficient posterior precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(rhs);
  const Eigen::VectorXd z = normal_vector(rhs.size(), rng);
  return mean + llt.matrixU().solve(z);
}

}  // namespace

Eigen::MatrixXd structural_contributions(const Eigen::MatrixXd& states, const ReconConfig& config,
                                         const ParamVector& params) {
  const StateSpaceModel model = build_state_space(config, params);
  if (states.cols() != model.m()) throw InputError("state path has wrong width for config");
  if (states.rows() < 2) throw InputError("state path needs at least two periods");
  const Eigen::MatrixXd M = contribution_map(config);
  const Eigen::Index n = states.rows() - 1;
  Eigen::MatrixXd residual = states.bottomRows(n) - states.topRows(n) * model.T.transpose();
  residual.rowwise() -= model.c.transpose();
  return residual * M.transpose();
}

// ---------------------------------------------------------------------------
// State draws

StateSampler::StateSampler(const StateSpaceModel& model, const ObservationMatrix& obs)
    : model_(model), obs_(obs), filtered_(kalman_filter(model, obs)) {
  smoothed_ = smoothed_state_means(model, filtered_);
}

Eigen::MatrixXd StateSampler::draw(Rng& rng) const {
  const auto& cov = filtered_.cov;
  const Eigen::Index T_len = obs_.rows();
  const int m = model_.m();

  Eigen::MatrixXd plus(T_len, m);
  simulate_into(model_, rng, plus);

  // Smoothed mean of the simulated path given its own observations.
  std::vector<Eigen::VectorXd> a_pred(static_cast<std::size_t>(T_len));
  std::vector<Eigen::VectorXd> innov(static_cast<std::size_t>(T_len));
  Eigen::VectorXd a = model_.a1;
  for (Eigen::Index t = 0; t < T_len; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    a_pred[ts] = a;
    const auto& Zt = cov.Zt[ts];
    if (Zt.rows() > 0) {
      Eigen::VectorXd v = Zt * (plus.row(t).transpose() - a);
      a.noalias() += cov.gain[ts] * v;
      innov[ts] = std::move(v);
    }
    a = model_.c + model_.T * a;
  }
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd Ttr(m);
  Eigen::MatrixXd out(T_len, m);
  for (Eigen::Index t = T_len; t-- > 0;) {
    const auto ts = static_cast<std::size_t>(t);
    Ttr.noalias() = model_.T.transpose() * r;
    const auto& Zt = cov.Zt[ts];
    r = Ttr;
    if (Zt.rows() > 0) {
      const Eigen::VectorXd u = cov.F_inv[ts] * innov[ts] - cov.gain[ts].transpose() * Ttr;
      r.noalias() += Zt.transpose() * u;
    }
    out.row(t).noalias() = (a_pred[ts] + cov.P_pred[ts] * r).transpose();
  }
  return plus - out + smoothed_;
}

Eigen::MatrixXd draw_states(const StateSpaceModel& model, const ObservationMatrix& obs, Rng& rng) {
  return StateSampler(model, obs).draw(rng);
}

// ---------------------------------------------------------------------------
// Parameter conditionals

ParamVector draw_coefficients(const Eigen::MatrixXd& states, const ReconConfig& config, const PriorSpec& priors,
                              const ParamVector& current, Rng& rng) {
  require_estimable(config);
  const int p = config.p;
  const int l = config.l;
  const StateLayout lay{p, l};
  if (states.cols() != lay.state_dim()) throw InputError("draw_coefficients: state path has wrong width");
  const Eigen::Index n = states.rows() - 1;
  if (n < p + 1) throw InputError("draw_coefficients: fewer than p + 1 effective periods");

  const Eigen::MatrixXd M = contribution_map(config);
  const Eigen::VectorXd scales = shock_scales(current, config);
  Eigen::VectorXd precision_k(scales.size());
  for (Eigen::Index k = 0; k < scales.size(); ++k)
    precision_k(k) = scales(k) > 0.0 ? 1.0 / (scales(k) * scales(k)) : 0.0;

  ParamVector next = current;
  const double mu = current.mean.value_or(0.0);
  Eigen::MatrixXd demeaned = states;
  demeaned.leftCols(p).array() -= mu;

  // Coefficients beta = (rho, ts). Transition residual is alpha_{t+1} - X_t beta
  // with X_t beta = diag(x_t) applied through columns of M.
  const int q = p + (config.spillovers ? 4 * l : 0);
  Eigen::MatrixXd M_sel(M.rows(), q);
  for (int j = 0; j < p; ++j) M_sel.col(j) = M.col(0);
  if (config.spillovers) M_sel.rightCols(4 * l) = M.middleCols(p, 4 * l);
  const Eigen::MatrixXd Q = M_sel.transpose() * precision_k.asDiagonal() * M_sel;
  const Eigen::MatrixXd B = M_sel.transpose() * precision_k.asDiagonal() * M;

  Eigen::MatrixXd X(n, q);
  X.leftCols(p) = demeaned.topRows(n).leftCols(p);
  if (config.spillovers) X.rightCols(4 * l) = demeaned.topRows(n).middleCols(p, 4 * l);
  const Eigen::MatrixXd Bh = demeaned.bottomRows(n) * B.transpose();  // n x q
  const Eigen::MatrixXd Sxx = X.transpose() * X;

  Eigen::MatrixXd precision = Sxx.cwiseProduct(Q);
  Eigen::VectorXd rhs = X.cwiseProduct(Bh).colwise().sum().transpose();
  for (int j = 0; j < p; ++j) {
    precision(j, j) += 1.0 / priors.rho_var(j);
    rhs(j) += priors.rho_mean(j) / priors.rho_var(j);
  }
  for (int k = p; k < q; ++k) {
    precision(k, k) += 1.0 / priors.ts_var;
    rhs(k) += priors.ts_mean / priors.ts_var;
  }

  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Eigen::VectorXd beta = draw_gaussian_canonical(precision, rhs, rng);
    const Eigen::VectorXd rho = beta.head(p);
    if (!is_stationary(rho)) continue;
    if (config.spillovers && (beta.tail(4 * l).array().abs() >= 1.0).any()) continue;
    next.rho = rho;
    if (config.spillovers) next.ts_diag = beta.tail(4 * l);
    break;
  }

  if (config.center) {
    // c_t = M (alpha_{t+1} - T alpha_t) - mu (1 - sum rho) M e_0
    const StateSpaceModel model = build_state_space(config, [&] {
      ParamVector tmp = next;
      tmp.mean = 0.0;
      return tmp;
    }());
    const Eigen::MatrixXd H = (states.bottomRows(n) - states.topRows(n) * model.T.transpose()) * M.transpose();
    const double loading = 1.0 - next.rho.sum();
    const Eigen::VectorXd g = loading * M.col(0);
    const double prec = 1.0 / priors.mean_var + static_cast<double>(n) * g.dot(precision_k.asDiagonal() * g);
    const double num = priors.mean_mean / priors.mean_var +
                       (H * precision_k.asDiagonal() * g).sum();
    std::normal_distribution<double> normal(0.0, 1.0);
    next.mean = num / prec + normal(rng) / std::sqrt(prec);
  }
  return next;
}

ParamVector draw_scales(const Eigen::MatrixXd& states, const ReconConfig& config, const PriorSpec& priors,
                        const ParamVector& current, Rng& rng) {
  require_estimable(config);
  priors.validate(config);
  const Eigen::MatrixXd contrib = structural_contributions(states, config, current);
  const double n = static_cast<double>(contrib.rows());
  Eigen::VectorXd scales(contrib.cols());
  for (Eigen::Index k = 0; k < contrib.cols(); ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (priors.restricted_scales[ks]) {
      scales(k) = 0.0;
      continue;
    }
    const double shape = priors.scale_priors[ks].shape + 0.5 * n;
    const double rate = priors.scale_priors[ks].rate + 0.5 * contrib.col(k).squaredNorm();
    std::gamma_distribution<double> gamma(shape, 1.0 / rate);
    scales(k) = std::sqrt(1.0 / gamma(rng));
  }
  ParamVector next = current;
  set_shock_scales(next, config, scales);
  return next;
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

std::vector<double> column_values(const ObservationMatrix& obs, Eigen::Index col) {
  std::vector<double> out;
  for (Eigen::Index t = 0; t < obs.rows(); ++t)
    if (obs.observed(t, col)) out.push_back(obs.values(t, col));
  return out;
}

double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size() - 1);
}

std::vector<double> column_difference(const ObservationMatrix& obs, Eigen::Index a, Eigen::Index b) {
  std::vector<double> out;
  for (Eigen::Index t = 0; t < obs.rows(); ++t)
    if (obs.observed(t, a) && obs.observed(t, b)) out.push_back(obs.values(t, a) - obs.values(t, b));
  return out;
}

}  // namespace

ParamVector initial_params(const ReconConfig& config, const ObservationMatrix& obs, const PriorSpec& priors) {
  const int p = config.p;
  const int l = config.l;
  ParamVector init = ParamVector::zeros(config);

  // AR(p) least squares on the most complete column, preferring series 0's last release.
  std::vector<Eigen::Index> order;
  for (Eigen::Index j = l - 1; j >= 0; --j) order.push_back(j);
  for (Eigen::Index j = 2 * l - 1; j >= l; --j) order.push_back(j);
  Eigen::Index col = order.front();
  for (Eigen::Index j : order) {
    if (obs.missing.col(j).count() < obs.missing.col(col).count()) col = j;
    if (static_cast<long>(column_values(obs, j).size()) >= 2L * (p + 2)) {
      col = j;
      break;
    }
  }
  const std::vector<double> level = column_values(obs, col);
  double var0 = sample_variance(level);
  if (!(var0 > 0.0)) var0 = 1.0;
  const double mean0 = level.empty() ? 0.0 : std::accumulate(level.begin(), level.end(), 0.0) / level.size();

  std::vector<Eigen::VectorXd> lags;
  std::vector<double> targets;
  for (Eigen::Index t = p; t < obs.rows(); ++t) {
    bool ok = obs.observed(t, col);
    Eigen::VectorXd x(p);
    for (int j = 1; j <= p && ok; ++j) {
      ok = obs.observed(t - j, col);
      if (ok) x(j - 1) = obs.values(t - j, col) - mean0;
    }
    if (!ok) continue;
    lags.push_back(x);
    targets.push_back(obs.values(t, col) - mean0);
  }
  double resid_var = var0;
  if (static_cast<int>(targets.size()) > p + 1) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(targets.size()), p);
    Eigen::VectorXd y(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t i = 0; i < targets.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = lags[i].transpose();
      y(static_cast<Eigen::Index>(i)) = targets[i];
    }
    init.rho = X.colPivHouseholderQr().solve(y);
    resid_var = (y - X * init.rho).squaredNorm() / static_cast<double>(targets.size() - p);
  } else {
    init.rho(0) = 0.3;
  }
  for (int k = 0; k < 100 && !is_stationary(init.rho); ++k) init.rho *= 0.9;
  if (!is_stationary(init.rho)) init.rho.setZero();
  for (int j = 0; j < p; ++j)
    if (priors.rho_var(j) <= PriorSpec::kRestrictedVariance) init.rho(j) = priors.rho_mean(j);
  if (!(resid_var > 0.0)) resid_var = var0;

  // Revision moments: half of each adjacent-release revision variance to news,
  // a quarter to noise.
  const double floor = 1e-3 * std::sqrt(var0);
  double news_total = 0.0;
  for (int s = 0; s < 2; ++s) {
    double mean_rev = 0.0;
    int counted = 0;
    for (int i = 1; i <= l; ++i) {
      double rev_var = 0.0;
      if (i < l) rev_var = sample_variance(column_difference(obs, s * l + i, s * l + i - 1));
      if (rev_var > 0.0) {
        mean_rev += rev_var;
        ++counted;
      } else {
        rev_var = 0.1 * resid_var;
      }
      init.sigma_news(s, i - 1) = std::max(floor, std::sqrt(0.5 * rev_var));
      init.sigma_noise(s, i - 1) = std::max(floor, std::sqrt(0.25 * rev_var));
    }
    if (counted > 0) init.sigma_noise(s, l - 1) = std::max(floor, std::sqrt(0.25 * mean_rev / counted));
  }
  Eigen::VectorXd scales = shock_scales(init, config);
  for (Eigen::Index k = 1; k < scales.size(); ++k)
    if (priors.restricted_scales[static_cast<std::size_t>(k)]) scales(k) = 0.0;
  for (Eigen::Index k = 1; k <= 2 * l; ++k) news_total += scales(k) * scales(k);
  scales(0) = priors.restricted_scales[0] ? 0.0 : std::sqrt(std::max(resid_var - news_total, 0.1 * resid_var));
  set_shock_scales(init, config, scales);
  if (config.center) init.mean = mean0;
  return init;
}

// ---------------------------------------------------------------------------
// Gibbs driver

namespace {

struct ChainOutput {
  Eigen::MatrixXd theta;
  std::vector<Eigen::MatrixXd> states;
  ParamVector initial;
  long rejected = 0;
};

Rng chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x5eedu};
  return Rng(seq);
}

ChainOutput run_chain(const ReconConfig& config, const ObservationMatrix& centered, const PriorSpec& priors,
                      const McmcSettings& settings, int chain) {
  Rng rng = chain_rng(settings.seed, chain);
  ChainOutput out;
  ParamVector params = initial_params(config, centered, priors);
  out.initial = params;

  const long kept = settings.kept_per_chain();
  out.theta.resize(kept, theta_size(config));
  if (settings.store_states) out.states.reserve(static_cast<std::size_t>(kept));
  const long max_consecutive = std::max(1L, settings.iterations / 10);

  Eigen::MatrixXd states;
  long consecutive = 0;
  long stored = 0;
  for (long it = 0; it < settings.iterations; ++it) {
    try {
      const StateSpaceModel model = build_state_space(config, params);
      states = StateSampler(model, centered).draw(rng);
      consecutive = 0;
    } catch (const DegenerateParameterError&) {
      ++out.rejected;
      if (states.size() == 0) throw NumericalError("sampler: degenerate starting values");
      if (++consecutive > max_consecutive) throw NumericalError("sampler: persistent degeneracy in state draws");
    }
    params = draw_coefficients(states, config, priors, params, rng);
    params = draw_scales(states, config, priors, params, rng);

    if (it >= settings.burn_in && (it - settings.burn_in + 1) % settings.thin == 0 && stored < kept) {
      out.theta.row(stored) = theta_pack(params, config).transpose();
      if (settings.store_states) out.states.push_back(states);
      ++stored;
    }
  }
  return out;
}

}  // namespace

PosteriorDraws run_gibbs(const ReconConfig& config, const ObservationMatrix& obs, const PriorSpec& priors,
                         const McmcSettings& settings) {
  require_estimable(config);
  priors.validate(config);
  settings.validate();
  if (obs.cols() != config.num_series_columns())
    throw InputError("data have " + std::to_string(obs.cols()) + " columns, config expects 2l = " +
                     std::to_string(config.num_series_columns()));
  if (obs.count_observed() == 0) throw InputError("sampler: all observations are missing");

  PosteriorDraws draws;
  draws.config = config;
  draws.settings = settings;
  draws.names = theta_names(config);
  draws.observations = obs;

  ObservationMatrix centered = obs;
  if (!config.center) {
    double sum = 0.0;
    for (Eigen::Index t = 0; t < obs.rows(); ++t)
      for (Eigen::Index j = 0; j < obs.cols(); ++j)
        if (obs.observed(t, j)) sum += obs.values(t, j);
    draws.data_offset = sum / static_cast<double>(obs.count_observed());
    centered.values.array() -= draws.data_offset;
  }

  std::vector<std::future<ChainOutput>> futures;
  for (int c = 0; c < settings.chains; ++c) {
    futures.push_back(std::async(std::launch::async, run_chain, std::cref(config), std::cref(centered),
                                 std::cref(priors), std::cref(settings), c));
  }
  std::vector<ChainOutput> outputs;
  for (auto& f : futures) outputs.push_back(f.get());

  const long per_chain = settings.kept_per_chain();
  draws.theta.resize(per_chain * settings.chains, theta_size(config));
  for (int c = 0; c < settings.chains; ++c) {
    auto& o = outputs[static_cast<std::size_t>(c)];
    draws.theta.middleRows(c * per_chain, per_chain) = o.theta;
    for (auto& s : o.states) draws.states.push_back(std::move(s));
    draws.chain.insert(draws.chain.end(), static_cast<std::size_t>(per_chain), c);
    draws.initial.push_back(o.initial);
    draws.rejected_sweeps += o.rejected;
  }
  return draws;
}

ParamVector PosteriorDraws::params(long draw) const { return theta_unpack(theta.row(draw).transpose(), config); }

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<ParameterSummary> PosteriorDraws::summaries() const {
  std::vector<ParameterSummary> out;
  for (Eigen::Index k = 0; k < theta.cols(); ++k) {
    const Eigen::VectorXd col = theta.col(k);
    std::vector<double> v(col.data(), col.data() + col.size());
    ParameterSummary s;
    s.name = names[static_cast<std::size_t>(k)];
    s.mean = col.mean();
    s.sd = col.size() > 1 ? std::sqrt((col.array() - s.mean).square().sum() / static_cast<double>(col.size() - 1)) : 0.0;
    s.q05 = quantile(v, 0.05);
    s.q50 = quantile(v, 0.50);
    s.q95 = quantile(v, 0.95);
    out.push_back(s);
  }
  return out;
}

Eigen::VectorXd recursive_mean(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw InputError("recursive_mean: no draws");
  Eigen::VectorXd out(values.size());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    sum += values(k);
    out(k) = sum / static_cast<double>(k + 1);
  }
  return out;
}

Eigen::VectorXd recursive_mean(const PosteriorDraws& draws, Eigen::Index parameter) {
  if (parameter < 0 || parameter >= draws.theta.cols()) throw InputError("recursive_mean: parameter index out of range");
  return recursive_mean(Eigen::VectorXd(draws.theta.col(parameter)));
}

}  // namespace recon

// ---------------------------------------------------------------------------
// Persistence

namespace recon {

namespace {

constexpr char kStatesMagic[8] = {'R', 'E', 'C', 'S', 'T', 'A', 'T', '1'};

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw InputError(where + ": cannot parse number '" + std::string(text) + "'");
  return v;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& buf, std::size_t& pos) {
  if (pos + 8 > buf.size()) throw InputError("states.bin: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

}  // namespace

std::string draws_csv(const PosteriorDraws& draws) {
  std::string out;
  for (std::size_t k = 0; k < draws.names.size(); ++k) {
    if (k) out += ',';
    out += draws.names[k];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < draws.theta.rows(); ++i) {
    for (Eigen::Index k = 0; k < draws.theta.cols(); ++k) {
      if (k) out += ',';
      out += format_double(draws.theta(i, k));
    }
    out += '\n';
  }
  return out;
}

void write_posterior(const PosteriorDraws& draws, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());

  write_file(root / "draws.csv", draws_csv(draws));
  write_file(root / "observations.csv", serialize_vintage_csv(to_panel(draws.observations, draws.config.l)));
  write_file(root / "config.json", to_json(draws.config).dump(2) + "\n");

  json initial = json::array();
  for (const auto& p : draws.initial) initial.push_back(to_json(p, draws.config));
  const json meta = {{"mcmc", to_json(draws.settings)},
                     {"chain", draws.chain},
                     {"data_offset", draws.data_offset},
                     {"first_period", draws.observations.first_period.str()},
                     {"periods", draws.observations.rows()},
                     {"rejected_sweeps", draws.rejected_sweeps},
                     {"initial_values", initial}};
  write_file(root / "posterior.json", meta.dump(2) + "\n");

  if (draws.has_states()) {
    const Eigen::Index T_len = draws.states.front().rows();
    const Eigen::Index m = draws.states.front().cols();
    std::string buf(kStatesMagic, sizeof kStatesMagic);
    put_u64(buf, draws.states.size());
    put_u64(buf, static_cast<std::uint64_t>(T_len));
    put_u64(buf, static_cast<std::uint64_t>(m));
    buf.reserve(buf.size() + draws.states.size() * static_cast<std::size_t>(T_len * m) * 8);
    for (const auto& s : draws.states)
      for (Eigen::Index t = 0; t < T_len; ++t)
        for (Eigen::Index j = 0; j < m; ++j) put_u64(buf, std::bit_cast<std::uint64_t>(s(t, j)));
    write_file(root / "states.bin", buf);
  } else {
    fs::remove(root / "states.bin", ec);
  }
}

PosteriorDraws read_posterior(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  PosteriorDraws draws;
  try {
    draws.config = config_from_json(json::parse(slurp(root / "config.json")));
    const json meta = json::parse(slurp(root / "posterior.json"));
    const json& mc = meta.at("mcmc");
    draws.settings.iterations = mc.at("iterations").get<long>();
    draws.settings.burn_in = mc.at("burn_in").get<long>();
    draws.settings.thin = mc.at("thin").get<long>();
    draws.settings.chains = mc.at("chains").get<int>();
    draws.settings.seed = mc.at("seed").get<std::uint64_t>();
    draws.settings.store_states = mc.at("store_states").get<bool>();
    draws.chain = meta.at("chain").get<std::vector<int>>();
    draws.data_offset = meta.at("data_offset").get<double>();
    draws.rejected_sweeps = meta.at("rejected_sweeps").get<long>();
    for (const auto& p : meta.at("initial_values")) draws.initial.push_back(params_from_json(p, draws.config));

    const Quarter first = Quarter::parse(meta.at("first_period").get<std::string>());
    const auto periods = meta.at("periods").get<Eigen::Index>();
    const VintagePanel panel = parse_vintage_csv(slurp(root / "observations.csv"));
    const int l = draws.config.l;
    Eigen::MatrixXd grid = Eigen::MatrixXd::Constant(periods, 2 * l, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [key, value] : panel.observations()) {
      const int t = key.period.index() - first.index();
      if (t < 0 || t >= periods || key.release > l) throw InputError("observations.csv does not match posterior.json");
      grid(t, key.series * l + key.release - 1) = value;
    }
    draws.observations = ObservationMatrix::from_values(std::move(grid), first);
  } catch (const json::exception& e) {
    throw InputError(dir + ": malformed posterior metadata: " + e.what());
  }

  draws.names = theta_names(draws.config);
  const std::string csv = slurp(root / "draws.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  std::string expected;
  for (std::size_t k = 0; k < draws.names.size(); ++k) expected += (k ? "," : "") + draws.names[k];
  if (line != expected) throw InputError("draws.csv: header does not match the configured theta layout");
  std::vector<double> flat;
  long rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::size_t start = 0;
    std::size_t fields = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view field(line.data() + start, (comma == std::string::npos ? line.size() : comma) - start);
      flat.push_back(parse_double(field, "draws.csv"));
      ++fields;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields != draws.names.size()) throw InputError("draws.csv: row " + std::to_string(rows + 1) + " has wrong width");
    ++rows;
  }
  draws.theta = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), rows, static_cast<Eigen::Index>(draws.names.size()));
  if (draws.chain.size() != static_cast<std::size_t>(rows)) throw InputError("posterior.json: chain labels do not match draws");

  if (fs::exists(root / "states.bin")) {
    const std::string buf = slurp(root / "states.bin");
    if (buf.size() < sizeof kStatesMagic || buf.compare(0, sizeof kStatesMagic, kStatesMagic, sizeof kStatesMagic) != 0)
      throw InputError("states.bin: bad magic");
    std::size_t pos = sizeof kStatesMagic;
    const auto n = get_u64(buf, pos);
    const auto T_len = static_cast<Eigen::Index>(get_u64(buf, pos));
    const auto m = static_cast<Eigen::Index>(get_u64(buf, pos));
    if (static_cast<long>(n) != rows || T_len != draws.observations.rows() ||
        m != StateLayout{draws.config.p, draws.config.l}.state_dim())
      throw InputError("states.bin: dimensions do not match the posterior");
    if (buf.size() != pos + n * static_cast<std::size_t>(T_len * m) * 8) throw InputError("states.bin: truncated");
    draws.states.reserve(n);
    for (std::uint64_t d = 0; d < n; ++d) {
      Eigen::MatrixXd s(T_len, m);
      for (Eigen::Index t = 0; t < T_len; ++t)
        for (Eigen::Index j = 0; j < m; ++j) s(t, j) = std::bit_cast<double>(get_u64(buf, pos));
      draws.states.push_back(std::move(s));
    }
  }
  return draws;
}

}  // namespace recon

#include "recon/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "recon/error.hpp"

namespace recon {

namespace {

void require_states(const PosteriorDraws& draws) {
  if (!draws.has_states()) throw InputError("posterior has no stored state draws");
}

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

DecompositionSeries historical_decomposition(const PosteriorDraws& draws, int series, int first_release,
                                             int last_release) {
  require_states(draws);
  const int l = draws.config.l;
  if (series != 0 && series != 1) throw InputError("series must be 0 or 1");
  if (first_release < 1 || first_release > l || last_release < 1 || last_release > l)
    throw InputError("release index outside 1.." + std::to_string(l));
  if (first_release == last_release) throw InputError("decomposition needs two distinct releases");

  const StateLayout lay{draws.config.p, l};
  const ObservationMatrix& obs = draws.observations;
  const Eigen::Index T_len = obs.rows();
  const Eigen::Index c_first = lay.column(series, first_release);
  const Eigen::Index c_last = lay.column(series, last_release);

  DecompositionSeries out;
  out.first_period = obs.first_period;
  out.series = series;
  out.first_release = first_release;
  out.last_release = last_release;
  out.total = Eigen::VectorXd::Constant(T_len, std::numeric_limits<double>::quiet_NaN());
  out.news = Eigen::VectorXd::Zero(T_len);
  out.noise = Eigen::VectorXd::Zero(T_len);
  out.flagged.assign(static_cast<std::size_t>(T_len), true);
  for (Eigen::Index t = 0; t < T_len; ++t) {
    if (obs.observed(t, c_first) && obs.observed(t, c_last)) {
      out.total(t) = obs.values(t, c_last) - obs.values(t, c_first);
      out.flagged[static_cast<std::size_t>(t)] = false;
    }
  }

  const int nu_last = lay.news(series, last_release), nu_first = lay.news(series, first_release);
  const int z_last = lay.noise(series, last_release), z_first = lay.noise(series, first_release);
  for (const auto& s : draws.states) {
    if (s.rows() != T_len) throw InputError("state draw length does not match observations");
    const Eigen::VectorXd news = s.col(nu_last) - s.col(nu_first);
    const Eigen::VectorXd noise = s.col(z_last) - s.col(z_first);
    out.news += news;
    out.noise += noise;
    for (Eigen::Index t = 0; t < T_len; ++t)
      if (!out.flagged[static_cast<std::size_t>(t)])
        out.max_identity_error = std::max(out.max_identity_error, std::abs(news(t) + noise(t) - out.total(t)));
  }
  const double n = static_cast<double>(draws.states.size());
  out.news /= n;
  out.noise /= n;
  return out;
}

ReconciledSeries reconciled_series(const PosteriorDraws& draws) {
  require_states(draws);
  const Eigen::Index T_len = draws.states.front().rows();
  const std::size_t n = draws.states.size();
  ReconciledSeries out;
  out.first_period = draws.observations.first_period;
  out.mean.resize(T_len);
  out.lo90.resize(T_len);
  out.hi90.resize(T_len);
  std::vector<double> path(n);
  for (Eigen::Index t = 0; t < T_len; ++t) {
    double sum = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      path[d] = draws.states[d](t, 0) + draws.data_offset;
      sum += path[d];
    }
    out.mean(t) = sum / static_cast<double>(n);
    out.lo90(t) = quantile(path, 0.05);
    out.hi90(t) = quantile(path, 0.95);
    // Rounding in the mean can push it a hair outside a collapsed band.
    out.mean(t) = std::clamp(out.mean(t), out.lo90(t), out.hi90(t));
  }
  return out;
}

DynamicsSummary dynamics_pairs(const PosteriorDraws& draws, LagConvention convention) {
  DynamicsSummary out;
  out.pairs.reserve(static_cast<std::size_t>(draws.num_draws()));
  for (long i = 0; i < draws.num_draws(); ++i) {
    const ParamVector p = draws.params(i);
    DynamicsPair pair;
    pair.rho = convention == LagConvention::first_lag ? p.rho(0) : p.rho.sum();
    pair.sigma2 = p.truth_innovation_variance();
    out.mean.rho += pair.rho;
    out.mean.sigma2 += pair.sigma2;
    out.pairs.push_back(pair);
  }
  if (!out.pairs.empty()) {
    out.mean.rho /= static_cast<double>(out.pairs.size());
    out.mean.sigma2 /= static_cast<double>(out.pairs.size());
  }
  return out;
}

std::string decomposition_csv(const DecompositionSeries& s) {
  std::string out = "period,total,news,noise,flag\n";
  for (Eigen::Index t = 0; t < s.news.size(); ++t) {
    out += Quarter::from_index(s.first_period.index() + static_cast<int>(t)).str();
    out += ',' + num(s.total(t)) + ',' + num(s.news(t)) + ',' + num(s.noise(t)) + ',';
    out += s.flagged[static_cast<std::size_t>(t)] ? "1\n" : "0\n";
  }
  return out;
}

std::string reconciled_csv(const ReconciledSeries& s) {
  std::string out = "period,mean,lo90,hi90\n";
  for (Eigen::Index t = 0; t < s.mean.size(); ++t) {
    out += Quarter::from_index(s.first_period.index() + static_cast<int>(t)).str();
    out += ',' + num(s.mean(t)) + ',' + num(s.lo90(t)) + ',' + num(s.hi90(t)) + '\n';
  }
  return out;
}

nlohmann::json to_json(const DynamicsSummary& d) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : d.pairs) pairs.push_back({p.rho, p.sigma2});
  return {{"sigma2_convention", "sigma_e^2 + sum of news variances"},
          {"posterior_mean", {{"rho", d.mean.rho}, {"sigma2", d.mean.sigma2}}},
          {"pairs", pairs}};
}

}  // namespace recon

// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "recon/analysis.hpp"
#include "recon/cli.hpp"
#include "recon/filter.hpp"
#include "recon/identify.hpp"
#include "recon/sampler.hpp"
#include "support/oracles.hpp"

using namespace recon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome moment_counts() {
  const auto start = std::chrono::steady_clock::now();
  const long expected[4][2] = {{5, 6}, {14, 10}, {27, 14}, {44, 18}};
  bool ok = true;
  std::string detail;
  for (int l = 1; l <= 4; ++l) {
    const auto c = count_moments(l, 1);
    ok = ok && c.n_moments == expected[l - 1][0] && c.n_params == expected[l - 1][1];
    detail += "l=" + std::to_string(l) + ":(" + std::to_string(c.n_moments) + "," + std::to_string(c.n_params) + ") ";
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {ok && ms < 1.0, detail + "in " + fmt(ms) + " ms"};
}

Outcome filter_vs_dense() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    ReconConfig c;
    c.p = 1 + rep % 2;
    const ParamVector p = oracle::random_params(c, rng);
    const auto model = build_state_space(c, p);
    Eigen::MatrixXd y = simulate(model, 6, static_cast<std::uint64_t>(rep)).observations;
    std::bernoulli_distribution drop(0.2);
    if (rep >= 25)
      for (Eigen::Index i = 0; i < y.size(); ++i)
        if (drop(rng)) y(i) = std::nan("");
    const auto obs = ObservationMatrix::from_values(y);
    worst = std::max(worst, std::abs(kalman_filter(model, obs).loglik - oracle::dense_loglik(model, obs)));
  }
  return {worst < 1e-8, "max |loglik - dense| = " + fmt(worst) + " over 50 models"};
}

Outcome riccati() {
  UnivariateTheta ex;
  ex.rho = 0.0;
  ex.var_truth = 1.0;
  ex.var_noise1 = ex.var_noise2 = 1.0;
  const double p_quad = riccati_quadratic(ex);
  const double p_iter = oracle::riccati_fixed_point(ex);
  bool ok = std::abs(p_quad - 1.0 / 3.0) < 1e-12 && std::abs(p_iter - 1.0 / 3.0) < 1e-12;
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto th = oracle::random_univariate(rng);
    worst = std::max(worst, std::abs(riccati_quadratic(th) - oracle::riccati_fixed_point(th)));
  }
  ok = ok && worst < 1e-8;
  return {ok, "example p = " + fmt(p_quad) + " / " + fmt(p_iter) + ", max |quad - iter| = " + fmt(worst)};
}

Outcome equivalence() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto th0 = oracle::random_univariate(rng);
    const auto range = admissible_delta(th0);
    const auto r0 = innovation_representation(th0);
    const double hi = std::isfinite(range.hi) ? range.hi : range.lo + 10.0;
    for (int k = 0; k < 5; ++k) {
      const double delta = range.lo + (0.02 + 0.96 * u(rng)) * (hi - range.lo);
      const auto r1 = innovation_representation(equivalent_theta(th0, delta));
      worst = std::max({worst, std::abs(r0.A - r1.A), (r0.K - r1.K).cwiseAbs().maxCoeff(),
                        (r0.C - r1.C).cwiseAbs().maxCoeff(), (r0.Sigma_a - r1.Sigma_a).cwiseAbs().maxCoeff()});
    }
  }
  // Under the final-news restriction, scan the delta grid for other members with zero final news variance.
  long members = 0;
  std::mt19937_64 rng2(304);
  for (int rep = 0; rep < 10; ++rep) {
    auto th = oracle::random_univariate(rng2);
    th.var_news2 = 0.0;
    const auto range = admissible_delta(th);
    for (long i = -20000; i <= 20000; ++i) {
      const double delta = 1e-4 * static_cast<double>(i);
      if (!range.contains(delta)) continue;
      if (equivalent_theta(th, delta).var_news2 == 0.0) ++members;
    }
  }
  const bool ok = worst < 1e-8 && members == 10;
  return {ok, "max representation gap " + fmt(worst) + "; restricted members found " + std::to_string(members) +
                  " (only delta = 0, 10 expected)"};
}

Outcome smoother_consistency() {
  std::mt19937_64 gen(404);
  ReconConfig c;
  const ParamVector p = oracle::random_params(c, gen);
  const auto model = build_state_space(c, p);
  Eigen::MatrixXd y = simulate(model, 50, 7).observations;
  y.col(2).head(50).setConstant(std::nan(""));
  y(10, 0) = std::nan("");
  const auto obs = ObservationMatrix::from_values(y);
  const StateSampler sampler(model, obs);
  Rng rng(405);
  const int n = 5000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(50, model.m());
  Eigen::MatrixXd sq = sum;
  for (int k = 0; k < n; ++k) {
    const Eigen::MatrixXd d = sampler.draw(rng);
    sum += d;
    sq += d.cwiseProduct(d);
  }
  const Eigen::MatrixXd mean = sum / n;
  const Eigen::MatrixXd var = (sq / n - mean.cwiseProduct(mean)) * (double(n) / (n - 1));
  long within = 0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double se = std::sqrt(std::max(var(i), 0.0) / n);
    const double diff = std::abs(mean(i) - sampler.smoothed_mean()(i));
    within += se > 1e-12 ? diff <= 3.0 * se : diff <= 1e-9;
  }
  const double frac = static_cast<double>(within) / static_cast<double>(mean.size());
  return {frac >= 0.99, fmt(100.0 * frac) + "% of " + std::to_string(mean.size()) + " components within 3 MC s.e."};
}

ParamVector recovery_truth(const ReconConfig& c) {
  ParamVector p = ParamVector::zeros(c);
  p.rho(0) = 0.5;
  p.sigma_e = 1.0;
  p.sigma_news.col(0) << 0.6, 0.5;
  p.sigma_noise << 0.5, 0.3, 0.8, 0.4;
  return p;
}

double g_identity_error = 0.0;
int g_identity_runs = 0;

void record_identity(const PosteriorDraws& draws) {
  for (int s = 0; s < 2; ++s) {
    const auto d = historical_decomposition(draws, s, 1, draws.config.l);
    g_identity_error = std::max(g_identity_error, d.max_identity_error);
  }
  ++g_identity_runs;
}

Outcome recovery() {
  ReconConfig c;
  const ParamVector truth = recovery_truth(c);
  const Eigen::VectorXd theta_true = theta_pack(truth, c);
  const auto names = theta_names(c);
  const auto model = build_state_space(c, truth);
  const int reps = 20;
  McmcSettings s;
  s.iterations = 20000;
  s.burn_in = 10000;
  s.thin = 10;
  PriorSpec priors = PriorSpec::defaults(c);
  for (auto& q : priors.scale_priors) q = {0.01, 0.01};  // diffuse

  Eigen::VectorXi covered = Eigen::VectorXi::Zero(theta_true.size());
  Eigen::VectorXd rel_err = Eigen::VectorXd::Zero(theta_true.size());
  for (int r = 0; r < reps; ++r) {
    const auto sim = simulate(model, 300, 1000 + static_cast<std::uint64_t>(r));
    Eigen::MatrixXd y = sim.observations;
    s.seed = 5000 + static_cast<std::uint64_t>(r);
    const auto draws = run_gibbs(c, ObservationMatrix::from_values(y), priors, s);
    record_identity(draws);
    const auto sums = draws.summaries();
    for (Eigen::Index k = 0; k < theta_true.size(); ++k) {
      const auto& sm = sums[static_cast<std::size_t>(k)];
      covered(k) += sm.q05 <= theta_true(k) && theta_true(k) <= sm.q95;
      if (theta_true(k) != 0.0) rel_err(k) += std::abs(sm.mean - theta_true(k)) / std::abs(theta_true(k)) / reps;
    }
  }
  bool ok = true;
  std::ostringstream detail;
  double worst_rel = 0.0;
  for (Eigen::Index k = 0; k < theta_true.size(); ++k) {
    ok = ok && covered(k) >= 16;
    if (theta_true(k) != 0.0) worst_rel = std::max(worst_rel, rel_err(k));
    detail << names[static_cast<std::size_t>(k)] << " " << covered(k) << "/" << reps;
    if (theta_true(k) != 0.0) detail << " (" << fmt(100.0 * rel_err(k)) << "%)";
    detail << "; ";
  }
  ok = ok && worst_rel <= 0.25;
  return {ok, "coverage (mean rel. error): " + detail.str() + "worst mean rel. error " + fmt(100.0 * worst_rel) + "%"};
}

Outcome decomposition_identity() {
  ReconConfig c;
  c.l = 3;
  c.p = 2;
  std::mt19937_64 gen(606);
  const auto model = build_state_space(c, oracle::random_params(c, gen));
  Eigen::MatrixXd y = simulate(model, 120, 8).observations;
  for (Eigen::Index t = 3; t < 120; t += 4) y(t, 3) = std::nan("");
  y.bottomRows(2).rightCols(4).setConstant(std::nan(""));
  McmcSettings s;
  s.iterations = 2000;
  s.burn_in = 1000;
  s.thin = 10;
  s.chains = 2;
  record_identity(run_gibbs(c, ObservationMatrix::from_values(y), PriorSpec::defaults(c), s));
  return {g_identity_error < 1e-6, "max |news + noise - total| = " + fmt(g_identity_error) + " over " +
                                       std::to_string(g_identity_runs) + " estimated runs"};
}

Outcome missing_exactness() {
  std::mt19937_64 gen(707);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    ReconConfig c;
    c.p = 1 + rep % 2;
    const auto model = build_state_space(c, oracle::random_params(c, gen));
    const Eigen::MatrixXd y = simulate(model, 100, static_cast<std::uint64_t>(rep)).observations;
    const int col = c.l;  // series 1, release 1
    Eigen::MatrixXd masked = y;
    masked.col(col).setConstant(std::nan(""));
    const double a = kalman_filter(model, ObservationMatrix::from_values(masked)).loglik;

    StateSpaceModel reduced = model;
    Eigen::MatrixXd Z(model.n() - 1, model.m());
    Eigen::MatrixXd y_red(y.rows(), model.n() - 1);
    for (int j = 0, k = 0; j < model.n(); ++j) {
      if (j == col) continue;
      Z.row(k) = model.Z.row(j);
      y_red.col(k++) = y.col(j);
    }
    reduced.Z = Z;
    const double b = kalman_filter(reduced, ObservationMatrix::from_values(y_red)).loglik;
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
  }
  return {worst <= 4 * std::numeric_limits<double>::epsilon(), "max relative difference " + fmt(worst) + " over 10 models"};
}

Outcome gain_patterns() {
  ReconConfig c;
  c.l = 4;
  c.restrict_final_news = false;
  ParamVector news = ParamVector::zeros(c);
  news.rho(0) = 0.5;
  news.sigma_e = 0.5;
  news.sigma_news.row(0) << 0.8, 0.6, 0.5, 0.05;
  news.sigma_news.row(1) << 0.6, 0.5, 0.4, 0.3;
  const auto wn = kalman_gain_weights(build_state_space(c, news));
  double final0 = 0.0, other = -1e300, total = 0.0;
  for (const auto& w : wn) {
    total += w.weight;
    if (w.series == 0 && w.release == c.l) final0 = w.weight;
    else other = std::max(other, w.weight);
  }

  ReconConfig cm;
  cm.l = 4;
  ParamVector mixed = ParamVector::zeros(cm);
  mixed.rho(0) = 0.5;
  mixed.sigma_e = 1.0;
  mixed.sigma_news.row(0) << 0.6, 0.4, 0.3, 0.0;
  mixed.sigma_news.row(1) << 0.5, 0.4, 0.3, 0.0;
  mixed.sigma_noise.row(0) << 0.7, 0.5, 0.4, 0.3;
  mixed.sigma_noise.row(1) << 0.8, 0.6, 0.5, 0.4;
  const auto wm = kalman_gain_weights(build_state_space(cm, mixed));
  double max_mixed = -1e300;
  for (const auto& w : wm) max_mixed = std::max(max_mixed, w.weight);

  const bool ok = final0 > other && max_mixed <= 0.9;
  return {ok, "news-only: final release of series 0 weight " + fmt(final0) + " vs max other " + fmt(other) +
                  "; mixed: max weight " + fmt(max_mixed) +
                  " (published Table 1 values need the original vintage data; pattern check only)"};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(a)) files.push_back(e.path().filename().string());
  std::size_t count_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++count_b;
  if (files.size() != count_b) {
    why = "file sets differ";
    return false;
  }
  for (const auto& f : files) {
    if (sha256_file((a / f).string()) != sha256_file((b / f).string())) {
      why = f + " differs";
      return false;
    }
  }
  return true;
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "recon_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream(root / "config.json") << R"({"l": 2, "p": 1})";
    std::ofstream(root / "params.json")
        << R"({"rho": [0.5], "sigma_e": 1.0, "sigma_news": [[0.6, 0.0], [0.5, 0.0]], "sigma_noise": [[0.5, 0.3], [0.8, 0.4]]})";
  }
  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  std::ostringstream sink;
  const auto cfg = (root / "config.json").string();
  const auto prm = (root / "params.json").string();
  bool ok = true;
  std::string why;
  for (const char* run : {"a", "b"}) {
    ok = ok && run_cli({"simulate", "--config", cfg, "--params", prm, "--horizon", "120", "--seed", "42", "--out",
                        (root / (std::string("sim_") + run)).string()},
                       sink, sink) == kExitOk;
  }
  ok = ok && same_tree(root / "sim_a", root / "sim_b", why);
  const auto data = (root / "sim_a" / "vintages.csv").string();
  for (const char* run : {"a", "b"}) {
    ok = ok && run_cli({"estimate", "--config", cfg, "--data", data, "--iterations", "1000", "--burn-in", "500",
                        "--thin", "5", "--chains", "2", "--seed", "9", "--out",
                        (root / (std::string("est_") + run)).string()},
                       sink, sink) == kExitOk;
  }
  ok = ok && same_tree(root / "est_a", root / "est_b", why);
  unsetenv("SOURCE_DATE_EPOCH");
  fs::remove_all(root);
  return {ok, ok ? "simulate and estimate outputs byte-identical (SHA-256) across two runs" : "mismatch: " + why};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  // Recovery (6) runs before the identity check (7), which also audits its runs.
  const std::vector<Criterion> criteria{
      {1, "moment counts", moment_counts},
      {2, "filter vs dense Gaussian", filter_vs_dense},
      {3, "Riccati closed form vs fixed point", riccati},
      {4, "observational equivalence", equivalence},
      {5, "simulation smoother consistency", smoother_consistency},
      {6, "parameter recovery", recovery},
      {7, "decomposition identity", decomposition_identity},
      {8, "missing-data exactness", missing_exactness},
      {9, "release weight patterns", gain_patterns},
      {10, "reproducibility", reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << ": " << o.detail << " [" << fmt(secs)
              << " s]" << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <random>
#include <set>
#include <string>

#include "recon/error.hpp"
#include "recon/filter.hpp"
#include "recon/identify.hpp"
#include "support/oracles.hpp"

using namespace recon;

namespace {

// Literal enumeration of moment and parameter names.
std::pair<long, long> enumerate_counts(int l, int p, bool spillovers) {
  std::vector<std::string> obs;
  for (int s = 0; s < 2; ++s)
    for (int i = 1; i <= l; ++i) obs.push_back("y" + std::to_string(s) + "_" + std::to_string(i));
  std::set<std::string> moments, params;
  for (std::size_t a = 0; a < obs.size(); ++a) {
    for (std::size_t b = a; b < obs.size(); ++b) moments.insert("cov(" + obs[a] + "," + obs[b] + ")");
    moments.insert("acov1(" + obs[a] + ")");
  }
  for (int k = 2; k <= p; ++k)
    for (int s = 0; s < 2; ++s) moments.insert("acov" + std::to_string(k) + "(series" + std::to_string(s) + ")");
  if (spillovers)
    for (int s = 0; s < 2; ++s)
      for (int i = 1; i < l; ++i) moments.insert("revision_acov(" + std::to_string(s) + "," + std::to_string(i) + ")");

  for (int k = 1; k <= p; ++k) params.insert("rho" + std::to_string(k));
  params.insert("sigma_e");
  for (const auto& o : obs) {
    params.insert("news_" + o);
    params.insert("noise_" + o);
    if (spillovers) {
      params.insert("ts_news_" + o);
      params.insert("ts_noise_" + o);
    }
  }
  return {static_cast<long>(moments.size()), static_cast<long>(params.size())};
}

}  // namespace

TEST_CASE("moment counts for the base model") {
  const std::vector<std::pair<long, long>> expected{{5, 6}, {14, 10}, {27, 14}, {44, 18}};
  for (int l = 1; l <= 4; ++l) {
    const auto c = count_moments(l, 1);
    CHECK(c.n_moments == expected[static_cast<std::size_t>(l - 1)].first);
    CHECK(c.n_params == expected[static_cast<std::size_t>(l - 1)].second);
    CHECK(c.order_condition_met == (l >= 2));
  }
}

TEST_CASE("spillover counts") {
  const auto c = count_moments(2, 1, {true, CrossMode::none, CrossMode::none});
  CHECK(c.n_moments == 16);
  CHECK(c.n_params == 18);
  CHECK_FALSE(c.order_condition_met);
}

TEST_CASE("closed forms equal literal enumeration") {
  for (int l = 1; l <= 6; ++l)
    for (int p = 1; p <= 4; ++p)
      for (bool sp : {false, true}) {
        const auto c = count_moments(l, p, {sp, CrossMode::none, CrossMode::none});
        const auto lit = enumerate_counts(l, p, sp);
        CHECK(c.n_moments == lit.first);
        CHECK(c.n_params == lit.second);
        long m = 0, q = 0;
        for (const auto& t : c.breakdown) {
          m += t.moments;
          q += t.params;
        }
        CHECK(m == c.n_moments);
        CHECK(q == c.n_params);
      }
}

TEST_CASE("cross modes add parameters only") {
  const auto base = count_moments(3, 1);
  const auto contemp = count_moments(3, 1, {false, CrossMode::contemporaneous, CrossMode::contemporaneous});
  const auto unres = count_moments(3, 1, {false, CrossMode::unrestricted, CrossMode::none});
  CHECK(contemp.n_moments == base.n_moments);
  CHECK(contemp.n_params == base.n_params + 2 * 3);
  CHECK(unres.n_params == base.n_params + 9);
}

TEST_CASE("unequal release counts are flagged") {
  const auto c = count_moments(4, 3, 1, {});
  CHECK(c.extension);
  CHECK(c.n_moments == 7 * 8 / 2 + 7);
  CHECK(c.n_params == 2 + 14);
  CHECK_FALSE(count_moments(3, 3, 1, {}).extension);
  CHECK_THROWS_AS(count_moments(0, 1), InputError);
}

TEST_CASE("innovation representation worked example") {
  UnivariateTheta th;
  th.rho = 0.0;
  const auto rep = innovation_representation(th);
  Eigen::Matrix2d dd;
  dd << 2, 1, 1, 2;
  CHECK((rep.Sigma_a - dd).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(rep.K(0) == doctest::Approx(1.0 / 3.0));
  CHECK(rep.K(1) == doctest::Approx(1.0 / 3.0));
  CHECK(rep.p == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("exchangeable releases get equal gains") {
  UnivariateTheta th;
  th.rho = 0.7;
  th.var_noise1 = th.var_noise2 = 0.6;
  const auto rep = innovation_representation(th);
  CHECK(rep.K(0) == doctest::Approx(rep.K(1)).epsilon(1e-12));
}

TEST_CASE("representation matches the per-period filter gain") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 10; ++rep) {
    const auto th = oracle::random_univariate(rng);
    const auto ir = innovation_representation(th);
    const auto model = build_univariate_model(th);
    const auto cov = filter_covariances(model, ObservationMatrix::from_values(Eigen::MatrixXd::Zero(501, 2)));
    CHECK((cov.gain[500].row(0) - ir.K).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(cov.P_filt[500](0, 0) - ir.p) < 1e-8);
  }
}

TEST_CASE("equivalent parameters share the innovation representation") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto th0 = oracle::random_univariate(rng);
    const auto range = admissible_delta(th0);
    const auto r0 = innovation_representation(th0);
    for (double frac : {0.0, 0.1, 0.5, 0.9}) {
      const double hi = std::isfinite(range.hi) ? range.hi : range.lo + 10.0;
      const double delta = range.lo + frac * (hi - range.lo);
      const auto th1 = equivalent_theta(th0, delta);
      const auto r1 = innovation_representation(th1);
      CHECK(std::abs(r0.A - r1.A) < 1e-8);
      CHECK((r0.K - r1.K).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((r0.C - r1.C).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((r0.Sigma_a - r1.Sigma_a).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(std::abs(r1.p - r0.p - delta) < 1e-8);
    }
  }
}

TEST_CASE("delta zero is the identity and out-of-range deltas fail") {
  UnivariateTheta th;
  th.rho = 0.5;
  th.var_news2 = 0.3;
  CHECK(equivalent_theta(th, 0.0) == th);
  const auto range = admissible_delta(th);
  CHECK_THROWS_AS(equivalent_theta(th, range.lo - 0.1), InputError);
  CHECK_THROWS_AS(equivalent_theta(th, range.hi + 0.1), InputError);
}

TEST_CASE("omega covariance shifts only the truth and news cells") {
  UnivariateTheta th;
  th.rho = 0.6;
  th.var_truth = 1.2;
  th.var_news1 = 0.3;
  th.var_news2 = 0.4;
  th.var_noise1 = 0.5;
  th.var_noise2 = 0.7;
  const double delta = 0.2;
  const Eigen::Matrix<double, 5, 5> diff = omega_covariance(equivalent_theta(th, delta)) - omega_covariance(th);
  Eigen::Matrix<double, 5, 5> expected = Eigen::Matrix<double, 5, 5>::Zero();
  const double r2 = th.rho * th.rho;
  expected.topLeftCorner<3, 3>() << 1 - r2, -1, -1, -1, 1, 1, -1, 1, 1;
  expected *= delta;
  CHECK((diff - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("restricting the final news variance pins delta at zero") {
  UnivariateTheta th;
  th.rho = 0.5;
  th.var_news2 = 0.0;
  const auto range = admissible_delta(th);
  int admissible_nonzero = 0;
  for (double d = -1.0; d <= 1.0 + 1e-12; d += 1e-4) {
    if (!range.contains(d)) continue;
    if (equivalent_theta(th, d).var_news2 == 0.0 && std::abs(d) > 5e-5) ++admissible_nonzero;
  }
  CHECK(admissible_nonzero == 0);
}

TEST_CASE("minimality") {
  UnivariateTheta th;
  th.rho = 0.5;
  th.var_news1 = 0.2;
  const auto m = check_minimality(th);
  CHECK(m.controllable);
  CHECK(m.observable);

  UnivariateTheta scaled = th;
  for (double* v : {&scaled.var_truth, &scaled.var_news1, &scaled.var_news2, &scaled.var_noise1, &scaled.var_noise2})
    *v *= 1e-3;
  const auto ms = check_minimality(scaled);
  CHECK(ms.controllable == m.controllable);
  CHECK(ms.observable == m.observable);

  th.rho = 0.0;
  CHECK_FALSE(check_minimality(th).observable);
}

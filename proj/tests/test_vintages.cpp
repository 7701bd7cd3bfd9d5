#include <doctest.h>

#include <algorithm>
#include <random>

#include "recon/config.hpp"
#include "recon/error.hpp"
#include "recon/vintages.hpp"

using namespace recon;

namespace {

ReconConfig config_l(int l) {
  ReconConfig c;
  c.l = l;
  return c;
}

}  // namespace

TEST_CASE("quarter parsing and ordering") {
  const Quarter q = Quarter::parse("2003Q4");
  CHECK(q.year == 2003);
  CHECK(q.quarter == 4);
  CHECK(q.next() == Quarter{2004, 1});
  CHECK(Quarter::from_index(q.index()) == q);
  CHECK(Quarter::parse("1999Q1") < q);
  CHECK(q.str() == "2003Q4");
  for (const char* bad : {"2003Q5", "2003Q0", "2003-Q1", "03Q1", "2003q1x", ""})
    CHECK_THROWS_AS(Quarter::parse(bad), InputError);
}

TEST_CASE("header only is an empty panel") {
  CHECK_THROWS_WITH_AS(parse_vintage_csv("series,period,release,value\n"), "empty panel", InputError);
  CHECK_THROWS_AS(parse_vintage_csv(""), InputError);
}

TEST_CASE("minimal well-formed panel") {
  const auto panel = parse_vintage_csv("series,period,release,value\n0,2003Q1,1,2.1\n0,2003Q1,2,2.4\n");
  CHECK(panel.size() == 2);
  CHECK(panel.first_period() == Quarter{2003, 1});
  CHECK(panel.last_period() == Quarter{2003, 1});
  CHECK(panel.observations().at({0, {2003, 1}, 2}) == doctest::Approx(2.4));
}

TEST_CASE("malformed rows are rejected") {
  const std::string h = "series,period,release,value\n";
  CHECK_THROWS_AS(parse_vintage_csv(h + "0,2003-1,1,2.1\n"), InputError);
  CHECK_THROWS_AS(parse_vintage_csv(h + "0,2003Q1,1,2.1\n0,2003Q1,1,2.2\n"), InputError);
  CHECK_THROWS_AS(parse_vintage_csv(h + "0,2003Q1,0,2.1\n"), InputError);
  CHECK_THROWS_AS(parse_vintage_csv(h + "0,2003Q1,-1,2.1\n"), InputError);
  CHECK_THROWS_AS(parse_vintage_csv(h + "0,2003Q1,1,abc\n"), InputError);
  CHECK_THROWS_AS(parse_vintage_csv(h + "2,2003Q1,1,1.0\n"), InputError);
  CHECK_THROWS_AS(parse_vintage_csv("period,series,release,value\n2003Q1,0,1,1\n"), InputError);
}

TEST_CASE("NA and CRLF are accepted") {
  const auto panel = parse_vintage_csv("series,period,release,value\r\n0,2003Q1,1,NA\r\n0,2003Q2,1,1.5\r\n");
  CHECK(panel.size() == 1);
  CHECK(panel.num_periods() == 2);
  const auto obs = to_observation_matrix(panel, config_l(1));
  CHECK(obs.rows() == 2);
  CHECK(obs.missing(0, 0));
  CHECK_FALSE(obs.missing(1, 0));
}

TEST_CASE("series without a first release is valid") {
  std::string text = "series,period,release,value\n";
  for (int q = 1; q <= 4; ++q) {
    const std::string period = "2010Q" + std::to_string(q);
    text += "0," + period + ",1,1.0\n0," + period + ",2,1.1\n1," + period + ",2,0.9\n";
  }
  const auto panel = parse_vintage_csv(text);
  CHECK(panel.releases(1) == std::vector<int>{2});
  const auto obs = to_observation_matrix(panel, config_l(2));
  CHECK(obs.cols() == 4);
  CHECK(obs.missing.col(2).all());
  CHECK((!obs.missing.col(3)).all());
}

TEST_CASE("fully observed single period") {
  const auto panel =
      parse_vintage_csv("series,period,release,value\n0,2001Q2,1,1\n0,2001Q2,2,2\n1,2001Q2,1,3\n1,2001Q2,2,4\n");
  const auto obs = to_observation_matrix(panel, config_l(2));
  CHECK(obs.rows() == 1);
  CHECK(obs.cols() == 4);
  CHECK_FALSE(obs.missing.any());
  CHECK(obs.values(0, 2) == 3.0);
}

TEST_CASE("fourth-quarter gap masks only those rows") {
  std::string text = "series,period,release,value\n";
  for (int y = 2000; y < 2003; ++y)
    for (int q = 1; q <= 4; ++q) {
      const std::string period = std::to_string(y) + "Q" + std::to_string(q);
      text += "0," + period + ",1,1\n0," + period + ",2,1\n1," + period + ",2,1\n";
      if (q != 4) text += "1," + period + ",1,1\n";
    }
  const auto obs = to_observation_matrix(parse_vintage_csv(text), config_l(2));
  for (Eigen::Index t = 0; t < obs.rows(); ++t) {
    const bool q4 = (t % 4) == 3;
    CHECK(obs.missing(t, 2) == q4);
    CHECK_FALSE(obs.missing(t, 0));
  }
}

TEST_CASE("config l must cover releases present") {
  const auto panel = parse_vintage_csv("series,period,release,value\n0,2001Q1,3,1\n");
  CHECK_THROWS_AS(to_observation_matrix(panel, config_l(2)), InputError);
  CHECK_NOTHROW(to_observation_matrix(panel, config_l(3)));
}

TEST_CASE("interior empty periods stay as missing rows") {
  const auto panel = parse_vintage_csv("series,period,release,value\n0,2001Q1,1,1\n0,2001Q4,1,2\n");
  const auto obs = to_observation_matrix(panel, config_l(1));
  CHECK(obs.rows() == 4);
  CHECK(obs.missing.row(1).all());
  CHECK(obs.missing.row(2).all());
}

TEST_CASE("serialization round trip is order independent") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::string> rows;
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 12; ++t)
      for (int r = 1; r <= 3; ++r)
        if ((t + r + s) % 5 != 0) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "%d,%s,%d,%.17g", s, Quarter::from_index(8000 + t).str().c_str(), r, n(rng));
          rows.emplace_back(buf);
        }
  auto join = [](const std::vector<std::string>& rs) {
    std::string text = "series,period,release,value\n";
    for (const auto& r : rs) text += r + "\n";
    return text;
  };
  const auto a = parse_vintage_csv(join(rows));
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto b = parse_vintage_csv(join(rows));
  CHECK(a.observations() == b.observations());
  const std::string ser = serialize_vintage_csv(a);
  CHECK(ser == serialize_vintage_csv(b));
  CHECK(parse_vintage_csv(ser).observations() == a.observations());

  const auto obs = to_observation_matrix(a, config_l(3));
  CHECK(static_cast<std::size_t>(obs.count_observed()) == a.size());
  CHECK(to_panel(obs, 3).observations() == a.observations());
}

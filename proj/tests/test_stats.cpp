#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "lanedrop/headway_stats.hpp"
#include "oracles.hpp"

using namespace lanedrop;
using namespace lanedrop::stats;

TEST_CASE("fit_lognormal hand cases") {
  const double e2 = std::exp(2.0);
  const std::vector<double> equal{e2, e2, e2, e2};
  const auto [mu0, sigma0] = fit_lognormal(equal);
  CHECK(mu0 == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sigma0 == 1e-6);  // degenerate sample hits the floor

  const std::vector<double> two{std::exp(1.0), std::exp(3.0), std::exp(1.0), std::exp(3.0)};
  const auto [mu1, sigma1] = fit_lognormal(two);
  CHECK(mu1 == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sigma1 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(fit_lognormal(std::vector<double>{1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_lognormal(std::vector<double>{1.0, -2.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_lognormal(std::vector<double>{1.0, 0.0, 3.0}), std::invalid_argument);
}

TEST_CASE("fit/sample round-trip within 2 percent") {
  Rng rng(2024);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = sample_headway(3.0, 0.6, rng);
  const auto [mu, sigma] = fit_lognormal(draws);
  CHECK(std::abs(mu - 3.0) / 3.0 < 0.02);
  CHECK(std::abs(sigma - 0.6) / 0.6 < 0.02);
}

TEST_CASE("sample_headway moments") {
  Rng rng(7);
  CHECK(sample_headway(2.0, 0.0, rng) == std::exp(2.0));

  const double mu = 3.4, sigma = 0.8;
  const std::size_t n = 1000000;
  std::vector<double> draws(n);
  double sum = 0.0;
  for (auto& d : draws) {
    d = sample_headway(mu, sigma, rng);
    sum += d;
  }
  CHECK(std::abs(sum / n - std::exp(mu + sigma * sigma / 2.0)) /
            std::exp(mu + sigma * sigma / 2.0) <
        0.01);
  std::nth_element(draws.begin(), draws.begin() + n / 2, draws.end());
  CHECK(std::abs(draws[n / 2] - std::exp(mu)) / std::exp(mu) < 0.01);
}

TEST_CASE("equilibrium_offset has the length-biased law") {
  const double mu = 3.0, sigma = 0.5;
  Rng rng(99);

  SUBCASE("degenerate sigma") {
    for (int i = 0; i < 200; ++i) {
      const auto d = equilibrium_offset(mu, 0.0, rng);
      CHECK(d.first_headway == std::exp(mu));
      CHECK(d.offset >= 0.0);
      CHECK(d.offset < d.first_headway);
    }
  }

  SUBCASE("mean matches e^{mu + 3 sigma^2 / 2} and importance reweighting") {
    const std::size_t n = 1000000;
    double lb_sum = 0.0;
    std::vector<double> ratios;
    ratios.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = equilibrium_offset(mu, sigma, rng);
      lb_sum += d.first_headway;
      ratios.push_back(d.offset / d.first_headway);
    }
    const double lb_mean = lb_sum / n;
    const double closed_form = std::exp(mu + 1.5 * sigma * sigma);
    CHECK(std::abs(lb_mean - closed_form) / closed_form < 0.02);

    // brute-force reweighting: E_LB[X] = E[X^2] / E[X] under the plain law
    Rng rng2(100);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = sample_headway(mu, sigma, rng2);
      s1 += x;
      s2 += x * x;
    }
    CHECK(std::abs(lb_mean - s2 / s1) / (s2 / s1) < 0.02);

    // offset position within the interval is uniform
    CHECK(oracle::ks_uniform01(std::move(ratios)) < 0.005);
  }
}

namespace {

std::vector<DetectorObservation> synthetic_obs() {
  // one detector stream on (link 0, lane 1): steady 2 s headways at 25 m/s,
  // plus a sparse (link 1, lane 0) stream that goes quiet
  std::vector<DetectorObservation> obs;
  std::uint64_t vid = 1;
  for (double t = 5.0; t < 2700.0; t += 2.0) {
    obs.push_back(DetectorObservation{t, 0, 1, 25.0, vid++});
  }
  obs.push_back(DetectorObservation{10.0, 1, 0, 30.0, vid++});
  obs.push_back(DetectorObservation{20.0, 1, 0, 30.0, vid++});
  obs.push_back(DetectorObservation{30.0, 1, 0, 30.0, vid++});
  obs.push_back(DetectorObservation{40.0, 1, 0, 30.0, vid++});
  return obs;
}

StatsLayout layout_2x2() {
  StatsLayout layout;
  layout.lanes_per_link = {2, 2};
  layout.total_s = 2700.0;
  return layout;
}

}  // namespace

TEST_CASE("aggregate_interval_stats reconstruction and coverage") {
  const auto rows = aggregate_interval_stats(synthetic_obs(), layout_2x2());
  // full coverage: 2 links x 2 lanes x 3 intervals
  CHECK(rows.size() == 12);

  int covered = 0;
  for (const auto& r : rows) {
    if (r.link == 0 && r.lane == 1) {
      ++covered;
      CHECK_FALSE(r.inherited);
      CHECK(r.v_mean == doctest::Approx(25.0));
      // 2 s at 25 m/s: 50 m headways, nearly degenerate log-normal
      CHECK(r.mu == doctest::Approx(std::log(50.0)).epsilon(1e-6));
      CHECK(r.sigma <= 1e-5);
    }
    if (r.link == 1 && r.lane == 0) {
      if (r.interval == 0) {
        CHECK(r.n_obs == 4);
      } else {
        CHECK(r.inherited);  // quiet intervals inherit interval 0
        CHECK(r.v_mean == doctest::Approx(30.0));
      }
    }
    if (r.link == 0 && r.lane == 0) {
      CHECK(r.inherited);  // nothing ever observed: fallback stats
    }
  }
  CHECK(covered == 3);
}

TEST_CASE("aggregate_interval_stats is permutation invariant") {
  auto obs = synthetic_obs();
  const auto a = aggregate_interval_stats(obs, layout_2x2());
  std::mt19937_64 eng(5);
  std::shuffle(obs.begin(), obs.end(), eng);
  const auto b = aggregate_interval_stats(obs, layout_2x2());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].link == b[i].link);
    CHECK(a[i].lane == b[i].lane);
    CHECK(a[i].interval == b[i].interval);
    CHECK(a[i].v_mean == b[i].v_mean);
    CHECK(a[i].mu == b[i].mu);
    CHECK(a[i].sigma == b[i].sigma);
    CHECK(a[i].inherited == b[i].inherited);
  }
}

TEST_CASE("stats CSV round-trip and StatsTable lookup") {
  const auto rows = aggregate_interval_stats(synthetic_obs(), layout_2x2());
  const auto path = std::filesystem::temp_directory_path() / "lanedrop_stats_test.csv";
  write_stats_csv(path, rows);
  const auto back = read_stats_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].link == rows[i].link);
    CHECK(back[i].lane == rows[i].lane);
    CHECK(back[i].interval == rows[i].interval);
    CHECK(back[i].v_mean == doctest::Approx(rows[i].v_mean).epsilon(1e-5));
    CHECK(back[i].mu == doctest::Approx(rows[i].mu).epsilon(1e-5));
  }
  std::filesystem::remove(path);

  const StatsTable table{rows};
  CHECK(table.at(0, 1, 0).v_mean == doctest::Approx(25.0));
  // later interval falls back to the nearest earlier row
  CHECK(table.at(0, 1, 10).v_mean == doctest::Approx(25.0));
  // unknown key produces the documented fallback, never throws
  CHECK(table.at(4, 3, 0).v_mean == doctest::Approx(31.2928));
}

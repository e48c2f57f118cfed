#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "lanedrop/metrics.hpp"
#include "lanedrop/units.hpp"

using namespace lanedrop;
using namespace lanedrop::metrics;

namespace {

sim::Traversal traversal(double t_enter, double t_exit, double desired_mph) {
  return sim::Traversal{1, sim::VehicleClass::Car, t_enter, t_exit,
                        mph_to_ftps(desired_mph)};
}

RunRecord synthetic_run(int index, std::vector<DelayObs> delays, bool completed = true,
                        double valid_until = 9000.0) {
  RunRecord r;
  r.run_index = index;
  r.seed = 42 + static_cast<std::uint64_t>(index) * 5;
  r.completed = completed;
  r.valid_until_s = valid_until;
  r.delays = std::move(delays);
  return r;
}

}  // namespace

TEST_CASE("vehicle_delay") {
  const TravelTimeMeasurement m{0.0, 12178.38};

  SUBCASE("zero at the desired speed") {
    const double v = mph_to_ftps(72.0);
    CHECK(vehicle_delay(traversal(100.0, 100.0 + m.distance() / v, 72.0), m) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("derived 70 mph example") {
    // free-flow time 12178.38 ft / 102.667 ft/s = 118.62 s
    const double d = vehicle_delay(traversal(0.0, 180.0, 70.0), m);
    CHECK(d == doctest::Approx(61.38).epsilon(1e-4));
  }

  SUBCASE("floored at zero when beating the desired speed") {
    CHECK(vehicle_delay(traversal(0.0, 60.0, 70.0), m) == 0.0);
  }

  SUBCASE("rejects non-positive traversals") {
    CHECK_THROWS_AS(vehicle_delay(traversal(10.0, 10.0, 70.0), m), std::invalid_argument);
  }
}

TEST_CASE("aggregate_runs") {
  SUBCASE("single run is the identity") {
    std::vector<RunRecord> runs{synthetic_run(0, {{10.0, 2000.0}, {20.0, 2500.0}})};
    const auto agg = aggregate_runs(runs, 1800.0, 9000.0);
    CHECK(agg.n_valid_runs == 1);
    CHECK(agg.overall.m == doctest::Approx(15.0));
    CHECK(agg.overall.a == 20.0);
    CHECK(agg.overall.s == doctest::Approx(5.0));
  }

  SUBCASE("two runs average their per-run means") {
    std::vector<RunRecord> runs{synthetic_run(0, {{10.0, 2000.0}}),
                                synthetic_run(1, {{20.0, 2000.0}})};
    const auto agg = aggregate_runs(runs, 1800.0, 9000.0);
    CHECK(agg.overall.m == doctest::Approx(15.0));
  }

  SUBCASE("hand-built 16-run fixture matches exactly") {
    std::vector<RunRecord> runs;
    double expect_m = 0.0, expect_s = 0.0, expect_a = 0.0;
    for (int i = 0; i < 16; ++i) {
      // run i: delays {i, i + 2, i + 10} attributed to interval 0
      std::vector<DelayObs> d{{double(i), 1900.0}, {double(i + 2), 2000.0},
                              {double(i + 10), 2100.0}};
      const double m = (3.0 * i + 12.0) / 3.0;
      expect_m += m / 16.0;
      double ss = 0.0;
      for (double x : {double(i), double(i + 2), double(i + 10)}) ss += (x - m) * (x - m);
      expect_s += std::sqrt(ss / 3.0) / 16.0;
      expect_a += (i + 10.0) / 16.0;
      runs.push_back(synthetic_run(i, std::move(d)));
    }
    const auto agg = aggregate_runs(runs, 1800.0, 9000.0);
    CHECK(agg.n_valid_runs == 16);
    CHECK(agg.overall.m == doctest::Approx(expect_m).epsilon(1e-12));
    CHECK(agg.overall.s == doctest::Approx(expect_s).epsilon(1e-12));
    CHECK(agg.overall.a == doctest::Approx(expect_a).epsilon(1e-12));
  }

  SUBCASE("permutation invariance over run order") {
    std::vector<RunRecord> runs{synthetic_run(0, {{10.0, 2000.0}}),
                                synthetic_run(1, {{20.0, 2000.0}}),
                                synthetic_run(2, {{33.0, 2000.0}})};
    const auto a = aggregate_runs(runs, 1800.0, 9000.0);
    std::swap(runs[0], runs[2]);
    const auto b = aggregate_runs(runs, 1800.0, 9000.0);
    CHECK(a.overall.m == b.overall.m);
    CHECK(a.overall.s == b.overall.s);
    CHECK(a.overall.a == b.overall.a);
  }

  SUBCASE("terminated runs contribute only their full intervals") {
    // run 1 terminated at 4896 s -> retained through 4500 s
    std::vector<RunRecord> runs{
        synthetic_run(0, {{10.0, 2000.0}, {10.0, 4000.0}, {10.0, 8000.0}}),
        synthetic_run(1, {{30.0, 2000.0}, {30.0, 4000.0}, {30.0, 8000.0}}, false,
                      std::floor(4896.0 / 900.0) * 900.0)};
    const auto agg = aggregate_runs(runs, 1800.0, 9000.0);
    CHECK(agg.n_valid_runs == 1);              // analysis period excludes the crash
    CHECK(agg.overall.m == doctest::Approx(10.0));
    CHECK(agg.per_interval[0].n_runs == 2);    // 1800-2700: both contribute
    CHECK(agg.per_interval[0].stats.m == doctest::Approx(20.0));
    CHECK(agg.per_interval[2].n_runs == 2);    // 3600-4500 still inside 4500
    const auto& late = agg.per_interval[6];    // 7200-8100: crashed run dropped
    CHECK(late.n_runs == 1);
    CHECK(late.stats.m == doctest::Approx(10.0));
  }

  SUBCASE("zero valid runs never yields NaN") {
    std::vector<RunRecord> runs{synthetic_run(0, {{10.0, 2000.0}}, false, 900.0)};
    const auto agg = aggregate_runs(runs, 1800.0, 9000.0);
    CHECK(agg.n_valid_runs == 0);
    CHECK(agg.overall.m == 0.0);
    CHECK(std::isfinite(agg.overall.m));
    CHECK(agg.overall.n == 0);
  }

  SUBCASE("a >= m >= 0 per interval") {
    std::vector<RunRecord> runs{synthetic_run(0, {{5.0, 1900.0}, {1.0, 1950.0}})};
    const auto agg = aggregate_runs(runs, 1800.0, 9000.0);
    for (const auto& iv : agg.per_interval) {
      CHECK(iv.stats.a >= iv.stats.m);
      CHECK(iv.stats.m >= 0.0);
    }
  }
}

TEST_CASE("lane departure density") {
  const GridSpec2D spec{0.0, 1000.0, 0.0, 1000.0, 100.0, 100.0};

  SUBCASE("five events in one cell") {
    std::vector<DepartureEvent> ev;
    for (std::uint64_t i = 0; i < 5; ++i) ev.push_back({i + 1, 150.0 + i, 250.0 + i});
    const Grid g = lane_departure_density(ev, spec);
    CHECK(g.at(1, 2) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(g.counts[static_cast<std::size_t>(1) * g.spec.nx() + 2] == 5);
  }

  SUBCASE("no events is zero everywhere") {
    const Grid g = lane_departure_density({}, spec);
    for (double v : g.values) CHECK(v == 0.0);
  }

  SUBCASE("only the final departure of a vehicle counts") {
    std::vector<DepartureEvent> ev{{7, 150.0, 250.0}, {7, 850.0, 650.0}};
    const Grid g = lane_departure_density(ev, spec);
    CHECK(g.at(1, 2) == 0.0);
    CHECK(g.at(8, 6) == doctest::Approx(1e-4));
    long long total = 0;
    for (long long c : g.counts) total += c;
    CHECK(total == 1);
  }

  SUBCASE("mass identity on random event sets") {
    std::mt19937_64 eng(17);
    std::uniform_real_distribution<double> ut(0.0, 1000.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<DepartureEvent> ev;
      const int n = 1 + static_cast<int>(eng() % 400);
      for (int i = 0; i < n; ++i) {
        ev.push_back({static_cast<std::uint64_t>(i + 1), ut(eng), ut(eng)});
      }
      const Grid g = lane_departure_density(ev, spec);
      double total = 0.0;
      for (double v : g.values) total += v * spec.cell_t_s * spec.cell_x_ft;
      CHECK(std::llround(total) == n);
      CHECK(std::abs(total - n) < 1e-6);
    }
  }
}

TEST_CASE("plot transform") {
  const GridSpec2D spec{0.0, 100.0, 0.0, 100.0, 100.0, 100.0};

  SUBCASE("zero stays zero and the derived value matches") {
    Grid g{spec, {0.0}, {}};
    CHECK(plot_transform(g, 4600.0 / 3600.0, 0.4));
    CHECK(g.values[0] == 0.0);
    Grid h{spec, {5e-4}, {}};
    CHECK(plot_transform(h, 4600.0 / 3600.0, 0.4));
    CHECK(h.values[0] == doctest::Approx(std::log(10000.0 * 5e-4 / (4600.0 / 3600.0 * 0.4) + 1.0))
                             .epsilon(1e-12));
    CHECK(h.values[0] == doctest::Approx(2.378).epsilon(1e-3));
  }

  SUBCASE("monotone in d_l") {
    Grid g{spec, {1e-5}, {}};
    Grid h{spec, {2e-5}, {}};
    plot_transform(g, 1.0, 0.5);
    plot_transform(h, 1.0, 0.5);
    CHECK(h.values[0] > g.values[0]);
  }

  SUBCASE("r = 0 refuses and leaves the grid unchanged") {
    Grid g{spec, {5e-4}, {}};
    CHECK_FALSE(plot_transform(g, 1.0, 0.0));
    CHECK(g.values[0] == 5e-4);
  }
}

TEST_CASE("time-space grids") {
  const GridSpec2D spec{0.0, 300.0, 0.0, 500.0, 100.0, 100.0};

  SUBCASE("mass conservation against vehicle counts") {
    // 3 vehicles parked inside one time slice, sampled once per second
    std::vector<sim::TrajSample> samples;
    for (int veh = 0; veh < 3; ++veh) {
      for (int t = 100; t < 200; ++t) {
        samples.push_back(sim::TrajSample{static_cast<double>(t),
                                          static_cast<std::uint64_t>(veh + 1), 0,
                                          120.0 + veh * 100.0, 30.0});
      }
    }
    const Grid density = timespace_grid(samples, GridQuantity::Density, spec, 1.0);
    // integrate over space at the middle time slice: veh/mi * ft / (ft/mi)
    double count = 0.0;
    for (int ix = 0; ix < spec.nx(); ++ix) {
      count += density.at(1, ix) * spec.cell_x_ft / kFtPerMile;
    }
    CHECK(count == doctest::Approx(3.0).epsilon(0.01));
  }

  SUBCASE("speed is presence weighted and empty cells report the sentinel") {
    std::vector<sim::TrajSample> samples{
        sim::TrajSample{10.0, 1, 0, 50.0, mph_to_ftps(60.0)},
        sim::TrajSample{11.0, 1, 0, 55.0, mph_to_ftps(60.0)},
        sim::TrajSample{12.0, 2, 0, 60.0, mph_to_ftps(30.0)},
    };
    const Grid speed = timespace_grid(samples, GridQuantity::Speed, spec, 1.0);
    CHECK(speed.at(0, 0) == doctest::Approx(50.0).epsilon(1e-9));
    CHECK(speed.at(2, 4) == 70.0);  // empty: free-flow sentinel
  }
}

TEST_CASE("grid CSV round-trip") {
  const GridSpec2D spec{1800.0, 2100.0, 0.0, 400.0, 100.0, 100.0};
  Grid g{spec, std::vector<double>(static_cast<std::size_t>(spec.nt()) * spec.nx(), 0.0)};
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = 0.25 * double(i);
  const auto path = std::filesystem::temp_directory_path() / "lanedrop_grid_test.csv";
  write_grid_csv(path, g);
  const Grid back = read_grid_csv(path);
  REQUIRE(back.spec.nt() == spec.nt());
  REQUIRE(back.spec.nx() == spec.nx());
  for (int it = 0; it < spec.nt(); ++it) {
    for (int ix = 0; ix < spec.nx(); ++ix) {
      CHECK(back.at(it, ix) == doctest::Approx(g.at(it, ix)).epsilon(1e-9));
    }
  }
  std::filesystem::remove(path);
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lanedrop/sim.hpp"

// Measures of effectiveness: per-vehicle delay against free-flow travel
// time, per-interval and per-run aggregation with crashed-run exclusion,
// lane departure density and time-space grids.

namespace lanedrop::metrics {

struct TravelTimeMeasurement {
  double start_ft = 0.0;
  double end_ft = 12178.38;
  double distance() const { return end_ft - start_ft; }
};

// delay = actual travel time - distance / desired speed, floored at 0.
double vehicle_delay(const sim::Traversal& traversal, const TravelTimeMeasurement& m);

struct DelayObs {
  double delay_s;
  double t_exit;  // attribution interval = the one containing t_exit
};

struct RunRecord {
  int run_index = 0;
  std::uint64_t seed = 0;
  bool completed = true;
  double valid_until_s = 0.0;  // last full 900 s boundary for terminated runs
  std::vector<DelayObs> delays;
};

RunRecord make_run_record(int run_index, std::uint64_t seed, const sim::World& world,
                          const TravelTimeMeasurement& m);

struct DelayStats {
  double m = 0.0;  // mean
  double s = 0.0;  // stddev (population)
  double a = 0.0;  // max
  int n = 0;
};

DelayStats delay_stats(std::span<const double> delays);

struct IntervalAggregate {
  int interval;          // index of the 900 s bucket
  double start_s;
  DelayStats stats;      // per-run stats averaged over contributing runs
  int n_runs;
};

struct AggregateResult {
  DelayStats overall;    // averaged over completed runs only
  int n_valid_runs = 0;
  std::vector<IntervalAggregate> per_interval;
};

// Analysis-period aggregation in the style of the delay tables: overall
// stats average only completed runs; interval rows also use terminated runs
// up to their valid_until_s. Never produces NaN: zero valid runs yields an
// explicit empty result.
AggregateResult aggregate_runs(std::span<const RunRecord> runs, double analysis_start_s,
                               double analysis_end_s, double interval_s = 900.0);

struct GridSpec2D {
  double t0, t1;      // s
  double x0, x1;      // ft
  double cell_t_s = 100.0;
  double cell_x_ft = 100.0;
  int nt() const;
  int nx() const;
};

struct Grid {
  GridSpec2D spec;
  std::vector<double> values;  // row-major, time-major: [it * nx + ix]
  // exact event counts backing a departure-density grid (empty otherwise)
  std::vector<long long> counts;
  double& at(int it, int ix) { return values[static_cast<std::size_t>(it) * spec.nx() + ix]; }
  double at(int it, int ix) const {
    return values[static_cast<std::size_t>(it) * spec.nx() + ix];
  }
};

struct DepartureEvent {
  std::uint64_t vehicle_id;
  double t;
  double x_ft;
};

// Lane departure density d_l = N / (|D| |T|) per cell, counting only the
// last departure of each vehicle.
Grid lane_departure_density(std::span<const DepartureEvent> departures,
                            const GridSpec2D& spec);

// ln(K d_l / (q_i r) + 1) with K = 10000 and q_i in veh/s. Returns false and
// leaves the grid untransformed when r or q_i is not positive.
bool plot_transform(Grid& dl, double q_veh_per_s, double r, double K = 10000.0);

enum class GridQuantity { Density, Speed };

// Streaming accumulator for time-space grids out of trajectory samples.
class TimeSpaceAccumulator {
 public:
  explicit TimeSpaceAccumulator(const GridSpec2D& spec);
  void deposit(double t, double x_ft, double speed_ftps, double sample_dt_s);
  void merge(const TimeSpaceAccumulator& other);
  // density in veh/mi; speed presence-weighted in mph (empty cells report
  // the free-flow sentinel); divide_by averages over runs.
  Grid finalize(GridQuantity q, double divide_by = 1.0,
                double freeflow_sentinel_mph = 70.0) const;
  const GridSpec2D& spec() const { return spec_; }
  const std::vector<double>& presence_s() const { return presence_s_; }
  const std::vector<double>& speed_time() const { return speed_time_; }
  void add_cell(std::size_t i, double presence_s, double speed_time) {
    presence_s_[i] += presence_s;
    speed_time_[i] += speed_time;
  }

 private:
  GridSpec2D spec_;
  std::vector<double> presence_s_;
  std::vector<double> speed_time_;  // sum of speed * dt
};

Grid timespace_grid(std::span<const sim::TrajSample> samples, GridQuantity quantity,
                    const GridSpec2D& spec, double sample_dt_s,
                    double freeflow_sentinel_mph = 70.0);

// CSV: t_cell,x_cell,value (cell start coordinates).
void write_grid_csv(const std::filesystem::path& path, const Grid& grid);
Grid read_grid_csv(const std::filesystem::path& path);

}  // namespace lanedrop::metrics

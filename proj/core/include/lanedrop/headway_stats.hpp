#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "lanedrop/rng.hpp"

// Per-lane, per-interval traffic statistics estimated from detector
// observations, plus the headway samplers shared by the simulator and the
// Monte Carlo estimators. All quantities here are SI (m, m/s).

namespace lanedrop::stats {

struct DetectorObservation {
  double time;  // s since simulation start
  int link;     // 0-based link of the detector
  int lane;     // 0-based from the right
  double speed; // m/s
  std::uint64_t vehicle_id;
};

struct IntervalTrafficStats {
  int link;
  int lane;
  int interval;    // index of the 900 s bucket
  double v_mean;   // m/s
  double mu;
  double sigma;
  int n_obs;       // detector passages in the bucket
  bool inherited;  // carried over from the previous bucket (sparse data)
};

// Maximum-likelihood log-normal fit: mu = mean(ln h), sigma = population
// stddev(ln h), floored at 1e-6. Requires >= 3 strictly positive samples.
std::pair<double, double> fit_lognormal(std::span<const double> headways);

// exp(mu + sigma Z), Z standard normal.
double sample_headway(double mu, double sigma, Rng& rng);

struct EquilibriumDraw {
  double first_headway;  // length-biased interval
  double offset;         // uniform position within it
};

// Equilibrium-renewal placement: the interval an observer lands in at a
// random epoch is length-biased (density proportional to h f(h)), and the
// observer sits uniformly inside it.
EquilibriumDraw equilibrium_offset(double mu, double sigma, Rng& rng);

struct StatsLayout {
  std::vector<int> lanes_per_link;
  double interval_s = 900.0;
  double total_s = 9000.0;
};

// Buckets observations per (link, lane, 900 s interval). Distance headways
// are reconstructed from successive passage times multiplied by the mean of
// the two vehicle speeds. Buckets with fewer than 3 observations inherit the
// previous bucket's stats and are flagged; every bucket of the layout is
// covered. Permutation-invariant over the input order.
std::vector<IntervalTrafficStats> aggregate_interval_stats(
    std::vector<DetectorObservation> observations, const StatsLayout& layout);

// Pre-traffic fallback used when the very first buckets have no data:
// free-flow speed and a sparse stream.
IntervalTrafficStats fallback_stats(int link, int lane, int interval);

// CSV: link,lane,interval_start_s,v_mean_mps,mu,sigma,n_obs
// (link and lane are written 1-based).
void write_stats_csv(const std::filesystem::path& path,
                     std::span<const IntervalTrafficStats> stats);
std::vector<IntervalTrafficStats> read_stats_csv(const std::filesystem::path& path);

// Random-access view keyed by (link, lane, interval).
class StatsTable {
 public:
  StatsTable() = default;
  explicit StatsTable(std::vector<IntervalTrafficStats> rows);

  // Falls back to the nearest earlier interval, then to fallback_stats.
  const IntervalTrafficStats& at(int link, int lane, int interval) const;
  bool empty() const { return rows_.empty(); }
  const std::vector<IntervalTrafficStats>& rows() const { return rows_; }

 private:
  std::vector<IntervalTrafficStats> rows_;
  mutable IntervalTrafficStats scratch_{};
};

}  // namespace lanedrop::stats

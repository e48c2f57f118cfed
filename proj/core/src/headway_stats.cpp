#include "lanedrop/headway_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace lanedrop::stats {

namespace {
constexpr double kSigmaFloor = 1e-6;
}

std::pair<double, double> fit_lognormal(std::span<const double> headways) {
  if (headways.size() < 3) throw std::invalid_argument("fit_lognormal: need >= 3 samples");
  double sum = 0.0;
  for (double h : headways) {
    if (!(h > 0.0)) throw std::invalid_argument("fit_lognormal: samples must be > 0");
    sum += std::log(h);
  }
  const double mu = sum / static_cast<double>(headways.size());
  double ss = 0.0;
  for (double h : headways) {
    const double d = std::log(h) - mu;
    ss += d * d;
  }
  const double sigma = std::sqrt(ss / static_cast<double>(headways.size()));
  return {mu, std::max(sigma, kSigmaFloor)};
}

double sample_headway(double mu, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("sample_headway: sigma must be >= 0");
  return std::exp(mu + sigma * rng.normal());
}

EquilibriumDraw equilibrium_offset(double mu, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("equilibrium_offset: sigma must be >= 0");
  // Length-biased LogNormal(mu, sigma) = LogNormal(mu + sigma^2, sigma).
  const double h = std::exp(mu + sigma * sigma + sigma * rng.normal());
  return EquilibriumDraw{h, rng.uniform() * h};
}

IntervalTrafficStats fallback_stats(int link, int lane, int interval) {
  // 70 mph free flow, ~130 m median spacing, moderate dispersion.
  return IntervalTrafficStats{link, lane, interval, 31.2928, 4.87, 0.8, 0, true};
}

std::vector<IntervalTrafficStats> aggregate_interval_stats(
    std::vector<DetectorObservation> observations, const StatsLayout& layout) {
  if (!(layout.interval_s > 0.0)) throw std::invalid_argument("StatsLayout: interval_s");
  const int n_intervals =
      std::max(1, static_cast<int>(std::ceil(layout.total_s / layout.interval_s)));

  // Total order makes the result independent of the input permutation.
  std::sort(observations.begin(), observations.end(),
            [](const DetectorObservation& a, const DetectorObservation& b) {
              if (a.link != b.link) return a.link < b.link;
              if (a.lane != b.lane) return a.lane < b.lane;
              if (a.time != b.time) return a.time < b.time;
              return a.vehicle_id < b.vehicle_id;
            });

  struct Bucket {
    double speed_sum = 0.0;
    int n_obs = 0;
    std::vector<double> headways;
  };
  std::map<std::pair<int, int>, std::vector<Bucket>> groups;

  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    auto& buckets = groups[{o.link, o.lane}];
    if (buckets.empty()) buckets.resize(static_cast<std::size_t>(n_intervals));
    const int b = std::clamp(static_cast<int>(o.time / layout.interval_s), 0, n_intervals - 1);
    buckets[b].speed_sum += o.speed;
    buckets[b].n_obs += 1;
    if (i > 0) {
      const auto& prev = observations[i - 1];
      if (prev.link == o.link && prev.lane == o.lane && o.time > prev.time) {
        // Point detectors record times and speeds only; the distance headway
        // is the passage-time difference times the mean of the two speeds.
        const double headway = (o.time - prev.time) * 0.5 * (o.speed + prev.speed);
        if (headway > 0.0) buckets[b].headways.push_back(headway);
      }
    }
  }

  std::vector<IntervalTrafficStats> out;
  out.reserve(layout.lanes_per_link.size() * 4 * static_cast<std::size_t>(n_intervals));
  for (int link = 0; link < static_cast<int>(layout.lanes_per_link.size()); ++link) {
    for (int lane = 0; lane < layout.lanes_per_link[link]; ++lane) {
      const auto it = groups.find({link, lane});
      IntervalTrafficStats prev = fallback_stats(link, lane, -1);
      for (int b = 0; b < n_intervals; ++b) {
        IntervalTrafficStats row{link, lane, b, prev.v_mean, prev.mu, prev.sigma, 0, true};
        if (it != groups.end()) {
          const Bucket& bucket = it->second[b];
          row.n_obs = bucket.n_obs;
          if (bucket.n_obs >= 3) {
            row.v_mean = bucket.speed_sum / bucket.n_obs;
            row.inherited = false;
            if (bucket.headways.size() >= 3) {
              const auto [mu, sigma] = fit_lognormal(bucket.headways);
              row.mu = mu;
              row.sigma = sigma;
            } else {
              row.inherited = true;  // speeds fresh, headway fit carried over
            }
          }
        }
        out.push_back(row);
        prev = row;
      }
    }
  }
  return out;
}

void write_stats_csv(const std::filesystem::path& path,
                     std::span<const IntervalTrafficStats> stats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_stats_csv: cannot open " + path.string());
  out << "link,lane,interval_start_s,v_mean_mps,mu,sigma,n_obs\n";
  char buf[160];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.0f,%.6f,%.6f,%.6f,%d\n", s.link + 1, s.lane + 1,
                  s.interval * 900.0, s.v_mean, s.mu, s.sigma, s.n_obs);
    out << buf;
  }
}

std::vector<IntervalTrafficStats> read_stats_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_stats_csv: cannot open " + path.string());
  std::vector<IntervalTrafficStats> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    IntervalTrafficStats s{};
    double interval_start = 0.0;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    if (!(ss >> s.link >> s.lane >> interval_start >> s.v_mean >> s.mu >> s.sigma >> s.n_obs)) {
      throw std::runtime_error("read_stats_csv: malformed row: " + line);
    }
    s.link -= 1;
    s.lane -= 1;
    s.interval = static_cast<int>(interval_start / 900.0);
    s.inherited = false;
    rows.push_back(s);
  }
  return rows;
}

StatsTable::StatsTable(std::vector<IntervalTrafficStats> rows) : rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(),
            [](const IntervalTrafficStats& a, const IntervalTrafficStats& b) {
              if (a.link != b.link) return a.link < b.link;
              if (a.lane != b.lane) return a.lane < b.lane;
              return a.interval < b.interval;
            });
}

const IntervalTrafficStats& StatsTable::at(int link, int lane, int interval) const {
  const auto key = std::make_tuple(link, lane, interval);
  auto it = std::upper_bound(rows_.begin(), rows_.end(), key,
                             [](const auto& k, const IntervalTrafficStats& r) {
                               return k < std::make_tuple(r.link, r.lane, r.interval);
                             });
  // Nearest row at or before the requested interval for the same (link, lane).
  while (it != rows_.begin()) {
    --it;
    if (it->link == link && it->lane == lane) return *it;
    if (std::make_tuple(it->link, it->lane) < std::make_tuple(link, lane)) break;
  }
  scratch_ = fallback_stats(link, lane, interval);
  return scratch_;
}

}  // namespace lanedrop::stats

#include "lanedrop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lanedrop/units.hpp"

namespace lanedrop::metrics {

double vehicle_delay(const sim::Traversal& tr, const TravelTimeMeasurement& m) {
  if (!(tr.t_exit > tr.t_enter)) throw std::invalid_argument("vehicle_delay: bad traversal");
  const double free_flow = m.distance() / tr.desired_speed_ftps;
  return std::max(0.0, (tr.t_exit - tr.t_enter) - free_flow);
}

RunRecord make_run_record(int run_index, std::uint64_t seed, const sim::World& world,
                          const TravelTimeMeasurement& m) {
  RunRecord rec;
  rec.run_index = run_index;
  rec.seed = seed;
  rec.completed = world.finished() && !world.gridlocked();
  const double end_t = world.gridlocked() ? world.gridlock_time_s() : world.time();
  rec.valid_until_s = std::floor(end_t / 900.0) * 900.0;
  rec.delays.reserve(world.traversals().size());
  for (const auto& tr : world.traversals()) {
    rec.delays.push_back(DelayObs{vehicle_delay(tr, m), tr.t_exit});
  }
  return rec;
}

DelayStats delay_stats(std::span<const double> delays) {
  DelayStats out;
  out.n = static_cast<int>(delays.size());
  if (delays.empty()) return out;
  double sum = 0.0;
  for (double d : delays) {
    sum += d;
    out.a = std::max(out.a, d);
  }
  out.m = sum / out.n;
  double ss = 0.0;
  for (double d : delays) ss += (d - out.m) * (d - out.m);
  out.s = std::sqrt(ss / out.n);
  return out;
}

AggregateResult aggregate_runs(std::span<const RunRecord> runs, double analysis_start_s,
                               double analysis_end_s, double interval_s) {
  AggregateResult out;
  if (runs.empty()) return out;

  std::vector<double> scratch;
  // overall: completed runs only
  double m_sum = 0.0, s_sum = 0.0, a_sum = 0.0;
  int n_obs = 0;
  for (const auto& run : runs) {
    if (!run.completed) continue;
    scratch.clear();
    for (const auto& d : run.delays) {
      if (d.t_exit >= analysis_start_s && d.t_exit < analysis_end_s) {
        scratch.push_back(d.delay_s);
      }
    }
    const DelayStats st = delay_stats(scratch);
    m_sum += st.m;
    s_sum += st.s;
    a_sum += st.a;
    n_obs += st.n;
    ++out.n_valid_runs;
  }
  if (out.n_valid_runs > 0) {
    out.overall = DelayStats{m_sum / out.n_valid_runs, s_sum / out.n_valid_runs,
                             a_sum / out.n_valid_runs, n_obs};
  }

  const int n_intervals = static_cast<int>(
      std::ceil((analysis_end_s - analysis_start_s) / interval_s - 1e-9));
  for (int i = 0; i < n_intervals; ++i) {
    const double lo = analysis_start_s + i * interval_s;
    const double hi = lo + interval_s;
    IntervalAggregate agg{i, lo, DelayStats{}, 0};
    double im = 0.0, is = 0.0, ia = 0.0;
    int in_obs = 0;
    for (const auto& run : runs) {
      // terminated runs contribute up to the last full interval they covered
      if (!run.completed && run.valid_until_s < hi) continue;
      scratch.clear();
      for (const auto& d : run.delays) {
        if (d.t_exit >= lo && d.t_exit < hi) scratch.push_back(d.delay_s);
      }
      if (scratch.empty()) continue;
      const DelayStats st = delay_stats(scratch);
      im += st.m;
      is += st.s;
      ia += st.a;
      in_obs += st.n;
      ++agg.n_runs;
    }
    if (agg.n_runs > 0) {
      agg.stats = DelayStats{im / agg.n_runs, is / agg.n_runs, ia / agg.n_runs, in_obs};
    }
    out.per_interval.push_back(agg);
  }
  return out;
}

int GridSpec2D::nt() const {
  return std::max(1, static_cast<int>(std::ceil((t1 - t0) / cell_t_s - 1e-9)));
}
int GridSpec2D::nx() const {
  return std::max(1, static_cast<int>(std::ceil((x1 - x0) / cell_x_ft - 1e-9)));
}

Grid lane_departure_density(std::span<const DepartureEvent> departures,
                            const GridSpec2D& spec) {
  if (!(spec.cell_t_s > 0.0 && spec.cell_x_ft > 0.0)) {
    throw std::invalid_argument("lane_departure_density: cell sizes must be > 0");
  }
  // only the final departure of each vehicle counts
  std::map<std::uint64_t, DepartureEvent> last;
  for (const auto& e : departures) {
    auto [it, inserted] = last.try_emplace(e.vehicle_id, e);
    if (!inserted && e.t >= it->second.t) it->second = e;
  }

  const std::size_t n_cells = static_cast<std::size_t>(spec.nt()) * spec.nx();
  Grid grid{spec, std::vector<double>(n_cells, 0.0), std::vector<long long>(n_cells, 0)};
  const double area = spec.cell_t_s * spec.cell_x_ft;
  for (const auto& [id, e] : last) {
    if (e.t < spec.t0 || e.t >= spec.t1 || e.x_ft < spec.x0 || e.x_ft >= spec.x1) continue;
    const int it = static_cast<int>((e.t - spec.t0) / spec.cell_t_s);
    const int ix = static_cast<int>((e.x_ft - spec.x0) / spec.cell_x_ft);
    grid.counts[static_cast<std::size_t>(it) * spec.nx() + ix] += 1;
  }
  for (std::size_t i = 0; i < n_cells; ++i) {
    grid.values[i] = static_cast<double>(grid.counts[i]) / area;
  }
  return grid;
}

bool plot_transform(Grid& dl, double q_veh_per_s, double r, double K) {
  if (!(q_veh_per_s > 0.0) || !(r > 0.0)) return false;
  for (double& v : dl.values) v = std::log(K * v / (q_veh_per_s * r) + 1.0);
  return true;
}

TimeSpaceAccumulator::TimeSpaceAccumulator(const GridSpec2D& spec)
    : spec_(spec),
      presence_s_(static_cast<std::size_t>(spec.nt()) * spec.nx(), 0.0),
      speed_time_(presence_s_.size(), 0.0) {}

void TimeSpaceAccumulator::deposit(double t, double x_ft, double speed_ftps,
                                   double sample_dt_s) {
  if (t < spec_.t0 || t >= spec_.t1 || x_ft < spec_.x0 || x_ft >= spec_.x1) return;
  const int it = static_cast<int>((t - spec_.t0) / spec_.cell_t_s);
  const int ix = static_cast<int>((x_ft - spec_.x0) / spec_.cell_x_ft);
  const std::size_t i = static_cast<std::size_t>(it) * spec_.nx() + ix;
  presence_s_[i] += sample_dt_s;
  speed_time_[i] += speed_ftps * sample_dt_s;
}

void TimeSpaceAccumulator::merge(const TimeSpaceAccumulator& other) {
  if (other.presence_s_.size() != presence_s_.size()) {
    throw std::invalid_argument("TimeSpaceAccumulator: incompatible grids");
  }
  for (std::size_t i = 0; i < presence_s_.size(); ++i) {
    presence_s_[i] += other.presence_s_[i];
    speed_time_[i] += other.speed_time_[i];
  }
}

Grid TimeSpaceAccumulator::finalize(GridQuantity q, double divide_by,
                                    double freeflow_sentinel_mph) const {
  Grid grid{spec_, std::vector<double>(presence_s_.size(), 0.0)};
  const double cell_area = spec_.cell_t_s * spec_.cell_x_ft;  // s * ft
  for (std::size_t i = 0; i < presence_s_.size(); ++i) {
    if (q == GridQuantity::Density) {
      // veh.s per (s.ft) = veh/ft; scale to veh/mi
      grid.values[i] = presence_s_[i] / cell_area * kFtPerMile / divide_by;
    } else {
      grid.values[i] = presence_s_[i] > 0.0
                           ? ftps_to_mph(speed_time_[i] / presence_s_[i])
                           : freeflow_sentinel_mph;
    }
  }
  return grid;
}

Grid timespace_grid(std::span<const sim::TrajSample> samples, GridQuantity quantity,
                    const GridSpec2D& spec, double sample_dt_s,
                    double freeflow_sentinel_mph) {
  if (!(spec.cell_t_s > 0.0 && spec.cell_x_ft > 0.0)) {
    throw std::invalid_argument("timespace_grid: cell sizes must be > 0");
  }
  TimeSpaceAccumulator acc(spec);
  for (const auto& s : samples) acc.deposit(s.t, s.position_ft, s.speed_ftps, sample_dt_s);
  return acc.finalize(quantity, 1.0, freeflow_sentinel_mph);
}

void write_grid_csv(const std::filesystem::path& path, const Grid& grid) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_grid_csv: cannot open " + path.string());
  out << "t_cell,x_cell,value\n";
  char buf[96];
  for (int it = 0; it < grid.spec.nt(); ++it) {
    for (int ix = 0; ix < grid.spec.nx(); ++ix) {
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f,%.9g\n",
                    grid.spec.t0 + it * grid.spec.cell_t_s,
                    grid.spec.x0 + ix * grid.spec.cell_x_ft, grid.at(it, ix));
      out << buf;
    }
  }
}

Grid read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_grid_csv: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  struct Row {
    double t, x, v;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    Row r{};
    if (!(ss >> r.t >> r.x >> r.v)) throw std::runtime_error("read_grid_csv: bad row");
    rows.push_back(r);
  }
  if (rows.empty()) throw std::runtime_error("read_grid_csv: empty grid");
  double t0 = rows.front().t, x0 = rows.front().x;
  double t_step = 0.0, x_step = 0.0;
  double t_max = t0, x_max = x0;
  for (const auto& r : rows) {
    if (r.t > t_max) t_max = r.t;
    if (r.x > x_max) x_max = r.x;
    if (r.t == t0 && r.x != x0 && (x_step == 0.0 || r.x - x0 < x_step)) {
      x_step = std::min(x_step == 0.0 ? r.x - x0 : x_step, r.x - x0);
    }
    if (r.x == x0 && r.t != t0 && (t_step == 0.0 || r.t - t0 < t_step)) {
      t_step = std::min(t_step == 0.0 ? r.t - t0 : t_step, r.t - t0);
    }
  }
  if (t_step <= 0.0) t_step = 1.0;
  if (x_step <= 0.0) x_step = 1.0;
  GridSpec2D spec{t0, t_max + t_step, x0, x_max + x_step, t_step, x_step};
  Grid grid{spec, std::vector<double>(static_cast<std::size_t>(spec.nt()) * spec.nx(), 0.0)};
  for (const auto& r : rows) {
    const int it = static_cast<int>((r.t - t0) / t_step + 0.5);
    const int ix = static_cast<int>((r.x - x0) / x_step + 0.5);
    grid.at(it, ix) = r.v;
  }
  return grid;
}

}  // namespace lanedrop::metrics

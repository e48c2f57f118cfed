#include "lanedrop/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "lanedrop/svg.hpp"
#include "lanedrop/units.hpp"

namespace lanedrop::exp {

namespace fs = std::filesystem;
using nlohmann::json;

MatrixSpec MatrixSpec::desk() {
  MatrixSpec m;
  m.q_peaks = {4600.0, 4800.0};
  m.rs = {0.40, 0.70};
  m.p_ls = {std::nullopt, 0.99, 0.9, 0.75};
  m.runs = 4;
  return m;
}

MatrixSpec MatrixSpec::full() {
  MatrixSpec m;
  m.q_peaks = {4400.0, 4600.0, 4800.0};
  m.rs = {0.10, 0.40, 0.70};
  m.p_ls = {std::nullopt, 0.999, 0.99, 0.97, 0.95, 0.9, 0.85, 0.8, 0.75};
  m.runs = 16;
  return m;
}

Scenario Scenario::i81() { return Scenario{sim::Corridor::i81(), sim::SimConfig{}}; }

namespace {

json config_to_json(const sim::SimConfig& c) {
  return json{{"step_s", c.step_s},
              {"total_s", c.total_s},
              {"seeding_end_s", c.seeding_end_s},
              {"peak", {c.peak_start_s, c.peak_end_s}},
              {"q_offpeak_vph", c.q_offpeak_vph},
              {"hgv_peak", c.hgv_peak},
              {"hgv_offpeak", c.hgv_offpeak},
              {"lane_change_distance_ft", c.lane_change_distance_ft},
              {"car_length_ft", c.car_length_ft},
              {"hgv_length_ft", c.hgv_length_ft},
              {"car_accel_ftps2", c.car_accel_ftps2},
              {"hgv_accel_ftps2", c.hgv_accel_ftps2},
              {"desired_mph", {c.desired_mph_min, c.desired_mph_max}},
              {"measurement_ft", {c.measurement_start_ft, c.measurement_end_ft}},
              {"traj_sample_s", c.traj_sample_s},
              {"coop_yield_margin_ft", c.coop_yield_margin_ft}};
}

sim::SimConfig config_from_json(const json& j) {
  sim::SimConfig c;
  c.step_s = j.value("step_s", c.step_s);
  c.total_s = j.value("total_s", c.total_s);
  c.seeding_end_s = j.value("seeding_end_s", c.seeding_end_s);
  if (j.contains("peak")) {
    c.peak_start_s = j["peak"][0];
    c.peak_end_s = j["peak"][1];
  }
  c.q_offpeak_vph = j.value("q_offpeak_vph", c.q_offpeak_vph);
  c.hgv_peak = j.value("hgv_peak", c.hgv_peak);
  c.hgv_offpeak = j.value("hgv_offpeak", c.hgv_offpeak);
  if (j.contains("lane_change_distance_ft")) {
    c.lane_change_distance_ft = j["lane_change_distance_ft"].get<std::vector<double>>();
  }
  c.car_length_ft = j.value("car_length_ft", c.car_length_ft);
  c.hgv_length_ft = j.value("hgv_length_ft", c.hgv_length_ft);
  c.car_accel_ftps2 = j.value("car_accel_ftps2", c.car_accel_ftps2);
  c.hgv_accel_ftps2 = j.value("hgv_accel_ftps2", c.hgv_accel_ftps2);
  if (j.contains("desired_mph")) {
    c.desired_mph_min = j["desired_mph"][0];
    c.desired_mph_max = j["desired_mph"][1];
  }
  if (j.contains("measurement_ft")) {
    c.measurement_start_ft = j["measurement_ft"][0];
    c.measurement_end_ft = j["measurement_ft"][1];
  }
  c.traj_sample_s = j.value("traj_sample_s", c.traj_sample_s);
  c.coop_yield_margin_ft = j.value("coop_yield_margin_ft", c.coop_yield_margin_ft);
  return c;
}

}  // namespace

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_scenario: cannot open " + path.string());
  json j;
  in >> j;
  std::vector<sim::LinkSpec> links;
  for (const auto& l : j.at("links")) {
    links.push_back(sim::LinkSpec{
        l.at("length_ft").get<double>(), l.at("lanes").get<int>(),
        l.at("behavior").get<std::string>() == "weave_merge" ? sim::LinkBehavior::WeaveMerge
                                                             : sim::LinkBehavior::Freeway});
  }
  return Scenario{sim::Corridor(std::move(links)),
                  config_from_json(j.value("sim", json::object()))};
}

void save_scenario(const fs::path& path, const Scenario& scenario) {
  json links = json::array();
  for (const auto& l : scenario.corridor.links()) {
    links.push_back(json{{"length_ft", l.length_ft},
                         {"lanes", l.lane_count},
                         {"behavior", l.behavior == sim::LinkBehavior::WeaveMerge
                                          ? "weave_merge"
                                          : "freeway"}});
  }
  json j{{"links", links}, {"sim", config_to_json(scenario.base)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_scenario: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

std::string case_dir_name(const CaseSpec& c) {
  char buf[96];
  if (c.p_l) {
    std::snprintf(buf, sizeof(buf), "q%.0f_r%.2f_p%g", c.q_peak_vph, c.r, *c.p_l);
  } else {
    std::snprintf(buf, sizeof(buf), "q%.0f_r%.2f_pbaseline", c.q_peak_vph, c.r);
  }
  return buf;
}

prob::LookupTable ensure_table(const fs::path& path, std::uint64_t samples_per_node,
                               std::uint64_t seed, unsigned threads) {
  if (fs::exists(path)) return prob::LookupTable::load(path);
  std::cerr << "lookup table missing, building " << path.string() << " (samples/node="
            << samples_per_node << ", seed=" << seed << ")\n";
  prob::LookupTable table =
      prob::build_lookup_table(prob::default_grid(), samples_per_node, seed, threads);
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  table.save(path);
  return table;
}

unsigned worker_count() {
  if (const char* env = std::getenv("LANEDROP_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct ParsedEvent {
  sim::Event event;
};

sim::VehicleClass class_from_string(const std::string& s) {
  if (s == "smart") return sim::VehicleClass::SmartCar;
  if (s == "hgv") return sim::VehicleClass::Hgv;
  return sim::VehicleClass::Car;
}

std::vector<sim::Event> read_events_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_events_csv: cannot open " + path.string());
  std::vector<sim::Event> events;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    sim::Event e{};
    std::getline(ss, field, ',');
    e.t = std::stod(field);
    std::getline(ss, field, ',');
    e.vehicle_id = std::stoull(field);
    std::getline(ss, field, ',');
    e.cls = class_from_string(field);
    std::getline(ss, field, ',');
    if (field == "spawn") e.type = sim::EventType::Spawn;
    else if (field == "lc_start") e.type = sim::EventType::LcStart;
    else if (field == "lc_done") e.type = sim::EventType::LcDone;
    else if (field == "detector") e.type = sim::EventType::Detector;
    else if (field == "exit") e.type = sim::EventType::Exit;
    else e.type = sim::EventType::Wait;
    std::getline(ss, field, ',');
    e.link = std::stoi(field) - 1;
    std::getline(ss, field, ',');
    e.lane = std::stoi(field) - 1;
    std::getline(ss, field, ',');
    e.position_ft = std::stod(field);
    std::getline(ss, field, ',');
    e.speed_ftps = std::stod(field);
    events.push_back(e);
  }
  return events;
}

void write_delays_csv(const fs::path& path, const sim::World& world,
                      const metrics::TravelTimeMeasurement& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_delays_csv: cannot open " + path.string());
  out << "vehicle_id,class,t_enter,t_exit,desired_speed_ftps,delay_s\n";
  char buf[160];
  for (const auto& tr : world.traversals()) {
    std::snprintf(buf, sizeof(buf), "%llu,%s,%.4f,%.4f,%.3f,%.4f\n",
                  static_cast<unsigned long long>(tr.vehicle_id), sim::to_string(tr.cls),
                  tr.t_enter, tr.t_exit, tr.desired_speed_ftps, metrics::vehicle_delay(tr, m));
    out << buf;
  }
}

metrics::GridSpec2D lane_grid_spec(const Scenario& scenario, int lane) {
  return metrics::GridSpec2D{scenario.base.seeding_end_s, scenario.base.total_s, 0.0,
                             scenario.corridor.lane_end_ft(lane), 100.0, 100.0};
}

void write_presence_csv(const fs::path& path, const metrics::TimeSpaceAccumulator& acc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_presence_csv: cannot open " + path.string());
  out << "cell,presence_s,speed_time\n";
  char buf[120];
  for (std::size_t i = 0; i < acc.presence_s().size(); ++i) {
    if (acc.presence_s()[i] == 0.0) continue;
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", i, acc.presence_s()[i],
                  acc.speed_time()[i]);
    out << buf;
  }
}

void read_presence_csv(const fs::path& path, metrics::TimeSpaceAccumulator& acc) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_presence_csv: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::size_t i = 0;
    double p = 0.0, st = 0.0;
    if (ss >> i >> p >> st) acc.add_cell(i, p, st);
  }
}

struct RunPaths {
  fs::path dir;
  fs::path events() const { return dir / "events.csv"; }
  fs::path delays() const { return dir / "delays.csv"; }
  fs::path stats() const { return dir / "stats.csv"; }
  fs::path run_json() const { return dir / "run.json"; }
  fs::path trace() const { return dir / "advisor_trace.csv"; }
  fs::path presence(int lane) const {
    return dir / ("presence_lane" + std::to_string(lane + 1) + ".csv");
  }
};

metrics::RunRecord execute_run(const CaseSpec& c, const Scenario& scenario,
                               const prob::LookupTable& table,
                               const stats::StatsTable* baseline_stats, int k,
                               const RunPaths& paths) {
  sim::SimConfig cfg = scenario.base;
  cfg.q_peak_vph = c.q_peak_vph;
  cfg.smart_ratio = c.r;
  cfg.p_l = c.p_l;
  cfg.seed = c.seed0 + static_cast<std::uint64_t>(k) * c.seed_step;

  std::optional<advisor::Advisor> adv;
  if (c.p_l) {
    if (!baseline_stats) {
      throw std::invalid_argument("run_case: advisor case needs baseline stats");
    }
    advisor::AdvisorConfig acfg;
    acfg.p_l = *c.p_l;
    adv.emplace(acfg, &table, *baseline_stats, Rng::for_stream(cfg.seed, 2));
  }

  sim::World world(scenario.corridor, cfg, adv ? &*adv : nullptr);

  std::vector<metrics::TimeSpaceAccumulator> acc;
  for (int lane = 0; lane < scenario.corridor.max_lanes(); ++lane) {
    acc.emplace_back(lane_grid_spec(scenario, lane));
  }
  world.set_trajectory_callback([&](const sim::TrajSample& s) {
    acc[static_cast<std::size_t>(s.lane)].deposit(s.t, s.position_ft, s.speed_ftps,
                                                  cfg.traj_sample_s);
  });
  world.run();

  fs::create_directories(paths.dir);
  sim::write_events_csv(paths.events(), world.events());
  const metrics::TravelTimeMeasurement m{cfg.measurement_start_ft, cfg.measurement_end_ft};
  write_delays_csv(paths.delays(), world, m);

  stats::StatsLayout layout;
  for (const auto& link : scenario.corridor.links()) {
    layout.lanes_per_link.push_back(link.lane_count);
  }
  layout.total_s = cfg.total_s;
  const auto interval_stats =
      stats::aggregate_interval_stats(world.detector_observations(), layout);
  stats::write_stats_csv(paths.stats(), interval_stats);

  for (int lane = 0; lane < scenario.corridor.max_lanes(); ++lane) {
    write_presence_csv(paths.presence(lane), acc[static_cast<std::size_t>(lane)]);
  }
  if (adv) advisor::write_trace_csv(paths.trace(), adv->trace());

  metrics::RunRecord rec = metrics::make_run_record(k, cfg.seed, world, m);
  json j{{"run_index", k},
         {"seed", cfg.seed},
         {"status", rec.completed ? "completed" : "gridlock"},
         {"valid_until_s", rec.valid_until_s},
         {"seeding_end_s", cfg.seeding_end_s},
         {"total_s", cfg.total_s},
         {"spawned", world.spawned()},
         {"exited", world.exited()},
         {"entry_queue", world.entry_queue_size()}};
  std::ofstream out(paths.run_json(), std::ios::trunc);
  out << j.dump(2) << "\n";
  return rec;
}

json load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return json::object();
  json j;
  in >> j;
  return j;
}

void store_manifest(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << "\n";
}

}  // namespace

metrics::RunRecord load_run_record(const fs::path& run_dir) {
  std::ifstream jin(run_dir / "run.json");
  if (!jin) throw std::runtime_error("load_run_record: missing run.json in " + run_dir.string());
  json j;
  jin >> j;
  metrics::RunRecord rec;
  rec.run_index = j.at("run_index");
  rec.seed = j.at("seed");
  rec.completed = j.at("status") == "completed";
  rec.valid_until_s = j.at("valid_until_s");

  std::ifstream in(run_dir / "delays.csv");
  if (!in) throw std::runtime_error("load_run_record: missing delays.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // vehicle_id
    std::getline(ss, field, ',');  // class
    std::getline(ss, field, ',');  // t_enter
    std::getline(ss, field, ',');
    const double t_exit = std::stod(field);
    std::getline(ss, field, ',');  // desired speed
    std::getline(ss, field, ',');
    rec.delays.push_back(metrics::DelayObs{std::stod(field), t_exit});
  }
  return rec;
}

stats::StatsTable pooled_case_stats(const fs::path& case_dir, const Scenario& scenario) {
  std::vector<stats::DetectorObservation> obs;
  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(case_dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("run", 0) == 0) {
      run_dirs.push_back(entry.path());
    }
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  for (const auto& dir : run_dirs) {
    for (const auto& e : read_events_csv(dir / "events.csv")) {
      if (e.type == sim::EventType::Detector) {
        obs.push_back(stats::DetectorObservation{e.t, e.link, e.lane,
                                                 ftps_to_mps(e.speed_ftps), e.vehicle_id});
      }
    }
  }
  stats::StatsLayout layout;
  for (const auto& link : scenario.corridor.links()) {
    layout.lanes_per_link.push_back(link.lane_count);
  }
  layout.total_s = scenario.base.total_s;
  return stats::StatsTable(stats::aggregate_interval_stats(std::move(obs), layout));
}

CaseResult run_case(const CaseSpec& c, const Scenario& scenario,
                    const prob::LookupTable& table, const fs::path& out_root,
                    const stats::StatsTable* baseline_stats, unsigned workers) {
  if (c.runs < 1) throw std::invalid_argument("run_case: runs must be >= 1");
  CaseResult result;
  result.spec = c;
  result.dir = out_root / case_dir_name(c);
  fs::create_directories(result.dir);

  const fs::path manifest_path = result.dir / "manifest.json";
  json manifest = load_manifest(manifest_path);
  manifest["q_peak"] = c.q_peak_vph;
  manifest["r"] = c.r;
  if (c.p_l) manifest["p_l"] = *c.p_l; else manifest["p_l"] = nullptr;
  manifest["runs"] = c.runs;
  manifest["seed0"] = c.seed0;
  manifest["seed_step"] = c.seed_step;
  if (!manifest.contains("executed")) manifest["executed"] = json::array();

  std::vector<bool> done(static_cast<std::size_t>(c.runs), false);
  for (const auto& e : manifest["executed"]) {
    const int k = e.get<int>();
    if (k >= 0 && k < c.runs) done[static_cast<std::size_t>(k)] = true;
  }

  result.records.resize(static_cast<std::size_t>(c.runs));
  std::atomic<int> cursor{0};
  std::mutex mu;
  std::exception_ptr first_error;

  const auto worker = [&]() {
    for (;;) {
      const int k = cursor.fetch_add(1);
      if (k >= c.runs) return;
      RunPaths paths{result.dir / ("run" + std::to_string(k))};
      try {
        if (done[static_cast<std::size_t>(k)]) {
          result.records[static_cast<std::size_t>(k)] = load_run_record(paths.dir);
        } else {
          result.records[static_cast<std::size_t>(k)] =
              execute_run(c, scenario, table, baseline_stats, k, paths);
          std::lock_guard<std::mutex> lock(mu);
          manifest["executed"].push_back(k);
          std::sort(manifest["executed"].begin(), manifest["executed"].end());
          store_manifest(manifest_path, manifest);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const unsigned n_workers = std::max(1u, std::min(workers, static_cast<unsigned>(c.runs)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  for (const auto& rec : result.records) {
    if (!rec.completed) result.all_valid = false;
  }

  // case-level grids, merged in run order over valid runs
  int n_valid = 0;
  for (const auto& rec : result.records) n_valid += rec.completed ? 1 : 0;
  if (n_valid > 0) {
    for (int lane = 0; lane < scenario.corridor.max_lanes(); ++lane) {
      metrics::TimeSpaceAccumulator merged(lane_grid_spec(scenario, lane));
      for (int k = 0; k < c.runs; ++k) {
        if (!result.records[static_cast<std::size_t>(k)].completed) continue;
        RunPaths paths{result.dir / ("run" + std::to_string(k))};
        read_presence_csv(paths.presence(lane), merged);
      }
      const std::string tag = "lane" + std::to_string(lane + 1);
      metrics::write_grid_csv(result.dir / (tag + "_density.csv"),
                              merged.finalize(metrics::GridQuantity::Density, n_valid));
      metrics::write_grid_csv(result.dir / (tag + "_speed.csv"),
                              merged.finalize(metrics::GridQuantity::Speed));
    }
    // final lane departures of smart cars, averaged over valid runs
    for (int lane : scenario.corridor.terminating_lanes()) {
      const metrics::GridSpec2D spec = lane_grid_spec(scenario, lane);
      metrics::Grid avg{spec, std::vector<double>(
                                  static_cast<std::size_t>(spec.nt()) * spec.nx(), 0.0)};
      for (int k = 0; k < c.runs; ++k) {
        if (!result.records[static_cast<std::size_t>(k)].completed) continue;
        RunPaths paths{result.dir / ("run" + std::to_string(k))};
        std::vector<metrics::DepartureEvent> departures;
        for (const auto& e : read_events_csv(paths.events())) {
          if (e.type == sim::EventType::LcStart && e.lane == lane &&
              e.cls == sim::VehicleClass::SmartCar) {
            departures.push_back(metrics::DepartureEvent{e.vehicle_id, e.t, e.position_ft});
          }
        }
        const metrics::Grid g = metrics::lane_departure_density(departures, spec);
        for (std::size_t i = 0; i < avg.values.size(); ++i) avg.values[i] += g.values[i];
      }
      for (double& v : avg.values) v /= n_valid;
      metrics::write_grid_csv(
          result.dir / ("lane" + std::to_string(lane + 1) + "_departure.csv"), avg);
    }
  }
  return result;
}

MatrixResult run_matrix(const MatrixSpec& m, const Scenario& scenario,
                        const fs::path& table_path, const fs::path& out_root,
                        unsigned workers) {
  const prob::LookupTable table = ensure_table(table_path);
  MatrixResult result;
  for (double q : m.q_peaks) {
    for (double r : m.rs) {
      CaseSpec base{q, r, std::nullopt, m.runs, m.seed0, m.seed_step};
      std::cerr << "case " << case_dir_name(base) << "\n";
      CaseResult base_result = run_case(base, scenario, table, out_root, nullptr, workers);
      result.all_valid = result.all_valid && base_result.all_valid;
      const stats::StatsTable pooled = pooled_case_stats(base_result.dir, scenario);
      stats::write_stats_csv(base_result.dir / "pooled_stats.csv", pooled.rows());
      result.cases.push_back(std::move(base_result));
      for (const auto& p_l : m.p_ls) {
        if (!p_l) continue;  // baseline already run
        CaseSpec cs{q, r, p_l, m.runs, m.seed0, m.seed_step};
        std::cerr << "case " << case_dir_name(cs) << "\n";
        CaseResult cr = run_case(cs, scenario, table, out_root, &pooled, workers);
        result.all_valid = result.all_valid && cr.all_valid;
        result.cases.push_back(std::move(cr));
      }
    }
  }
  return result;
}

namespace {

struct LoadedCase {
  CaseSpec spec;
  fs::path dir;
  std::vector<metrics::RunRecord> records;
  double seeding_end_s = 1800.0;
  double total_s = 9000.0;
};

std::vector<LoadedCase> load_cases(const fs::path& in_root) {
  std::vector<LoadedCase> cases;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(in_root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    json manifest = load_manifest(dir / "manifest.json");
    LoadedCase lc;
    lc.dir = dir;
    lc.spec.q_peak_vph = manifest.value("q_peak", 0.0);
    lc.spec.r = manifest.value("r", 0.0);
    if (manifest.contains("p_l") && !manifest["p_l"].is_null()) {
      lc.spec.p_l = manifest["p_l"].get<double>();
    }
    lc.spec.runs = manifest.value("runs", 0);
    for (const auto& e : manifest.value("executed", json::array())) {
      const fs::path run_dir = dir / ("run" + std::to_string(e.get<int>()));
      if (fs::exists(run_dir / "run.json")) {
        lc.records.push_back(load_run_record(run_dir));
        std::ifstream jin(run_dir / "run.json");
        json rj;
        jin >> rj;
        lc.seeding_end_s = rj.value("seeding_end_s", lc.seeding_end_s);
        lc.total_s = rj.value("total_s", lc.total_s);
      }
    }
    cases.push_back(std::move(lc));
  }
  return cases;
}

std::string fmt_pl(const std::optional<double>& p_l) {
  if (!p_l) return "baseline";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", *p_l);
  return buf;
}

}  // namespace

void emit_reports(const fs::path& in_root, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<LoadedCase> cases = load_cases(in_root);
  std::ofstream gaps(out_dir / "report_gaps.txt", std::ios::trunc);
  if (cases.empty()) {
    gaps << "no completed cases found under " << in_root.string() << "\n";
    return;
  }

  std::sort(cases.begin(), cases.end(), [](const LoadedCase& a, const LoadedCase& b) {
    if (a.spec.q_peak_vph != b.spec.q_peak_vph) return a.spec.q_peak_vph < b.spec.q_peak_vph;
    if (a.spec.r != b.spec.r) return a.spec.r < b.spec.r;
    const double pa = a.spec.p_l ? *a.spec.p_l : 2.0;  // baseline first
    const double pb = b.spec.p_l ? *b.spec.p_l : 2.0;
    return pa > pb;
  });

  const auto aggregate = [](const LoadedCase& lc) {
    return metrics::aggregate_runs(lc.records, lc.seeding_end_s, lc.total_s);
  };

  const auto find_baseline = [&](const LoadedCase& lc) -> const LoadedCase* {
    for (const auto& other : cases) {
      if (!other.spec.p_l && other.spec.q_peak_vph == lc.spec.q_peak_vph &&
          other.spec.r == lc.spec.r) {
        return &other;
      }
    }
    return nullptr;
  };

  char buf[256];
  {
    std::ofstream out(out_dir / "summary.csv", std::ios::trunc);
    out << "q_peak,r,p_l,avg_s,std_s,max_s,pct_change_vs_baseline,n_valid_runs\n";
    for (const auto& lc : cases) {
      const auto agg = aggregate(lc);
      const LoadedCase* base = find_baseline(lc);
      std::string pct;
      if (lc.spec.p_l && base) {
        const auto base_agg = aggregate(*base);
        if (base_agg.overall.m > 0.0) {
          std::snprintf(buf, sizeof(buf), "%.1f",
                        (agg.overall.m - base_agg.overall.m) / base_agg.overall.m * 100.0);
          pct = buf;
        }
      } else if (lc.spec.p_l && !base) {
        gaps << "missing baseline for " << case_dir_name(lc.spec) << "\n";
      }
      std::snprintf(buf, sizeof(buf), "%.0f,%.2f,%s,%.1f,%.1f,%.1f,%s,%d\n",
                    lc.spec.q_peak_vph, lc.spec.r, fmt_pl(lc.spec.p_l).c_str(),
                    agg.overall.m, agg.overall.s, agg.overall.a, pct.c_str(),
                    agg.n_valid_runs);
      out << buf;
    }
  }

  {
    std::ofstream out(out_dir / "intervals.csv", std::ios::trunc);
    out << "q_peak,r,p_l,interval_start_s,interval_end_s,avg_s,std_s,max_s,n_runs,"
           "pct_avg_vs_baseline\n";
    for (const auto& lc : cases) {
      const auto agg = aggregate(lc);
      const LoadedCase* base = find_baseline(lc);
      std::optional<metrics::AggregateResult> base_agg;
      if (base && lc.spec.p_l) base_agg = aggregate(*base);
      for (const auto& iv : agg.per_interval) {
        std::string pct;
        if (base_agg && iv.interval < static_cast<int>(base_agg->per_interval.size())) {
          const auto& biv = base_agg->per_interval[static_cast<std::size_t>(iv.interval)];
          if (biv.stats.m > 0.0) {
            std::snprintf(buf, sizeof(buf), "%.1f",
                          (iv.stats.m - biv.stats.m) / biv.stats.m * 100.0);
            pct = buf;
          }
        }
        std::snprintf(buf, sizeof(buf), "%.0f,%.2f,%s,%.0f,%.0f,%.1f,%.1f,%.1f,%d,%s\n",
                      lc.spec.q_peak_vph, lc.spec.r, fmt_pl(lc.spec.p_l).c_str(), iv.start_s,
                      iv.start_s + 900.0, iv.stats.m, iv.stats.s, iv.stats.a, iv.n_runs,
                      pct.c_str());
        out << buf;
      }
    }
  }

  // heatmaps per case: departure (log-transformed), density and speed for
  // the terminating lanes, density and speed for the last surviving lane
  for (const auto& lc : cases) {
    const fs::path case_out = out_dir / case_dir_name(lc.spec);
    fs::create_directories(case_out);
    for (int lane1 = 1; lane1 <= 8; ++lane1) {
      const std::string tag = "lane" + std::to_string(lane1);
      const fs::path density = lc.dir / (tag + "_density.csv");
      if (!fs::exists(density)) continue;
      const bool top_lane = !fs::exists(lc.dir / ("lane" + std::to_string(lane1 + 1) +
                                                  "_density.csv"));
      (void)top_lane;
      metrics::Grid g = metrics::read_grid_csv(density);
      svg::write_heatmap(case_out / (tag + "_density.svg"), g,
                         svg::HeatmapStyle{case_dir_name(lc.spec) + " " + tag + " density",
                                           "veh/mi", 0.0, 0.0, 6});
      metrics::Grid sp = metrics::read_grid_csv(lc.dir / (tag + "_speed.csv"));
      svg::write_heatmap(case_out / (tag + "_speed.svg"), sp,
                         svg::HeatmapStyle{case_dir_name(lc.spec) + " " + tag + " speed",
                                           "mph", 0.0, 80.0, 6});
      const fs::path departure = lc.dir / (tag + "_departure.csv");
      if (fs::exists(departure)) {
        metrics::Grid dep = metrics::read_grid_csv(departure);
        const bool ok =
            metrics::plot_transform(dep, lc.spec.q_peak_vph / 3600.0, lc.spec.r);
        svg::write_heatmap(case_out / (tag + "_departure.svg"), dep,
                           svg::HeatmapStyle{case_dir_name(lc.spec) + " " + tag +
                                                 (ok ? " departure (log)" : " departure (raw)"),
                                             ok ? "log" : "1/(ft.s)", 0.0, 0.0, 6});
        if (!ok) gaps << "untransformed departure grid (r or q not positive) for "
                      << case_dir_name(lc.spec) << "\n";
      }
    }
  }
}

}  // namespace lanedrop::exp

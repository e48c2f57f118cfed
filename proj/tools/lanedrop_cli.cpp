#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lanedrop/experiment.hpp"

namespace {

lanedrop::prob::GridSpec grid_from_counts(const std::string& spec) {
  lanedrop::prob::GridSpec def = lanedrop::prob::default_grid();
  if (spec.empty()) return def;
  std::vector<int> counts;
  std::string token;
  for (char ch : spec + "x") {
    if (ch == 'x' || ch == 'X') {
      counts.push_back(std::stoi(token));
      token.clear();
    } else {
      token += ch;
    }
  }
  if (counts.size() != lanedrop::prob::kAxisCount) {
    throw CLI::ValidationError("--grid", "expected 5 axis counts, e.g. 9x9x7x9x5");
  }
  bool is_default = true;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    is_default = is_default && counts[k] == static_cast<int>(def.axes[k].size());
  }
  if (is_default) return def;  // keep the tuned non-uniform node placement
  lanedrop::prob::GridSpec g;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 2) throw CLI::ValidationError("--grid", "each axis needs >= 2 nodes");
    const double lo = def.axes[k].front();
    const double hi = def.axes[k].back();
    for (int i = 0; i < counts[k]; ++i) {
      g.axes[k].push_back(lo + (hi - lo) * i / (counts[k] - 1));
    }
  }
  return g;
}

lanedrop::exp::Scenario load_or_default(const std::string& path) {
  if (path.empty()) return lanedrop::exp::Scenario::i81();
  return lanedrop::exp::load_scenario(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lane-drop advance-warning simulation harness"};
  app.require_subcommand(1);

  // build-table
  auto* build = app.add_subcommand("build-table", "build the base-case lookup table");
  std::string grid_spec;
  std::uint64_t samples = 100000, table_seed = 1;
  std::string table_out = "table.lcpt";
  build->add_option("--grid", grid_spec, "axis node counts, e.g. 9x9x7x9x5");
  build->add_option("--samples", samples, "Monte Carlo samples per node");
  build->add_option("--seed", table_seed, "build seed");
  build->add_option("--out", table_out, "output file");

  // run
  auto* run = app.add_subcommand("run", "run one case (a set of seeded runs)");
  std::string scenario_path, run_out = "out", run_table = "table.lcpt", stats_path;
  double q_peak = 4600.0, r = 0.40;
  std::optional<double> p_l;
  bool baseline = false;
  int runs = 16;
  std::uint64_t seed0 = 42, seed_step = 5;
  run->add_option("--scenario", scenario_path, "scenario JSON (defaults to built-in I-81)");
  run->add_option("--q-peak", q_peak, "peak flow, veh/hr");
  run->add_option("--r", r, "advance-warning penetration rate");
  auto* plopt = run->add_option("--p-l", p_l, "advisor threshold");
  run->add_flag("--baseline", baseline, "advisor off")->excludes(plopt);
  run->add_option("--runs", runs, "runs per case");
  run->add_option("--seed0", seed0, "first random seed");
  run->add_option("--seed-step", seed_step, "seed increment per run");
  run->add_option("--out", run_out, "output directory");
  run->add_option("--table", run_table, "lookup table file (built if missing)");
  run->add_option("--stats", stats_path,
                  "interval stats CSV for the advisor (defaults to running the "
                  "same-seed baseline first)");

  // matrix
  auto* matrix = app.add_subcommand("matrix", "run a case matrix");
  std::string profile = "desk", matrix_out = "out", matrix_scenario, matrix_table = "table.lcpt";
  int matrix_runs = 0;
  matrix->add_option("--profile", profile, "desk or full")
      ->check(CLI::IsMember({"desk", "full"}));
  matrix->add_option("--out", matrix_out, "output directory");
  matrix->add_option("--scenario", matrix_scenario, "scenario JSON");
  matrix->add_option("--table", matrix_table, "lookup table file (built if missing)");
  matrix->add_option("--runs", matrix_runs, "override runs per case");

  // report
  auto* report = app.add_subcommand("report", "emit CSV tables and SVG heatmaps");
  std::string report_in = "out", report_out = "report";
  report->add_option("--in", report_in, "directory holding case outputs");
  report->add_option("--out", report_out, "report output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      const auto grid = grid_from_counts(grid_spec);
      std::cerr << "building " << grid.node_count() << " nodes, " << samples
                << " samples each\n";
      const auto table = lanedrop::prob::build_lookup_table(grid, samples, table_seed);
      table.save(table_out);
      std::cerr << "wrote " << table_out << "\n";
      return 0;
    }

    if (run->parsed()) {
      if (!baseline && !p_l) {
        std::cerr << "either --p-l or --baseline is required\n";
        return 2;
      }
      const auto scenario = load_or_default(scenario_path);
      const auto table = lanedrop::exp::ensure_table(run_table);
      const unsigned workers = lanedrop::exp::worker_count();
      lanedrop::exp::CaseSpec spec{q_peak, r, p_l, runs, seed0, seed_step};
      std::filesystem::create_directories(run_out);
      lanedrop::exp::save_scenario(std::filesystem::path(run_out) / "scenario.json",
                                   scenario);

      bool all_valid = true;
      std::optional<lanedrop::stats::StatsTable> stats;
      if (p_l) {
        if (!stats_path.empty()) {
          stats.emplace(lanedrop::stats::read_stats_csv(stats_path));
        } else {
          lanedrop::exp::CaseSpec base = spec;
          base.p_l.reset();
          std::cerr << "no --stats given, running baseline case first\n";
          const auto base_result =
              lanedrop::exp::run_case(base, scenario, table, run_out, nullptr, workers);
          all_valid = all_valid && base_result.all_valid;
          stats.emplace(lanedrop::exp::pooled_case_stats(base_result.dir, scenario));
          lanedrop::stats::write_stats_csv(base_result.dir / "pooled_stats.csv",
                                           stats->rows());
        }
      }
      const auto result = lanedrop::exp::run_case(spec, scenario, table, run_out,
                                                  stats ? &*stats : nullptr, workers);
      all_valid = all_valid && result.all_valid;
      if (!p_l) {
        const auto pooled = lanedrop::exp::pooled_case_stats(result.dir, scenario);
        lanedrop::stats::write_stats_csv(result.dir / "pooled_stats.csv", pooled.rows());
      }
      int valid = 0;
      for (const auto& rec : result.records) valid += rec.completed ? 1 : 0;
      std::cerr << "case " << lanedrop::exp::case_dir_name(spec) << ": " << valid << "/"
                << runs << " runs valid\n";
      return all_valid ? 0 : 1;
    }

    if (matrix->parsed()) {
      const auto scenario = load_or_default(matrix_scenario);
      auto spec = profile == "full" ? lanedrop::exp::MatrixSpec::full()
                                    : lanedrop::exp::MatrixSpec::desk();
      if (matrix_runs > 0) spec.runs = matrix_runs;
      std::filesystem::create_directories(matrix_out);
      lanedrop::exp::save_scenario(std::filesystem::path(matrix_out) / "scenario.json",
                                   scenario);
      const auto result = lanedrop::exp::run_matrix(spec, scenario, matrix_table,
                                                    matrix_out, lanedrop::exp::worker_count());
      std::cerr << (result.all_valid ? "all runs valid\n" : "some runs invalid\n");
      return result.all_valid ? 0 : 1;
    }

    if (report->parsed()) {
      lanedrop::exp::emit_reports(report_in, report_out);
      std::cerr << "report written to " << report_out << "\n";
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}

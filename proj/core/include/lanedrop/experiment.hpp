#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lanedrop/advisor.hpp"
#include "lanedrop/lookup_table.hpp"
#include "lanedrop/metrics.hpp"
#include "lanedrop/sim.hpp"

// Batch experiment harness: the (q_peak x r x p_l) case matrix, paired seed
// schedule, run orchestration on a bounded worker pool, and report emission.

namespace lanedrop::exp {

struct CaseSpec {
  double q_peak_vph = 4600.0;
  double r = 0.40;
  std::optional<double> p_l;  // unset = baseline (advisor off)
  int runs = 16;
  std::uint64_t seed0 = 42;
  std::uint64_t seed_step = 5;
};

struct MatrixSpec {
  std::vector<double> q_peaks;
  std::vector<double> rs;
  std::vector<std::optional<double>> p_ls;  // first entry should be baseline
  int runs = 16;
  std::uint64_t seed0 = 42;
  std::uint64_t seed_step = 5;

  // Desk-scale profile: cases (4600, 0.40) and (4800, 0.70) with
  // p_l in {baseline, 0.99, 0.9, 0.75}, 4 runs each.
  static MatrixSpec desk();
  // The full study: {4400,4600,4800} x {0.10,0.40,0.70} x
  // {baseline, 0.999, 0.99, 0.97, 0.95, 0.9, 0.85, 0.8, 0.75}, 16 runs.
  static MatrixSpec full();
};

struct Scenario {
  sim::Corridor corridor;
  sim::SimConfig base;  // per-case fields (q_peak, r, p_l, seed) overwritten

  static Scenario i81();
};

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const Scenario& scenario);

// Directory naming: q{q}_r{r}_p{p} with p = "baseline" for baseline cases.
std::string case_dir_name(const CaseSpec& c);

struct CaseResult {
  CaseSpec spec;
  std::filesystem::path dir;
  std::vector<metrics::RunRecord> records;
  bool all_valid = true;
};

// Loads the table at `path` or builds it with the given parameters and saves
// it there first.
prob::LookupTable ensure_table(const std::filesystem::path& path,
                               std::uint64_t samples_per_node = 100000,
                               std::uint64_t seed = 1, unsigned threads = 0);

unsigned worker_count();  // LANEDROP_WORKERS override, else hardware

// Executes the case under out_root/<case_dir>/run{k}/, skipping runs listed
// in the manifest (idempotent resume). Advisor cases need `baseline_stats`
// (the pooled detector statistics of the same-flow baseline case). Each run
// writes events.csv, delays.csv, stats.csv, presence grids and run.json;
// advisor runs add advisor_trace.csv. Gridlocked runs are marked invalid at
// their last full 900 s boundary without aborting the case.
CaseResult run_case(const CaseSpec& c, const Scenario& scenario,
                    const prob::LookupTable& table, const std::filesystem::path& out_root,
                    const stats::StatsTable* baseline_stats, unsigned workers);

// Pooled per-interval statistics from the detector rows of every completed
// run in a case directory.
stats::StatsTable pooled_case_stats(const std::filesystem::path& case_dir,
                                    const Scenario& scenario);

struct MatrixResult {
  std::vector<CaseResult> cases;
  bool all_valid = true;
};

// Baselines run first per (q_peak, r) block and feed their pooled stats to
// the advisor cases of the same block.
MatrixResult run_matrix(const MatrixSpec& m, const Scenario& scenario,
                        const std::filesystem::path& table_path,
                        const std::filesystem::path& out_root, unsigned workers);

// Reads completed cases under in_root and writes summary.csv (per-case
// delay stats with percent change against the same-flow baseline),
// intervals.csv (per 900 s interval), SVG heatmaps per case, and
// report_gaps.txt for anything missing.
void emit_reports(const std::filesystem::path& in_root,
                  const std::filesystem::path& out_dir);

// Reads one run directory back into a RunRecord (from delays.csv/run.json).
metrics::RunRecord load_run_record(const std::filesystem::path& run_dir);

}  // namespace lanedrop::exp

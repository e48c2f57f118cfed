#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lanedrop/headway_stats.hpp"
#include "lanedrop/prob.hpp"
#include "lanedrop/rng.hpp"
#include "lanedrop/sim.hpp"

// Onboard advance-warning logic. For each smart car on a terminating lane it
// projects current conditions into a corridor query (distance to the lane
// end, own speed, adjacent-lane statistics for the current 900 s interval),
// estimates the lane-change success probability and requests a change when
// the estimate drops below the threshold p_l. Requested changes are gated by
// the Toledo lead/lag critical-gap model before the simulator executes them.

namespace lanedrop::advisor {

struct AdvisorConfig {
  double p_l = 0.9;          // threshold in (0, 1)
  double delta_gap_s = 1.6;  // critical-gap speed coefficient
  double s0_m = 1.0;         // critical-gap offset
  double t_lc_s = 3.0;       // lane-change duration fed to the model
  double v_l_mps = 4.0;      // relative-speed floor
  int eval_every = 1;        // steps between evaluations
  double memo_d_quantum_ft = 10.0;
  double memo_v_quantum_ftps = 1.0;
  std::size_t trace_every = 10;  // keep every Nth Keep row; decisions always kept
};

struct SafetyGaps {
  double g_lead_cr_m;
  double g_lag_cr_m;
  double eps_lead;
  double eps_lag;
};

// Toledo critical gaps; dv is the neighbor's speed relative to the ego
// (neighbor minus ego), in m/s.
SafetyGaps critical_gaps(double dv_lead_mps, double dv_lag_mps, double eps_lead,
                         double eps_lag);

inline constexpr double kEpsLeadSd = 1.112;
inline constexpr double kEpsLagSd = 0.742;

// Arc distance from the vehicle position to the end of its (terminating)
// lane. Throws std::logic_error for through lanes.
double distance_to_lane_end_ft(const sim::Corridor& corridor, int lane, double s_ft);

struct TraceRow {
  double t;
  std::uint64_t vehicle_id;
  int lane;
  double d_ft;
  double p_estimate;
  double p_l;
  bool change_now;
  int safety_pass;  // -1 not evaluated, 0 failed, 1 passed
};

// CSV: t_s,vehicle_id,lane,d_ft,p_estimate,p_l,decision,safety_pass
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows);

class Advisor final : public sim::AdvisorHook {
 public:
  Advisor(AdvisorConfig cfg, const prob::LookupTable* table, stats::StatsTable stats,
          Rng rng);

  std::optional<Advice> consider(const sim::World& world, const sim::Vehicle& v) override;
  bool approve_insertion(const sim::World& world, const sim::Vehicle& v,
                         const sim::Vehicle* lead, const sim::Vehicle* lag) override;

  const AdvisorConfig& config() const { return cfg_; }
  const std::vector<TraceRow>& trace() const { return trace_; }

  // The projected query and its estimate for a vehicle snapshot; exposed so
  // frozen-snapshot tests can probe thresholds without running a world.
  prob::ProbEstimate estimate_for(const sim::Corridor& corridor, double t_s, int lane,
                                  double s_ft, double v_ftps);

 private:
  struct PendingDraw {
    std::uint64_t lead_id;
    std::uint64_t lag_id;
    double eps_lead;
    double eps_lag;
  };

  AdvisorConfig cfg_;
  const prob::LookupTable* table_;
  stats::StatsTable stats_;
  Rng rng_;
  std::unordered_map<std::uint64_t, double> memo_;
  std::unordered_map<std::uint64_t, PendingDraw> pending_;
  std::vector<TraceRow> trace_;
  std::size_t keep_counter_ = 0;
  long eval_counter_ = 0;
};

}  // namespace lanedrop::advisor

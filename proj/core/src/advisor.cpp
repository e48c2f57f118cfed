#include "lanedrop/advisor.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "lanedrop/units.hpp"

namespace lanedrop::advisor {

SafetyGaps critical_gaps(double dv_lead_mps, double dv_lag_mps, double eps_lead,
                         double eps_lag) {
  const double lead = std::exp(1.353 - 2.700 * std::max(0.0, dv_lead_mps) -
                               0.231 * std::min(0.0, dv_lead_mps) + eps_lead);
  const double lag = std::exp(1.429 + 0.471 * std::max(0.0, dv_lag_mps) + eps_lag);
  return SafetyGaps{lead, lag, eps_lead, eps_lag};
}

double distance_to_lane_end_ft(const sim::Corridor& corridor, int lane, double s_ft) {
  if (!corridor.lane_terminates(lane)) {
    throw std::logic_error("distance_to_lane_end_ft: lane does not terminate");
  }
  return corridor.lane_end_ft(lane) - s_ft;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path.string());
  out << "t_s,vehicle_id,lane,d_ft,p_estimate,p_l,decision,safety_pass\n";
  char buf[192];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.1f,%llu,%d,%.1f,%.6f,%.3f,%s,%s\n", r.t,
                  static_cast<unsigned long long>(r.vehicle_id), r.lane + 1, r.d_ft,
                  r.p_estimate, r.p_l, r.change_now ? "change_now" : "keep",
                  r.safety_pass < 0 ? "na" : (r.safety_pass ? "pass" : "fail"));
    out << buf;
  }
}

Advisor::Advisor(AdvisorConfig cfg, const prob::LookupTable* table,
                 stats::StatsTable stats, Rng rng)
    : cfg_(cfg), table_(table), stats_(std::move(stats)), rng_(rng) {
  if (!(cfg_.p_l > 0.0 && cfg_.p_l < 1.0)) {
    throw std::invalid_argument("AdvisorConfig: p_l must be in (0, 1)");
  }
  if (!table_) throw std::invalid_argument("Advisor: lookup table required");
}

prob::ProbEstimate Advisor::estimate_for(const sim::Corridor& corridor, double t_s,
                                         int lane, double s_ft, double v_ftps) {
  const double d_ft = distance_to_lane_end_ft(corridor, lane, s_ft);
  if (d_ft <= 0.0) return prob::ProbEstimate{0.0, 0.0, true};

  const int interval = static_cast<int>(t_s / 900.0);
  const int link = corridor.link_at(s_ft);
  const int target = lane - 1;
  const auto& st = stats_.at(link, target, interval);

  const double v1 = ftps_to_mps(v_ftps);
  // critical gap from the measured target-lane speed; the speed fed to the
  // model gets the relative-speed floor applied
  const double g = cfg_.delta_gap_s * st.v_mean + cfg_.s0_m;
  const double v2 = prob::adjust_speeds(std::max(v1, 0.01), st.v_mean, cfg_.v_l_mps);

  prob::CorridorQuery q{ft_to_m(d_ft), v1,
                        {prob::LaneParams{v2, st.mu, st.sigma, g, cfg_.t_lc_s}}};
  return prob::estimate(q, *table_);
}

std::optional<sim::AdvisorHook::Advice> Advisor::consider(const sim::World& world,
                                                          const sim::Vehicle& v) {
  if (v.cls != sim::VehicleClass::SmartCar || v.lc.active()) return std::nullopt;
  // inactive on the two rightmost lanes
  if (v.lane < 2 || !world.corridor().lane_terminates(v.lane)) return std::nullopt;
  if (cfg_.eval_every > 1 && (eval_counter_++ % cfg_.eval_every) != 0) return std::nullopt;

  const double d_ft = distance_to_lane_end_ft(world.corridor(), v.lane, v.s);
  const int interval = static_cast<int>(world.time() / 900.0);

  // memoized on (interval, lane, quantized d, quantized v)
  const auto qd = static_cast<std::uint64_t>(std::max(0.0, d_ft) / cfg_.memo_d_quantum_ft);
  const auto qv = static_cast<std::uint64_t>(std::max(0.0, v.v) / cfg_.memo_v_quantum_ftps);
  const std::uint64_t key = (static_cast<std::uint64_t>(interval) << 48) ^
                            (static_cast<std::uint64_t>(v.lane) << 44) ^ (qd << 22) ^ qv;
  double p;
  if (const auto it = memo_.find(key); it != memo_.end()) {
    p = it->second;
  } else {
    const double d_q = (static_cast<double>(qd) + 0.5) * cfg_.memo_d_quantum_ft;
    const double v_q = (static_cast<double>(qv) + 0.5) * cfg_.memo_v_quantum_ftps;
    p = estimate_for(world.corridor(), world.time(), v.lane, world.corridor().lane_end_ft(v.lane) - d_q,
                     v_q)
            .p;
    memo_.emplace(key, p);
  }

  const bool change = p < cfg_.p_l;
  if (!change) pending_.erase(v.id);  // a fresh attempt will redraw its noise
  if (change || keep_counter_++ % cfg_.trace_every == 0) {
    trace_.push_back(TraceRow{world.time(), v.id, v.lane, d_ft, p, cfg_.p_l, change, -1});
  }
  return Advice{change, v.lane - 1, p};
}

bool Advisor::approve_insertion(const sim::World& world, const sim::Vehicle& v,
                                const sim::Vehicle* lead, const sim::Vehicle* lag) {
  const std::uint64_t lead_id = lead ? lead->id : 0;
  const std::uint64_t lag_id = lag ? lag->id : 0;

  // one noise draw per attempt: a hesitating vehicle keeps its draw until
  // the neighbor pair changes
  auto it = pending_.find(v.id);
  if (it == pending_.end() || it->second.lead_id != lead_id || it->second.lag_id != lag_id) {
    PendingDraw draw{lead_id, lag_id, rng_.normal(0.0, kEpsLeadSd),
                     rng_.normal(0.0, kEpsLagSd)};
    it = pending_.insert_or_assign(v.id, draw).first;
  }
  const PendingDraw& draw = it->second;

  const double dv_lead = lead ? ftps_to_mps(lead->v - v.v) : 0.0;
  const double dv_lag = lag ? ftps_to_mps(lag->v - v.v) : 0.0;
  const SafetyGaps gaps = critical_gaps(dv_lead, dv_lag, draw.eps_lead, draw.eps_lag);

  const double lead_gap_m =
      lead ? ft_to_m(lead->rear() - v.s) : std::numeric_limits<double>::infinity();
  const double lag_gap_m =
      lag ? ft_to_m(v.rear() - lag->s) : std::numeric_limits<double>::infinity();

  const bool pass = lead_gap_m >= gaps.g_lead_cr_m && lag_gap_m >= gaps.g_lag_cr_m;
  if (pass) pending_.erase(v.id);
  if (!trace_.empty() && trace_.back().vehicle_id == v.id &&
      trace_.back().t == world.time()) {
    trace_.back().safety_pass = pass ? 1 : 0;
  }
  return pass;
}

}  // namespace lanedrop::advisor

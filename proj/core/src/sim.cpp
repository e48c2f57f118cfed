#include "lanedrop/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "lanedrop/units.hpp"

namespace lanedrop::sim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLaneChangeDuration = 3.0;  // s

// Krauss safe speed: the fastest speed from which the follower can match the
// leader's stopping point braking at the maximum own deceleration after one
// headway time of travel.
double safe_speed(double gap_net_ft, double leader_v, const BehaviorParams& p,
                  double scale) {
  const double b = -p.max_decel_own_ftps2;
  const double tau = p.cc1_s * scale;
  const double g_eff = std::max(0.0, gap_net_ft - p.cc0_ft * scale);
  const double bt = b * tau;
  return -bt + std::sqrt(bt * bt + leader_v * leader_v + 2.0 * b * g_eff);
}
}  // namespace

const BehaviorParams& BehaviorParams::freeway() {
  static const BehaviorParams p{4.92, 0.9,   13.12, -13.12, -9.84, -3.28,
                                -1.64, 0.60, -9.84, true,   false};
  return p;
}

const BehaviorParams& BehaviorParams::weave_merge() {
  static const BehaviorParams p{4.92, 0.9,   13.12, -15.00, -12.00, -4.00,
                                -3.28, 0.25, -23.00, true,  true};
  return p;
}

const BehaviorParams& BehaviorParams::of(LinkBehavior behavior) {
  return behavior == LinkBehavior::WeaveMerge ? weave_merge() : freeway();
}

const char* to_string(VehicleClass cls) {
  switch (cls) {
    case VehicleClass::Car: return "car";
    case VehicleClass::SmartCar: return "smart";
    case VehicleClass::Hgv: return "hgv";
  }
  return "?";
}

const char* to_string(EventType type) {
  switch (type) {
    case EventType::Spawn: return "spawn";
    case EventType::LcStart: return "lc_start";
    case EventType::LcDone: return "lc_done";
    case EventType::Detector: return "detector";
    case EventType::Exit: return "exit";
    case EventType::Wait: return "wait";
  }
  return "?";
}

VehicleClass draw_vehicle_class(double hgv_ratio, double smart_ratio, double u) {
  if (u < hgv_ratio) return VehicleClass::Hgv;
  if (u < hgv_ratio + smart_ratio) return VehicleClass::SmartCar;
  return VehicleClass::Car;
}

std::string events_to_csv(const std::vector<Event>& events) {
  std::string out = "t_s,vehicle_id,class,event,link,lane,position_ft,speed_ftps\n";
  char buf[192];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof(buf), "%.4f,%llu,%s,%s,%d,%d,%.3f,%.3f\n", e.t,
                  static_cast<unsigned long long>(e.vehicle_id), to_string(e.cls),
                  to_string(e.type), e.link + 1, e.lane + 1, e.position_ft, e.speed_ftps);
    out += buf;
  }
  return out;
}

void write_events_csv(const std::filesystem::path& path, const std::vector<Event>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_events_csv: cannot open " + path.string());
  out << events_to_csv(events);
}

World::World(Corridor corridor, SimConfig config, AdvisorHook* advisor)
    : corridor_(std::move(corridor)),
      config_(std::move(config)),
      advisor_(advisor),
      spawn_rng_(Rng::for_stream(config_.seed, 0)),
      lc_rng_(Rng::for_stream(config_.seed, 1)),
      dawdle_rng_(Rng::for_stream(config_.seed, 3)) {
  if (!(config_.step_s > 0.0)) throw std::invalid_argument("SimConfig: step_s must be > 0");
  lanes_.resize(static_cast<std::size_t>(corridor_.max_lanes()));
  traj_every_ = std::max<long>(1, std::lround(config_.traj_sample_s / config_.step_s));
}

double World::lcd_for_lane(int lane) const {
  const auto& drops = corridor_.terminating_lanes();
  for (std::size_t i = 0; i < drops.size(); ++i) {
    if (drops[i] == lane) {
      if (i < config_.lane_change_distance_ft.size()) {
        return config_.lane_change_distance_ft[i];
      }
      return config_.lane_change_distance_ft.empty()
                 ? 656.2
                 : config_.lane_change_distance_ft.back();
    }
  }
  throw std::logic_error("lcd_for_lane: lane does not terminate");
}

std::pair<const Vehicle*, const Vehicle*> World::neighbors(int lane, const Vehicle& v) const {
  const auto& list = lanes_[lane];
  auto it = std::lower_bound(list.begin(), list.end(), v.s,
                             [](const Vehicle* a, double s) { return a->s > s; });
  const Vehicle* lead = nullptr;
  for (auto j = it; j != list.begin();) {
    --j;
    if (*j != &v) {
      lead = *j;
      break;
    }
  }
  const Vehicle* lag = nullptr;
  for (auto k = it; k != list.end(); ++k) {
    if (*k != &v) {
      lag = *k;
      break;
    }
  }
  return {lead, lag};
}

void World::insert_into_lane(int lane, Vehicle* v) {
  auto& list = lanes_[lane];
  auto it = std::lower_bound(list.begin(), list.end(), v,
                             [](const Vehicle* a, const Vehicle* b) {
                               if (a->s != b->s) return a->s > b->s;
                               return a->id < b->id;
                             });
  list.insert(it, v);
}

void World::remove_from_lane(int lane, Vehicle* v) {
  auto& list = lanes_[lane];
  list.erase(std::remove(list.begin(), list.end(), v), list.end());
}

void World::log(EventType type, const Vehicle& v, double t, int link, int lane, double pos,
                double speed) {
  events_.push_back(Event{t, v.id, v.cls, type, link, lane, pos, speed});
}

double World::car_following_accel(const Vehicle& f, const Vehicle* leader,
                                  const BehaviorParams& p, double accel_cap_ftps2,
                                  double dt_s) {
  double v_target = f.desired_v;
  if (leader) {
    // safety distances shrink behind a vehicle that is changing lanes
    const double scale = leader->lc.active() ? p.safety_reduction : 1.0;
    const double gap_net = leader->rear() - f.s;
    const double eq_gap = (p.cc0_ft + p.cc1_s * f.v) * scale;
    if (f.v > 5.0 && leader->v >= f.v - 1.0 && gap_net >= eq_gap &&
        gap_net <= eq_gap + p.cc2_ft) {
      // inside the following-variation band behind a no-slower leader: coast
      v_target = std::min(v_target, f.v);
    } else {
      v_target = std::min(v_target, safe_speed(gap_net, leader->v, p, scale));
    }
  }
  const double a = (v_target - f.v) / dt_s;
  return std::clamp(a, p.max_decel_own_ftps2, accel_cap_ftps2);
}

bool World::attempt_lane_change(Vehicle& v, int target_lane, Urgency urgency) {
  if (v.lc.active()) return false;
  if (target_lane < 0 || target_lane >= corridor_.max_lanes()) return false;
  if (std::abs(target_lane - v.lane) != 1) return false;
  if (corridor_.lane_count_at(v.s) <= target_lane) return false;
  if (corridor_.lane_terminates(target_lane) && v.s > corridor_.lane_end_ft(target_lane)) {
    return false;
  }

  const BehaviorParams& p = params_at(v.s);
  const auto [lead, lag] = neighbors(target_lane, v);
  const double lead_net = lead ? lead->rear() - v.s : kInf;
  const double lag_net = lag ? v.rear() - lag->s : kInf;
  if (lead_net < 0.0 || lag_net < 0.0) return false;

  double thr_own = p.acc_decel_own_ftps2;
  double thr_trail = p.acc_decel_trail_ftps2;
  if (urgency == Urgency::Mandatory && corridor_.lane_terminates(v.lane)) {
    const double d_end = corridor_.lane_end_ft(v.lane) - v.s;
    const double lcd = lcd_for_lane(v.lane);
    const double frac = 1.0 - std::clamp(d_end / lcd, 0.0, 1.0);
    thr_own += (p.max_decel_own_ftps2 - p.acc_decel_own_ftps2) * frac;
    thr_trail += (p.max_decel_trail_ftps2 - p.acc_decel_trail_ftps2) * frac;
  }

  // Induced accelerations over a 1 s horizon, with the lane-change safety
  // distance reduction applied to the desired gap.
  const auto induced = [&](const Vehicle& follower, const Vehicle& new_leader) {
    const double gap_net = new_leader.rear() - follower.s;
    const double vs = safe_speed(gap_net, new_leader.v, p, p.safety_reduction);
    return std::min(follower.desired_v, vs) - follower.v;  // per 1 s
  };
  if (lead && induced(v, *lead) < thr_own) return false;
  if (lag && induced(*lag, v) < thr_trail) return false;

  begin_lane_change(v, target_lane);
  return true;
}

void World::begin_lane_change(Vehicle& v, int target_lane) {
  log(EventType::LcStart, v, t_, corridor_.link_at(v.s), v.lane, v.s, v.v);
  v.lc = LcState{target_lane, kLaneChangeDuration};
  insert_into_lane(target_lane, &v);
}

bool World::try_insert_at_entry(const PendingSpawn& p) {
  // least-occupied entry lane: vehicle count over the first link
  const double entry_span = corridor_.links()[0].length_ft;
  int best_lane = 0;
  std::size_t best_count = std::numeric_limits<std::size_t>::max();
  const int entry_lanes = corridor_.links()[0].lane_count;
  for (int lane = 0; lane < entry_lanes; ++lane) {
    std::size_t count = 0;
    for (const Vehicle* u : lanes_[lane]) {
      if (u->s <= entry_span) ++count;
    }
    if (count < best_count) {
      best_count = count;
      best_lane = lane;
    }
  }

  const BehaviorParams& bp = params_at(0.0);
  const Vehicle* leader = lanes_[best_lane].empty() ? nullptr : lanes_[best_lane].back();
  double v_ins = p.desired_v;
  if (leader) {
    const double gap_net = leader->rear() - 0.0;
    if (gap_net <= bp.cc0_ft) return false;  // no safe insertion gap
    v_ins = std::min(v_ins, safe_speed(gap_net, leader->v, bp, 1.0));
  }

  storage_.push_back(Vehicle{});
  Vehicle& v = storage_.back();
  v.id = p.id;
  v.cls = p.cls;
  v.lane = best_lane;
  v.s = 0.0;
  v.s_prev = 0.0;
  v.v = v_ins;
  v.desired_v = p.desired_v;
  v.length = p.length;
  v.entry_time = t_;
  // a measurement section starting at the input sees held vehicles waiting
  // at its start line, so their clock runs from arrival
  v.t_measure_enter = 0.0 >= config_.measurement_start_ft ? p.spawn_time : -1.0;
  v.active = true;
  insert_into_lane(best_lane, &v);
  ++active_count_;
  log(EventType::Spawn, v, t_, 0, best_lane, 0.0, v_ins);
  return true;
}

Vehicle& World::test_insert_vehicle(const Vehicle& proto) {
  storage_.push_back(proto);
  Vehicle& v = storage_.back();
  if (v.id == 0) v.id = next_id_++;
  v.active = true;
  v.s_prev = v.s;
  insert_into_lane(v.lane, &v);
  if (v.lc.active()) insert_into_lane(v.lc.target_lane, &v);
  ++active_count_;
  ++spawned_;
  return v;
}

void World::step_spawn() {
  const double lambda = config_.flow_vph_at(t_) / 3600.0 * config_.step_s;
  int arrivals = lambda > 0.0 ? spawn_rng_.poisson(lambda) : 0;
  for (int i = 0; i < arrivals; ++i) {
    const VehicleClass cls =
        draw_vehicle_class(config_.hgv_ratio_at(t_), config_.smart_ratio,
                           spawn_rng_.uniform());
    const double mph = spawn_rng_.uniform(config_.desired_mph_min, config_.desired_mph_max);
    entry_queue_.push_back(PendingSpawn{
        next_id_++, cls, mph_to_ftps(mph),
        cls == VehicleClass::Hgv ? config_.hgv_length_ft : config_.car_length_ft, t_,
        false});
    ++spawned_;
  }
  while (!entry_queue_.empty()) {
    if (try_insert_at_entry(entry_queue_.front())) {
      entry_queue_.pop_front();
    } else {
      auto& head = entry_queue_.front();
      if (!head.wait_logged) {
        // latent demand: held at the input until a safe gap opens
        Vehicle ghost{};
        ghost.id = head.id;
        ghost.cls = head.cls;
        log(EventType::Wait, ghost, t_, 0, 0, 0.0, 0.0);
        head.wait_logged = true;
      }
      break;
    }
  }
}

void World::step_advisor() {
  if (!advisor_) return;
  for (int lane = corridor_.max_lanes() - 1; lane >= 0; --lane) {
    if (!corridor_.lane_terminates(lane)) continue;
    for (Vehicle* v : lanes_[lane]) {
      v->advised_change = false;
      if (v->cls != VehicleClass::SmartCar || v->lc.active() || v->lane != lane) continue;
      const auto advice = advisor_->consider(*this, *v);
      if (advice && advice->change_now) v->advised_change = true;
    }
  }
}

void World::step_lane_changes() {
  // mandatory merges and advised changes out of terminating lanes first
  for (int lane = corridor_.max_lanes() - 1; lane >= 0; --lane) {
    if (!corridor_.lane_terminates(lane)) continue;
    // snapshot: initiations mutate the target lane list, not this one
    auto candidates = lanes_[lane];
    for (Vehicle* v : candidates) {
      if (v->lane != lane || v->lc.active()) continue;
      const int target = lane - 1;
      if (v->advised_change) {
        const auto [lead, lag] = neighbors(target, *v);
        if (advisor_->approve_insertion(*this, *v, lead, lag)) {
          begin_lane_change(*v, target);
          v->advised_change = false;  // satisfied; failures stay marked for cooperation
        }
      } else if (v->cls != VehicleClass::SmartCar || !advisor_) {
        const double d_end = corridor_.lane_end_ft(lane) - v->s;
        if (d_end <= lcd_for_lane(lane)) {
          attempt_lane_change(*v, target, Urgency::Mandatory);
        }
      }
    }
  }
  // free lane selection everywhere else
  for (int lane = corridor_.max_lanes() - 1; lane >= 0; --lane) {
    auto candidates = lanes_[lane];
    for (Vehicle* v : candidates) {
      if (v->lane != lane || v->lc.active() || v->lc_hold_s > 0.0) continue;
      if (corridor_.lane_terminates(lane)) {
        // the merge logic (or the advisor) owns vehicles near their drop
        if (advisor_ && v->cls == VehicleClass::SmartCar) continue;
        if (corridor_.lane_end_ft(lane) - v->s <= lcd_for_lane(lane)) continue;
      }
      consider_discretionary(*v);
    }
  }
}

void World::consider_discretionary(Vehicle& v) {
  const BehaviorParams& p = params_at(v.s);
  // speed the vehicle can expect to sustain: bounded by the safe speed and
  // by the leader's own pace, so a roomy gap in a crawling lane counts for
  // little and jams do not trigger churn
  const auto anticipated = [&](int lane) {
    const auto [lead, lag] = neighbors(lane, v);
    (void)lag;
    if (!lead) return v.desired_v;
    const double vs = safe_speed(lead->rear() - v.s, lead->v, p, 1.0);
    return std::min({v.desired_v, vs, lead->v + 10.0});
  };

  const double current = anticipated(v.lane);
  if (current >= std::min(v.desired_v, v.v + 5.0)) return;  // unimpeded

  const auto usable = [&](int lane) {
    if (lane < 0 || lane >= corridor_.max_lanes()) return false;
    if (corridor_.lane_count_at(v.s) <= lane) return false;
    if (corridor_.lane_terminates(lane) &&
        corridor_.lane_end_ft(lane) - v.s < 1.5 * lcd_for_lane(lane)) {
      return false;  // would only have to merge straight back
    }
    return true;
  };

  const double gain = 15.0;  // ft/s improvement required to bother
  for (int target : {v.lane - 1, v.lane + 1}) {
    if (!usable(target)) continue;
    if (anticipated(target) >= current + gain &&
        attempt_lane_change(v, target, Urgency::Discretionary)) {
      return;
    }
  }
}

void World::step_following() {
  // base accelerations: min over every lane the vehicle occupies
  for (auto& v : storage_) {
    if (v.active) v.accel = kInf;
  }
  Vehicle wall{};
  for (int lane = 0; lane < corridor_.max_lanes(); ++lane) {
    const bool terminates = corridor_.lane_terminates(lane);
    const Vehicle* leader = nullptr;
    for (Vehicle* v : lanes_[lane]) {
      const BehaviorParams& p = params_at(v->s);
      double a = car_following_accel(*v, leader, p, accel_cap(v->cls), config_.step_s);
      if (terminates) {
        // lane-end controller: a stopped wall at the taper, never passed
        wall.s = corridor_.lane_end_ft(lane);
        wall.length = 0.0;
        wall.v = 0.0;
        a = std::min(a, car_following_accel(*v, &wall, p, accel_cap(v->cls), config_.step_s));
      }
      v->accel = std::min(v->accel, a);
      leader = v;
    }
  }

  // cooperative yielding: target-lane followers open gaps for seekers
  for (int lane = corridor_.max_lanes() - 1; lane >= 1; --lane) {
    if (!corridor_.lane_terminates(lane)) continue;
    const double lane_end = corridor_.lane_end_ft(lane);
    const double lcd = lcd_for_lane(lane);
    for (Vehicle* m : lanes_[lane]) {
      if (m->lane != lane || m->lc.active()) continue;
      bool seeking = m->advised_change;
      if (!seeking && (m->cls != VehicleClass::SmartCar || !advisor_)) {
        const BehaviorParams& mp = params_at(m->s);
        const double range = mp.advanced_merging ? lcd : std::min(lcd, config_.coop_default_range_ft);
        seeking = lane_end - m->s <= range;
      }
      if (!seeking) continue;
      // alignment: the seeker tucks in behind its slot's lead vehicle with
      // the reduced lane-change safety distance, so the lead gap opens
      const auto [slot_lead, slot_lag] = neighbors(lane - 1, *m);
      (void)slot_lag;
      if (slot_lead) {
        const BehaviorParams& mp = params_at(m->s);
        const double vs = safe_speed(slot_lead->rear() - m->s, slot_lead->v, mp,
                                     mp.safety_reduction);
        const double a_align =
            std::clamp((std::min(m->desired_v, vs) - m->v) / config_.step_s,
                       mp.max_decel_own_ftps2, accel_cap(m->cls));
        m->accel = std::min(m->accel, a_align);
      }
      // open a slot behind the seeker: the nearest target-lane follower that
      // travels with the stream (or can still stop at the cooperative
      // deceleration) holds back; faster vehicles that cannot yield pass by
      const auto& target_list = lanes_[lane - 1];
      auto it = std::lower_bound(target_list.begin(), target_list.end(), m->s,
                                 [](const Vehicle* a, double s) { return a->s > s; });
      int walked = 0;
      for (; it != target_list.end() && walked < 12; ++it, ++walked) {
        Vehicle* follower = *it;
        if (follower == m || follower->s >= m->s) continue;
        const BehaviorParams& fp = params_at(follower->s);
        if (!fp.cooperative_lc) break;
        const double gap_net =
            (m->rear() - config_.coop_yield_margin_ft) - follower->s;
        const double b_coop = -fp.coop_brake_decel_ftps2;
        const bool can_stop =
            follower->v * follower->v / (2.0 * b_coop) <= std::max(0.0, gap_net) + 1e-9;
        if (!can_stop && follower->v > m->v + 15.0) continue;  // fast passer
        const double vs = safe_speed(gap_net, m->v, fp, 1.0);
        const double a_yield = std::clamp(
            (std::min(follower->desired_v, vs) - follower->v) / config_.step_s,
            fp.coop_brake_decel_ftps2, accel_cap(follower->cls));
        follower->accel = std::min(follower->accel, a_yield);
        break;
      }
    }
  }

  for (auto& v : storage_) {
    if (v.active && !std::isfinite(v.accel)) v.accel = 0.0;
  }
}

void World::step_integrate() {
  const double dt = config_.step_s;
  const double eps = config_.driver_imperfection;
  for (auto& v : storage_) {
    if (!v.active) continue;
    v.s_prev = v.s;
    double v_new = std::max(0.0, v.v + v.accel * dt);
    if (eps > 0.0 && v_new > 0.0) {
      // dawdling: drivers do not hold the ideal speed perfectly
      v_new = std::max(0.0, v_new - eps * accel_cap(v.cls) * dt * dawdle_rng_.uniform());
    }
    v.s = v.s + v_new * dt;
  }
  // overlap guard over new positions; constraints only move vehicles back,
  // so a few passes reach the cross-lane fixed point
  for (int pass = 0; pass < 8; ++pass) {
    bool changed = false;
    for (int lane = 0; lane < corridor_.max_lanes(); ++lane) {
      double allowed = corridor_.lane_terminates(lane) ? corridor_.lane_end_ft(lane) : kInf;
      for (Vehicle* v : lanes_[lane]) {
        if (v->s > allowed) {
          v->s = allowed;
          changed = true;
        }
        allowed = v->rear();
      }
    }
    if (!changed) break;
  }
  for (auto& v : storage_) {
    if (v.active) v.v = std::max(0.0, (v.s - v.s_prev) / dt);
  }
}

void World::step_completions() {
  const double dt = config_.step_s;
  for (auto& v : storage_) {
    if (!v.active) continue;
    if (v.lc_hold_s > 0.0) v.lc_hold_s -= dt;
    if (!v.lc.active()) continue;
    v.lc.t_remaining -= dt;
    if (v.lc.t_remaining <= 0.0) {
      const int old_lane = v.lane;
      remove_from_lane(old_lane, &v);
      v.lane = v.lc.target_lane;
      v.lc = LcState{};
      v.lc_hold_s = 10.0;  // discretionary cooldown
      log(EventType::LcDone, v, t_ + dt, corridor_.link_at(v.s), v.lane, v.s, v.v);
    }
  }
}

void World::step_sense() {
  const double dt = config_.step_s;
  for (auto& v : storage_) {
    if (!v.active) continue;
    const double s0 = v.s_prev;
    const double s1 = v.s;
    if (s1 > s0) {
      // detector crossings (at most one per step; detectors are far apart)
      const int l0 = corridor_.link_at(s0);
      const int l1 = corridor_.link_at(s1);
      for (int link = l0; link <= l1; ++link) {
        const double det = corridor_.detector_position_ft(link);
        if (s0 < det && det <= s1) {
          const double tc = t_ + dt * (det - s0) / (s1 - s0);
          log(EventType::Detector, v, tc, link, v.lane, det, v.v);
          detector_obs_.push_back(stats::DetectorObservation{
              tc, link, v.lane, ftps_to_mps(v.v), v.id});
        }
      }
      // travel-time measurement section
      if (v.t_measure_enter < 0.0 && s0 < config_.measurement_start_ft &&
          config_.measurement_start_ft <= s1) {
        v.t_measure_enter = t_ + dt * (config_.measurement_start_ft - s0) / (s1 - s0);
      }
      if (v.t_measure_enter >= 0.0 && s0 < config_.measurement_end_ft &&
          config_.measurement_end_ft <= s1) {
        const double tc = t_ + dt * (config_.measurement_end_ft - s0) / (s1 - s0);
        traversals_.push_back(Traversal{v.id, v.cls, v.t_measure_enter, tc, v.desired_v});
      }
    }
    // despawn once the rear bumper clears the corridor
    if (v.rear() >= corridor_.total_length_ft()) {
      const double tc = s1 > s0 ? t_ + dt * (corridor_.total_length_ft() - (s0 - v.length)) /
                                           (s1 - s0)
                                : t_ + dt;
      log(EventType::Exit, v, tc, static_cast<int>(corridor_.links().size()) - 1, v.lane,
          corridor_.total_length_ft(), v.v);
      remove_from_lane(v.lane, &v);
      if (v.lc.active()) remove_from_lane(v.lc.target_lane, &v);
      v.active = false;
      ++exited_;
      --active_count_;
    }
  }
}

void World::step_gridlock() {
  if (active_count_ == 0) {
    stall_s_ = 0.0;
    return;
  }
  double max_move = 0.0;
  for (const auto& v : storage_) {
    if (v.active) max_move = std::max(max_move, v.s - v.s_prev);
  }
  if (max_move < 1e-9) {
    stall_s_ += config_.step_s;
    if (stall_s_ >= config_.gridlock_timeout_s && !gridlocked_) {
      gridlocked_ = true;
      gridlock_time_ = t_;
    }
  } else {
    stall_s_ = 0.0;
  }
}

void World::step() {
  step_spawn();
  step_advisor();
  step_lane_changes();
  step_following();
  step_integrate();
  step_completions();
  step_sense();
  ++steps_;
  if (traj_cb_ && steps_ % traj_every_ == 0) {
    const double ts = t_ + config_.step_s;
    for (const auto& v : storage_) {
      if (v.active) traj_cb_(TrajSample{ts, v.id, v.lane, v.s, v.v});
    }
  }
  step_gridlock();
  t_ += config_.step_s;
}

void World::run() {
  while (!finished() && !gridlocked_) step();
}

}  // namespace lanedrop::sim

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lanedrop/corridor.hpp"
#include "lanedrop/headway_stats.hpp"
#include "lanedrop/rng.hpp"

// Deterministic fixed-step microscopic simulator of the lane-drop corridor:
// Krauss-style car following parameterized by the CC0/CC1/CC2 driving
// behavior values, gap-acceptance lane changing with urgency-dependent
// deceleration bounds, mandatory merges at lane ends, Poisson vehicle
// generation and midpoint loop detectors. Works in feet / seconds.

namespace lanedrop::sim {

enum class VehicleClass { Car, SmartCar, Hgv };
enum class Urgency { Discretionary, Mandatory };

struct BehaviorParams {
  double cc0_ft;   // standstill distance
  double cc1_s;    // headway time
  double cc2_ft;   // following variation band
  double max_decel_own_ftps2;
  double max_decel_trail_ftps2;
  double acc_decel_own_ftps2;
  double acc_decel_trail_ftps2;
  double safety_reduction;
  double coop_brake_decel_ftps2;
  bool advanced_merging;
  bool cooperative_lc;

  static const BehaviorParams& freeway();
  static const BehaviorParams& weave_merge();
  static const BehaviorParams& of(LinkBehavior behavior);
};

struct LcState {
  int target_lane = -1;
  double t_remaining = 0.0;
  bool active() const { return target_lane >= 0; }
};

struct Vehicle {
  std::uint64_t id = 0;
  VehicleClass cls = VehicleClass::Car;
  int lane = 0;
  double s = 0.0;          // front bumper position, ft
  double v = 0.0;          // ft/s
  double desired_v = 0.0;  // ft/s
  double length = 15.0;    // ft
  LcState lc;
  double entry_time = 0.0;
  double t_measure_enter = -1.0;  // measurement-section entry, -1 before
  bool active = false;
  double accel = 0.0;             // scratch, current step
  double s_prev = 0.0;            // position at the previous step boundary
  double lc_hold_s = 0.0;         // discretionary cooldown after a change
  bool advised_change = false;    // advisor requested a change this step
  double rear() const { return s - length; }
};

struct SimConfig {
  std::uint64_t seed = 42;
  double step_s = 0.1;
  double total_s = 9000.0;
  double seeding_end_s = 1800.0;
  double peak_start_s = 3600.0;
  double peak_end_s = 7200.0;
  double q_offpeak_vph = 2400.0;
  double q_peak_vph = 4600.0;
  double smart_ratio = 0.40;  // advance-warning penetration rate r
  double hgv_peak = 0.15;
  double hgv_offpeak = 0.20;
  // Per lane drop, in drop order along the corridor.
  std::vector<double> lane_change_distance_ft{2880.0, 1740.0};
  std::optional<double> p_l;  // advisor threshold; disengaged when unset
  double car_length_ft = 15.0;
  double hgv_length_ft = 45.0;
  double car_accel_ftps2 = 8.0;
  double hgv_accel_ftps2 = 3.5;
  double desired_mph_min = 67.0;
  double desired_mph_max = 80.0;
  double measurement_start_ft = 0.0;
  double measurement_end_ft = 12178.38;
  double traj_sample_s = 1.0;
  double coop_yield_margin_ft = 20.0;
  double coop_default_range_ft = 656.2;
  double gridlock_timeout_s = 300.0;
  // Krauss dawdling factor: random speed loss up to this fraction of the
  // acceleration capability per step, drawn from a dedicated stream.
  double driver_imperfection = 0.5;

  double flow_vph_at(double t) const {
    return (t >= peak_start_s && t < peak_end_s) ? q_peak_vph : q_offpeak_vph;
  }
  double hgv_ratio_at(double t) const {
    return (t >= peak_start_s && t < peak_end_s) ? hgv_peak : hgv_offpeak;
  }
};

enum class EventType { Spawn, LcStart, LcDone, Detector, Exit, Wait };

struct Event {
  double t;
  std::uint64_t vehicle_id;
  VehicleClass cls;
  EventType type;
  int link;  // 0-based internally
  int lane;  // 0-based from the right
  double position_ft;
  double speed_ftps;
};

struct Traversal {
  std::uint64_t vehicle_id;
  VehicleClass cls;
  double t_enter;
  double t_exit;
  double desired_speed_ftps;
};

struct TrajSample {
  double t;
  std::uint64_t vehicle_id;
  int lane;
  double position_ft;
  double speed_ftps;
};

const char* to_string(VehicleClass cls);
const char* to_string(EventType type);

// Composition rule for one uniform draw u in [0, 1): HGVs take the first
// hgv_ratio of the mass, smart cars the next smart_ratio, cars the rest.
VehicleClass draw_vehicle_class(double hgv_ratio, double smart_ratio, double u);

// CSV schema: t_s,vehicle_id,class,event,link,lane,position_ft,speed_ftps
// with link and lane written 1-based (lane 1 = rightmost).
std::string events_to_csv(const std::vector<Event>& events);
void write_events_csv(const std::filesystem::path& path, const std::vector<Event>& events);

class World;

// Interface the advance-warning advisor implements. The engine calls
// `consider` once per step for each smart car on a terminating lane and, if
// a change is requested, gates the insertion through `approve_insertion`.
struct AdvisorHook {
  struct Advice {
    bool change_now = false;
    int target_lane = -1;
    double p = 1.0;
  };
  virtual ~AdvisorHook() = default;
  virtual std::optional<Advice> consider(const World& world, const Vehicle& vehicle) = 0;
  virtual bool approve_insertion(const World& world, const Vehicle& vehicle,
                                 const Vehicle* lead, const Vehicle* lag) = 0;
};

class World {
 public:
  World(Corridor corridor, SimConfig config, AdvisorHook* advisor = nullptr);

  // One fixed step: spawn, advisor, lane-change initiations, car following,
  // Euler update with overlap guard, change completions, detectors,
  // measurement crossings, despawn, trajectory sampling, gridlock watch.
  void step();
  // Steps until total_s or gridlock.
  void run();

  double time() const { return t_; }
  bool finished() const { return t_ >= config_.total_s - 0.5 * config_.step_s; }
  bool gridlocked() const { return gridlocked_; }
  double gridlock_time_s() const { return gridlock_time_; }

  const Corridor& corridor() const { return corridor_; }
  const SimConfig& config() const { return config_; }

  std::uint64_t spawned() const { return spawned_; }
  std::uint64_t exited() const { return exited_; }
  std::size_t active_count() const { return active_count_; }
  std::size_t entry_queue_size() const { return entry_queue_.size(); }

  const std::vector<Event>& events() const { return events_; }
  const std::vector<Traversal>& traversals() const { return traversals_; }
  const std::vector<stats::DetectorObservation>& detector_observations() const {
    return detector_obs_;
  }

  // Vehicles on a lane, most-downstream first. Includes vehicles mid-change
  // whose target is this lane (they occupy both lanes' gap checks).
  const std::vector<Vehicle*>& lane_order(int lane) const { return lanes_[lane]; }
  // Nearest lead/lag in `lane` around a probe front position.
  std::pair<const Vehicle*, const Vehicle*> neighbors(int lane, const Vehicle& v) const;

  void set_trajectory_callback(std::function<void(const TrajSample&)> cb) {
    traj_cb_ = std::move(cb);
  }

  // Lane change distance for a terminating lane (by drop order).
  double lcd_for_lane(int lane) const;
  const BehaviorParams& params_at(double s_ft) const {
    return BehaviorParams::of(corridor_.links()[corridor_.link_at(s_ft)].behavior);
  }

  // Bounded acceleration toward the desired speed with a Krauss-style safe
  // speed against the leader and a CC2 dead band around the CC0 + CC1 v
  // equilibrium gap.
  static double car_following_accel(const Vehicle& follower, const Vehicle* leader,
                                    const BehaviorParams& p, double accel_cap_ftps2,
                                    double dt_s);

  // Gap-acceptance initiation: succeeds when the decelerations induced on
  // the vehicle and its new follower stay within the accepted bounds;
  // mandatory urgency relaxes the bounds toward the maximum deceleration as
  // the lane end approaches. On success the vehicle enters a 3 s transition
  // and occupies both lanes until it completes.
  bool attempt_lane_change(Vehicle& v, int target_lane, Urgency urgency);

  // Test access to the vehicle storage.
  const std::deque<Vehicle>& vehicles() const { return storage_; }
  Vehicle& test_insert_vehicle(const Vehicle& v);

 private:
  struct PendingSpawn {
    std::uint64_t id;
    VehicleClass cls;
    double desired_v;
    double length;
    double spawn_time;
    bool wait_logged;
  };

  void step_spawn();
  void step_advisor();
  void step_lane_changes();
  void consider_discretionary(Vehicle& v);
  void step_following();
  void step_integrate();
  void step_completions();
  void step_sense();
  void step_gridlock();

  void begin_lane_change(Vehicle& v, int target_lane);
  void insert_into_lane(int lane, Vehicle* v);
  void remove_from_lane(int lane, Vehicle* v);
  bool try_insert_at_entry(const PendingSpawn& p);
  double accel_cap(VehicleClass cls) const {
    return cls == VehicleClass::Hgv ? config_.hgv_accel_ftps2 : config_.car_accel_ftps2;
  }
  void log(EventType type, const Vehicle& v, double t, int link, int lane, double pos,
           double speed);

  Corridor corridor_;
  SimConfig config_;
  AdvisorHook* advisor_;
  double t_ = 0.0;
  std::uint64_t next_id_ = 1;
  std::deque<Vehicle> storage_;
  std::vector<std::vector<Vehicle*>> lanes_;
  std::deque<PendingSpawn> entry_queue_;
  std::vector<Event> events_;
  std::vector<Traversal> traversals_;
  std::vector<stats::DetectorObservation> detector_obs_;
  std::function<void(const TrajSample&)> traj_cb_;
  Rng spawn_rng_;
  Rng lc_rng_;
  Rng dawdle_rng_;
  std::uint64_t spawned_ = 0;
  std::uint64_t exited_ = 0;
  std::size_t active_count_ = 0;
  double stall_s_ = 0.0;
  bool gridlocked_ = false;
  double gridlock_time_ = 0.0;
  long steps_ = 0;
  long traj_every_ = 10;
};

}  // namespace lanedrop::sim

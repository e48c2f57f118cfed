#pragma once

#include <cstdint>
#include <vector>

#include "lanedrop/lookup_table.hpp"

// Lane-change success-probability model. An ego vehicle on lane 1 wants to
// reach a point a distance d ahead on lane n, crossing lanes 2..n, where each
// lane carries a uniform-speed stream with i.i.d. log-normal headway
// distances and a Gipps-style critical gap. The n = 2 base case has no closed
// form and is estimated by Monte Carlo (or interpolated from a prebuilt
// table); n > 2 reduces to the base case through a total-probability
// recursion evaluated as a discrete Stieltjes sum.

namespace lanedrop::prob {

// Per-lane traffic statistics in SI units.
struct LaneParams {
  double v;      // mean lane speed, m/s
  double mu;     // log-normal location of headway distances (meters)
  double sigma;  // log-normal scale, > 0
  double g;      // critical gap, m
  double t;      // lane-change duration, s
};

// lanes holds lanes 2..n, nearest first (n - 1 entries, n >= 2).
struct CorridorQuery {
  double d;       // distance to the goal, m, > 0
  double ego_v;   // ego speed on lane 1, m/s
  std::vector<LaneParams> lanes;
};

// The base-case problem rescaled to unit distance.
struct NormalizedBaseQuery {
  double dv_rel;   // (v_ego - v_target) / v_ego: stream distance swept per unit time
  double mu_n;     // mu - ln d
  double sigma_n;  // sigma, > 0
  double g_n;      // g / d
  double t_n;      // v_ego * t / d: ego travel spent completing the change, as a fraction of d
};

struct ProbEstimate {
  double p = 0.0;          // success probability in [0, 1]
  double std_error = 0.0;  // MC standard error; 0 for deterministic interpolation
  bool clamped = false;    // query fell outside the table hull (clamped to boundary)
};

inline constexpr int kMaxLanes = 8;

// Monte Carlo estimate of the unit-distance base case.
//
// Sampling semantics: the ego sweeps the target-lane stream at rate dv_rel.
// Its initial enclosing interval is an equilibrium (length-biased) draw with
// a uniform offset; every interval entered afterwards is a fresh log-normal
// draw. Success iff an interval of length >= g_n encloses the ego at some
// normalized time tau in [0, 1 - t_n] (the gap is checked at initiation, the
// change then consumes t_n of travel). Deterministic for a fixed seed;
// std_error = sqrt(p (1 - p) / samples).
ProbEstimate mc_base_case(const NormalizedBaseQuery& q, std::uint64_t samples,
                          std::uint64_t seed);

// Rescales the transition into q.lanes[lane_index] to unit distance. The ego
// speed is q.ego_v for lane_index 0 and the previous lane's mean speed
// otherwise. Throws on d <= 0.
NormalizedBaseQuery normalize(const CorridorQuery& q, std::size_t lane_index);

// Multilinear interpolation over the table grid, clamped to [0, 1].
// Out-of-hull coordinates clamp to the hull boundary and set `clamped`.
// Queries with t_n > 1 cannot complete the change within d and return 0.
ProbEstimate interp_f2(const LookupTable& table, const NormalizedBaseQuery& q);

// Full estimate. n = 2 delegates to interp_f2 on the normalized query; for
// n > 2 the crossing-position distribution F_{n-1} is built on a uniform
// grid over [0, d] and combined with the base case through a Stieltjes sum
// with an explicit atom at x = 0. Rejects more than kMaxLanes lanes.
ProbEstimate estimate(const CorridorQuery& q, const LookupTable& table,
                      int grid_points = 256);

// Relative-speed floor used by the advisor: if |v_adj - v_own| < v_l the
// adjacent-lane speed is replaced by v_own + v_l, so a near-zero sweep rate
// does not collapse the estimated probability.
double adjust_speeds(double v_own, double v_adj, double v_l);

// P(length-biased log-normal headway >= g): the probability that the
// interval enclosing a randomly placed observer is acceptable. Closed form;
// used for the x = 0 atom of the recursion and as a frozen-sweep reference.
double equilibrium_gap_tail(double mu, double sigma, double g);

}  // namespace lanedrop::prob

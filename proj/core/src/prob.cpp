#include "lanedrop/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lanedrop/rng.hpp"

namespace lanedrop::prob {

namespace {

// The sweep rate is singular for a stopped ego; floor it instead of
// rejecting so jammed vehicles still get a (pessimistic) finite query.
constexpr double kMinEgoSpeed = 1e-2;  // m/s

void check_finite(const NormalizedBaseQuery& q) {
  if (!std::isfinite(q.dv_rel) || !std::isfinite(q.mu_n) || !std::isfinite(q.sigma_n) ||
      !std::isfinite(q.g_n) || !std::isfinite(q.t_n)) {
    throw std::invalid_argument("NormalizedBaseQuery: non-finite field");
  }
  if (!(q.sigma_n > 0.0)) {
    throw std::invalid_argument("NormalizedBaseQuery: sigma_n must be > 0");
  }
  if (q.g_n < 0.0 || q.t_n < 0.0) {
    throw std::invalid_argument("NormalizedBaseQuery: g_n and t_n must be >= 0");
  }
}

void check_lane(const LaneParams& lane) {
  if (!(lane.sigma > 0.0)) throw std::invalid_argument("LaneParams: sigma must be > 0");
  if (lane.g < 0.0) throw std::invalid_argument("LaneParams: g must be >= 0");
  if (lane.t < 0.0) throw std::invalid_argument("LaneParams: t must be >= 0");
  if (lane.v < 0.0) throw std::invalid_argument("LaneParams: v must be >= 0");
}

}  // namespace

double equilibrium_gap_tail(double mu, double sigma, double g) {
  if (g <= 0.0) return 1.0;
  // Length-biased LogNormal(mu, sigma) is LogNormal(mu + sigma^2, sigma).
  const double z = (std::log(g) - mu - sigma * sigma) / sigma;
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

ProbEstimate mc_base_case(const NormalizedBaseQuery& q, std::uint64_t samples,
                          std::uint64_t seed) {
  check_finite(q);
  if (samples < 1) throw std::invalid_argument("mc_base_case: samples must be >= 1");

  const double window = 1.0 - q.t_n;  // normalized time left for the search
  if (window < 0.0) return ProbEstimate{0.0, 0.0, false};

  const double sweep = std::abs(q.dv_rel) * window;
  const bool forward = q.dv_rel >= 0.0;
  const double lb_mu = q.mu_n + q.sigma_n * q.sigma_n;
  // acceptance in log space: h >= g  <=>  Z >= (ln g - mu) / sigma
  const double log_g = std::log(q.g_n);  // -inf for g_n = 0: always acceptable
  const double z_acc_lb = (log_g - lb_mu) / q.sigma_n;
  const double z_acc = (log_g - q.mu_n) / q.sigma_n;

  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto& eng = rng.engine();
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    // Equilibrium placement: length-biased interval, uniform offset within it.
    const double z0 = normal(eng);
    if (z0 >= z_acc_lb) {
      ++hits;
      continue;
    }
    const double h0 = std::exp(lb_mu + q.sigma_n * z0);
    double pos = forward ? h0 * (1.0 - unit(eng)) : h0 * unit(eng);
    while (pos <= sweep) {
      const double z = normal(eng);
      if (z >= z_acc) {
        ++hits;
        break;
      }
      pos += std::exp(q.mu_n + q.sigma_n * z);
    }
  }

  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  return ProbEstimate{p, se, false};
}

NormalizedBaseQuery normalize(const CorridorQuery& q, std::size_t lane_index) {
  if (!(q.d > 0.0)) throw std::invalid_argument("normalize: d must be > 0");
  if (q.lanes.empty()) throw std::invalid_argument("normalize: lanes must be non-empty");
  if (lane_index >= q.lanes.size()) throw std::out_of_range("normalize: lane_index");

  const LaneParams& lane = q.lanes[lane_index];
  check_lane(lane);
  const double raw_ego = lane_index == 0 ? q.ego_v : q.lanes[lane_index - 1].v;
  const double v_ego = std::max(raw_ego, kMinEgoSpeed);

  return NormalizedBaseQuery{
      (v_ego - lane.v) / v_ego,
      lane.mu - std::log(q.d),
      lane.sigma,
      lane.g / q.d,
      v_ego * lane.t / q.d,
  };
}

double adjust_speeds(double v_own, double v_adj, double v_l) {
  if (!(v_l > 0.0)) throw std::invalid_argument("adjust_speeds: v_l must be > 0");
  return std::abs(v_adj - v_own) < v_l ? v_own + v_l : v_adj;
}

namespace {

struct CellWeight {
  std::size_t lo;
  double w;  // weight of the upper node
};

CellWeight locate(const std::vector<double>& axis, double x, bool* clamped) {
  if (x <= axis.front()) {
    if (x < axis.front()) *clamped = true;
    return {0, 0.0};
  }
  if (x >= axis.back()) {
    if (x > axis.back()) *clamped = true;
    return {axis.size() - 2, 1.0};
  }
  const auto it = std::upper_bound(axis.begin(), axis.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - axis.begin());
  const std::size_t lo = hi - 1;
  return {lo, (x - axis[lo]) / (axis[hi] - axis[lo])};
}

}  // namespace

ProbEstimate interp_f2(const LookupTable& table, const NormalizedBaseQuery& q) {
  check_finite(q);
  // No residual distance to complete the change: exact zero, not a table read.
  if (q.t_n > 1.0) return ProbEstimate{0.0, 0.0, true};

  const GridSpec& grid = table.grid();
  const double coord[kAxisCount] = {q.dv_rel, q.mu_n, q.sigma_n, q.g_n, q.t_n};
  CellWeight cw[kAxisCount];
  bool clamped = false;
  for (std::size_t k = 0; k < kAxisCount; ++k) {
    cw[k] = locate(grid.axes[k], coord[k], &clamped);
  }

  double p = 0.0;
  for (unsigned corner = 0; corner < (1u << kAxisCount); ++corner) {
    double wt = 1.0;
    std::array<std::size_t, kAxisCount> idx{};
    for (std::size_t k = 0; k < kAxisCount; ++k) {
      const bool hi = (corner >> k) & 1u;
      wt *= hi ? cw[k].w : 1.0 - cw[k].w;
      idx[k] = cw[k].lo + (hi ? 1 : 0);
    }
    if (wt != 0.0) p += wt * table.value_at(idx);
  }
  return ProbEstimate{std::clamp(p, 0.0, 1.0), 0.0, clamped};
}

ProbEstimate estimate(const CorridorQuery& q, const LookupTable& table, int grid_points) {
  if (!(q.d > 0.0)) throw std::invalid_argument("estimate: d must be > 0");
  if (q.lanes.empty()) throw std::invalid_argument("estimate: lanes must be non-empty");
  if (q.lanes.size() + 1 > static_cast<std::size_t>(kMaxLanes)) {
    throw std::invalid_argument("estimate: more than kMaxLanes lanes");
  }
  if (grid_points < 16) throw std::invalid_argument("estimate: grid_points must be >= 16");
  if (q.lanes.size() == 1) return interp_f2(table, normalize(q, 0));

  const std::size_t n_cross = q.lanes.size();
  const int K = grid_points;
  const double dx = q.d / K;
  bool clamped = false;

  // f2 at a residual distance; dist <= 0 only completes an instantaneous
  // change whose equilibrium interval is already acceptable.
  const auto f2_at = [&](double dist, double v_ego, const LaneParams& lane) -> double {
    if (dist <= 0.0) {
      if (lane.t > 0.0) return 0.0;
      return equilibrium_gap_tail(lane.mu, lane.sigma, lane.g);
    }
    const CorridorQuery sub{dist, v_ego, {lane}};
    const ProbEstimate e = interp_f2(table, normalize(sub, 0));
    clamped = clamped || e.clamped;
    return e.p;
  };

  // F[j]: probability of being established on the current lane within j*dx.
  std::vector<double> F(static_cast<std::size_t>(K) + 1);
  std::vector<double> kernel(F.size()), next(F.size());
  for (int j = 0; j <= K; ++j) F[j] = f2_at(j * dx, q.ego_v, q.lanes[0]);

  for (std::size_t s = 2; s <= n_cross; ++s) {
    const LaneParams& lane = q.lanes[s - 1];
    const double v_ego = q.lanes[s - 2].v;
    for (int j = 0; j <= K; ++j) kernel[j] = f2_at(j * dx, v_ego, lane);
    for (int j = 0; j <= K; ++j) {
      double acc = kernel[j] * F[0];  // atom at x = 0
      for (int k = 1; k <= j; ++k) acc += kernel[j - k] * (F[k] - F[k - 1]);
      next[j] = std::clamp(acc, 0.0, 1.0);
    }
    F.swap(next);
  }
  return ProbEstimate{F.back(), 0.0, clamped};
}

}  // namespace lanedrop::prob

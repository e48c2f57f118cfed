#include "lanedrop/corridor.hpp"

#include <algorithm>
#include <stdexcept>

namespace lanedrop::sim {

Corridor::Corridor(std::vector<LinkSpec> links) : links_(std::move(links)) {
  if (links_.empty()) throw std::invalid_argument("Corridor: no links");
  starts_.reserve(links_.size());
  double s = 0.0;
  for (const auto& link : links_) {
    if (!(link.length_ft > 0.0) || link.lane_count < 1) {
      throw std::invalid_argument("Corridor: bad link spec");
    }
    starts_.push_back(s);
    s += link.length_ft;
    max_lanes_ = std::max(max_lanes_, link.lane_count);
  }
  total_length_ = s;

  lane_ends_.assign(static_cast<std::size_t>(max_lanes_), 0.0);
  for (int lane = 0; lane < max_lanes_; ++lane) {
    double end = 0.0;
    for (std::size_t i = 0; i < links_.size(); ++i) {
      if (links_[i].lane_count > lane) {
        end = starts_[i] + links_[i].length_ft;
      } else {
        break;  // a lane never reappears downstream of its drop
      }
    }
    lane_ends_[lane] = end;
    if (end <= 0.0) throw std::invalid_argument("Corridor: lane missing at entry");
  }
  for (int lane = 0; lane < max_lanes_; ++lane) {
    if (lane_terminates(lane)) terminating_.push_back(lane);
  }
  std::sort(terminating_.begin(), terminating_.end(),
            [this](int a, int b) { return lane_ends_[a] < lane_ends_[b]; });
}

Corridor Corridor::i81() {
  return Corridor({
      {3275.312, 4, LinkBehavior::Freeway},
      {2998.360, 4, LinkBehavior::WeaveMerge},
      {2490.507, 3, LinkBehavior::Freeway},
      {1798.360, 3, LinkBehavior::WeaveMerge},
      {1632.506, 2, LinkBehavior::Freeway},
  });
}

int Corridor::link_at(double s_ft) const {
  if (s_ft <= 0.0) return 0;
  for (std::size_t i = links_.size(); i-- > 0;) {
    if (s_ft >= starts_[i]) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace lanedrop::sim

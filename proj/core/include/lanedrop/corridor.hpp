#pragma once

#include <limits>
#include <vector>

// Corridor geometry: a straight multi-lane highway segment split into links,
// each with a lane count and a driving-behavior class. Lanes are indexed
// 0-based from the right; a lane exists on a link when its index is below
// the link's lane count, so lane drops happen where the count decreases.

namespace lanedrop::sim {

enum class LinkBehavior { Freeway, WeaveMerge };

struct LinkSpec {
  double length_ft;
  int lane_count;
  LinkBehavior behavior;
};

class Corridor {
 public:
  explicit Corridor(std::vector<LinkSpec> links);

  // The I-81 southbound segment: five links, 4 -> 4 -> 3 -> 3 -> 2 lanes,
  // tapers at the link 2/3 and link 4/5 boundaries.
  static Corridor i81();

  const std::vector<LinkSpec>& links() const { return links_; }
  double total_length_ft() const { return total_length_; }
  int max_lanes() const { return max_lanes_; }

  double link_start_ft(int link) const { return starts_[link]; }
  double link_end_ft(int link) const { return starts_[link] + links_[link].length_ft; }
  int link_at(double s_ft) const;
  double detector_position_ft(int link) const {
    return starts_[link] + 0.5 * links_[link].length_ft;
  }

  int lane_count_at(double s_ft) const { return links_[link_at(s_ft)].lane_count; }

  // End of a lane's physical extent; total length for through lanes.
  double lane_end_ft(int lane) const { return lane_ends_[lane]; }
  bool lane_terminates(int lane) const { return lane_ends_[lane] < total_length_; }

  // Terminating lanes ordered by where they end (first drop first).
  const std::vector<int>& terminating_lanes() const { return terminating_; }

 private:
  std::vector<LinkSpec> links_;
  std::vector<double> starts_;
  std::vector<double> lane_ends_;
  std::vector<int> terminating_;
  double total_length_ = 0.0;
  int max_lanes_ = 0;
};

}  // namespace lanedrop::sim

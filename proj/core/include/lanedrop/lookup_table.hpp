#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lanedrop::prob {

// Axis order of the normalized base-case space.
enum Axis : std::size_t { kDvRel = 0, kMu = 1, kSigma = 2, kGap = 3, kTime = 4 };
inline constexpr std::size_t kAxisCount = 5;

// Grid node coordinates per axis, strictly increasing, >= 2 nodes each.
struct GridSpec {
  std::array<std::vector<double>, kAxisCount> axes;

  std::size_t node_count() const;
  void validate() const;  // throws std::invalid_argument
};

// Default grid: 9 x 9 x 7 x 9 x 5 over (dv_rel, mu_n, sigma_n, g_n, t_n),
// spanning the parameter ranges the corridor advisor actually queries.
GridSpec default_grid();

struct TableMeta {
  std::uint32_t version = 1;
  std::uint64_t samples_per_node = 0;
  std::uint64_t build_seed = 0;
};

// Precomputed base-case success probabilities over a GridSpec, immutable
// after construction. Values are row-major with the last axis fastest.
class LookupTable {
 public:
  LookupTable(GridSpec grid, std::vector<double> values, TableMeta meta);

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const TableMeta& meta() const { return meta_; }

  double value_at(const std::array<std::size_t, kAxisCount>& idx) const;
  std::size_t flat_index(const std::array<std::size_t, kAxisCount>& idx) const;

  // Binary file format "LCPT": little-endian, self-describing header
  // (magic, version, axis count, per-axis node coordinates as f64,
  // sample count, build seed) followed by row-major f64 values.
  // Round-trips bit-exactly.
  void save(const std::filesystem::path& path) const;
  static LookupTable load(const std::filesystem::path& path);

 private:
  GridSpec grid_;
  std::vector<double> values_;
  TableMeta meta_;
  std::array<std::size_t, kAxisCount> strides_{};
};

// Runs mc_base_case at every grid node. Per-node seeds derive from
// (seed, node index), so the result is independent of the thread count.
// threads == 0 picks the hardware concurrency.
LookupTable build_lookup_table(const GridSpec& grid, std::uint64_t samples_per_node,
                               std::uint64_t seed, unsigned threads = 0);

}  // namespace lanedrop::prob

#include "lanedrop/lookup_table.hpp"

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "lanedrop/prob.hpp"
#include "lanedrop/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "LCPT serialization assumes a little-endian host");

namespace lanedrop::prob {

std::size_t GridSpec::node_count() const {
  std::size_t n = 1;
  for (const auto& axis : axes) n *= axis.size();
  return n;
}

void GridSpec::validate() const {
  for (std::size_t k = 0; k < kAxisCount; ++k) {
    const auto& axis = axes[k];
    if (axis.size() < 2) throw std::invalid_argument("GridSpec: axis needs >= 2 nodes");
    for (std::size_t i = 1; i < axis.size(); ++i) {
      if (!(axis[i] > axis[i - 1])) {
        throw std::invalid_argument("GridSpec: axis must be strictly increasing");
      }
    }
  }
}

GridSpec default_grid() {
  GridSpec g;
  // dv_rel <= 1 by construction (target streams do not move backwards);
  // denser near the frozen-sweep valley at 0.
  g.axes[kDvRel] = {-2.0, -1.3, -0.8, -0.45, -0.2, 0.0, 0.2, 0.5, 1.0};
  g.axes[kMu] = {-6.0, -5.1, -4.2, -3.3, -2.5, -1.8, -1.1, -0.4, 0.5};
  g.axes[kSigma] = {0.05, 0.2, 0.4, 0.65, 0.95, 1.2, 1.5};
  g.axes[kGap] = {0.0, 0.02, 0.05, 0.1, 0.18, 0.3, 0.5, 0.75, 1.1};
  g.axes[kTime] = {0.0, 0.2, 0.45, 0.7, 1.0};
  return g;
}

LookupTable::LookupTable(GridSpec grid, std::vector<double> values, TableMeta meta)
    : grid_(std::move(grid)), values_(std::move(values)), meta_(meta) {
  grid_.validate();
  if (values_.size() != grid_.node_count()) {
    throw std::invalid_argument("LookupTable: value count != grid node count");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("LookupTable: value outside [0, 1]");
    }
  }
  std::size_t stride = 1;
  for (std::size_t k = kAxisCount; k-- > 0;) {
    strides_[k] = stride;
    stride *= grid_.axes[k].size();
  }
}

std::size_t LookupTable::flat_index(const std::array<std::size_t, kAxisCount>& idx) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < kAxisCount; ++k) flat += idx[k] * strides_[k];
  return flat;
}

double LookupTable::value_at(const std::array<std::size_t, kAxisCount>& idx) const {
  return values_[flat_index(idx)];
}

LookupTable build_lookup_table(const GridSpec& grid, std::uint64_t samples_per_node,
                               std::uint64_t seed, unsigned threads) {
  grid.validate();
  if (samples_per_node < 1) {
    throw std::invalid_argument("build_lookup_table: samples_per_node must be >= 1");
  }
  const std::size_t n = grid.node_count();
  std::vector<double> values(n);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n));

  const auto node_query = [&grid](std::size_t flat) {
    std::array<std::size_t, kAxisCount> idx{};
    for (std::size_t k = kAxisCount; k-- > 0;) {
      idx[k] = flat % grid.axes[k].size();
      flat /= grid.axes[k].size();
    }
    return NormalizedBaseQuery{grid.axes[kDvRel][idx[kDvRel]], grid.axes[kMu][idx[kMu]],
                               grid.axes[kSigma][idx[kSigma]], grid.axes[kGap][idx[kGap]],
                               grid.axes[kTime][idx[kTime]]};
  };

  std::atomic<std::size_t> cursor{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= n) return;
      values[i] = mc_base_case(node_query(i), samples_per_node, mix_seed(seed, i)).p;
    }
  };

  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  return LookupTable(grid, std::move(values), TableMeta{1, samples_per_node, seed});
}

namespace {

constexpr char kMagic[4] = {'L', 'C', 'P', 'T'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("LookupTable: truncated file");
  return v;
}

}  // namespace

void LookupTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("LookupTable: cannot open " + path.string());
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, meta_.version);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(kAxisCount));
  for (const auto& axis : grid_.axes) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(axis.size()));
    for (double x : axis) write_pod<double>(out, x);
  }
  write_pod<std::uint64_t>(out, meta_.samples_per_node);
  write_pod<std::uint64_t>(out, meta_.build_seed);
  for (double v : values_) write_pod<double>(out, v);
  if (!out) throw std::runtime_error("LookupTable: write failed");
}

LookupTable LookupTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("LookupTable: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("LookupTable: bad magic");
  }
  TableMeta meta;
  meta.version = read_pod<std::uint32_t>(in);
  if (meta.version != 1) throw std::runtime_error("LookupTable: unsupported version");
  const auto axis_count = read_pod<std::uint32_t>(in);
  if (axis_count != kAxisCount) throw std::runtime_error("LookupTable: bad axis count");
  GridSpec grid;
  for (auto& axis : grid.axes) {
    const auto len = read_pod<std::uint32_t>(in);
    axis.resize(len);
    for (auto& x : axis) x = read_pod<double>(in);
  }
  meta.samples_per_node = read_pod<std::uint64_t>(in);
  meta.build_seed = read_pod<std::uint64_t>(in);
  std::vector<double> values(grid.node_count());
  for (auto& v : values) v = read_pod<double>(in);
  return LookupTable(std::move(grid), std::move(values), meta);
}

}  // namespace lanedrop::prob

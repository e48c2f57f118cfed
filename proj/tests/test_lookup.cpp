#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lanedrop/prob.hpp"
#include "oracles.hpp"

using namespace lanedrop::prob;
namespace fs = std::filesystem;

namespace {

GridSpec tiny_grid() {
  GridSpec g;
  g.axes[kDvRel] = {-1.0, 0.0, 1.0};
  g.axes[kMu] = {-4.0, -2.0};
  g.axes[kSigma] = {0.3, 0.9};
  g.axes[kGap] = {0.0, 0.1, 0.3};
  g.axes[kTime] = {0.0, 1.0};
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("grid validation") {
  GridSpec g = tiny_grid();
  CHECK_NOTHROW(g.validate());
  g.axes[kGap] = {0.3, 0.1};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.axes[kGap] = {0.1};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.axes[kGap] = {0.1, 0.1};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("build is deterministic and thread-count independent") {
  const auto a = build_lookup_table(tiny_grid(), 3000, 21, 1);
  const auto b = build_lookup_table(tiny_grid(), 3000, 21, 2);
  CHECK(a.values() == b.values());
  const auto c = build_lookup_table(tiny_grid(), 3000, 22, 2);
  CHECK(a.values() != c.values());
}

TEST_CASE("interpolation identities") {
  const auto table = build_lookup_table(tiny_grid(), 3000, 21);
  const GridSpec& g = table.grid();

  SUBCASE("exact at every grid node") {
    std::array<std::size_t, kAxisCount> idx{};
    for (idx[0] = 0; idx[0] < g.axes[0].size(); ++idx[0])
      for (idx[1] = 0; idx[1] < g.axes[1].size(); ++idx[1])
        for (idx[2] = 0; idx[2] < g.axes[2].size(); ++idx[2])
          for (idx[3] = 0; idx[3] < g.axes[3].size(); ++idx[3])
            for (idx[4] = 0; idx[4] < g.axes[4].size(); ++idx[4]) {
              const NormalizedBaseQuery q{g.axes[0][idx[0]], g.axes[1][idx[1]],
                                          g.axes[2][idx[2]], g.axes[3][idx[3]],
                                          g.axes[4][idx[4]]};
              const auto e = interp_f2(table, q);
              CHECK(e.p == table.value_at(idx));
              CHECK_FALSE(e.clamped);
            }
  }

  SUBCASE("midpoint on one axis is the arithmetic mean") {
    std::array<std::size_t, kAxisCount> lo{1, 0, 0, 0, 0};
    std::array<std::size_t, kAxisCount> hi{1, 0, 0, 1, 0};
    const NormalizedBaseQuery q{g.axes[0][1], g.axes[1][0], g.axes[2][0],
                                0.5 * (g.axes[3][0] + g.axes[3][1]), g.axes[4][0]};
    const double expected = 0.5 * table.value_at(lo) + 0.5 * table.value_at(hi);
    CHECK(interp_f2(table, q).p == expected);
  }

  SUBCASE("out-of-hull queries clamp and flag") {
    const NormalizedBaseQuery inside{0.0, -3.0, 0.5, 0.1, 0.5};
    CHECK_FALSE(interp_f2(table, inside).clamped);
    NormalizedBaseQuery out = inside;
    out.dv_rel = -5.0;
    const auto e = interp_f2(table, out);
    CHECK(e.clamped);
    NormalizedBaseQuery edge = inside;
    edge.dv_rel = -1.0;
    CHECK(e.p == interp_f2(table, edge).p);
  }

  SUBCASE("infeasible completion returns exact zero") {
    const NormalizedBaseQuery q{0.2, -3.0, 0.5, 0.1, 1.25};
    const auto e = interp_f2(table, q);
    CHECK(e.p == 0.0);
  }
}

TEST_CASE("serialization round-trips bit-exactly") {
  const auto table = build_lookup_table(tiny_grid(), 2500, 33);
  const fs::path path = fs::temp_directory_path() / "lanedrop_test_table.lcpt";
  table.save(path);
  const auto loaded = LookupTable::load(path);
  CHECK(loaded.values() == table.values());
  CHECK(loaded.grid().axes == table.grid().axes);
  CHECK(loaded.meta().samples_per_node == table.meta().samples_per_node);
  CHECK(loaded.meta().build_seed == table.meta().build_seed);
  CHECK(loaded.meta().version == table.meta().version);

  // a second save of the loaded table reproduces the file byte for byte
  const fs::path path2 = fs::temp_directory_path() / "lanedrop_test_table2.lcpt";
  loaded.save(path2);
  CHECK(slurp(path) == slurp(path2));
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("load rejects corrupt files") {
  const fs::path path = fs::temp_directory_path() / "lanedrop_bad_table.lcpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS(LookupTable::load(path));
  {
    std::ofstream out(path, std::ios::binary);
    out << "LCPT";  // truncated after magic
  }
  CHECK_THROWS(LookupTable::load(path));
  fs::remove(path);
}

TEST_CASE("constructor validation") {
  const GridSpec g = tiny_grid();
  CHECK_THROWS_AS(LookupTable(g, std::vector<double>(5, 0.5), TableMeta{}),
                  std::invalid_argument);
  std::vector<double> vals(g.node_count(), 0.5);
  vals[0] = 1.5;
  CHECK_THROWS_AS(LookupTable(g, vals, TableMeta{}), std::invalid_argument);
}

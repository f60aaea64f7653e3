#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include <unistd.h>

#include <biosonix/experiments.hpp>

using namespace biosonix;
namespace fs = std::filesystem;

namespace {

Scenario three_layer() {
  return build_scenario(load_config(fs::path(BIOSONIX_CONFIG_DIR) / "three_layer.json"));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(Parallel, MapPreservesOrderAndPropagatesErrors) {
  const auto out = parallel_map(50, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], i * i);
  EXPECT_THROW(parallel_map(5, [](std::size_t i) -> int {
                 if (i == 3) fail(ErrorCode::InvalidArgument, "boom");
                 return 0;
               }),
               Error);
}

TEST(Experiments, EvenlySpacedSubsets) {
  const std::vector<std::size_t> pool{10, 11, 12, 13, 14};
  EXPECT_EQ(evenly_spaced(pool, 3), (std::vector<std::size_t>{10, 12, 14}));
  EXPECT_EQ(evenly_spaced(pool, 1), (std::vector<std::size_t>{10}));
  EXPECT_TRUE(evenly_spaced(pool, 0).empty());
  EXPECT_THROW(evenly_spaced(pool, 6), Error);
}

TEST(Experiments, NodalFrequencyFollowsClassStiffness) {
  const auto s = three_layer();
  const auto report = run_nodal_characterization(s);
  ASSERT_EQ(report.rows.size(), s.path.sound_node_count());
  std::map<ClassId, std::vector<double>> by_class;
  for (const auto& row : report.rows) {
    if (row.note == "fixed") continue;
    ASSERT_TRUE(row.dominant_hz && row.rms && row.centroid_hz);
    by_class[*row.class_id].push_back(*row.dominant_hz);
  }
  // Ordering of sqrt(E / rho): fat < muscle < skin.
  EXPECT_LT(median(by_class[1]), median(by_class[2]));
  EXPECT_LT(median(by_class[2]), median(by_class[0]));
  // A node inside the fat layer rings near sqrt(2 K / m) / 2 pi = sqrt(2) * 220 Hz.
  EXPECT_NEAR(*report.rows[10].dominant_hz, std::sqrt(2.0) * 220.0, 0.02 * 311.0);
}

TEST(Experiments, HomogeneousNodesMatch) {
  auto c = load_config(fs::path(BIOSONIX_CONFIG_DIR) / "three_layer.json");
  for (auto& k : c.classes) k = {k.id, k.name, 1000, 1e4, 0.4, 2.0};
  const auto report = run_nodal_characterization(build_scenario(c));
  std::vector<double> f;
  for (const auto& row : report.rows)
    if (row.dominant_hz) f.push_back(*row.dominant_hz);
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  EXPECT_LE(*hi - *lo, 1e-9);
}

TEST(Experiments, AreaAndContributionSweeps) {
  const auto s = three_layer();
  const auto trace = simulate(s);
  const auto area = run_sonic_area_sweep(s, trace, {0.3, 0.0, 0.02, 0.05, 0.1, 0.05});
  ASSERT_EQ(area.rows.size(), 5u);
  EXPECT_EQ(area.rows.front().swept_value, 0.0);
  EXPECT_EQ(area.rows.front().drivers, 1u);
  EXPECT_EQ(area.rows.back().drivers, 23u);
  ASSERT_TRUE(area.minimal_radius);

  const auto contrib = run_contribution_sweep(s, trace, {0, 1, 2, 4, 8, 20});
  ASSERT_EQ(contrib.rows.size(), 6u);
  EXPECT_EQ(contrib.rows[0].note, "silence");
  EXPECT_EQ(*contrib.rows[0].rms, 0.0);
  EXPECT_EQ(contrib.rows[5].drivers, 11u);
  EXPECT_NE(contrib.rows[5].note.find("clamped"), std::string::npos);
  EXPECT_EQ(contrib.warnings.size(), 1u);
  for (std::size_t i = 1; i < contrib.rows.size(); ++i) ASSERT_TRUE(contrib.rows[i].smoothness);

  const auto dir = fs::temp_directory_path() / ("biosonix_exp_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  write_report_csv(contrib, dir / "c.csv");
  EXPECT_EQ(line_count(dir / "c.csv"), 1u + contrib.rows.size());
  fs::remove_all(dir);
}

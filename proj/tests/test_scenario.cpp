#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <biosonix/pipeline.hpp>

using namespace biosonix;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path config_path(const char* name) { return fs::path(BIOSONIX_CONFIG_DIR) / name; }

json raw(const char* name) {
  std::ifstream in(config_path(name));
  return json::parse(in);
}

std::string field_of(const json& j) {
  try {
    validate_config(parse_config(j));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, SamplesLoadAndValidate) {
  for (const char* name : {"three_layer.json", "sphere_inclusion.json"}) {
    const auto c = load_config(config_path(name));
    EXPECT_NO_THROW(validate_config(c)) << name;
  }
  const auto c = load_config(config_path("three_layer.json"));
  ASSERT_EQ(c.classes.size(), 3u);
  EXPECT_EQ(c.classes[1].name, "fat");
  EXPECT_EQ(c.analysis.target_class, 2);
  EXPECT_TRUE(std::holds_alternative<LayerSpec>(c.geometry.spec));
}

TEST(Config, RoundTripThroughJsonAndDisk) {
  for (const char* name : {"three_layer.json", "sphere_inclusion.json"}) {
    const auto c = load_config(config_path(name));
    EXPECT_EQ(parse_config(to_json(c)), c) << name;
    const auto tmp = fs::temp_directory_path() / ("biosonix_cfg_" + std::to_string(::getpid()) + ".json");
    save_config(c, tmp);
    EXPECT_EQ(load_config(tmp), c);
    fs::remove(tmp);
  }
  auto c = load_config(config_path("three_layer.json"));
  c.synth.topology = TopologyKind::Lattice3D;
  c.synth.listeners = std::vector<std::size_t>{3, 9};
  c.synth.driver_radius = 0.02;
  EXPECT_EQ(parse_config(to_json(c)), c);
}

TEST(Config, ErrorsNameTheField) {
  auto j = raw("three_layer.json");
  j["classes"][1]["E_pa"] = -5;
  EXPECT_EQ(field_of(j), "classes[1].E_pa");

  j = raw("three_layer.json");
  j["geometry"]["layers"][0]["class_id"] = 9;
  EXPECT_EQ(field_of(j), "geometry.layers[0].class_id");

  j = raw("three_layer.json");
  j["mapping"]["audio_rate_hz"] = 4000;
  EXPECT_EQ(field_of(j), "mapping.audio_rate_hz");

  j = raw("three_layer.json");
  j["analysis"]["stft_window"] = 1000;
  EXPECT_EQ(field_of(j), "analysis.stft_window");

  j = raw("three_layer.json");
  j["analysis"]["driver_counts"] = json::array({1, 2.5});
  EXPECT_FALSE(field_of(j).empty());

  j = raw("three_layer.json");
  j["trajectory"]["direction"] = json::array({0, 0, 0});
  EXPECT_EQ(field_of(j), "trajectory.direction");

  j = raw("three_layer.json");
  j.erase("classes");
  EXPECT_FALSE(field_of(j).empty());
}

TEST(Scenario, ThreeLayerDerivedQuantities) {
  const auto s = build_scenario(load_config(config_path("three_layer.json")));
  EXPECT_EQ(s.path.sound_node_count(), 25u);
  EXPECT_NEAR(s.materials.scale, 58.6, 0.05);
  const auto crossings = boundary_crossing_times(s.domain, s.trajectory);
  ASSERT_EQ(crossings.size(), 2u);
  EXPECT_NEAR(crossings[0].time, 5.0, 1e-9);
  EXPECT_NEAR(crossings[1].time, 16.2, 1e-9);
  EXPECT_EQ(target_start_node(s, 2), 16u);
  const auto listeners = default_listener_nodes(s);
  EXPECT_EQ(listeners, (std::vector<std::size_t>{12, 20}));
  EXPECT_EQ(free_sound_nodes(s).size(), 23u);
  const auto area = sonic_area_nodes(s, 2, 0.02);
  EXPECT_EQ(area, (std::vector<std::size_t>{14, 15, 16, 17, 18}));
}

TEST(Scenario, SonifyIsDeterministicAndMastered) {
  auto c = load_config(config_path("sphere_inclusion.json"));
  c.trajectory.duration = 3.0;
  const auto s = build_scenario(c);
  const auto trace = simulate(s);
  const auto a = sonify(s, trace);
  const auto b = sonify(s, trace);
  EXPECT_EQ(a.render.audio.samples, b.render.audio.samples);
  EXPECT_EQ(a.render.audio.samples.size(), 3u * 44100u);
  float peak = 0;
  for (float v : a.render.audio.samples) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, std::pow(10.0, -1.0 / 20.0), 1e-6);
  EXPECT_TRUE(a.render.stability.pass);
}

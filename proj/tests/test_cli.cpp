#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <biosonix/scenario.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("biosonix_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult invoke(const std::string& args) {
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string(BIOSONIX_CLI) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
  }

  std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path short_config(const char* name, double duration) {
    auto c = biosonix::load_config(fs::path(BIOSONIX_CONFIG_DIR) / name);
    c.trajectory.duration = duration;
    const auto p = dir_ / name;
    biosonix::save_config(c, p);
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(invoke("--help").code, 0);
  EXPECT_EQ(invoke("").code, 2);
  EXPECT_EQ(invoke("frobnicate").code, 2);
  EXPECT_EQ(invoke("simulate --config x.json").code, 2);
  const auto cfg = short_config("three_layer.json", 2.0);
  EXPECT_EQ(invoke("experiment --kind bogus --config " + cfg.string() + " --out " + dir_.string()).code, 2);
}

TEST_F(Cli, InvalidConfigNamesField) {
  std::ifstream in(fs::path(BIOSONIX_CONFIG_DIR) / "three_layer.json");
  auto j = nlohmann::json::parse(in);
  j["classes"][2]["E_pa"] = -1.0;
  const auto bad = dir_ / "bad.json";
  std::ofstream(bad) << j.dump();
  const auto r = invoke("simulate --config " + bad.string() + " --out " + (dir_ / "t.csv").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("classes[2].E_pa"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "t.csv"));
}

TEST_F(Cli, StagesChainThroughFiles) {
  const auto cfg = short_config("sphere_inclusion.json", 8.0);
  const auto trace = dir_ / "trace.csv";
  ASSERT_EQ(invoke("simulate --config " + cfg.string() + " --out " + trace.string()).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "trace_nodes.csv"));
  const auto wav = dir_ / "out.wav";
  ASSERT_EQ(invoke("sonify --config " + cfg.string() + " --trace " + trace.string() + " --out " + wav.string()).code, 0);
  EXPECT_EQ(fs::file_size(wav), 44u + 8u * 44100u * 4u);
  const auto report = dir_ / "report.csv";
  ASSERT_EQ(invoke("analyze --config " + cfg.string() + " --trace " + trace.string() + " --wav " + wav.string() +
                " --out " + report.string())
                .code,
            0);
  EXPECT_EQ(read(report).rfind("metric,index,value\ncorrelation,0,", 0), 0u);
}

TEST_F(Cli, PipelineIsBitIdenticalOnRerun) {
  const auto cfg = short_config("three_layer.json", 6.0);
  ASSERT_EQ(invoke("pipeline --config " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(invoke("pipeline --config " + cfg.string() + " --out " + (dir_ / "b").string()).code, 0);
  for (const char* f : {"trace.csv", "nodes.csv", "out.wav", "report.csv", "spectrogram.pgm"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(read(dir_ / "a" / f), read(dir_ / "b" / f)) << f;
  }
}

TEST_F(Cli, PipelineFailsFastWithStage) {
  auto c = biosonix::load_config(fs::path(BIOSONIX_CONFIG_DIR) / "three_layer.json");
  c.trajectory.entry = {0.125, 0.125, 0.0};
  c.trajectory.direction = {0.0, 0.0, -1.0};  // points out of the domain
  const auto p = dir_ / "miss.json";
  biosonix::save_config(c, p);
  const auto r = invoke("pipeline --config " + p.string() + " --out " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("stage failed"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "o" / "out.wav"));
}

TEST_F(Cli, ExperimentWritesOneRowPerValue) {
  const auto cfg = short_config("three_layer.json", 20.0);
  ASSERT_EQ(invoke("experiment --kind contribution --config " + cfg.string() + " --out " + dir_.string()).code, 0);
  const auto csv = read(dir_ / "contribution_report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 5);
  EXPECT_TRUE(fs::exists(dir_ / "drivers_8.wav"));
}

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <biosonix/biomech.hpp>
#include <biosonix/trace_io.hpp>

using namespace biosonix;
namespace fs = std::filesystem;

namespace {

AnatomicalDomain three_layer() {
  std::vector<TissueClass> classes{{0, "skin", 1100, 1e5, 0.4, 2.0},
                                   {1, "fat", 920, 3e3, 0.4, 2.0},
                                   {2, "muscle", 1060, 2.5e4, 0.4, 2.0}};
  return build_layered_domain({{0, 0.05}, {1, 0.112}, {2, 0.088}}, 0.25, 0.01, classes);
}

const Trajectory kVertical({0.125, 0.125, 0}, {0, 0, 1}, 0.01, 25);

std::size_t column_of(const DisplacementTrace& t, NodeId id) {
  for (std::size_t n = 0; n < t.node_count(); ++n)
    if (t.node_ids[n] == id) return n;
  ADD_FAILURE() << "node " << id << " not in trace";
  return 0;
}

NodeId grid_id(int i, int j, int k) { return static_cast<NodeId>(k * 26 * 26 + j * 26 + i); }

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("biosonix_test_" + std::to_string(::getpid()) + "_" + name);
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Biomech, FrameCountAndTimes) {
  const auto d = three_layer();
  const auto t = simulate_insertion(d, kVertical, {});
  EXPECT_EQ(t.frame_count(), 2500u);
  EXPECT_DOUBLE_EQ(t.times[100], 1.0);
  EXPECT_EQ(t.source, TraceSource::Simulated);
  EXPECT_NO_THROW(t.validate());
}

TEST(Biomech, CompressionAtTipIsForceOverStiffness) {
  const auto d = three_layer();
  const auto t = simulate_insertion(d, kVertical, {});
  // Tip at z = 0.03 at t = 3 s, before any puncture. Nearest grid node sits r off the axis
  // in the tip's plane, so |u| = F0 / (E L) times both Gaussian falloffs in r.
  const auto n = column_of(t, grid_id(12, 12, 3));
  const double r2 = 2 * 0.005 * 0.005;
  const double expected = 1.0 / (1e5 * 0.01) * std::exp(-r2 / (2 * 0.03 * 0.03)) *
                          std::exp(-r2 / (2 * 0.02 * 0.02));
  EXPECT_NEAR(t.norm_at(300, n), expected, 1e-15);
}

TEST(Biomech, LateralKernel) {
  const auto d = three_layer();
  const auto t = simulate_insertion(d, kVertical, {});
  // Node 15 mm off axis at (0.11, 0.12, 0.03), tip at (0.125, 0.125, 0.03).
  const auto m = column_of(t, grid_id(11, 12, 3));
  const double r = std::hypot(0.015, 0.005);
  const double expected = 1e-3 * std::exp(-r * r / (2 * 0.03 * 0.03)) * std::exp(-r * r / (2 * 0.02 * 0.02));
  EXPECT_NEAR(t.norm_at(300, m), expected, 1e-15);
  // Displacement points radially away from the axis.
  EXPECT_LT(t.at(300, m).x, 0.0);
  EXPECT_LT(t.at(300, m).y, 0.0);
  EXPECT_NEAR(t.at(300, m).z, 0.0, 1e-18);
}

TEST(Biomech, PunctureSpikeAppearsAtCrossing) {
  const auto d = three_layer();
  const auto t = simulate_insertion(d, kVertical, {});
  const auto n = column_of(t, grid_id(12, 12, 5));  // on the skin/fat interface, fat class
  const double before = t.norm_at(499, n);
  const double at = t.norm_at(500, n);
  const double compliance = 1.0 / (3e3 * 0.01);
  const double spike = 2.0 * (1e5 - 3e3) / (1e5 + 3e3) * compliance;
  EXPECT_NEAR(at - before, spike, 0.02 * spike);
}

TEST(Biomech, OnlyNodesInsideInfluenceRadius) {
  const auto d = three_layer();
  const auto t = simulate_insertion(d, kVertical, {});
  for (NodeId id : t.node_ids) {
    const auto& p = d.nodes()[d.index_of(id)].position;
    ASSERT_LE(std::hypot(p.x - 0.125, p.y - 0.125), 0.03 + 1e-12);
  }
}

TEST(TraceIo, RoundTrip) {
  const auto d = three_layer();
  const Trajectory short_path({0.125, 0.125, 0}, {0, 0, 1}, 0.01, 0.5);
  const auto t = simulate_insertion(d, short_path, {});
  const auto p = temp_file("trace.csv");
  save_trace(t, p);
  const auto back = load_trace(p, d);
  fs::remove(p);
  EXPECT_EQ(back.source, TraceSource::Ingested);
  ASSERT_EQ(back.node_ids, t.node_ids);
  ASSERT_EQ(back.frame_count(), t.frame_count());
  EXPECT_NEAR(back.frame_rate, 100.0, 1e-6);
  for (std::size_t i = 0; i < t.frames.size(); ++i) {
    ASSERT_EQ(back.frames[i].x, t.frames[i].x);
    ASSERT_EQ(back.frames[i].z, t.frames[i].z);
  }
}

TEST(TraceIo, Errors) {
  const auto d = three_layer();
  const auto p = temp_file("bad.csv");
  auto code_for = [&](const std::string& text) {
    write_text(p, text);
    try {
      load_trace(p, d);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Config;  // sentinel: no throw
  };
  const std::string h = "time_s,node_id,ux_m,uy_m,uz_m\n";
  EXPECT_EQ(code_for("t,n\n0,0,0,0,0\n"), ErrorCode::MalformedRow);
  EXPECT_EQ(code_for(h + "0,0,0,0\n0.01,0,0,0,0\n"), ErrorCode::MalformedRow);
  EXPECT_EQ(code_for(h + "0,999999,0,0,0\n0.01,999999,0,0,0\n"), ErrorCode::UnknownNode);
  EXPECT_EQ(code_for(h + "0,0,nan,0,0\n0.01,0,0,0,0\n"), ErrorCode::NonFiniteValue);
  EXPECT_EQ(code_for(h + "0,0,0,0,0\n0.01,0,0,0,0\n0.03,0,0,0,0\n"), ErrorCode::NonUniformFrames);
  EXPECT_EQ(code_for(h + "0,0,0,0,0\n0,1,0,0,0\n0.01,0,0,0,0\n"), ErrorCode::MalformedRow);
  EXPECT_EQ(code_for(h + "0,0,0,0,0\n0.01,0,0,0,0\n"), ErrorCode::Config);
  fs::remove(p);
  EXPECT_THROW(load_trace(temp_file("missing.csv"), d), Error);
}

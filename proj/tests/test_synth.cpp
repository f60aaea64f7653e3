#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include <unistd.h>

#include <biosonix/fft.hpp>
#include <biosonix/network.hpp>
#include <biosonix/render.hpp>
#include <biosonix/wav.hpp>

using namespace biosonix;
namespace fs = std::filesystem;

namespace {

constexpr double kRate = 44100.0;
constexpr double kPi = std::numbers::pi;

// Fixed-end string: masses 0 and n+1 fixed, n free masses of equal m and K.
MassSpringNetwork uniform_string(std::size_t n, double m, double k, double z = 0.0) {
  MassSpringNetwork net;
  for (std::size_t j = 0; j < n + 2; ++j) net.add_mass({m, 0, j == 0 || j == n + 1, z});
  for (std::size_t j = 1; j < n + 2; ++j) net.add_spring(j - 1, j, k);
  return net;
}

MassSpringNetwork single_oscillator(double m, double f0) {
  const double k = m * std::pow(2 * kPi * f0, 2);
  MassSpringNetwork net;
  net.add_mass({m, 0, true, 0});
  net.add_mass({m, 0, false, 0});
  net.add_spring(0, 1, k);
  return net;
}

std::vector<double> record(MassSpringNetwork& net, std::size_t mass, std::size_t samples) {
  std::vector<double> out(samples);
  for (auto& v : out) {
    net.step({}, 1.0 / kRate);
    v = net.displacement(mass);
  }
  return out;
}

}  // namespace

TEST(Network, SingleOscillatorPitch) {
  auto net = single_oscillator(1e-3, 440.0);
  std::vector<double> impulse(44100, 0.0);
  impulse[0] = 1.0;
  RenderOptions opts;
  opts.master = false;
  const auto r = render(net, {{1, ForceSignal::dense(impulse)}}, {{1, 1.0}}, 44100, kRate, opts);
  const auto peak = dominant_frequency(r.premaster, kRate);
  EXPECT_NEAR(peak.frequency, 440.0, peak.bin_width);
}

TEST(Network, FixedEndStringModes) {
  const std::size_t n = 9;
  const double m = 1e-3, k = 1e4;
  for (int mode = 1; mode <= 3; ++mode) {
    auto net = uniform_string(n, m, k);
    for (std::size_t j = 1; j <= n; ++j) {
      const double shape = std::sin(mode * kPi * j / (n + 1.0));
      net.set_state(j, 1e-3 * shape, 1e-3 * shape);
    }
    const auto y = record(net, 1, 88200);
    const double expected = 2 * std::sqrt(k / m) * std::sin(mode * kPi / (2 * (n + 1.0))) / (2 * kPi);
    const auto peak = dominant_frequency(y, kRate);
    EXPECT_NEAR(peak.frequency, expected, 0.02 * expected) << "mode " << mode;
  }
}

TEST(Network, EnergyConservedWithoutDamping) {
  auto net = uniform_string(9, 1e-3, 1e4);
  net.set_state(3, 1e-3, 0.0);
  const double dt = 1.0 / kRate;
  const double e0 = net.energy(dt);
  for (int i = 0; i < 20000; ++i) net.step({}, dt);
  EXPECT_NEAR(net.energy(dt), e0, 1e-9 * e0);
}

TEST(Network, EnergyNonIncreasingWithDamping) {
  auto net = uniform_string(9, 1e-3, 1e4, damping_for(1e-3, 0.5));
  net.set_state(3, 1e-3, 0.0);
  const double dt = 1.0 / kRate;
  const double e0 = net.energy(dt);
  double prev = e0;
  for (int i = 0; i < 20000; ++i) {
    net.step({}, dt);
    const double e = net.energy(dt);
    ASSERT_LE(e, prev * (1.0 + 1e-12)) << "step " << i;
    prev = e;
  }
  EXPECT_LT(prev, 0.01 * e0);
}

TEST(Network, LatticeSpringCount) {
  SegmentedPath path;
  for (int k = 0; k < 25; ++k) {
    path.sound_node_positions.push_back(0.005 + 0.01 * k);
    path.sound_node_classes.push_back(0);
  }
  MaterialMap mat;
  mat.materials.push_back({0, 1e-3, 100, 100});
  const auto net = build_lattice_topology(path, mat, 3);
  EXPECT_EQ(net.size(), 25u * 9u);
  // Per station 2 W (W - 1) lateral springs, 24 W^2 axial springs between stations.
  EXPECT_EQ(net.springs().size(), 25u * 12u + 24u * 9u);
  EXPECT_EQ(net.springs().size(), 516u);
  EXPECT_EQ(mass_for_sound_node(net, 2), 2u * 9u + 4u);
  EXPECT_THROW(build_lattice_topology(path, mat, 4), Error);
}

TEST(Network, StabilityViolationIsReported) {
  auto net = uniform_string(3, 1e-6, 1e6);
  const auto report = stability_check(net, 1.0 / kRate);
  EXPECT_FALSE(report.pass);
  EXPECT_EQ(report.offending.size(), 3u);
  EXPECT_THROW(render(net, {}, {{1, 1.0}}, 10, kRate), Error);
}

TEST(Network, BoundCoversTheAlternatingMode) {
  const double dt = 1.0 / kRate, m = 1e-3;
  // dt^2 sum K / (4 m) = 0.9 would pass a single-mass bound, yet the alternating mode has
  // dt^2 lambda close to 7.2 > 4 and grows.
  const double k_fast = 0.9 * 4 * m / (2 * dt * dt);
  auto fast = uniform_string(20, m, k_fast);
  EXPECT_FALSE(stability_check(fast, dt).pass);
  for (std::size_t j = 1; j <= 20; ++j) fast.set_state(j, j % 2 ? 1e-6 : -1e-6, 0.0);
  for (int i = 0; i < 200; ++i) fast.step({}, dt);
  EXPECT_GT(std::abs(fast.displacement(10)), 1.0);

  const double k_ok = 0.9 * 2 * m / (2 * dt * dt);
  auto ok = uniform_string(20, m, k_ok);
  EXPECT_TRUE(stability_check(ok, dt).pass);
  for (std::size_t j = 1; j <= 20; ++j) ok.set_state(j, j % 2 ? 1e-6 : -1e-6, 0.0);
  double peak = 0;
  for (int i = 0; i < 20000; ++i) {
    ok.step({}, dt);
    peak = std::max(peak, std::abs(ok.displacement(10)));
  }
  EXPECT_LT(peak, 1e-4);
}

TEST(Render, SilenceIsExactlyZero) {
  auto net = uniform_string(9, 1e-3, 1e4);
  const auto r = render(net, {{4, ForceSignal::dense(std::vector<double>(4410, 0.0))}}, {{4, 1.0}}, 4410, kRate);
  for (float v : r.audio.samples) ASSERT_EQ(v, 0.0f);
  EXPECT_EQ(r.master_gain, 1.0);
}

TEST(Render, LinearityBeforeMastering) {
  std::vector<double> force(8820);
  for (std::size_t n = 0; n < force.size(); ++n) force[n] = std::sin(2 * kPi * 150 * n / kRate) * 0.01;
  auto net = uniform_string(9, 1e-3, 1e4, damping_for(1e-3, 0.5));
  const auto a = render(net, {{4, ForceSignal::dense(force)}}, {{4, 1.0}, {6, 1.0}}, force.size(), kRate);
  const auto b = render(net, {{4, ForceSignal::dense(force).scaled(2.0)}}, {{4, 1.0}, {6, 1.0}}, force.size(), kRate);
  auto rms = [](const std::vector<double>& x) {
    double acc = 0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / x.size());
  };
  EXPECT_NEAR(rms(b.premaster) / rms(a.premaster), 2.0, 2e-9);
  // Mastering lands both at -1 dBFS.
  float peak = 0;
  for (float v : b.audio.samples) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, std::pow(10.0, -1.0 / 20.0), 1e-6);
}

TEST(Render, Deterministic) {
  std::vector<double> force(4410, 0.0);
  force[10] = 1.0;
  auto net = uniform_string(9, 1e-3, 1e4, damping_for(1e-3, 0.5));
  const auto a = render(net, {{2, ForceSignal::dense(force)}}, {{5, 1.0}}, 4410, kRate);
  const auto b = render(net, {{2, ForceSignal::dense(force)}}, {{5, 1.0}}, 4410, kRate);
  EXPECT_EQ(a.audio.samples, b.audio.samples);
}

TEST(Render, DcBlockerRemovesConstant) {
  DcBlocker dc(20.0, kRate);
  double y = 0;
  for (int i = 0; i < 44100; ++i) y = dc.process(1.0);
  EXPECT_LT(std::abs(y), 1e-6);
}

TEST(Render, RejectsDriverOnFixedMass) {
  auto net = uniform_string(3, 1e-3, 1e4);
  EXPECT_THROW(render(net, {{0, ForceSignal::dense({1.0})}}, {{1, 1.0}}, 1, kRate), Error);
}

TEST(Wav, SizeAndRoundTrip) {
  AudioBuffer buf;
  buf.samples.resize(44100);
  for (std::size_t n = 0; n < buf.samples.size(); ++n)
    buf.samples[n] = static_cast<float>(0.5 * std::sin(2 * kPi * 440 * n / kRate));
  const auto bytes = encode_wav(buf);
  EXPECT_EQ(bytes.size(), 44u + 176400u);
  const auto path = fs::temp_directory_path() / ("biosonix_wav_" + std::to_string(::getpid()) + ".wav");
  write_wav(buf, path);
  EXPECT_EQ(fs::file_size(path), 44u + 176400u);
  const auto back = read_wav(path);
  fs::remove(path);
  EXPECT_EQ(back.sample_rate, 44100.0);
  EXPECT_EQ(back.samples, buf.samples);
  EXPECT_THROW(decode_wav("RIFFxxxx", "bad"), Error);
}

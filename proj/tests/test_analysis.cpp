#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <biosonix/analysis.hpp>

using namespace biosonix;

namespace {

constexpr double kRate = 44100.0;
constexpr double kPi = std::numbers::pi;

std::vector<double> sine(double f, double amp, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * kPi * f * i / kRate);
  return x;
}

EnvelopeSeries series(std::vector<double> v, double rate = 100.0) {
  EnvelopeSeries e;
  for (std::size_t i = 0; i < v.size(); ++i) e.times.push_back(i / rate);
  e.values = std::move(v);
  return e;
}

}  // namespace

TEST(Fft, MatchesDirectDft) {
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> x(64);
  for (auto& v : x) v = g(rng);
  const auto mag = magnitude_spectrum(x, 64);
  for (std::size_t k = 0; k <= 32; ++k) {
    std::complex<double> acc;
    for (std::size_t n = 0; n < 64; ++n) acc += x[n] * std::polar(1.0, -2 * kPi * k * n / 64.0);
    EXPECT_NEAR(mag[k], std::abs(acc), 1e-10);
  }
  std::vector<std::complex<double>> bad(12);
  EXPECT_THROW(fft_in_place(bad), Error);
}

TEST(Stft, PeakAt440) {
  const auto x = sine(440, 0.5, 44100);
  const auto spec = stft(x, kRate, 2048, 512);
  const double bin = kRate / 2048;
  for (std::size_t f = 0; f < spec.frame_count(); ++f) {
    const auto row = spec.frame(f);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    ASSERT_NEAR(spec.bin_frequencies[best], 440.0, bin);
  }
  EXPECT_EQ(spec.frame_count(), (44100 - 2048) / 512 + 1);
}

TEST(Stft, ParsevalPerFrame) {
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  std::vector<double> x(2048);
  for (auto& v : x) v = g(rng);
  const auto spec = stft(x, kRate, 2048, 2048);
  const auto w = hann_window(2048);
  double time_energy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) time_energy += w[i] * w[i] * x[i] * x[i];
  EXPECT_NEAR(stft_energy(spec), time_energy, 1e-9 * time_energy);
}

TEST(Stft, ParsevalOverlapGain) {
  const auto x = sine(1000, 0.3, 441000);
  const auto spec = stft(x, kRate, 2048, 441);
  double e = 0;
  for (double v : x) e += v * v;
  // Only the span covered by full windows contributes.
  const double covered = static_cast<double>((spec.frame_count() - 1) * 441 + 2048) / x.size();
  EXPECT_NEAR(stft_energy(spec) / (e * covered * stft_energy_gain(2048, 441)), 1.0, 0.01);
}

TEST(Envelope, SineRms) {
  const auto x = sine(441, 1.0, 44100);
  const auto env = rms_envelope(x, kRate, 1000, 441);
  for (double v : env.values) ASSERT_NEAR(v, std::sqrt(0.5), 1e-3);
  const auto full = rms_envelope(x, kRate, 44100, 44100);
  ASSERT_EQ(full.size(), 1u);
  EXPECT_NEAR(full.values[0], 0.70710678, 1e-6);
}

TEST(Centroid, PureToneAt400) {
  const auto x = sine(400, 0.5, 44100);
  const auto c = spectral_centroid(stft(x, kRate, 2048, 441));
  for (double v : c.values) ASSERT_NEAR(v, 400.0, 8.0);
  const auto silent = spectral_centroid(stft(std::vector<double>(4096, 0.0), kRate, 2048, 1024));
  for (double v : silent.values) EXPECT_EQ(v, 0.0);
}

TEST(Correlation, IdenticalAndIndependent) {
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> a(20000), b(20000);
  for (auto& v : a) v = g(rng);
  for (auto& v : b) v = g(rng);
  EXPECT_NEAR(correlate(series(a), series(a)), 1.0, 1e-12);
  EXPECT_LT(std::abs(correlate(series(a), series(b))), 0.05);
  std::vector<double> neg(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) neg[i] = 3.0 - 2.0 * a[i];
  EXPECT_NEAR(correlate(series(a), series(neg)), -1.0, 1e-12);
  EXPECT_THROW(correlate(series(a), series(std::vector<double>(a.size(), 1.0))), Error);
}

TEST(Correlation, ResamplesDifferentGrids) {
  std::vector<double> a(1000), b(500);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::sin(i * 0.01);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::sin(i * 0.02);
  EXPECT_GT(correlate(series(a, 100), series(b, 50)), 0.999);
}

TEST(Transitions, StepsAreFoundAtTheRightTimes) {
  std::vector<double> v(2500, 0.1);
  for (std::size_t i = 500; i < v.size(); ++i) v[i] += 1.0;
  for (std::size_t i = 1620; i < v.size(); ++i) v[i] += 1.0;
  std::mt19937 rng(9);
  std::normal_distribution<double> g(0, 0.001);
  for (auto& x : v) x += g(rng);
  const auto t = detect_transitions(series(v), 5, 4.0);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_NEAR(t[0], 5.0, 0.05);
  EXPECT_NEAR(t[1], 16.2, 0.05);
  EXPECT_TRUE(detect_transitions(series(std::vector<double>(100, 1.0)), 5, 4.0).empty());
}

TEST(Transitions, MovingAverageShrinksAtEnds) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const auto m = moving_average(x, 3);
  EXPECT_DOUBLE_EQ(m[0], 1.5);
  EXPECT_DOUBLE_EQ(m[2], 3.0);
  EXPECT_DOUBLE_EQ(m[4], 4.5);
}

TEST(Spectrogram, PgmHeaderAndSize) {
  const auto spec = stft(sine(440, 0.5, 8192), kRate, 1024, 1024);
  const auto pgm = encode_pgm(spec);
  const std::string header = "P5\n8 513\n255\n";
  ASSERT_EQ(pgm.substr(0, header.size()), header);
  EXPECT_EQ(pgm.size(), header.size() + 8u * 513u);
}

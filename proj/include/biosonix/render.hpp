#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "error.hpp"
#include "network.hpp"
#include "signal.hpp"

namespace biosonix {

struct Driver {
  std::size_t mass_index = 0;
  ForceSignal force;
};

struct Listener {
  std::size_t mass_index = 0;
  double gain = 1.0;
};

struct AudioBuffer {
  double sample_rate = 44100.0;
  std::vector<float> samples;  // mono

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct RenderOptions {
  bool master = true;               // peak-normalize to -1 dBFS
  double dc_cutoff = 20.0;          // Hz
  static constexpr double kMasterPeakDb = -1.0;
};

struct RenderResult {
  AudioBuffer audio;
  std::vector<double> premaster;  // DC-blocked mix before mastering gain
  double master_gain = 1.0;
  std::size_t clipped = 0;
  StabilityReport stability;
};

// Listeners with equal gains 1/sqrt(count).
inline std::vector<Listener> equal_gain_listeners(const std::vector<std::size_t>& masses) {
  std::vector<Listener> out;
  const double g = masses.empty() ? 0.0 : 1.0 / std::sqrt(static_cast<double>(masses.size()));
  for (std::size_t m : masses) out.push_back({m, g});
  return out;
}

// First-order DC blocker: y[n] = x[n] - x[n-1] + R y[n-1], R = exp(-2 pi fc / fs).
class DcBlocker {
 public:
  DcBlocker(double cutoff, double sample_rate)
      : r_(std::exp(-2.0 * std::numbers::pi * cutoff / sample_rate)) {}

  double process(double x) {
    const double y = x - x_prev_ + r_ * y_prev_;
    x_prev_ = x;
    y_prev_ = y;
    return y;
  }

 private:
  double r_;
  double x_prev_ = 0.0;
  double y_prev_ = 0.0;
};

// Converts a mix to float audio: peak-normalized to -1 dBFS when `master`, else unit gain.
// Samples beyond full scale are clamped and counted.
inline AudioBuffer master_buffer(std::span<const double> mix, double audio_rate, bool master,
                                 double& gain, std::size_t& clipped) {
  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  gain = 1.0;
  if (master && peak > 0.0) gain = std::pow(10.0, RenderOptions::kMasterPeakDb / 20.0) / peak;
  clipped = 0;
  AudioBuffer out;
  out.sample_rate = audio_rate;
  out.samples.resize(mix.size());
  for (std::size_t n = 0; n < mix.size(); ++n) {
    double v = mix[n] * gain;
    if (v > 1.0 || v < -1.0) {
      ++clipped;
      v = std::clamp(v, -1.0, 1.0);
    }
    out.samples[n] = static_cast<float>(v);
  }
  return out;
}

// Steps the network once per sample (dt = 1/audio_rate) from rest, mixes the listeners,
// removes DC and masters. The network is reset before and left in its final state.
inline RenderResult render(MassSpringNetwork& net, const std::vector<Driver>& drivers,
                           const std::vector<Listener>& listeners, std::size_t sample_count,
                           double audio_rate, const RenderOptions& options = {}) {
  require(!listeners.empty(), ErrorCode::InvalidArgument, "render needs at least one listener");
  require(audio_rate > 0.0, ErrorCode::InvalidArgument, "audio rate must be > 0");
  for (const auto& l : listeners) {
    require(l.mass_index < net.size(), ErrorCode::InvalidArgument, "listener mass out of range");
    require(std::isfinite(l.gain), ErrorCode::InvalidArgument, "listener gain must be finite");
  }
  for (const auto& d : drivers) {
    require(d.mass_index < net.size(), ErrorCode::InvalidArgument, "driver mass out of range");
    require(!net.masses()[d.mass_index].fixed, ErrorCode::InvalidArgument,
            "driver attached to fixed mass " + std::to_string(d.mass_index));
    require(d.force.size() >= sample_count, ErrorCode::InvalidArgument,
            "driver force signal is shorter than the render");
  }
  const double dt = 1.0 / audio_rate;
  RenderResult result;
  result.stability = stability_check(net, dt);
  require(result.stability.pass, ErrorCode::StabilityInfeasible,
          "network violates the stability bound (max utilization " +
              std::to_string(result.stability.max_utilization) + ")");

  net.reset();
  std::vector<double> forces(net.size(), 0.0);
  DcBlocker dc(options.dc_cutoff, audio_rate);
  result.premaster.resize(sample_count);
  for (std::size_t n = 0; n < sample_count; ++n) {
    for (const auto& d : drivers) forces[d.mass_index] = 0.0;
    for (const auto& d : drivers) forces[d.mass_index] += d.force[n];
    net.step(forces, dt);
    double mix = 0.0;
    for (const auto& l : listeners) mix += l.gain * net.displacement(l.mass_index);
    result.premaster[n] = dc.process(mix);
  }

  for (double v : result.premaster) {
    require(std::isfinite(v), ErrorCode::NonFiniteValue, "render produced a non-finite sample");
  }
  result.audio = master_buffer(result.premaster, audio_rate, options.master, result.master_gain,
                               result.clipped);
  return result;
}

}  // namespace biosonix

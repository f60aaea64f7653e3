#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "error.hpp"

namespace biosonix {

// Force applied to one mass, addressed per audio sample. Either stored densely, or held
// at the trace frame rate and linearly interpolated on access (keeps long renders small).
class ForceSignal {
 public:
  ForceSignal() = default;

  static ForceSignal dense(std::vector<double> samples) {
    ForceSignal s;
    s.length_ = samples.size();
    s.samples_ = std::move(samples);
    return s;
  }

  // gain * linear interpolation of `frames` (spaced 1/frame_rate) at t = n / audio_rate.
  // Beyond the last frame the last value is held.
  static ForceSignal interpolated(std::vector<double> frames, double frame_rate, double audio_rate,
                                  double gain, std::size_t length) {
    require(!frames.empty(), ErrorCode::InvalidArgument, "force signal needs at least one frame");
    require(frame_rate > 0.0 && audio_rate > 0.0, ErrorCode::InvalidArgument,
            "force signal rates must be > 0");
    ForceSignal s;
    s.frames_ = std::move(frames);
    s.frame_rate_ = frame_rate;
    s.audio_rate_ = audio_rate;
    s.gain_ = gain;
    s.length_ = length;
    return s;
  }

  std::size_t size() const { return length_; }

  double operator[](std::size_t n) const {
    if (frames_.empty()) return n < samples_.size() ? samples_[n] : 0.0;
    const double pos = static_cast<double>(n) * frame_rate_ / audio_rate_;
    const double base = std::floor(pos);
    const std::size_t i = static_cast<std::size_t>(base);
    if (i + 1 >= frames_.size()) return gain_ * frames_.back();
    const double frac = pos - base;
    const double a = frames_[i];
    const double b = frames_[i + 1];
    return gain_ * (a + frac * (b - a));
  }

  ForceSignal scaled(double alpha) const {
    ForceSignal s = *this;
    if (frames_.empty()) {
      for (double& v : s.samples_) v *= alpha;
    } else {
      s.gain_ *= alpha;
    }
    return s;
  }

  std::vector<double> materialize() const {
    std::vector<double> out(length_);
    for (std::size_t n = 0; n < length_; ++n) out[n] = (*this)[n];
    return out;
  }

 private:
  std::vector<double> samples_;
  std::vector<double> frames_;
  double frame_rate_ = 0.0;
  double audio_rate_ = 0.0;
  double gain_ = 1.0;
  std::size_t length_ = 0;
};

}  // namespace biosonix

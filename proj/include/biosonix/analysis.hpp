#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "fft.hpp"
#include "render.hpp"
#include "trace_io.hpp"

namespace biosonix {

struct Spectrogram {
  double sample_rate = 0.0;
  std::size_t window_size = 0;
  std::size_t hop = 0;
  std::vector<double> frame_times;      // s, window centres
  std::vector<double> bin_frequencies;  // Hz, 0 .. sample_rate / 2
  std::vector<double> magnitudes;       // frames x bins, row-major

  std::size_t frame_count() const { return frame_times.size(); }
  std::size_t bin_count() const { return bin_frequencies.size(); }
  double at(std::size_t frame, std::size_t bin) const {
    return magnitudes[frame * bin_count() + bin];
  }
  std::span<const double> frame(std::size_t f) const {
    return std::span<const double>(magnitudes).subspan(f * bin_count(), bin_count());
  }
};

struct EnvelopeSeries {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return times.size(); }
};

inline std::vector<double> to_double(const AudioBuffer& buffer) {
  return {buffer.samples.begin(), buffer.samples.end()};
}

// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

// Hann-windowed magnitude STFT over full windows only.
inline Spectrogram stft(std::span<const double> x, double sample_rate, std::size_t window_size,
                        std::size_t hop) {
  require(is_power_of_two(window_size), ErrorCode::InvalidArgument,
          "STFT window size must be a power of two");
  require(hop >= 1 && hop <= window_size, ErrorCode::InvalidArgument,
          "STFT hop must lie in [1, window]");
  require(x.size() >= window_size, ErrorCode::InvalidArgument,
          "buffer is shorter than one STFT window");
  Spectrogram spec;
  spec.sample_rate = sample_rate;
  spec.window_size = window_size;
  spec.hop = hop;
  const std::size_t bins = window_size / 2 + 1;
  for (std::size_t k = 0; k < bins; ++k) {
    spec.bin_frequencies.push_back(static_cast<double>(k) * sample_rate /
                                   static_cast<double>(window_size));
  }
  const auto window = hann_window(window_size);
  std::vector<std::complex<double>> buf(window_size);
  for (std::size_t start = 0; start + window_size <= x.size(); start += hop) {
    for (std::size_t i = 0; i < window_size; ++i) buf[i] = window[i] * x[start + i];
    fft_in_place(buf);
    for (std::size_t k = 0; k < bins; ++k) spec.magnitudes.push_back(std::abs(buf[k]));
    spec.frame_times.push_back((static_cast<double>(start) + 0.5 * window_size) / sample_rate);
  }
  return spec;
}

inline Spectrogram stft(const AudioBuffer& buffer, std::size_t window_size, std::size_t hop) {
  const auto x = to_double(buffer);
  return stft(x, buffer.sample_rate, window_size, hop);
}

// Energy of all frames, (1/N) sum over the full two-sided spectrum.
inline double stft_energy(const Spectrogram& spec) {
  const std::size_t n = spec.window_size;
  double total = 0.0;
  for (std::size_t f = 0; f < spec.frame_count(); ++f) {
    const auto row = spec.frame(f);
    double e = row.front() * row.front() + row.back() * row.back();
    for (std::size_t k = 1; k + 1 < row.size(); ++k) e += 2.0 * row[k] * row[k];
    total += e / static_cast<double>(n);
  }
  return total;
}

// Ratio of STFT energy to time-domain energy for stationary content: sum(w^2) / hop.
inline double stft_energy_gain(std::size_t window_size, std::size_t hop) {
  double sum = 0.0;
  for (double w : hann_window(window_size)) sum += w * w;
  return sum / static_cast<double>(hop);
}

// Per-frame RMS over full frames (a single partial frame when the buffer is shorter).
inline EnvelopeSeries rms_envelope(std::span<const double> x, double sample_rate,
                                   std::size_t frame_len, std::size_t hop) {
  require(frame_len >= 1 && hop >= 1, ErrorCode::InvalidArgument, "frame length and hop must be >= 1");
  require(!x.empty(), ErrorCode::InvalidArgument, "cannot take the envelope of an empty buffer");
  EnvelopeSeries env;
  const std::size_t len = std::min(frame_len, x.size());
  for (std::size_t start = 0; start + len <= x.size(); start += hop) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += x[start + i] * x[start + i];
    env.values.push_back(std::sqrt(acc / static_cast<double>(len)));
    env.times.push_back((static_cast<double>(start) + 0.5 * static_cast<double>(len)) / sample_rate);
  }
  return env;
}

inline EnvelopeSeries rms_envelope(const AudioBuffer& buffer, std::size_t frame_len,
                                   std::size_t hop) {
  const auto x = to_double(buffer);
  return rms_envelope(x, buffer.sample_rate, frame_len, hop);
}

inline double centroid_of(std::span<const double> magnitudes, std::span<const double> freqs) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < magnitudes.size(); ++k) {
    num += freqs[k] * magnitudes[k];
    den += magnitudes[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

// Per-frame magnitude-weighted mean frequency; silent frames give 0.
inline EnvelopeSeries spectral_centroid(const Spectrogram& spec) {
  require(spec.frame_count() > 0, ErrorCode::InvalidArgument, "empty spectrogram");
  EnvelopeSeries out;
  out.times = spec.frame_times;
  for (std::size_t f = 0; f < spec.frame_count(); ++f) {
    out.values.push_back(centroid_of(spec.frame(f), spec.bin_frequencies));
  }
  return out;
}

// Mean of the series over samples whose time lies in [t0, t1]; 0 when none do.
inline double mean_in_window(const EnvelopeSeries& s, double t0, double t1) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.times[i] < t0 || s.times[i] > t1) continue;
    acc += s.values[i];
    ++n;
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

// Linear interpolation with end-value hold.
inline double sample_at(const EnvelopeSeries& s, double t) {
  const auto& ts = s.times;
  if (t <= ts.front()) return s.values.front();
  if (t >= ts.back()) return s.values.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const auto hi = static_cast<std::size_t>(it - ts.begin());
  const double frac = (t - ts[hi - 1]) / (ts[hi] - ts[hi - 1]);
  return s.values[hi - 1] + frac * (s.values[hi] - s.values[hi - 1]);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 3, ErrorCode::InvalidArgument,
          "correlation needs two equal-length series of at least 3 points");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  require(saa > 0.0 && sbb > 0.0, ErrorCode::InvalidArgument,
          "correlation is undefined for a constant series");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// Pearson r after resampling both series onto a shared uniform grid over their overlap.
inline double correlate(const EnvelopeSeries& a, const EnvelopeSeries& b, double grid_step = 0.01) {
  require(a.size() >= 3 && b.size() >= 3, ErrorCode::InvalidArgument,
          "correlation needs at least 3 samples per series");
  require(grid_step > 0.0, ErrorCode::InvalidArgument, "grid step must be > 0");
  const double t0 = std::max(a.times.front(), b.times.front());
  const double t1 = std::min(a.times.back(), b.times.back());
  std::vector<double> ga;
  std::vector<double> gb;
  const double first = std::ceil(t0 / grid_step - 1e-9);
  for (double k = first;; k += 1.0) {
    const double t = k * grid_step;
    if (t > t1 + 1e-12) break;
    ga.push_back(sample_at(a, t));
    gb.push_back(sample_at(b, t));
  }
  return pearson(ga, gb);
}

// Centred moving average; the window shrinks at the ends.
inline std::vector<double> moving_average(std::span<const double> x, std::size_t window) {
  std::vector<double> out(x.size());
  const std::size_t before = window / 2;
  const std::size_t after = window - 1 - before;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= before ? i - before : 0;
    const std::size_t hi = std::min(x.size() - 1, i + after);
    double acc = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) acc += x[k];
    out[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

struct Transition {
  double time = 0.0;
  double strength = 0.0;  // smoothed first difference at the event
};

// Rising transitions: smoothed first differences above k_sigma standard deviations.
// Events closer than `merge_gap` seconds collapse onto the strongest one.
inline std::vector<Transition> detect_transition_events(const EnvelopeSeries& env,
                                                        std::size_t smoothing_win, double k_sigma,
                                                        double merge_gap = 0.3) {
  require(smoothing_win >= 1, ErrorCode::InvalidArgument, "smoothing window must be >= 1");
  require(env.size() >= smoothing_win && env.size() >= 2, ErrorCode::InvalidArgument,
          "envelope shorter than the smoothing window");
  const auto smooth = moving_average(env.values, smoothing_win);
  std::vector<double> diff(smooth.size() - 1);
  double mean = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = smooth[i + 1] - smooth[i];
    mean += diff[i];
  }
  mean /= static_cast<double>(diff.size());
  double var = 0.0;
  for (double d : diff) var += (d - mean) * (d - mean);
  const double sd = std::sqrt(var / static_cast<double>(diff.size()));
  if (!(sd > 0.0)) return {};
  const double threshold = k_sigma * sd;

  std::vector<Transition> raw;
  for (std::size_t i = 0; i < diff.size();) {
    if (!(diff[i] > threshold)) {
      ++i;
      continue;
    }
    std::size_t end = i;
    double peak = diff[i];
    while (end < diff.size() && diff[end] > threshold) {
      peak = std::max(peak, diff[end]);
      ++end;
    }
    // Middle of the run of (near-)maximal differences.
    std::size_t first = end;
    std::size_t last = i;
    for (std::size_t k = i; k < end; ++k) {
      if (diff[k] >= peak * (1.0 - 1e-9)) {
        first = std::min(first, k);
        last = k;
      }
    }
    const std::size_t mid = (first + last) / 2;
    raw.push_back({env.times[mid + 1], peak});
    i = end;
  }

  std::vector<Transition> merged;
  for (const auto& ev : raw) {
    if (!merged.empty() && ev.time - merged.back().time < merge_gap) {
      if (ev.strength > merged.back().strength) merged.back() = ev;
    } else {
      merged.push_back(ev);
    }
  }
  return merged;
}

inline std::vector<double> detect_transitions(const EnvelopeSeries& env, std::size_t smoothing_win,
                                              double k_sigma) {
  std::vector<double> out;
  for (const auto& ev : detect_transition_events(env, smoothing_win, k_sigma)) {
    out.push_back(ev.time);
  }
  return out;
}

inline void write_spectrogram_csv(const Spectrogram& spec, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    std::string line = "time_s";
    for (double f : spec.bin_frequencies) {
      line.push_back(',');
      detail::append_number(line, f);
    }
    line.push_back('\n');
    out << line;
    for (std::size_t fr = 0; fr < spec.frame_count(); ++fr) {
      line.clear();
      detail::append_number(line, spec.frame_times[fr]);
      for (double m : spec.frame(fr)) {
        line.push_back(',');
        detail::append_number(line, m);
      }
      line.push_back('\n');
      out << line;
    }
  });
}

// Binary greyscale PGM: one column per frame, highest frequency on the top row,
// log magnitude relative to the global peak with an 80 dB floor.
inline std::string encode_pgm(const Spectrogram& spec) {
  const std::size_t width = spec.frame_count();
  const std::size_t height = spec.bin_count();
  double peak = 0.0;
  for (double m : spec.magnitudes) peak = std::max(peak, m);
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + width * height, '\0');
  if (peak <= 0.0) return out;
  for (std::size_t row = 0; row < height; ++row) {
    const std::size_t bin = height - 1 - row;
    for (std::size_t col = 0; col < width; ++col) {
      const double m = spec.at(col, bin);
      const double db = m > 0.0 ? 20.0 * std::log10(m / peak) : -80.0;
      const double level = std::clamp((db + 80.0) / 80.0, 0.0, 1.0);
      out[header + row * width + col] = static_cast<char>(std::lround(level * 255.0));
    }
  }
  return out;
}

inline void write_spectrogram_pgm(const Spectrogram& spec, const std::filesystem::path& path) {
  const std::string bytes = encode_pgm(spec);
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  });
}

}  // namespace biosonix

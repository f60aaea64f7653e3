#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "error.hpp"

namespace biosonix {

inline bool is_power_of_two(std::size_t n) { return n != 0 && std::has_single_bit(n); }

// In-place iterative radix-2 FFT (forward, unnormalized).
inline void fft_in_place(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  require(is_power_of_two(n), ErrorCode::InvalidArgument, "FFT size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Recompute twiddles periodically to bound drift on long transforms.
        if ((k & 63) == 0 && k != 0) {
          const double a_k = angle * static_cast<double>(k);
          w = {std::cos(a_k), std::sin(a_k)};
        }
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// |X_k| for k = 0..n_fft/2 of the zero-padded input.
inline std::vector<double> magnitude_spectrum(std::span<const double> x, std::size_t n_fft) {
  require(x.size() <= n_fft, ErrorCode::InvalidArgument, "input longer than FFT size");
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i];
  fft_in_place(buf);
  std::vector<double> mag(n_fft / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
  return mag;
}

struct SpectralPeak {
  double frequency = 0.0;  // Hz, bin centre
  double bin_width = 0.0;  // Hz
  double magnitude = 0.0;
};

// Largest non-DC bin of the zero-padded spectrum (padding to the next power of two).
inline SpectralPeak dominant_frequency(std::span<const double> x, double sample_rate) {
  require(x.size() >= 2, ErrorCode::InvalidArgument, "signal too short for a spectrum");
  const std::size_t n_fft = std::bit_ceil(x.size());
  const auto mag = magnitude_spectrum(x, n_fft);
  std::size_t best = 1;
  for (std::size_t k = 2; k < mag.size(); ++k) {
    if (mag[k] > mag[best]) best = k;
  }
  const double width = sample_rate / static_cast<double>(n_fft);
  return {static_cast<double>(best) * width, width, mag[best]};
}

}  // namespace biosonix

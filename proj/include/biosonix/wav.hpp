#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "error.hpp"
#include "render.hpp"
#include "trace_io.hpp"

namespace biosonix {

namespace wav_detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

constexpr std::uint16_t kFormatIeeeFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace wav_detail

// Mono 32-bit IEEE float RIFF/WAVE.
inline std::string encode_wav(const AudioBuffer& buffer) {
  using namespace wav_detail;
  require(buffer.sample_rate > 0.0 && buffer.sample_rate < 4.0e9, ErrorCode::InvalidArgument,
          "invalid sample rate");
  const auto rate = static_cast<std::uint32_t>(std::llround(buffer.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(buffer.samples.size() * sizeof(float));
  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  put_u32(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatIeeeFloat);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 4);
  put_u16(out, 4);
  put_u16(out, 32);
  out.append("data");
  put_u32(out, data_bytes);
  for (float s : buffer.samples) put_u32(out, std::bit_cast<std::uint32_t>(s));
  return out;
}

inline void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path) {
  for (float s : buffer.samples) {
    require(std::isfinite(s), ErrorCode::NonFiniteValue, "audio buffer holds a non-finite sample");
  }
  const std::string bytes = encode_wav(buffer);
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  });
}

inline AudioBuffer decode_wav(const std::string& bytes, const std::string& name) {
  using namespace wav_detail;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  require(size >= 12 && std::memcmp(p, "RIFF", 4) == 0 && std::memcmp(p + 8, "WAVE", 4) == 0,
          ErrorCode::Io, name + ": not a RIFF/WAVE file");
  bool have_fmt = false;
  AudioBuffer buffer;
  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint32_t chunk = get_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      require(chunk >= 16 && body + chunk <= size, ErrorCode::Io, name + ": truncated fmt chunk");
      const std::uint16_t format = get_u16(p + body);
      const std::uint16_t channels = get_u16(p + body + 2);
      const std::uint16_t bits = get_u16(p + body + 14);
      require(format == kFormatIeeeFloat || format == kFormatExtensible, ErrorCode::Io,
              name + ": only IEEE float WAV is supported");
      require(channels == 1 && bits == 32, ErrorCode::Io, name + ": expected mono 32-bit float");
      buffer.sample_rate = get_u32(p + body + 4);
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      require(have_fmt, ErrorCode::Io, name + ": data chunk before fmt chunk");
      require(body + chunk <= size, ErrorCode::Io, name + ": truncated data chunk");
      require(chunk % 4 == 0, ErrorCode::Io, name + ": data size is not a whole sample count");
      buffer.samples.resize(chunk / 4);
      for (std::size_t i = 0; i < buffer.samples.size(); ++i) {
        buffer.samples[i] = std::bit_cast<float>(get_u32(p + body + 4 * i));
      }
      return buffer;
    }
    pos = body + chunk + (chunk & 1u);
  }
  fail(ErrorCode::Io, name + ": no data chunk");
}

inline AudioBuffer read_wav(const std::filesystem::path& path) {
  return decode_wav(detail::read_all(path), path.string());
}

}  // namespace biosonix

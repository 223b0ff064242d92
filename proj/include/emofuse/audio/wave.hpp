// emofuse/audio/wave.hpp

// Copyright 2026  Emofuse Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef EMOFUSE_AUDIO_WAVE_HPP_
#define EMOFUSE_AUDIO_WAVE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace emofuse::audio {

// One pre-segmented utterance with its metadata.
struct WaveSegment {
  std::string segment_id;
  std::vector<float> samples;  // amplitudes in [-1, 1]
  int sample_rate = 16000;
  int session = 1;
  std::string speaker;
  std::optional<std::string> label;
  std::optional<std::string> transcript;
};

inline void validate_wave(const WaveSegment& w) {
  if (w.samples.empty())
    throw std::invalid_argument("wave '" + w.segment_id + "': no samples");
  if (w.sample_rate <= 0)
    throw std::invalid_argument("wave '" + w.segment_id + "': sample rate " +
                                std::to_string(w.sample_rate) + " must be positive");
  for (float s : w.samples)
    if (!(std::fabs(s) <= 1.0f))
      throw std::invalid_argument("wave '" + w.segment_id +
                                  "': amplitude outside [-1, 1]");
  if (w.session < 1)
    throw std::invalid_argument("wave '" + w.segment_id + "': session " +
                                std::to_string(w.session) + " must be >= 1");
}

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// Reads a mono PCM WAV file, 16-bit integer or 32-bit float. Unknown chunks
// are skipped; multi-channel audio is rejected.
inline WaveSegment read_wav(const std::string& path, const std::string& segment_id = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open wav file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  WaveSegment w;
  w.segment_id = segment_id.empty() ? path : segment_id;
  std::uint16_t format = 0, channels = 0, bits = 0;
  bool got_fmt = false, got_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = detail::read_u32le(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size())
      throw std::runtime_error("truncated chunk in wav file: " + path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16) throw std::runtime_error("malformed fmt chunk: " + path);
      format = detail::read_u16le(bytes.data() + body);
      channels = detail::read_u16le(bytes.data() + body + 2);
      w.sample_rate = static_cast<int>(detail::read_u32le(bytes.data() + body + 4));
      bits = detail::read_u16le(bytes.data() + body + 14);
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw std::runtime_error("data chunk before fmt chunk: " + path);
      if (channels != 1)
        throw std::runtime_error("expected mono audio, got " + std::to_string(channels) +
                                 " channels: " + path);
      if (format == 1 && bits == 16) {
        const std::size_t n = len / 2;
        w.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          std::int16_t v;
          std::memcpy(&v, bytes.data() + body + 2 * i, 2);
          w.samples[i] = std::max(-1.0f, static_cast<float>(v) / 32768.0f);
        }
      } else if (format == 3 && bits == 32) {
        const std::size_t n = len / 4;
        w.samples.resize(n);
        std::memcpy(w.samples.data(), bytes.data() + body, n * 4);
        for (float& s : w.samples) s = std::clamp(s, -1.0f, 1.0f);
      } else {
        throw std::runtime_error("unsupported wav encoding (format " +
                                 std::to_string(format) + ", " + std::to_string(bits) +
                                 " bits): " + path);
      }
      got_data = true;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }
  if (!got_data) throw std::runtime_error("wav file has no data chunk: " + path);
  return w;
}

// Writes mono 16-bit PCM.
inline void write_wav(const std::string& path, const std::vector<float>& samples,
                      int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create wav file: " + path);
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<char*>(b), 2);
  };
  out.write("RIFF", 4);
  put_u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(static_cast<std::uint32_t>(sample_rate));
  put_u32(static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(2);
  put_u16(16);
  out.write("data", 4);
  put_u32(data_len);
  for (float s : samples) {
    const double scaled = std::clamp(static_cast<double>(s), -1.0, 1.0) * 32767.0;
    const std::int16_t v = static_cast<std::int16_t>(std::lround(scaled));
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
  }
  if (!out) throw std::runtime_error("short write to wav file: " + path);
}

}  // namespace emofuse::audio

#endif  // EMOFUSE_AUDIO_WAVE_HPP_

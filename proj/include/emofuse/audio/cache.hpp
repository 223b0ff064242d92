// emofuse/audio/cache.hpp

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

#ifndef EMOFUSE_AUDIO_CACHE_HPP_
#define EMOFUSE_AUDIO_CACHE_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "emofuse/audio/frontend.hpp"
#include "emofuse/common.hpp"

namespace emofuse::audio {

// Little-endian per-segment record: magic, id, n_frames, n_mels, frame rate,
// row-major float32 data, CRC32 of everything after the magic. Spectrograms
// are cached pre-normalization.

namespace detail {

constexpr char kLmsMagic[4] = {'L', 'M', 'S', '1'};

inline void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>(v));
  buf.push_back(static_cast<unsigned char>(v >> 8));
  buf.push_back(static_cast<unsigned char>(v >> 16));
  buf.push_back(static_cast<unsigned char>(v >> 24));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline void write_lms(const std::string& path, const LogMelSpectrogram& spec) {
  if (spec.normalized)
    throw std::invalid_argument("spectrogram cache stores raw log-mel; '" +
                                spec.segment_id + "' is normalized");
  std::vector<unsigned char> payload;
  payload.reserve(16 + spec.segment_id.size() + spec.data.size() * 4);
  detail::put_u32(payload, static_cast<std::uint32_t>(spec.segment_id.size()));
  payload.insert(payload.end(), spec.segment_id.begin(), spec.segment_id.end());
  detail::put_u32(payload, static_cast<std::uint32_t>(spec.n_frames));
  detail::put_u32(payload, static_cast<std::uint32_t>(spec.n_mels));
  std::uint32_t rate_bits;
  const float rate = static_cast<float>(spec.frame_rate);
  std::memcpy(&rate_bits, &rate, 4);
  detail::put_u32(payload, rate_bits);
  for (float v : spec.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    detail::put_u32(payload, bits);
  }
  const std::uint32_t crc = crc32(payload.data(), payload.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create spectrogram cache file: " + path);
  out.write(detail::kLmsMagic, 4);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  unsigned char tail[4] = {static_cast<unsigned char>(crc),
                           static_cast<unsigned char>(crc >> 8),
                           static_cast<unsigned char>(crc >> 16),
                           static_cast<unsigned char>(crc >> 24)};
  out.write(reinterpret_cast<char*>(tail), 4);
  if (!out) throw std::runtime_error("short write to spectrogram cache file: " + path);
}

inline LogMelSpectrogram read_lms(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open spectrogram cache file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 24 || std::memcmp(bytes.data(), detail::kLmsMagic, 4) != 0)
    throw std::runtime_error("not a spectrogram cache file: " + path);
  const std::size_t payload_len = bytes.size() - 8;
  const std::uint32_t want_crc = detail::get_u32(bytes.data() + bytes.size() - 4);
  const std::uint32_t got_crc = crc32(bytes.data() + 4, payload_len);
  if (want_crc != got_crc)
    throw std::runtime_error("spectrogram cache file is corrupt (checksum mismatch): " +
                             path);

  const unsigned char* p = bytes.data() + 4;
  const std::uint32_t id_len = detail::get_u32(p);
  p += 4;
  if (4 + id_len + 12 > payload_len)
    throw std::runtime_error("truncated spectrogram cache file: " + path);
  LogMelSpectrogram spec;
  spec.segment_id.assign(reinterpret_cast<const char*>(p), id_len);
  p += id_len;
  spec.n_frames = detail::get_u32(p);
  p += 4;
  spec.n_mels = static_cast<int>(detail::get_u32(p));
  p += 4;
  std::uint32_t rate_bits = detail::get_u32(p);
  p += 4;
  float rate;
  std::memcpy(&rate, &rate_bits, 4);
  spec.frame_rate = rate;
  const std::size_t n = static_cast<std::size_t>(spec.n_frames) * spec.n_mels;
  if (payload_len != 4 + id_len + 12 + n * 4)
    throw std::runtime_error("spectrogram cache file size mismatch: " + path);
  spec.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = detail::get_u32(p + i * 4);
    std::memcpy(&spec.data[i], &bits, 4);
  }
  return spec;
}

}  // namespace emofuse::audio

#endif  // EMOFUSE_AUDIO_CACHE_HPP_

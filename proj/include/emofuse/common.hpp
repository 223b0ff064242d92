// emofuse/common.hpp

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

#ifndef EMOFUSE_COMMON_HPP_
#define EMOFUSE_COMMON_HPP_

#include <array>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace emofuse {

// ---------------------------------------------------------------------------
// Logging. EMOFUSE_LOG selects verbosity: quiet, warn, info (default), debug.

enum class LogLevel { kQuiet = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("EMOFUSE_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    std::string v(env);
    if (v == "quiet") return LogLevel::kQuiet;
    if (v == "warn") return LogLevel::kWarn;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

inline void log_msg(LogLevel level, const char* fmt, ...) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  const char* tag = level == LogLevel::kWarn   ? "WARNING"
                    : level == LogLevel::kInfo ? "INFO"
                                               : "DEBUG";
  std::fprintf(stderr, "emofuse %s: ", tag);
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  va_end(args);
  std::fprintf(stderr, "\n");
}

#define EMOFUSE_WARN(...) ::emofuse::log_msg(::emofuse::LogLevel::kWarn, __VA_ARGS__)
#define EMOFUSE_INFO(...) ::emofuse::log_msg(::emofuse::LogLevel::kInfo, __VA_ARGS__)
#define EMOFUSE_DEBUG(...) ::emofuse::log_msg(::emofuse::LogLevel::kDebug, __VA_ARGS__)

inline std::string strprintf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[1024];
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Deterministic random number generation.
//
// The whole pipeline must be byte-reproducible from a single seed, so all
// sampling goes through this generator instead of <random>, whose
// distributions are implementation-defined.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds do not produce correlated first draws.
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {  // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [lo, hi], both ends inclusive. Unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("Rng::uniform_int: lo > hi");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
  }

  double uniform_real() {  // [0, 1) with 53 random bits
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  double normal() {  // Box-Muller, cached second draw
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform_real();
    double u2 = uniform_real();
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  // Independent substream labeled by purpose, derived from this stream's seed.
  Rng fork(const std::string& label) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return Rng(state_ ^ h);
  }

  template <typename It>
  void shuffle(It first, It last) {  // Fisher-Yates
    auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      auto j = uniform_int(0, i);
      std::swap(first[i], first[j]);
    }
  }

  template <typename Container>
  void shuffle(Container& c) {
    shuffle(c.begin(), c.end());
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// CRC-32 (IEEE 802.3), used for checkpoint integrity and run manifests.

inline std::uint32_t crc32_update(std::uint32_t crc, const void* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320U ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  const auto* p = static_cast<const unsigned char*>(data);
  crc ^= 0xffffffffU;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffU;
}

inline std::uint32_t crc32(const void* data, std::size_t len) {
  return crc32_update(0, data, len);
}

inline std::uint32_t crc32(const std::string& s) { return crc32(s.data(), s.size()); }

}  // namespace emofuse

#endif  // EMOFUSE_COMMON_HPP_

// emofuse/audio/frontend.hpp

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

#ifndef EMOFUSE_AUDIO_FRONTEND_HPP_
#define EMOFUSE_AUDIO_FRONTEND_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "emofuse/audio/wave.hpp"
#include "emofuse/common.hpp"

namespace emofuse::audio {

enum class WindowKind { kHamming, kHann, kRect };

struct FrontendConfig {
  double frame_length_ms = 25.0;
  double hop_ms = 10.0;  // 100 Hz frame rate
  int n_mels = 128;
  int fft_size = 512;
  WindowKind window = WindowKind::kHamming;
  double f_min = 20.0;
  double f_max = 0.0;  // 0 means Nyquist
  double log_floor = 1e-10;
  int sample_rate = 16000;  // inputs at any other rate are rejected, not resampled

  int frame_length_samples() const {
    return static_cast<int>(std::lround(frame_length_ms * sample_rate / 1000.0));
  }
  int hop_samples() const {
    return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
  }
  double effective_f_max() const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }
  double frame_rate_hz() const { return 1000.0 / hop_ms; }

  void validate() const {
    if (n_mels < 1) throw std::invalid_argument("frontend: n_mels must be >= 1");
    if (fft_size < frame_length_samples())
      throw std::invalid_argument("frontend: fft_size " + std::to_string(fft_size) +
                                  " < frame length " +
                                  std::to_string(frame_length_samples()) + " samples");
    if ((fft_size & (fft_size - 1)) != 0)
      throw std::invalid_argument("frontend: fft_size " + std::to_string(fft_size) +
                                  " must be a power of two");
    const double fmax = effective_f_max();
    if (!(f_min >= 0.0 && f_min < fmax && fmax <= sample_rate / 2.0))
      throw std::invalid_argument("frontend: need 0 <= f_min < f_max <= Nyquist, got [" +
                                  std::to_string(f_min) + ", " + std::to_string(fmax) + "]");
  }
};

struct LogMelSpectrogram {
  std::string segment_id;
  std::vector<float> data;  // n_frames x n_mels, row-major
  std::int64_t n_frames = 0;
  int n_mels = 0;
  double frame_rate = 100.0;
  bool normalized = false;

  float& at(std::int64_t f, int m) { return data[f * n_mels + m]; }
  float at(std::int64_t f, int m) const { return data[f * n_mels + m]; }
};

inline double mel_scale(double f) {
  if (f < 0.0) throw std::invalid_argument("mel_scale: negative frequency " + std::to_string(f));
  return 2595.0 * std::log10(1.0 + f / 700.0);
}

inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

namespace detail {

// Iterative radix-2 FFT, in place.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

inline std::vector<double> make_window(WindowKind kind, int length) {
  std::vector<double> w(length, 1.0);
  if (length == 1) return w;
  for (int n = 0; n < length; ++n) {
    const double phase = 2.0 * M_PI * n / (length - 1);
    switch (kind) {
      case WindowKind::kHamming: w[n] = 0.54 - 0.46 * std::cos(phase); break;
      case WindowKind::kHann: w[n] = 0.5 - 0.5 * std::cos(phase); break;
      case WindowKind::kRect: break;
    }
  }
  return w;
}

}  // namespace detail

namespace detail {

// Mel positions of the outer band edges. The band is widened by half an FFT
// bin on each side so that a spectrum bin lying exactly on f_min or f_max
// still falls strictly inside the outermost triangle; without the margin such
// a bin would receive zero weight from every filter and in-band energy could
// vanish from the features.
inline std::pair<double, double> band_edge_mels(const FrontendConfig& cfg) {
  const double half_bin = 0.5 * cfg.sample_rate / cfg.fft_size;
  return {mel_scale(std::max(0.0, cfg.f_min - half_bin)),
          mel_scale(cfg.effective_f_max() + half_bin)};
}

}  // namespace detail

// Triangular filters with peaks equally spaced on the mel scale between f_min
// and f_max; rows are filters, columns the fft_size/2 + 1 spectrum bins.
// Rows are non-negative, and every bin within [f_min, f_max] ends up with
// positive total weight across filters: the half-bin band margin guarantees
// it for every bin above zero, and a DC bin (possible only when f_min is 0)
// is folded entirely into the lowest filter.
inline std::vector<std::vector<double>> mel_filterbank(const FrontendConfig& cfg) {
  cfg.validate();
  const int n_bins = cfg.fft_size / 2 + 1;
  const auto [m_lo, m_hi] = detail::band_edge_mels(cfg);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (cfg.n_mels + 1));
  std::vector<std::vector<double>> fb(cfg.n_mels, std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      if (f <= lo || f >= hi) continue;
      fb[m][k] = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
    }
  }
  if (cfg.f_min == 0.0) fb[0][0] = 1.0;
  return fb;
}

// Center frequency (Hz) of each mel filter's peak.
inline std::vector<double> mel_bin_centers(const FrontendConfig& cfg) {
  const auto [m_lo, m_hi] = detail::band_edge_mels(cfg);
  std::vector<double> centers(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m)
    centers[m] = mel_to_hz(m_lo + (m_hi - m_lo) * (m + 1) / (cfg.n_mels + 1));
  return centers;
}

inline std::int64_t frame_count(std::int64_t n_samples, int frame_len, int hop) {
  return (n_samples - frame_len) / hop + 1;
}

// Slices the waveform into overlapping windowed frames. Returns
// n_frames x frame_length, each frame multiplied by the analysis window.
inline std::vector<std::vector<double>> frame_signal(const WaveSegment& wave,
                                                     const FrontendConfig& cfg) {
  cfg.validate();
  if (wave.sample_rate != cfg.sample_rate)
    throw std::invalid_argument("segment '" + wave.segment_id + "' has sample rate " +
                                std::to_string(wave.sample_rate) + ", expected " +
                                std::to_string(cfg.sample_rate) +
                                " (resampling not supported)");
  const int L = cfg.frame_length_samples();
  const int H = cfg.hop_samples();
  const std::int64_t n = static_cast<std::int64_t>(wave.samples.size());
  if (n < L)
    throw std::invalid_argument("segment '" + wave.segment_id + "' too short: " +
                                std::to_string(n) + " samples < one frame of " +
                                std::to_string(L));
  const std::int64_t n_frames = frame_count(n, L, H);
  const std::vector<double> window = detail::make_window(cfg.window, L);
  std::vector<std::vector<double>> frames(n_frames, std::vector<double>(L));
  for (std::int64_t f = 0; f < n_frames; ++f) {
    const std::int64_t off = f * H;
    for (int i = 0; i < L; ++i)
      frames[f][i] = static_cast<double>(wave.samples[off + i]) * window[i];
  }
  return frames;
}

// Full front end: framing, FFT power spectrum, mel integration, natural log
// with a floor. Accumulation is in double; storage is float.
inline LogMelSpectrogram log_mel(const WaveSegment& wave, const FrontendConfig& cfg) {
  const auto frames = frame_signal(wave, cfg);
  const auto fb = mel_filterbank(cfg);
  const int n_bins = cfg.fft_size / 2 + 1;

  LogMelSpectrogram spec;
  spec.segment_id = wave.segment_id;
  spec.n_frames = static_cast<std::int64_t>(frames.size());
  spec.n_mels = cfg.n_mels;
  spec.frame_rate = cfg.frame_rate_hz();
  spec.data.resize(spec.n_frames * cfg.n_mels);

  std::vector<std::complex<double>> buf(cfg.fft_size);
  std::vector<double> power(n_bins);
  for (std::int64_t f = 0; f < spec.n_frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
    for (std::size_t i = 0; i < frames[f].size(); ++i) buf[i] = frames[f][i];
    detail::fft_radix2(buf);
    for (int k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k)
        if (fb[m][k] != 0.0) e += fb[m][k] * power[k];
      spec.at(f, m) = static_cast<float>(std::log(std::max(e, cfg.log_floor)));
    }
  }
  return spec;
}

// Per-bin mean/variance normalization over the segment's frames. Population
// std, floored at epsilon so constant bins map to zero.
inline LogMelSpectrogram normalize_segment(const LogMelSpectrogram& spec,
                                           double epsilon = 1e-8) {
  if (spec.normalized)
    throw std::invalid_argument("segment '" + spec.segment_id + "' is already normalized");
  LogMelSpectrogram out = spec;
  out.normalized = true;
  for (int m = 0; m < spec.n_mels; ++m) {
    double mean = 0.0;
    for (std::int64_t f = 0; f < spec.n_frames; ++f) mean += spec.at(f, m);
    mean /= static_cast<double>(spec.n_frames);
    double var = 0.0;
    for (std::int64_t f = 0; f < spec.n_frames; ++f) {
      const double d = spec.at(f, m) - mean;
      var += d * d;
    }
    var /= static_cast<double>(spec.n_frames);
    const double denom = std::max(std::sqrt(var), epsilon);
    for (std::int64_t f = 0; f < spec.n_frames; ++f)
      out.at(f, m) = static_cast<float>((spec.at(f, m) - mean) / denom);
  }
  return out;
}

// Counts every chunking call so evaluation paths can assert that scoring
// always consumed full-length segments.
inline std::atomic<std::uint64_t>& chunk_call_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

// Cuts or pads the segment to exactly T frames: a random contiguous window
// when the segment is long enough, otherwise the segment's own frames repeated
// cyclically (frame i = input frame i mod n) or zero-padded at the tail.
inline LogMelSpectrogram chunk_to_length(const LogMelSpectrogram& spec, int T, Rng& rng,
                                         bool cyclic_pad = true) {
  if (T < 1) throw std::invalid_argument("chunk_to_length: length must be >= 1");
  chunk_call_counter().fetch_add(1, std::memory_order_relaxed);
  LogMelSpectrogram out;
  out.segment_id = spec.segment_id;
  out.n_mels = spec.n_mels;
  out.frame_rate = spec.frame_rate;
  out.normalized = spec.normalized;
  out.n_frames = T;
  out.data.resize(static_cast<std::size_t>(T) * spec.n_mels);
  if (spec.n_frames >= T) {
    const std::int64_t off = rng.uniform_int(0, spec.n_frames - T);
    std::copy_n(&spec.data[off * spec.n_mels], static_cast<std::size_t>(T) * spec.n_mels,
                out.data.data());
  } else if (cyclic_pad) {
    for (std::int64_t f = 0; f < T; ++f)
      std::copy_n(&spec.data[(f % spec.n_frames) * spec.n_mels], spec.n_mels,
                  &out.data[f * spec.n_mels]);
  } else {
    std::fill(out.data.begin(), out.data.end(), 0.0f);
    std::copy(spec.data.begin(), spec.data.end(), out.data.begin());
  }
  return out;
}

// Draws the training chunk length uniformly from chunk_set, then cuts or pads.
inline LogMelSpectrogram random_chunk(const LogMelSpectrogram& spec,
                                      const std::vector<int>& chunk_set, Rng& rng,
                                      bool cyclic_pad = true) {
  if (chunk_set.empty()) throw std::invalid_argument("random_chunk: empty chunk set");
  const int T = chunk_set[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(chunk_set.size()) - 1))];
  return chunk_to_length(spec, T, rng, cyclic_pad);
}

}  // namespace emofuse::audio

#endif  // EMOFUSE_AUDIO_FRONTEND_HPP_

// emofuse/eval/synthetic.hpp

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

#ifndef EMOFUSE_EVAL_SYNTHETIC_HPP_
#define EMOFUSE_EVAL_SYNTHETIC_HPP_

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "emofuse/audio/wave.hpp"
#include "emofuse/common.hpp"
#include "emofuse/eval/manifest.hpp"

namespace emofuse::eval {

// Deterministic synthetic emotion corpus. Each class carries a distinct
// fundamental band and amplitude-modulation rate; each speaker applies a
// timbre offset to that signature (a pitch multiplier inside the class band
// plus harmonic weights), so the corpus supports speaker-id pretraining as
// well as emotion classification, and the two tasks share low-level
// carrier-localization features.
// `cross_modal_ambiguity` controls the fraction of segments that are made
// confusable in exactly one modality (blended carriers at reduced SNR, or a
// transcript drawn from a wrong-class keyword bank), leaving the other
// modality clean; that is what late fusion is supposed to repair.
struct SynthSpec {
  int n_sessions = 2;
  int speakers_per_session = 2;
  int segments_per_speaker = 12;
  int session_base = 1;  // first session id
  int speaker_base = 1;  // first speaker id; the timbre draw derives from it
  int sample_rate = 16000;
  double base_duration_s = 1.5;
  double snr_db = 12.0;            // additive-noise SNR for clean segments
  double ambiguity_snr_drop = 9.0; // extra SNR loss on audio-ambiguous segments
  double text_swap_prob = 0.0;     // chance a keyword is swapped cross-class
  double cross_modal_ambiguity = 0.0;
  std::uint64_t seed = 0x5eed;

  void validate() const {
    if (n_sessions < 1 || speakers_per_session < 1 || segments_per_speaker < 1)
      throw std::invalid_argument("synth spec: counts must be positive");
    if (session_base < 1 || speaker_base < 1)
      throw std::invalid_argument("synth spec: session_base and speaker_base must be >= 1");
    const int last_speaker = speaker_base + n_sessions * speakers_per_session - 1;
    if (last_speaker > 32)
      throw std::invalid_argument(
          "synth spec: speaker id " + std::to_string(last_speaker) +
          " exceeds 32; random timbre draws beyond that are not reliably separable");
    if (sample_rate != 16000)
      throw std::invalid_argument("synth spec: sample_rate must be 16000");
    if (base_duration_s <= 0.0)
      throw std::invalid_argument("synth spec: base_duration_s must be positive");
    if (text_swap_prob < 0.0 || text_swap_prob > 1.0 || cross_modal_ambiguity < 0.0 ||
        cross_modal_ambiguity > 1.0)
      throw std::invalid_argument("synth spec: probabilities must lie in [0, 1]");
  }
};

namespace synth_detail {

constexpr int kNumClasses = 4;

inline double carrier_hz(int cls) {
  static const double kCarriers[kNumClasses] = {300.0, 650.0, 1200.0, 2100.0};
  return kCarriers[cls];
}

inline double am_rate_hz(int cls) {
  static const double kRates[kNumClasses] = {2.0, 3.5, 5.5, 8.0};
  return kRates[cls];
}

inline const std::vector<std::string>& keyword_bank(int cls) {
  static const std::vector<std::string> kBanks[kNumClasses] = {
      {"furious", "rage", "shouting", "slammed", "outraged", "seething"},
      {"delighted", "wonderful", "cheerful", "laughing", "thrilled", "grinning"},
      {"report", "schedule", "ordinary", "routine", "statement", "plain"},
      {"weeping", "mournful", "lonely", "grieving", "sorrowful", "weary"}};
  return kBanks[cls];
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> kFiller = {"the", "a",    "and", "it",
                                                   "was", "so",   "very", "that",
                                                   "then", "went", "on",  "day"};
  return kFiller;
}

// Speaker identity is a timbre offset applied to the class signature: where
// the carrier sits inside its class band, how strong the second and third
// harmonics are, and the modulation phase. Telling speakers apart therefore
// needs the same carrier-localization features that telling classes apart
// needs, which is what makes speaker pretraining transferable.
struct SpeakerVoice {
  double multiplier = 1.0;       // carrier position inside the class band
  double harmonic_weight = 0.5;  // second-harmonic amplitude ratio
  double third_weight = 0.25;    // third-harmonic amplitude ratio
  double phase = 0.0;
};

inline SpeakerVoice speaker_voice(int speaker_id, Rng& corpus_rng) {
  Rng r = corpus_rng.fork("speaker" + std::to_string(speaker_id));
  SpeakerVoice v;
  v.multiplier = r.uniform_real(0.8, 1.25);
  v.harmonic_weight = r.uniform_real(0.25, 0.95);
  v.third_weight = r.uniform_real(0.05, 0.55);
  v.phase = r.uniform_real(0.0, 2.0 * M_PI);
  return v;
}

// Harmonic carrier with class-rate amplitude modulation and speaker timbre,
// before noise. The third harmonic of the highest class band tops out at
// 3 * 2100 * 1.25 = 7875 Hz, just under the 8 kHz Nyquist limit.
inline void add_emotion_carrier(std::vector<double>& x, int cls, const SpeakerVoice& v,
                                double gain, int sample_rate) {
  const double f = carrier_hz(cls) * v.multiplier;
  const double r = am_rate_hz(cls);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double env = 0.55 + 0.45 * std::sin(2.0 * M_PI * r * t + v.phase);
    const double tone = 0.6 * std::sin(2.0 * M_PI * f * t) +
                        0.2 * v.harmonic_weight * std::sin(2.0 * M_PI * 2.0 * f * t) +
                        0.15 * v.third_weight * std::sin(2.0 * M_PI * 3.0 * f * t);
    x[i] += gain * env * tone;
  }
}

inline std::vector<float> render_segment(int cls, int blend_cls, const SpeakerVoice& v,
                                         double snr_db, double duration_s,
                                         int sample_rate, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
  std::vector<double> x(n, 0.0);
  if (blend_cls >= 0 && blend_cls != cls) {
    add_emotion_carrier(x, cls, v, 0.5, sample_rate);
    add_emotion_carrier(x, blend_cls, v, 0.5, sample_rate);
  } else {
    add_emotion_carrier(x, cls, v, 1.0, sample_rate);
  }
  double power = 0.0;
  for (double s : x) power += s * s;
  power /= static_cast<double>(n);
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  for (std::size_t i = 0; i < n; ++i) x[i] += sigma * rng.normal();
  double peak = 0.0;
  for (double s : x) peak = std::max(peak, std::abs(s));
  const double scale = peak > 0.0 ? 0.9 / peak : 1.0;
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(x[i] * scale);
  return out;
}

// Keyword-plus-filler transcript. `forced_cls` overrides the keyword class
// (used for text-ambiguous segments); swaps push single keywords cross-class.
inline std::string render_transcript(int cls, int forced_cls, double swap_prob, Rng& rng) {
  const int kw_cls = forced_cls >= 0 ? forced_cls : cls;
  const int n_kw = 3 + rng.uniform_int(0, 3);
  const int n_fill = 4 + rng.uniform_int(0, 4);
  std::vector<std::string> words;
  for (int i = 0; i < n_kw; ++i) {
    int c = kw_cls;
    if (forced_cls < 0 && swap_prob > 0.0 && rng.uniform_real() < swap_prob) {
      c = rng.uniform_int(0, kNumClasses - 2);
      if (c >= cls) ++c;  // uniform over the other classes
    }
    const auto& bank = keyword_bank(c);
    words.push_back(bank[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(bank.size()) - 1))]);
  }
  const auto& fill = filler_words();
  for (int i = 0; i < n_fill; ++i)
    words.push_back(fill[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(fill.size()) - 1))]);
  rng.shuffle(words);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace synth_detail

// Writes out_dir/wav/<id>.wav for every segment plus out_dir/manifest.jsonl,
// and returns the manifest. Wav paths inside the manifest are relative to
// out_dir. Fully deterministic in the spec (including its seed).
inline DatasetManifest generate_synthetic_corpus(const SynthSpec& spec,
                                                 const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wav");
  Rng corpus_rng(spec.seed);
  DatasetManifest manifest;

  for (int s = 0; s < spec.n_sessions; ++s) {
    const int session = spec.session_base + s;
    for (int k = 0; k < spec.speakers_per_session; ++k) {
      const int speaker = spec.speaker_base + s * spec.speakers_per_session + k;
      const synth_detail::SpeakerVoice voice =
          synth_detail::speaker_voice(speaker, corpus_rng);
      for (int u = 0; u < spec.segments_per_speaker; ++u) {
        const int cls = u % synth_detail::kNumClasses;
        const std::string id = strprintf("s%02d_spk%02d_u%03d", session, speaker, u);
        Rng seg_rng = corpus_rng.fork(id);

        int blend_cls = -1, forced_text_cls = -1;
        double snr = spec.snr_db;
        if (seg_rng.uniform_real() < spec.cross_modal_ambiguity) {
          int other = seg_rng.uniform_int(0, synth_detail::kNumClasses - 2);
          if (other >= cls) ++other;
          if (seg_rng.uniform_real() < 0.5) {
            blend_cls = other;  // audio confusable, text clean
            snr -= spec.ambiguity_snr_drop;
          } else {
            forced_text_cls = other;  // text misleading, audio clean
          }
        }

        const double duration = spec.base_duration_s * seg_rng.uniform_real(0.8, 1.3);
        const std::vector<float> samples = synth_detail::render_segment(
            cls, blend_cls, voice, snr, duration, spec.sample_rate, seg_rng);
        const std::string rel_wav = "wav/" + id + ".wav";
        audio::write_wav((fs::path(out_dir) / rel_wav).string(), samples,
                         spec.sample_rate);

        ManifestEntry e;
        e.id = id;
        e.wav = rel_wav;
        e.transcript = synth_detail::render_transcript(cls, forced_text_cls,
                                                       spec.text_swap_prob, seg_rng);
        e.label = class_names()[static_cast<std::size_t>(cls)];
        e.session = session;
        e.speaker = speaker;
        manifest.entries.push_back(std::move(e));
      }
    }
  }
  manifest.validate();
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), manifest);
  return manifest;
}

}  // namespace emofuse::eval

#endif  // EMOFUSE_EVAL_SYNTHETIC_HPP_

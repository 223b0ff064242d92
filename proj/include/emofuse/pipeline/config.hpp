// emofuse/pipeline/config.hpp

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

#ifndef EMOFUSE_PIPELINE_CONFIG_HPP_
#define EMOFUSE_PIPELINE_CONFIG_HPP_

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emofuse/audio/frontend.hpp"
#include "emofuse/audio/specaugment.hpp"
#include "emofuse/eval/synthetic.hpp"
#include "emofuse/models/speech.hpp"
#include "emofuse/models/text.hpp"

namespace emofuse::pipeline {

namespace cfg_detail {

// Rejects keys outside the allowed set so typos fail loudly instead of
// silently falling back to defaults.
inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw std::invalid_argument("config: \"" + where + "\" must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("config: unknown key \"" + key + "\" in \"" + where +
                                  "\"");
  }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace cfg_detail

struct AugmentConfig {
  bool enabled = true;
  std::string policy = "conservative";
  int copies = 2;

  void validate() const {
    audio::policy_by_name(policy);  // throws on unknown names
    if (copies < 1) throw std::invalid_argument("augment.copies must be >= 1");
  }
};

struct ChunkingConfig {
  std::vector<int> lengths = {150, 200, 250, 300};
  bool cyclic_pad = true;

  void validate() const {
    if (lengths.empty()) throw std::invalid_argument("chunking.lengths must be non-empty");
    for (int l : lengths)
      if (l < 1)
        throw std::invalid_argument("chunking.lengths entries must be positive, got " +
                                    std::to_string(l));
  }
};

struct SpeechConfig {
  std::string preset = "resnet_lite_desk";
  std::string transfer = "fine_tune";  // scratch | linear_probe | fine_tune
  double head_lr = 0.01;   // desk-stable; the paper preset restores 0.1
  double backbone_lr = 1e-3;
  int epochs = 14;
  int batch_size = 16;
  double base_lr = 0.01;  // used by scratch training
  int constant_epochs = 8;
  int halving_period = 2;
  double target_accuracy = 0.97;

  void validate() const {
    models::ResNetConfig::by_name(preset);
    models::TransferMode m;
    m.kind = transfer;
    m.head_lr = head_lr;
    m.backbone_lr = backbone_lr;
    m.validate();
    if (epochs < 1 || batch_size < 1)
      throw std::invalid_argument("speech.epochs and speech.batch_size must be >= 1");
    if (base_lr <= 0.0) throw std::invalid_argument("speech.base_lr must be positive");
  }
};

struct PretrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double base_lr = 0.01;
  double target_accuracy = 0.97;

  void validate() const {
    if (epochs < 1 || batch_size < 1)
      throw std::invalid_argument("pretrain.epochs and pretrain.batch_size must be >= 1");
    if (base_lr <= 0.0) throw std::invalid_argument("pretrain.base_lr must be positive");
  }
};

struct TextConfig {
  int n_layers = 2;
  int n_heads = 4;
  int hidden_dim = 64;
  int max_len = 64;
  double lr = 1e-3;
  int epochs = 30;
  int batch_size = 16;
  int min_freq = 1;
  double target_accuracy = 0.98;

  models::TransformerConfig model_config(int vocab_size) const {
    models::TransformerConfig c;
    c.n_layers = n_layers;
    c.n_heads = n_heads;
    c.hidden_dim = hidden_dim;
    c.max_len = max_len;
    c.vocab_size = vocab_size;
    return c;
  }

  void validate() const {
    model_config(4).validate();
    if (lr <= 0.0) throw std::invalid_argument("text.lr must be positive");
    if (epochs < 1 || batch_size < 1)
      throw std::invalid_argument("text.epochs and text.batch_size must be >= 1");
    if (min_freq < 1) throw std::invalid_argument("text.min_freq must be >= 1");
  }
};

struct FusionConfig {
  std::string strategy = "search";  // search | equal
  bool pooled_norm = false;

  void validate() const {
    if (strategy != "search" && strategy != "equal")
      throw std::invalid_argument("fusion.strategy must be \"search\" or \"equal\", got \"" +
                                  strategy + "\"");
  }
};

struct SynthConfig {
  int n_sessions = 4;
  int speakers_per_session = 2;
  int segments_per_speaker = 12;
  double snr_db = 12.0;
  double text_swap_prob = 0.05;
  double cross_modal_ambiguity = 0.0;
  int pretrain_sessions = 2;
  int pretrain_speakers_per_session = 5;
  int pretrain_segments_per_speaker = 10;

  eval::SynthSpec emotion_spec(std::uint64_t seed) const {
    eval::SynthSpec s;
    s.n_sessions = n_sessions;
    s.speakers_per_session = speakers_per_session;
    s.segments_per_speaker = segments_per_speaker;
    s.snr_db = snr_db;
    s.text_swap_prob = text_swap_prob;
    s.cross_modal_ambiguity = cross_modal_ambiguity;
    s.seed = seed;
    return s;
  }

  // Pretraining speakers live in their own sessions (numbered from 101) and
  // continue the speaker-id ladder, so they never collide with the emotion
  // corpus.
  eval::SynthSpec pretrain_spec(std::uint64_t seed) const {
    eval::SynthSpec s;
    s.n_sessions = pretrain_sessions;
    s.speakers_per_session = pretrain_speakers_per_session;
    s.segments_per_speaker = pretrain_segments_per_speaker;
    s.session_base = 101;
    s.speaker_base = 1 + n_sessions * speakers_per_session;
    s.snr_db = snr_db;
    s.seed = seed ^ 0x9e3779b97f4a7c15ULL;
    return s;
  }

  void validate(std::uint64_t seed) const {
    emotion_spec(seed).validate();
    if (pretrain_sessions > 0) pretrain_spec(seed).validate();
  }
};

struct RunConfig {
  std::uint64_t seed = 1234;
  std::string out_dir = "runs/default";
  int jobs = 1;
  std::string data_manifest;           // external corpus manifest; empty = synthetic
  std::string pretrain_data_manifest;  // external pretraining manifest
  audio::FrontendConfig frontend;
  AugmentConfig augment;
  ChunkingConfig chunking;
  SpeechConfig speech;
  PretrainConfig pretrain;
  TextConfig text;
  FusionConfig fusion;
  SynthConfig synth;

  void validate() const {
    if (out_dir.empty()) throw std::invalid_argument("out_dir must be non-empty");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    frontend.validate();
    augment.validate();
    chunking.validate();
    speech.validate();
    pretrain.validate();
    text.validate();
    fusion.validate();
    synth.validate(seed);
  }
};

// The "paper" preset surfaces the full-scale reference hyperparameters; the
// "desk" preset (the default RunConfig) is sized to finish in minutes on a
// laptop CPU.
inline RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.augment.policy = "aggressive";
    c.speech.preset = "resnet34_full";
    c.speech.head_lr = 0.1;
    c.speech.base_lr = 0.1;
    c.speech.epochs = 20;
    c.speech.batch_size = 32;
    c.speech.constant_epochs = 8;
    c.speech.halving_period = 2;
    c.speech.target_accuracy = 0.0;
    c.pretrain.epochs = 20;
    c.pretrain.batch_size = 32;
    c.pretrain.base_lr = 0.1;
    c.pretrain.target_accuracy = 0.0;
    c.text.n_layers = 12;
    c.text.n_heads = 12;
    c.text.hidden_dim = 768;
    c.text.max_len = 128;
    c.text.lr = 2e-5;
    c.text.batch_size = 32;
    c.text.target_accuracy = 0.0;
    return c;
  }
  throw std::invalid_argument("unknown preset \"" + name + "\" (expected desk or paper)");
}

inline std::string window_name(audio::WindowKind w) {
  switch (w) {
    case audio::WindowKind::kHamming: return "hamming";
    case audio::WindowKind::kHann: return "hann";
    case audio::WindowKind::kRect: return "rect";
  }
  throw std::invalid_argument("window_name: unknown window kind");
}

inline audio::WindowKind window_from_name(const std::string& name) {
  if (name == "hamming") return audio::WindowKind::kHamming;
  if (name == "hann") return audio::WindowKind::kHann;
  if (name == "rect") return audio::WindowKind::kRect;
  throw std::invalid_argument("unknown window \"" + name + "\"");
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["jobs"] = c.jobs;
  j["data"] = {{"manifest", c.data_manifest},
               {"pretrain_manifest", c.pretrain_data_manifest}};
  j["frontend"] = {{"sample_rate", c.frontend.sample_rate},
                   {"frame_length_ms", c.frontend.frame_length_ms},
                   {"hop_ms", c.frontend.hop_ms},
                   {"n_mels", c.frontend.n_mels},
                   {"fft_size", c.frontend.fft_size},
                   {"window", window_name(c.frontend.window)},
                   {"f_min", c.frontend.f_min},
                   {"f_max", c.frontend.f_max},
                   {"log_floor", c.frontend.log_floor}};
  j["augment"] = {{"enabled", c.augment.enabled},
                  {"policy", c.augment.policy},
                  {"copies", c.augment.copies}};
  j["chunking"] = {{"lengths", c.chunking.lengths},
                   {"cyclic_pad", c.chunking.cyclic_pad}};
  j["speech"] = {{"preset", c.speech.preset},
                 {"transfer", c.speech.transfer},
                 {"head_lr", c.speech.head_lr},
                 {"backbone_lr", c.speech.backbone_lr},
                 {"epochs", c.speech.epochs},
                 {"batch_size", c.speech.batch_size},
                 {"base_lr", c.speech.base_lr},
                 {"constant_epochs", c.speech.constant_epochs},
                 {"halving_period", c.speech.halving_period},
                 {"target_accuracy", c.speech.target_accuracy}};
  j["pretrain"] = {{"epochs", c.pretrain.epochs},
                   {"batch_size", c.pretrain.batch_size},
                   {"base_lr", c.pretrain.base_lr},
                   {"target_accuracy", c.pretrain.target_accuracy}};
  j["text"] = {{"n_layers", c.text.n_layers},
               {"n_heads", c.text.n_heads},
               {"hidden_dim", c.text.hidden_dim},
               {"max_len", c.text.max_len},
               {"lr", c.text.lr},
               {"epochs", c.text.epochs},
               {"batch_size", c.text.batch_size},
               {"min_freq", c.text.min_freq},
               {"target_accuracy", c.text.target_accuracy}};
  j["fusion"] = {{"strategy", c.fusion.strategy}, {"pooled_norm", c.fusion.pooled_norm}};
  j["synth"] = {{"n_sessions", c.synth.n_sessions},
                {"speakers_per_session", c.synth.speakers_per_session},
                {"segments_per_speaker", c.synth.segments_per_speaker},
                {"snr_db", c.synth.snr_db},
                {"text_swap_prob", c.synth.text_swap_prob},
                {"cross_modal_ambiguity", c.synth.cross_modal_ambiguity},
                {"pretrain_sessions", c.synth.pretrain_sessions},
                {"pretrain_speakers_per_session", c.synth.pretrain_speakers_per_session},
                {"pretrain_segments_per_speaker", c.synth.pretrain_segments_per_speaker}};
  return j;
}

// Applies a JSON document on top of `base`. Unknown keys anywhere raise
// std::invalid_argument.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = RunConfig{}) {
  using cfg_detail::check_keys;
  using cfg_detail::read_if;
  RunConfig c = base;
  check_keys(j, "(root)",
             {"seed", "out_dir", "jobs", "data", "frontend", "augment", "chunking",
              "speech", "pretrain", "text", "fusion", "synth"});
  read_if(j, "seed", c.seed);
  read_if(j, "out_dir", c.out_dir);
  read_if(j, "jobs", c.jobs);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"manifest", "pretrain_manifest"});
    read_if(d, "manifest", c.data_manifest);
    read_if(d, "pretrain_manifest", c.pretrain_data_manifest);
  }
  if (j.contains("frontend")) {
    const auto& f = j.at("frontend");
    check_keys(f, "frontend",
               {"sample_rate", "frame_length_ms", "hop_ms", "n_mels", "fft_size",
                "window", "f_min", "f_max", "log_floor"});
    read_if(f, "sample_rate", c.frontend.sample_rate);
    read_if(f, "frame_length_ms", c.frontend.frame_length_ms);
    read_if(f, "hop_ms", c.frontend.hop_ms);
    read_if(f, "n_mels", c.frontend.n_mels);
    read_if(f, "fft_size", c.frontend.fft_size);
    if (f.contains("window")) c.frontend.window = window_from_name(f.at("window"));
    read_if(f, "f_min", c.frontend.f_min);
    read_if(f, "f_max", c.frontend.f_max);
    read_if(f, "log_floor", c.frontend.log_floor);
  }
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    check_keys(a, "augment", {"enabled", "policy", "copies"});
    read_if(a, "enabled", c.augment.enabled);
    read_if(a, "policy", c.augment.policy);
    read_if(a, "copies", c.augment.copies);
  }
  if (j.contains("chunking")) {
    const auto& ch = j.at("chunking");
    check_keys(ch, "chunking", {"lengths", "cyclic_pad"});
    read_if(ch, "lengths", c.chunking.lengths);
    read_if(ch, "cyclic_pad", c.chunking.cyclic_pad);
  }
  if (j.contains("speech")) {
    const auto& s = j.at("speech");
    check_keys(s, "speech",
               {"preset", "transfer", "head_lr", "backbone_lr", "epochs", "batch_size",
                "base_lr", "constant_epochs", "halving_period", "target_accuracy"});
    read_if(s, "preset", c.speech.preset);
    read_if(s, "transfer", c.speech.transfer);
    read_if(s, "head_lr", c.speech.head_lr);
    read_if(s, "backbone_lr", c.speech.backbone_lr);
    read_if(s, "epochs", c.speech.epochs);
    read_if(s, "batch_size", c.speech.batch_size);
    read_if(s, "base_lr", c.speech.base_lr);
    read_if(s, "constant_epochs", c.speech.constant_epochs);
    read_if(s, "halving_period", c.speech.halving_period);
    read_if(s, "target_accuracy", c.speech.target_accuracy);
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    check_keys(p, "pretrain", {"epochs", "batch_size", "base_lr", "target_accuracy"});
    read_if(p, "epochs", c.pretrain.epochs);
    read_if(p, "batch_size", c.pretrain.batch_size);
    read_if(p, "base_lr", c.pretrain.base_lr);
    read_if(p, "target_accuracy", c.pretrain.target_accuracy);
  }
  if (j.contains("text")) {
    const auto& t = j.at("text");
    check_keys(t, "text",
               {"n_layers", "n_heads", "hidden_dim", "max_len", "lr", "epochs",
                "batch_size", "min_freq", "target_accuracy"});
    read_if(t, "n_layers", c.text.n_layers);
    read_if(t, "n_heads", c.text.n_heads);
    read_if(t, "hidden_dim", c.text.hidden_dim);
    read_if(t, "max_len", c.text.max_len);
    read_if(t, "lr", c.text.lr);
    read_if(t, "epochs", c.text.epochs);
    read_if(t, "batch_size", c.text.batch_size);
    read_if(t, "min_freq", c.text.min_freq);
    read_if(t, "target_accuracy", c.text.target_accuracy);
  }
  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    check_keys(f, "fusion", {"strategy", "pooled_norm"});
    read_if(f, "strategy", c.fusion.strategy);
    read_if(f, "pooled_norm", c.fusion.pooled_norm);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    check_keys(s, "synth",
               {"n_sessions", "speakers_per_session", "segments_per_speaker", "snr_db",
                "text_swap_prob", "cross_modal_ambiguity", "pretrain_sessions",
                "pretrain_speakers_per_session", "pretrain_segments_per_speaker"});
    read_if(s, "n_sessions", c.synth.n_sessions);
    read_if(s, "speakers_per_session", c.synth.speakers_per_session);
    read_if(s, "segments_per_speaker", c.synth.segments_per_speaker);
    read_if(s, "snr_db", c.synth.snr_db);
    read_if(s, "text_swap_prob", c.synth.text_swap_prob);
    read_if(s, "cross_modal_ambiguity", c.synth.cross_modal_ambiguity);
    read_if(s, "pretrain_sessions", c.synth.pretrain_sessions);
    read_if(s, "pretrain_speakers_per_session", c.synth.pretrain_speakers_per_session);
    read_if(s, "pretrain_segments_per_speaker", c.synth.pretrain_segments_per_speaker);
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path, RunConfig base = RunConfig{}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::move(base));
}

}  // namespace emofuse::pipeline

#endif  // EMOFUSE_PIPELINE_CONFIG_HPP_

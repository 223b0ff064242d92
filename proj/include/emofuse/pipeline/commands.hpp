// emofuse/pipeline/commands.hpp

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

#ifndef EMOFUSE_PIPELINE_COMMANDS_HPP_
#define EMOFUSE_PIPELINE_COMMANDS_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "emofuse/audio/cache.hpp"
#include "emofuse/audio/frontend.hpp"
#include "emofuse/audio/specaugment.hpp"
#include "emofuse/audio/wave.hpp"
#include "emofuse/eval/folds.hpp"
#include "emofuse/eval/manifest.hpp"
#include "emofuse/eval/metrics.hpp"
#include "emofuse/eval/synthetic.hpp"
#include "emofuse/fusion/fusion.hpp"
#include "emofuse/fusion/scores.hpp"
#include "emofuse/io/checkpoint.hpp"
#include "emofuse/models/speech.hpp"
#include "emofuse/models/text.hpp"
#include "emofuse/nn/gradcheck_suite.hpp"
#include "emofuse/pipeline/config.hpp"
#include "emofuse/text/vocab.hpp"

namespace emofuse::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Path layout under out_dir. Everything a command writes lands here, so a run
// directory is self-contained.

struct RunPaths {
  fs::path out;

  explicit RunPaths(const std::string& out_dir) : out(out_dir) {}

  fs::path corpus_dir() const { return out / "corpus"; }
  fs::path pretrain_corpus_dir() const { return out / "pretrain_corpus"; }
  fs::path features_dir() const { return out / "features"; }
  fs::path pretrain_features_dir() const { return out / "features_pretrain"; }
  fs::path pretrain_ckpt() const { return out / "pretrain" / "speaker_backbone.ckpt"; }
  fs::path fold_dir(int k) const { return out / ("fold_" + std::to_string(k)); }
  fs::path resolved_config() const { return out / "resolved_config.json"; }
  fs::path manifest_dir() const { return out / "manifests"; }
  fs::path report_json() const { return out / "report.json"; }
  fs::path report_text() const { return out / "report.txt"; }
  fs::path report_csv() const { return out / "report.csv"; }
};

// ---------------------------------------------------------------------------
// Helpers: deterministic artifact bookkeeping.

inline std::uint32_t file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for checksum: " + path.string());
  std::uint32_t crc = 0;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0) crc = crc32_update(crc, buf, static_cast<std::size_t>(got));
  }
  return crc;
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing: " + path.string());
}

inline void emit_resolved_config(const RunConfig& cfg) {
  const RunPaths paths(cfg.out_dir);
  write_text_file(paths.resolved_config(), to_json(cfg).dump(2) + "\n");
}

// Checksum of the semantic configuration: where the run lands (out_dir) and
// the worker cap do not change results, so they are excluded. Two runs of the
// same experiment into different directories then produce identical reports.
inline std::uint32_t config_fingerprint(const RunConfig& cfg) {
  RunConfig neutral = cfg;
  neutral.out_dir = "";
  neutral.jobs = 1;
  return crc32(to_json(neutral).dump());
}

// Input manifest for a command: the consumed files with their checksums, so
// a run can be audited and replayed exactly. No timestamps, by design.
inline void write_run_manifest(const RunConfig& cfg, const std::string& command,
                               const std::vector<fs::path>& inputs) {
  const RunPaths paths(cfg.out_dir);
  nlohmann::ordered_json j;
  j["command"] = command;
  j["seed"] = cfg.seed;
  j["config_crc32"] = strprintf("%08x", config_fingerprint(cfg));
  nlohmann::ordered_json ins = nlohmann::ordered_json::object();
  std::map<std::string, std::string> sorted;
  for (const auto& p : inputs) sorted[p.string()] = strprintf("%08x", file_crc32(p));
  for (const auto& [path, crc] : sorted) ins[path] = crc;
  j["inputs"] = ins;
  write_text_file(paths.manifest_dir() / (command + ".json"), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Model config (de)serialization for checkpoints.

inline nlohmann::ordered_json resnet_config_json(const models::ResNetConfig& c) {
  nlohmann::ordered_json j;
  j["preset"] = c.preset;
  j["first_block_channels"] = c.first_block_channels;
  j["embedding_dim"] = c.embedding_dim;
  j["pooling"] = c.pooling;
  j["n_classes"] = c.n_classes;
  j["n_mels"] = c.n_mels;
  j["stage_blocks"] = c.stage_blocks;
  j["stem_downsample"] = c.stem_downsample;
  return j;
}

inline models::ResNetConfig resnet_config_from_json(const nlohmann::json& j) {
  models::ResNetConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.first_block_channels = j.at("first_block_channels").get<int>();
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.pooling = j.at("pooling").get<std::string>();
  c.n_classes = j.at("n_classes").get<int>();
  c.n_mels = j.at("n_mels").get<int>();
  c.stage_blocks = j.at("stage_blocks").get<std::vector<int>>();
  c.stem_downsample = j.at("stem_downsample").get<bool>();
  c.validate();
  return c;
}

inline nlohmann::ordered_json transformer_config_json(const models::TransformerConfig& c) {
  nlohmann::ordered_json j;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["hidden_dim"] = c.hidden_dim;
  j["max_len"] = c.max_len;
  j["n_classes"] = c.n_classes;
  j["vocab_size"] = c.vocab_size;
  return j;
}

inline models::TransformerConfig transformer_config_from_json(const nlohmann::json& j) {
  models::TransformerConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Data access helpers.

// The emotion manifest: external when configured, otherwise the synthetic one
// under out_dir. Returns the manifest plus the directory wav paths resolve
// against.
inline std::pair<eval::DatasetManifest, fs::path> load_emotion_manifest(
    const RunConfig& cfg) {
  const RunPaths paths(cfg.out_dir);
  fs::path manifest_path = cfg.data_manifest.empty()
                               ? paths.corpus_dir() / "manifest.jsonl"
                               : fs::path(cfg.data_manifest);
  if (!fs::exists(manifest_path))
    throw std::runtime_error("emotion manifest not found: " + manifest_path.string() +
                             " (run the synth step or point data.manifest at a corpus)");
  return {eval::read_manifest(manifest_path.string()), manifest_path.parent_path()};
}

inline std::pair<eval::DatasetManifest, fs::path> load_pretrain_manifest(
    const RunConfig& cfg) {
  const RunPaths paths(cfg.out_dir);
  fs::path manifest_path = cfg.pretrain_data_manifest.empty()
                               ? paths.pretrain_corpus_dir() / "manifest.jsonl"
                               : fs::path(cfg.pretrain_data_manifest);
  if (!fs::exists(manifest_path))
    throw std::runtime_error("pretraining manifest not found: " + manifest_path.string() +
                             " (run the synth step or point data.pretrain_manifest at a corpus)");
  return {eval::read_manifest(manifest_path.string()), manifest_path.parent_path()};
}

inline fs::path feature_path(const fs::path& dir, const std::string& id) {
  return dir / (id + ".lms");
}

inline audio::LogMelSpectrogram load_normalized_feature(const fs::path& dir,
                                                        const std::string& id) {
  return audio::normalize_segment(audio::read_lms(feature_path(dir, id).string()));
}

// ---------------------------------------------------------------------------
// Commands. Each is a library function so tests can drive the pipeline
// in-process; the CLI binary is a thin wrapper.

// Generates the synthetic emotion corpus and, unless disabled, the disjoint
// speaker-pretraining corpus.
inline void cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  emit_resolved_config(cfg);
  const RunPaths paths(cfg.out_dir);
  eval::generate_synthetic_corpus(cfg.synth.emotion_spec(cfg.seed),
                                  paths.corpus_dir().string());
  if (cfg.synth.pretrain_sessions > 0)
    eval::generate_synthetic_corpus(cfg.synth.pretrain_spec(cfg.seed),
                                    paths.pretrain_corpus_dir().string());
  write_run_manifest(cfg, "synth", {});
  EMOFUSE_INFO("synth: corpus written under %s", paths.corpus_dir().string().c_str());
}

namespace cmd_detail {

// Computes raw (unnormalized) log-mel features for every manifest entry.
inline std::vector<fs::path> extract_features(const RunConfig& cfg,
                                              const eval::DatasetManifest& manifest,
                                              const fs::path& wav_root,
                                              const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> consumed;
  for (const auto& e : manifest.entries) {
    const fs::path wav_path =
        fs::path(e.wav).is_absolute() ? fs::path(e.wav) : wav_root / e.wav;
    const audio::WaveSegment wave = audio::read_wav(wav_path.string(), e.id);
    const audio::LogMelSpectrogram spec = audio::log_mel(wave, cfg.frontend);
    audio::write_lms(feature_path(out_dir, e.id).string(), spec);
    consumed.push_back(wav_path);
  }
  return consumed;
}

}  // namespace cmd_detail

inline void cmd_features(const RunConfig& cfg) {
  cfg.validate();
  emit_resolved_config(cfg);
  const RunPaths paths(cfg.out_dir);
  auto [manifest, wav_root] = load_emotion_manifest(cfg);
  std::vector<fs::path> inputs =
      cmd_detail::extract_features(cfg, manifest, wav_root, paths.features_dir());
  const bool with_pretrain =
      cfg.synth.pretrain_sessions > 0 || !cfg.pretrain_data_manifest.empty();
  if (with_pretrain) {
    auto [pre_manifest, pre_root] = load_pretrain_manifest(cfg);
    auto pre_inputs = cmd_detail::extract_features(cfg, pre_manifest, pre_root,
                                                   paths.pretrain_features_dir());
    inputs.insert(inputs.end(), pre_inputs.begin(), pre_inputs.end());
  }
  write_run_manifest(cfg, "features", inputs);
  EMOFUSE_INFO("features: %zu segments cached", inputs.size());
}

inline models::SpeechTrainHyper speech_hyper(const RunConfig& cfg, bool augment) {
  models::SpeechTrainHyper h;
  h.epochs = cfg.speech.epochs;
  h.batch_size = cfg.speech.batch_size;
  h.base_lr = cfg.speech.base_lr;
  h.constant_epochs = cfg.speech.constant_epochs;
  h.halving_period = cfg.speech.halving_period;
  h.chunk_set = cfg.chunking.lengths;
  h.cyclic_pad = cfg.chunking.cyclic_pad;
  h.augment = augment && cfg.augment.enabled;
  h.policy = audio::policy_by_name(cfg.augment.policy);
  h.augment_copies = cfg.augment.copies;
  h.target_accuracy = cfg.speech.target_accuracy;
  return h;
}

inline nlohmann::ordered_json epoch_log_json(const std::vector<models::EpochStats>& hist) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < hist.size(); ++i)
    arr.push_back({{"epoch", i + 1},
                   {"loss", hist[i].loss},
                   {"accuracy", hist[i].accuracy},
                   {"lr", hist[i].lr}});
  return arr;
}

// Speaker-id pretraining on the disjoint pretraining corpus; emits the
// backbone checkpoint consumed by transfer modes.
inline void cmd_pretrain(const RunConfig& cfg) {
  cfg.validate();
  emit_resolved_config(cfg);
  const RunPaths paths(cfg.out_dir);
  auto [manifest, root] = load_pretrain_manifest(cfg);

  std::map<int, int> speaker_index;  // sorted speaker id -> dense class index
  for (const auto& e : manifest.entries) speaker_index.emplace(e.speaker, 0);
  int next = 0;
  for (auto& [spk, idx] : speaker_index) idx = next++;
  if (next < 2)
    throw std::runtime_error("pretraining corpus has fewer than 2 speakers");

  std::vector<audio::LogMelSpectrogram> specs;
  std::vector<int> labels;
  std::vector<fs::path> inputs;
  for (const auto& e : manifest.entries) {
    specs.push_back(load_normalized_feature(paths.pretrain_features_dir(), e.id));
    labels.push_back(speaker_index.at(e.speaker));
    inputs.push_back(feature_path(paths.pretrain_features_dir(), e.id));
  }

  models::ResNetConfig mc = models::ResNetConfig::by_name(cfg.speech.preset);
  mc.n_classes = next;
  mc.n_mels = cfg.frontend.n_mels;
  Rng rng = Rng(cfg.seed).fork("pretrain");
  models::SpeechModel<float> model(mc, rng);

  models::SpeechTrainHyper hyper = speech_hyper(cfg, /*augment=*/true);
  hyper.epochs = cfg.pretrain.epochs;
  hyper.batch_size = cfg.pretrain.batch_size;
  hyper.base_lr = cfg.pretrain.base_lr;
  hyper.target_accuracy = cfg.pretrain.target_accuracy;
  const auto history = models::pretrain_speaker_id(model, specs, labels, hyper, rng);

  io::Checkpoint ck;
  ck.kind = "speech_resnet";
  ck.config_json = resnet_config_json(mc).dump();
  ck.epoch = static_cast<std::uint32_t>(history.size());
  nn::ParamSet<float> ps = model.all_params();
  io::pack_params(ps, ck);
  fs::create_directories(paths.pretrain_ckpt().parent_path());
  io::save_checkpoint(paths.pretrain_ckpt().string(), ck);
  write_text_file(paths.pretrain_ckpt().parent_path() / "train_log.json",
                  epoch_log_json(history).dump(2) + "\n");
  write_run_manifest(cfg, "pretrain", inputs);
  EMOFUSE_INFO("pretrain: %d speakers, final acc %.4f", next,
               history.empty() ? 0.0 : history.back().accuracy);
}

// Per-fold emotion training of the speech model, honoring the configured
// transfer mode.
inline void cmd_train_speech(const RunConfig& cfg) {
  cfg.validate();
  emit_resolved_config(cfg);
  const RunPaths paths(cfg.out_dir);
  auto [manifest, root] = load_emotion_manifest(cfg);
  const std::vector<eval::FoldPlan> folds = eval::loso_folds(manifest);
  std::vector<fs::path> inputs;

  const bool from_pretrained = cfg.speech.transfer != "scratch";
  io::Checkpoint pre_ck;
  if (from_pretrained) {
    if (!fs::exists(paths.pretrain_ckpt()))
      throw std::runtime_error("transfer mode \"" + cfg.speech.transfer +
                               "\" needs the pretraining checkpoint at " +
                               paths.pretrain_ckpt().string());
    pre_ck = io::load_checkpoint(paths.pretrain_ckpt().string());
    inputs.push_back(paths.pretrain_ckpt());
  }

  for (const auto& fold : folds) {
    Rng rng = Rng(cfg.seed).fork("train_speech.fold" + std::to_string(fold.fold_index));
    std::vector<audio::LogMelSpectrogram> specs;
    std::vector<int> labels;
    for (const auto& id : fold.train_ids) {
      specs.push_back(load_normalized_feature(paths.features_dir(), id));
      labels.push_back(eval::map_label(manifest.by_id(id).label));
      inputs.push_back(feature_path(paths.features_dir(), id));
    }

    models::TransferMode mode;
    mode.kind = cfg.speech.transfer;
    mode.head_lr = cfg.speech.head_lr;
    mode.backbone_lr = cfg.speech.backbone_lr;

    std::vector<models::EpochStats> history;
    models::ResNetConfig mc;
    io::Checkpoint ck;
    if (from_pretrained) {
      mc = resnet_config_from_json(nlohmann::json::parse(pre_ck.config_json));
      models::SpeechModel<float> model(mc, rng);
      nn::ParamSet<float> ps = model.all_params();
      io::unpack_params(ps, pre_ck);
      model.swap_head(4, rng);
      mc.n_classes = 4;
      history = models::train_speech(model, specs, labels, mode,
                                     speech_hyper(cfg, true), rng);
      nn::ParamSet<float> out_ps = model.all_params();
      io::pack_params(out_ps, ck);
    } else {
      mc = models::ResNetConfig::by_name(cfg.speech.preset);
      mc.n_classes = 4;
      mc.n_mels = cfg.frontend.n_mels;
      models::SpeechModel<float> model(mc, rng);
      history = models::train_speech(model, specs, labels, mode,
                                     speech_hyper(cfg, true), rng);
      nn::ParamSet<float> out_ps = model.all_params();
      io::pack_params(out_ps, ck);
    }
    ck.kind = "speech_resnet";
    mc.n_classes = 4;
    ck.config_json = resnet_config_json(mc).dump();
    ck.epoch = static_cast<std::uint32_t>(history.size());
    fs::create_directories(paths.fold_dir(fold.fold_index));
    io::save_checkpoint((paths.fold_dir(fold.fold_index) / "speech.ckpt").string(), ck);
    write_text_file(paths.fold_dir(fold.fold_index) / "speech_train_log.json",
                    epoch_log_json(history).dump(2) + "\n");
    EMOFUSE_INFO("train_speech fold %d: %zu segments, final acc %.4f", fold.fold_index,
                 specs.size(), history.empty() ? 0.0 : history.back().accuracy);
  }
  write_run_manifest(cfg, "train_speech", inputs);
}

// Per-fold text model training; the vocabulary is rebuilt from each fold's
// training transcripts so no test text leaks in.
inline void cmd_train_text(const RunConfig& cfg) {
  cfg.validate();
  emit_resolved_config(cfg);
  const RunPaths paths(cfg.out_dir);
  auto [manifest, root] = load_emotion_manifest(cfg);
  const std::vector<eval::FoldPlan> folds = eval::loso_folds(manifest);

  for (const auto& fold : folds) {
    Rng rng = Rng(cfg.seed).fork("train_text.fold" + std::to_string(fold.fold_index));
    std::vector<std::string> transcripts;
    std::vector<int> labels;
    for (const auto& id : fold.train_ids) {
      const auto& e = manifest.by_id(id);
      if (e.transcript.empty())
        throw std::runtime_error("segment \"" + id + "\" has no transcript");
      transcripts.push_back(e.transcript);
      labels.push_back(eval::map_label(e.label));
    }

    text::Vocabulary vocab = text::Vocabulary::build(transcripts, cfg.text.min_freq);
    fs::create_directories(paths.fold_dir(fold.fold_index));
    const fs::path vocab_path = paths.fold_dir(fold.fold_index) / "vocab.txt";
    vocab.save(vocab_path.string());

    models::TransformerConfig tc = cfg.text.model_config(vocab.size());
    models::TextModel<float> model(tc, rng);
    models::TextTrainHyper hyper;
    hyper.epochs = cfg.text.epochs;
    hyper.batch_size = cfg.text.batch_size;
    hyper.lr = cfg.text.lr;
    hyper.target_accuracy = cfg.text.target_accuracy;
    const auto history = models::train_text(model, transcripts, labels, vocab, hyper, rng);

    io::Checkpoint ck;
    ck.kind = "text_transformer";
    ck.config_json = transformer_config_json(tc).dump();
    ck.epoch = static_cast<std::uint32_t>(history.size());
    nn::ParamSet<float> ps = model.all_params();
    io::pack_params(ps, ck);
    io::save_checkpoint((paths.fold_dir(fold.fold_index) / "text.ckpt").string(), ck);

    nlohmann::ordered_json log = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < history.size(); ++i)
      log.push_back({{"epoch", i + 1},
                     {"loss", history[i].loss},
                     {"accuracy", history[i].accuracy}});
    write_text_file(paths.fold_dir(fold.fold_index) / "text_train_log.json",
                    log.dump(2) + "\n");
    EMOFUSE_INFO("train_text fold %d: vocab %d, final acc %.4f", fold.fold_index,
                 vocab.size(), history.empty() ? 0.0 : history.back().accuracy);
  }
  write_run_manifest(cfg, "train_text", {});
}

namespace cmd_detail {

inline models::SpeechModel<float> load_speech_model(const fs::path& ckpt_path, Rng& rng) {
  io::Checkpoint ck = io::load_checkpoint(ckpt_path.string());
  if (ck.kind != "speech_resnet")
    throw std::runtime_error(ckpt_path.string() + " holds a \"" + ck.kind +
                             "\" checkpoint, expected speech_resnet");
  const models::ResNetConfig mc =
      resnet_config_from_json(nlohmann::json::parse(ck.config_json));
  models::SpeechModel<float> model(mc, rng);
  nn::ParamSet<float> ps = model.all_params();
  io::unpack_params(ps, ck);
  return model;
}

inline models::TextModel<float> load_text_model(const fs::path& ckpt_path, Rng& rng) {
  io::Checkpoint ck = io::load_checkpoint(ckpt_path.string());
  if (ck.kind != "text_transformer")
    throw std::runtime_error(ckpt_path.string() + " holds a \"" + ck.kind +
                             "\" checkpoint, expected text_transformer");
  const models::TransformerConfig tc =
      transformer_config_from_json(nlohmann::json::parse(ck.config_json));
  models::TextModel<float> model(tc, rng);
  nn::ParamSet<float> ps = model.all_params();
  io::unpack_params(ps, ck);
  return model;
}

}  // namespace cmd_detail

// Scores full-length test and holdout segments with both modality models.
// The holdout is the fold's validation session when one exists, otherwise the
// training set itself; either way it only contains training-side sessions.
inline void cmd_score(const RunConfig& cfg) {
  cfg.validate();
  emit_resolved_config(cfg);
  const RunPaths paths(cfg.out_dir);
  auto [manifest, root] = load_emotion_manifest(cfg);
  const std::vector<eval::FoldPlan> folds = eval::loso_folds(manifest);
  std::vector<fs::path> inputs;

  for (const auto& fold : folds) {
    const fs::path fold_dir = paths.fold_dir(fold.fold_index);
    const fs::path speech_ckpt = fold_dir / "speech.ckpt";
    const fs::path text_ckpt = fold_dir / "text.ckpt";
    const fs::path vocab_path = fold_dir / "vocab.txt";
    for (const fs::path& p : {speech_ckpt, text_ckpt, vocab_path})
      if (!fs::exists(p))
        throw std::runtime_error("cmd_score: missing artifact " + p.string() +
                                 " (train both models first)");
    inputs.insert(inputs.end(), {speech_ckpt, text_ckpt, vocab_path});

    Rng rng = Rng(cfg.seed).fork("score.fold" + std::to_string(fold.fold_index));
    models::SpeechModel<float> speech_model = cmd_detail::load_speech_model(speech_ckpt, rng);
    models::TextModel<float> text_model = cmd_detail::load_text_model(text_ckpt, rng);
    text::Vocabulary vocab = text::Vocabulary::load(vocab_path.string());
    if (vocab.size() != text_model.config().vocab_size)
      throw std::runtime_error("cmd_score: vocabulary size " + std::to_string(vocab.size()) +
                               " does not match checkpoint vocab_size " +
                               std::to_string(text_model.config().vocab_size));

    const std::vector<std::string>& holdout_ids =
        fold.validation_ids.empty() ? fold.train_ids : fold.validation_ids;
    const std::vector<std::pair<std::string, const std::vector<std::string>*>> splits = {
        {"test", &fold.test_ids}, {"holdout", &holdout_ids}};

    for (const auto& [split, ids] : splits) {
      fusion::ScoreSet speech_scores, text_scores;
      speech_scores.modality = fusion::Modality::kSpeech;
      text_scores.modality = fusion::Modality::kText;
      for (const auto& id : *ids) {
        audio::LogMelSpectrogram spec =
            load_normalized_feature(paths.features_dir(), id);
        speech_scores.add(id, speech_model.score_segment(spec));
        text_scores.add(id, text_model.score_text(manifest.by_id(id).transcript, vocab));
        inputs.push_back(feature_path(paths.features_dir(), id));
      }
      fusion::write_scores((fold_dir / ("scores_speech_" + split + ".jsonl")).string(),
                           speech_scores);
      fusion::write_scores((fold_dir / ("scores_text_" + split + ".jsonl")).string(),
                           text_scores);
    }
    EMOFUSE_INFO("score fold %d: %zu test, %zu holdout segments", fold.fold_index,
                 fold.test_ids.size(), holdout_ids.size());
  }
  write_run_manifest(cfg, "score", inputs);
}

// Fuses test scores per fold with both strategies: holdout-searched weight
// and equal weight after z-normalization. The weight-search report records
// the full grid.
inline void cmd_fuse(const RunConfig& cfg) {
  cfg.validate();
  emit_resolved_config(cfg);
  const RunPaths paths(cfg.out_dir);
  auto [manifest, root] = load_emotion_manifest(cfg);
  const std::vector<eval::FoldPlan> folds = eval::loso_folds(manifest);
  std::vector<fs::path> inputs;

  for (const auto& fold : folds) {
    const fs::path fold_dir = paths.fold_dir(fold.fold_index);
    const fs::path st = fold_dir / "scores_speech_test.jsonl";
    const fs::path tt = fold_dir / "scores_text_test.jsonl";
    const fs::path sh = fold_dir / "scores_speech_holdout.jsonl";
    const fs::path th = fold_dir / "scores_text_holdout.jsonl";
    for (const fs::path& p : {st, tt, sh, th})
      if (!fs::exists(p))
        throw std::runtime_error("cmd_fuse: missing score file " + p.string() +
                                 " (run the score step first)");
    inputs.insert(inputs.end(), {st, tt, sh, th});

    const fusion::ScoreSet speech_test = fusion::read_scores(st.string());
    const fusion::ScoreSet text_test = fusion::read_scores(tt.string());
    const fusion::ScoreSet speech_holdout = fusion::read_scores(sh.string());
    const fusion::ScoreSet text_holdout = fusion::read_scores(th.string());

    std::vector<std::string> holdout_ids;
    std::vector<int> holdout_labels;
    for (const auto& [id, _] : speech_holdout.entries) {
      holdout_ids.push_back(id);
      holdout_labels.push_back(eval::map_label(manifest.by_id(id).label));
    }

    const fusion::WeightSearchResult wres =
        fusion::search_weight(speech_holdout, text_holdout, holdout_ids, holdout_labels);
    const fusion::ScoreSet fused_search = fusion::fuse(speech_test, text_test, wres.best_w1);
    fusion::write_scores((fold_dir / "fused_search.jsonl").string(), fused_search);

    nlohmann::ordered_json wr;
    wr["grid"] = wres.grid;
    wr["ua"] = wres.ua;
    wr["best_w1"] = wres.best_w1;
    wr["best_holdout_ua"] = wres.best_ua;
    write_text_file(fold_dir / "weight_report.json", wr.dump(2) + "\n");

    const fusion::ScoreSet fused_equal = fusion::equal_weight_fusion(
        speech_test, text_test, speech_holdout, text_holdout, cfg.fusion.pooled_norm);
    fusion::write_scores((fold_dir / "fused_equal.jsonl").string(), fused_equal);
    EMOFUSE_INFO("fuse fold %d: best w1 %.2f (holdout ua %.4f)", fold.fold_index,
                 wres.best_w1, wres.best_ua);
  }
  write_run_manifest(cfg, "fuse", inputs);
}

inline nlohmann::ordered_json confusion_json(const eval::ConfusionMatrix& cm) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : cm.counts) rows.push_back(row);
  return rows;
}

// Scores each modality's test outputs against the manifest labels, per fold
// and aggregated. Writes report.json, report.txt and report.csv.
inline fs::path cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  emit_resolved_config(cfg);
  const RunPaths paths(cfg.out_dir);
  auto [manifest, root] = load_emotion_manifest(cfg);
  const std::vector<eval::FoldPlan> folds = eval::loso_folds(manifest);
  std::vector<fs::path> inputs;

  const std::vector<std::pair<std::string, std::string>> modalities = {
      {"speech", "scores_speech_test.jsonl"},
      {"text", "scores_text_test.jsonl"},
      {"fused_search", "fused_search.jsonl"},
      {"fused_equal", "fused_equal.jsonl"}};

  nlohmann::ordered_json report;
  report["n_folds"] = folds.size();
  report["classes"] = eval::class_names();
  report["config_crc32"] = strprintf("%08x", config_fingerprint(cfg));
  nlohmann::ordered_json mod_json = nlohmann::ordered_json::object();

  std::string text_report, csv_report;
  std::map<std::string, eval::AggregateMetrics> means;

  for (const auto& [mod, filename] : modalities) {
    std::vector<eval::FoldMetrics> fold_metrics;
    nlohmann::ordered_json fold_json = nlohmann::ordered_json::array();
    for (const auto& fold : folds) {
      const fs::path score_path = paths.fold_dir(fold.fold_index) / filename;
      if (!fs::exists(score_path))
        throw std::runtime_error("cmd_eval: missing score file " + score_path.string());
      inputs.push_back(score_path);
      const fusion::ScoreSet scores = fusion::read_scores(score_path.string());
      std::vector<int> reference, predicted;
      for (const auto& id : fold.test_ids) {
        reference.push_back(eval::map_label(manifest.by_id(id).label));
        predicted.push_back(fusion::classify(scores.at(id)));
      }
      eval::FoldMetrics fm;
      fm.fold_index = fold.fold_index;
      fm.test_session = fold.test_session;
      fm.cm = eval::confusion(reference, predicted, 4);
      fm.wa = eval::weighted_accuracy(fm.cm);
      fm.ua = eval::unweighted_accuracy(fm.cm);
      fold_json.push_back({{"fold", fm.fold_index},
                           {"session", fm.test_session},
                           {"wa", fm.wa},
                           {"ua", fm.ua},
                           {"confusion", confusion_json(fm.cm)}});
      fold_metrics.push_back(std::move(fm));
    }
    const eval::AggregateMetrics agg = eval::aggregate(fold_metrics);
    means[mod] = agg;
    mod_json[mod] = {{"folds", fold_json},
                     {"mean_wa", agg.mean_wa},
                     {"mean_ua", agg.mean_ua}};
    text_report += "== " + mod + " ==\n" + eval::render_fold_table(fold_metrics) + "\n";
    csv_report += "# " + mod + "\n" + eval::render_fold_csv(fold_metrics);
  }
  report["modalities"] = mod_json;

  const std::string headline =
      cfg.fusion.strategy == "search" ? "fused_search" : "fused_equal";
  report["headline_fusion"] = headline;
  report["headline"] = {{"mean_wa", means.at(headline).mean_wa},
                        {"mean_ua", means.at(headline).mean_ua}};

  write_text_file(paths.report_json(), report.dump(2) + "\n");
  write_text_file(paths.report_text(), text_report);
  write_text_file(paths.report_csv(), csv_report);
  write_run_manifest(cfg, "eval", inputs);
  EMOFUSE_INFO("eval: headline (%s) mean UA %.4f", headline.c_str(),
               means.at(headline).mean_ua);
  return paths.report_json();
}

// Prints the finite-difference table; returns overall pass/fail.
inline bool cmd_gradcheck(std::ostream& os, int n_seeds = 10, double tol = 1e-4) {
  const std::vector<nn::GradSuiteRow> rows = nn::run_gradient_suite(n_seeds, tol);
  bool ok = true;
  os << strprintf("%-18s %6s %14s  %s\n", "op", "seeds", "max_rel_err", "status");
  for (const auto& r : rows) {
    os << strprintf("%-18s %6d %14.3e  %s\n", r.op.c_str(), r.seeds, r.max_rel_err,
                    r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  return ok;
}

// The whole pipeline in dependency order; returns the report path.
inline fs::path run_full_pipeline(const RunConfig& cfg) {
  cmd_synth(cfg);
  cmd_features(cfg);
  if (cfg.speech.transfer != "scratch") cmd_pretrain(cfg);
  cmd_train_speech(cfg);
  cmd_train_text(cfg);
  cmd_score(cfg);
  cmd_fuse(cfg);
  return cmd_eval(cfg);
}

}  // namespace emofuse::pipeline

#endif  // EMOFUSE_PIPELINE_COMMANDS_HPP_

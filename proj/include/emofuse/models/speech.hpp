// emofuse/models/speech.hpp

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

#ifndef EMOFUSE_MODELS_SPEECH_HPP_
#define EMOFUSE_MODELS_SPEECH_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "emofuse/audio/frontend.hpp"
#include "emofuse/audio/specaugment.hpp"
#include "emofuse/nn/layers.hpp"
#include "emofuse/nn/optim.hpp"

namespace emofuse::models {

using audio::LogMelSpectrogram;

// Residual speech classifier over log-mel input. The full preset mirrors the
// 34-layer speaker-embedding topology (stride-1 stem, /8 downsampling, 512-d
// embedding); the desk preset shrinks channels and adds stem downsampling so
// it trains in minutes on a CPU.
struct ResNetConfig {
  std::string preset = "resnet_lite_desk";
  int first_block_channels = 16;
  int embedding_dim = 64;
  std::string pooling = "stats";  // stats | mean_only
  int n_classes = 4;
  int n_mels = 128;
  std::vector<int> stage_blocks = {1, 1, 1, 1};
  bool stem_downsample = true;  // stride-2 stem conv plus 2x2 max pool

  static ResNetConfig desk() { return ResNetConfig{}; }

  static ResNetConfig full() {
    ResNetConfig c;
    c.preset = "resnet34_full";
    c.first_block_channels = 32;
    c.embedding_dim = 512;
    c.stage_blocks = {3, 4, 6, 3};
    c.stem_downsample = false;
    return c;
  }

  static ResNetConfig by_name(const std::string& name) {
    if (name == "resnet_lite_desk") return desk();
    if (name == "resnet34_full") return full();
    throw std::invalid_argument("unknown speech model preset '" + name +
                                "' (expected resnet_lite_desk or resnet34_full)");
  }

  void validate() const {
    if (first_block_channels < 1 || embedding_dim < 1 || n_classes < 1 || n_mels < 1)
      throw std::invalid_argument("speech model config: channels and dims must be >= 1");
    if (stage_blocks.size() != 4)
      throw std::invalid_argument("speech model config: expected 4 residual stages");
    if (pooling != "stats" && pooling != "mean_only")
      throw std::invalid_argument("speech model config: pooling '" + pooling +
                                  "' (expected stats or mean_only)");
  }

  int stage_channels(int stage) const { return first_block_channels << stage; }
};

struct TransferMode {
  std::string kind = "scratch";  // scratch | linear_probe | fine_tune
  double head_lr = 0.1;
  double backbone_lr = 1e-3;

  void validate() const {
    if (kind != "scratch" && kind != "linear_probe" && kind != "fine_tune")
      throw std::invalid_argument("transfer mode '" + kind +
                                  "' (expected scratch, linear_probe, or fine_tune)");
    if (head_lr <= 0.0)
      throw std::invalid_argument("transfer mode: head learning rate must be positive");
    if (backbone_lr < 0.0)
      throw std::invalid_argument("transfer mode: backbone learning rate must be >= 0");
  }
};

template <typename T>
class SpeechModel {
 public:
  SpeechModel(const ResNetConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int c0 = cfg_.first_block_channels;
    stem_ = nn::Conv2d<T>("stem.conv", 1, c0, 3, cfg_.stem_downsample ? 2 : 1, 1, rng,
                          /*bias=*/false);
    stem_bn_ = nn::BatchNorm2d<T>("stem.bn", c0);
    stem_act_ = nn::PRelu<T>("stem.act", c0);
    int cin = c0;
    for (int s = 0; s < 4; ++s) {
      const int cout = cfg_.stage_channels(s);
      for (int b = 0; b < cfg_.stage_blocks[static_cast<std::size_t>(s)]; ++b) {
        const int stride = (b == 0 && s > 0) ? 2 : 1;
        blocks_.emplace_back("stage" + std::to_string(s + 1) + ".block" + std::to_string(b),
                             cin, cout, stride, rng);
        cin = cout;
      }
    }
    feature_dim_ = cfg_.stage_channels(3) * mel_out_dim();
    const int pooled = cfg_.pooling == "stats" ? 2 * feature_dim_ : feature_dim_;
    init_head(pooled, rng);
  }

  const ResNetConfig& config() const { return cfg_; }
  int feature_dim() const { return feature_dim_; }

  nn::ParamSet<T> backbone_params() {
    nn::ParamSet<T> ps;
    append(ps, stem_.param_set());
    append(ps, stem_bn_.param_set());
    append(ps, stem_act_.param_set());
    for (auto& b : blocks_) append(ps, b.param_set());
    return ps;
  }

  nn::ParamSet<T> head_params() {
    nn::ParamSet<T> ps;
    append(ps, embed_fc_.param_set());
    append(ps, embed_act_.param_set());
    append(ps, out_fc_.param_set());
    return ps;
  }

  nn::ParamSet<T> all_params() {
    nn::ParamSet<T> ps = backbone_params();
    append(ps, head_params());
    return ps;
  }

  // Replaces the FC head (both layers and the activation between them) with a
  // freshly initialized one sized for n_classes; backbone untouched.
  void swap_head(int n_classes, Rng& rng) {
    cfg_.n_classes = n_classes;
    const int pooled = cfg_.pooling == "stats" ? 2 * feature_dim_ : feature_dim_;
    init_head(pooled, rng);
  }

  // x: N x 1 x frames x n_mels. Returns n_classes logits per sample.
  // `training` drives head-side batch norm semantics (none today) and
  // `backbone_training` the backbone batch norms, so a probe can choose.
  nn::VarId forward(nn::Tape<T>& t, nn::VarId x, bool training) {
    return forward_split(t, x, training, training);
  }

  nn::VarId forward_split(nn::Tape<T>& t, nn::VarId x, bool /*training*/,
                          bool backbone_training) {
    const Tensor<T>& xv = t.value(x);
    if (xv.ndim() != 4 || xv.shape[1] != 1 || xv.shape[3] != cfg_.n_mels)
      throw std::invalid_argument("speech model: expected (N,1,frames," +
                                  std::to_string(cfg_.n_mels) + ") input, got " +
                                  shape_str(xv.shape));
    nn::VarId h = stem_act_.forward(t, stem_bn_.forward(t, stem_.forward(t, x),
                                                        backbone_training));
    if (cfg_.stem_downsample) h = nn::max_pool2d(t, h, 2);
    for (auto& b : blocks_) h = b.forward(t, h, backbone_training);
    // N x C x T' x F' -> N x T' x (C*F'): frames stay the pooled axis.
    const Tensor<T>& hv = t.value(h);
    const std::int64_t n = hv.shape[0], c = hv.shape[1], tf = hv.shape[2], f = hv.shape[3];
    h = nn::permute(t, h, {0, 2, 1, 3});
    h = nn::reshape(t, h, {n, tf, c * f});
    h = nn::stats_pool(t, h, cfg_.pooling == "stats");
    h = embed_act_.forward(t, embed_fc_.forward(t, h));
    return out_fc_.forward(t, h);
  }

  // Smallest frame count the conv stack accepts (every intermediate map keeps
  // at least one frame row), found by shape simulation.
  int min_input_frames() const {
    for (int frames = 1; frames <= 256; ++frames)
      if (frames_survive(frames)) return frames;
    throw std::runtime_error("speech model: no viable input length below 257 frames");
  }

  // Scores one full-length normalized spectrogram in eval mode; no chunking,
  // no augmentation. Returns n_classes log-posteriors.
  std::vector<double> score_segment(const LogMelSpectrogram& spec) {
    if (!spec.normalized)
      throw std::invalid_argument("score_segment: segment '" + spec.segment_id +
                                  "' must be normalized");
    if (spec.n_mels != cfg_.n_mels)
      throw std::invalid_argument("score_segment: segment '" + spec.segment_id + "' has " +
                                  std::to_string(spec.n_mels) + " mel bins, expected " +
                                  std::to_string(cfg_.n_mels));
    const int min_frames = min_input_frames();
    if (spec.n_frames < min_frames)
      throw std::invalid_argument("score_segment: segment '" + spec.segment_id + "' has " +
                                  std::to_string(spec.n_frames) + " frames, model needs >= " +
                                  std::to_string(min_frames));
    nn::Tape<T> tape;
    nn::ParamSet<T> ps = all_params();
    nn::stage(tape, ps, /*trainable=*/false);
    Tensor<T> x({1, 1, spec.n_frames, cfg_.n_mels});
    for (std::int64_t i = 0; i < spec.n_frames * cfg_.n_mels; ++i)
      x[i] = static_cast<T>(spec.data[static_cast<std::size_t>(i)]);
    nn::VarId logits = forward_split(tape, tape.leaf(std::move(x)), false, false);
    nn::VarId lp = nn::log_softmax(tape, logits);
    const Tensor<T>& out = tape.value(lp);
    std::vector<double> scores(static_cast<std::size_t>(cfg_.n_classes));
    for (int i = 0; i < cfg_.n_classes; ++i) scores[static_cast<std::size_t>(i)] = out[i];
    return scores;
  }

  std::int64_t param_count() {
    std::int64_t n = 0;
    nn::ParamSet<T> ps = all_params();
    for (const auto* p : ps.params) n += p->value.numel();
    return n;
  }

 private:
  void init_head(int pooled_dim, Rng& rng) {
    embed_fc_ = nn::Linear<T>("head.embed", pooled_dim, cfg_.embedding_dim, rng);
    embed_act_ = nn::PRelu<T>("head.act", cfg_.embedding_dim);
    out_fc_ = nn::Linear<T>("head.out", cfg_.embedding_dim, cfg_.n_classes, rng);
  }

  bool frames_survive(int frames) const {
    auto conv3 = [](int h, int stride) { return (h + 2 - 3) / stride + 1; };
    int h = frames;
    if (h + 2 < 3) return false;
    h = conv3(h, cfg_.stem_downsample ? 2 : 1);
    if (cfg_.stem_downsample) {
      h /= 2;  // 2x2 max pool
      if (h < 1) return false;
    }
    for (int s = 0; s < 4; ++s)
      for (int b = 0; b < cfg_.stage_blocks[static_cast<std::size_t>(s)]; ++b) {
        const int stride = (b == 0 && s > 0) ? 2 : 1;
        if (h + 2 < 3) return false;
        h = conv3(h, stride);  // conv1; conv2 is stride 1 pad 1, shape-preserving
        if (h < 1) return false;
      }
    return h >= 1;
  }

  int mel_out_dim() const {
    auto conv3 = [](int w, int stride) { return (w + 2 - 3) / stride + 1; };
    int w = cfg_.n_mels;
    w = conv3(w, cfg_.stem_downsample ? 2 : 1);
    if (cfg_.stem_downsample) w /= 2;
    for (int s = 0; s < 4; ++s)
      for (int b = 0; b < cfg_.stage_blocks[static_cast<std::size_t>(s)]; ++b) {
        const int stride = (b == 0 && s > 0) ? 2 : 1;
        w = conv3(w, stride);
        if (w < 1)
          throw std::invalid_argument("speech model: " + std::to_string(cfg_.n_mels) +
                                      " mel bins collapse below one column in the conv stack");
      }
    return w;
  }

  ResNetConfig cfg_;
  nn::Conv2d<T> stem_;
  nn::BatchNorm2d<T> stem_bn_;
  nn::PRelu<T> stem_act_;
  std::vector<nn::ResidualBlock<T>> blocks_;
  nn::Linear<T> embed_fc_;
  nn::PRelu<T> embed_act_;
  nn::Linear<T> out_fc_;
  int feature_dim_ = 0;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
  double lr = 0.0;
};

struct SpeechTrainHyper {
  int epochs = 20;
  int batch_size = 32;
  double base_lr = 0.1;
  int constant_epochs = 8;
  int halving_period = 2;
  std::vector<int> chunk_set = {150, 200, 250, 300};
  bool cyclic_pad = true;
  bool augment = false;
  audio::AugmentPolicy policy = audio::conservative_policy();
  int augment_copies = 2;
  double target_accuracy = 0.0;  // stop early once training accuracy reaches this (>0)
};

namespace detail {

// Batch index ranges over the epoch's shuffled order; a trailing singleton is
// merged into the previous batch so batch norm always sees >= 2 samples.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                                     std::size_t bs) {
  std::vector<std::pair<std::size_t, std::size_t>> r;
  for (std::size_t i = 0; i < n; i += bs) r.emplace_back(i, std::min(i + bs, n));
  if (r.size() >= 2 && r.back().second - r.back().first == 1) {
    r[r.size() - 2].second = r.back().second;
    r.pop_back();
  }
  return r;
}

template <typename T>
Tensor<T> specs_to_tensor(const std::vector<LogMelSpectrogram>& specs) {
  const std::int64_t n = static_cast<std::int64_t>(specs.size());
  const std::int64_t frames = specs[0].n_frames;
  const int mels = specs[0].n_mels;
  Tensor<T> x({n, 1, frames, mels});
  for (std::int64_t i = 0; i < n; ++i) {
    if (specs[static_cast<std::size_t>(i)].n_frames != frames)
      throw std::invalid_argument("batch has mixed chunk lengths");
    for (std::int64_t j = 0; j < frames * mels; ++j)
      x.data[i * frames * mels + j] =
          static_cast<T>(specs[static_cast<std::size_t>(i)].data[static_cast<std::size_t>(j)]);
  }
  return x;
}

}  // namespace detail

// One SGD training pass over chunked (optionally augmented) spectrograms.
// `mode` controls which parameters learn: scratch and fine_tune update
// everything (fine_tune scales the backbone rate down), linear_probe freezes
// backbone parameters bitwise. Batch norms run in batch-statistics mode for
// every kind so that fine_tune with backbone_lr=0 reproduces linear_probe
// exactly; only running buffers differ from a never-touched backbone.
template <typename T>
std::vector<EpochStats> train_speech(SpeechModel<T>& model,
                                     const std::vector<LogMelSpectrogram>& specs,
                                     const std::vector<int>& labels,
                                     const TransferMode& mode, const SpeechTrainHyper& hyper,
                                     Rng& rng) {
  mode.validate();
  if (specs.empty()) throw std::invalid_argument("train_speech: empty training set");
  if (specs.size() != labels.size())
    throw std::invalid_argument("train_speech: " + std::to_string(specs.size()) +
                                " segments but " + std::to_string(labels.size()) + " labels");
  const int n_classes = model.config().n_classes;
  for (int l : labels)
    if (l < 0 || l >= n_classes)
      throw std::invalid_argument("train_speech: label " + std::to_string(l) +
                                  " outside [0, " + std::to_string(n_classes) + ")");
  for (const auto& s : specs)
    if (!s.normalized)
      throw std::invalid_argument("train_speech: segment '" + s.segment_id +
                                  "' is not normalized");

  const bool probe = mode.kind == "linear_probe";
  const bool tune = mode.kind == "fine_tune";
  const double base_lr = mode.kind == "scratch" ? hyper.base_lr : mode.head_lr;

  nn::ParamSet<T> backbone = model.backbone_params();
  nn::ParamSet<T> head = model.head_params();
  if (tune) {
    const T scale = static_cast<T>(mode.backbone_lr / mode.head_lr);
    for (auto* p : backbone.params) p->lr_scale = scale;
  }
  nn::ParamSet<T> trainable = head;
  if (!probe) append(trainable, backbone);

  nn::SgdMomentum<T> opt(static_cast<T>(base_lr));
  std::vector<EpochStats> history;
  std::vector<std::size_t> order(specs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const double lr = nn::lr_at(base_lr, epoch, hyper.constant_epochs, hyper.halving_period);
    opt.set_lr(static_cast<T>(lr));
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::int64_t correct = 0, seen = 0;

    for (const auto& [lo, hi] : detail::batch_ranges(order.size(),
                                                     static_cast<std::size_t>(hyper.batch_size))) {
      const int chunk = hyper.chunk_set[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(hyper.chunk_set.size()) - 1))];
      std::vector<LogMelSpectrogram> batch;
      std::vector<int> batch_labels;
      batch.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        batch.push_back(audio::chunk_to_length(specs[order[i]], chunk, rng, hyper.cyclic_pad));
        batch_labels.push_back(labels[order[i]]);
      }
      if (hyper.augment && hyper.augment_copies > 0) {
        batch = audio::augment_batch(batch, hyper.policy, hyper.augment_copies, rng);
        std::vector<int> expanded;
        expanded.reserve(batch.size());
        for (int l : batch_labels)
          for (int c = 0; c <= hyper.augment_copies; ++c) expanded.push_back(l);
        batch_labels = std::move(expanded);
      }

      nn::Tape<T> tape;
      nn::stage(tape, head, true);
      nn::stage(tape, backbone, !probe);
      nn::VarId x = tape.leaf(detail::specs_to_tensor<T>(batch));
      nn::VarId logits = model.forward(tape, x, true);
      nn::VarId lp = nn::log_softmax(tape, logits);
      nn::VarId loss = nn::cross_entropy(tape, lp, batch_labels);
      const double loss_val = tape.value(loss)[0];
      if (!std::isfinite(loss_val))
        throw std::runtime_error("train_speech: loss diverged at epoch " +
                                 std::to_string(epoch));
      tape.backward(loss);
      opt.step(tape, trainable);

      const Tensor<T>& out = tape.value(lp);
      for (std::size_t i = 0; i < batch_labels.size(); ++i) {
        int arg = 0;
        for (int c = 1; c < n_classes; ++c)
          if (out.at(static_cast<std::int64_t>(i), c) >
              out.at(static_cast<std::int64_t>(i), arg))
            arg = c;
        if (arg == batch_labels[i]) ++correct;
      }
      seen += static_cast<std::int64_t>(batch_labels.size());
      loss_sum += loss_val * static_cast<double>(batch_labels.size());
    }

    EpochStats st;
    st.loss = loss_sum / static_cast<double>(seen);
    st.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    st.lr = lr;
    history.push_back(st);
    EMOFUSE_INFO("speech epoch %d: loss %.4f acc %.4f lr %.4g", epoch, st.loss, st.accuracy,
                 lr);
    if (hyper.target_accuracy > 0.0 && st.accuracy >= hyper.target_accuracy) break;
  }
  return history;
}

// Speaker-classification pretraining: same loop with speaker indices as
// labels. The model must have been built with n_classes = speaker count.
template <typename T>
std::vector<EpochStats> pretrain_speaker_id(SpeechModel<T>& model,
                                            const std::vector<LogMelSpectrogram>& specs,
                                            const std::vector<int>& speaker_ids,
                                            const SpeechTrainHyper& hyper, Rng& rng) {
  int max_id = -1;
  for (int s : speaker_ids) max_id = std::max(max_id, s);
  if (max_id < 1)
    throw std::invalid_argument("pretrain_speaker_id: need at least 2 distinct speakers");
  TransferMode scratch;
  scratch.kind = "scratch";
  return train_speech(model, specs, speaker_ids, scratch, hyper, rng);
}

}  // namespace emofuse::models

#endif  // EMOFUSE_MODELS_SPEECH_HPP_

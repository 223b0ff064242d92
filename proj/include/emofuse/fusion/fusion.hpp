// emofuse/fusion/fusion.hpp

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

#ifndef EMOFUSE_FUSION_FUSION_HPP_
#define EMOFUSE_FUSION_FUSION_HPP_

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "emofuse/eval/metrics.hpp"
#include "emofuse/fusion/scores.hpp"

namespace emofuse::fusion {

inline void check_same_ids(const ScoreSet& a, const ScoreSet& b) {
  if (a.n_classes != b.n_classes)
    throw std::invalid_argument("fusion: class count mismatch, " +
                                std::to_string(a.n_classes) + " vs " +
                                std::to_string(b.n_classes));
  std::vector<std::string> only_a, only_b;
  for (const auto& [id, _] : a.entries)
    if (!b.entries.count(id)) only_a.push_back(id);
  for (const auto& [id, _] : b.entries)
    if (!a.entries.count(id)) only_b.push_back(id);
  if (!only_a.empty() || !only_b.empty()) {
    std::string msg = "fusion: segment id sets differ;";
    if (!only_a.empty()) msg += " first modality only: \"" + only_a.front() + "\"";
    if (!only_b.empty()) msg += " second modality only: \"" + only_b.front() + "\"";
    msg += " (" + std::to_string(only_a.size() + only_b.size()) + " mismatched ids)";
    throw std::invalid_argument(msg);
  }
}

// Weighted sum of per-segment score vectors: w1 scales the speech scores and
// (1 - w1) the text scores.
inline ScoreSet fuse(const ScoreSet& speech, const ScoreSet& text, double w1) {
  if (!(w1 >= 0.0 && w1 <= 1.0))
    throw std::invalid_argument("fusion: weight " + std::to_string(w1) +
                                " outside [0, 1]");
  check_same_ids(speech, text);
  ScoreSet fused;
  fused.modality = Modality::kFused;
  fused.n_classes = speech.n_classes;
  for (const auto& [id, s_speech] : speech.entries) {
    const auto& s_text = text.at(id);
    std::vector<double> s(s_speech.size());
    for (std::size_t c = 0; c < s.size(); ++c)
      s[c] = w1 * s_speech[c] + (1.0 - w1) * s_text[c];
    fused.entries.emplace(id, std::move(s));
  }
  return fused;
}

// Per-class score mean and population standard deviation, estimated on a
// holdout set. `pooled` collapses all classes into one scalar pair.
struct NormStats {
  int n_classes = 0;
  bool pooled = false;
  std::vector<double> mean;  // size n_classes, or 1 when pooled
  std::vector<double> stddev;
};

inline NormStats estimate_norm_stats(const ScoreSet& scores, bool pooled = false) {
  if (scores.entries.size() < 2)
    throw std::invalid_argument("estimate_norm_stats: need at least 2 segments, got " +
                                std::to_string(scores.entries.size()));
  NormStats st;
  st.n_classes = scores.n_classes;
  st.pooled = pooled;
  const int groups = pooled ? 1 : scores.n_classes;
  st.mean.assign(static_cast<std::size_t>(groups), 0.0);
  st.stddev.assign(static_cast<std::size_t>(groups), 0.0);
  std::vector<double> sum(static_cast<std::size_t>(groups), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(groups), 0.0);
  std::vector<std::int64_t> count(static_cast<std::size_t>(groups), 0);
  for (const auto& [id, post] : scores.entries) {
    for (int c = 0; c < scores.n_classes; ++c) {
      const std::size_t g = pooled ? 0 : static_cast<std::size_t>(c);
      sum[g] += post[static_cast<std::size_t>(c)];
      sum_sq[g] += post[static_cast<std::size_t>(c)] * post[static_cast<std::size_t>(c)];
      ++count[g];
    }
  }
  for (int g = 0; g < groups; ++g) {
    const auto gs = static_cast<std::size_t>(g);
    const double n = static_cast<double>(count[gs]);
    st.mean[gs] = sum[gs] / n;
    const double var = std::max(0.0, sum_sq[gs] / n - st.mean[gs] * st.mean[gs]);
    st.stddev[gs] = std::max(std::sqrt(var), 1e-8);
  }
  return st;
}

// (score - mean) / stddev per class, with stats taken from a holdout set.
inline ScoreSet znorm(const ScoreSet& scores, const NormStats& stats) {
  if (!stats.pooled && stats.n_classes != scores.n_classes)
    throw std::invalid_argument("znorm: stats cover " + std::to_string(stats.n_classes) +
                                " classes, scores have " +
                                std::to_string(scores.n_classes));
  ScoreSet out;
  out.modality = scores.modality;
  out.n_classes = scores.n_classes;
  for (const auto& [id, post] : scores.entries) {
    std::vector<double> z(post.size());
    for (std::size_t c = 0; c < post.size(); ++c) {
      const std::size_t g = stats.pooled ? 0 : c;
      z[c] = (post[c] - stats.mean[g]) / stats.stddev[g];
    }
    out.entries.emplace(id, std::move(z));
  }
  return out;
}

// Argmax over classes; ties resolve to the lowest class index.
inline int classify(const std::vector<double>& post) {
  if (post.empty()) throw std::invalid_argument("classify: empty score vector");
  int arg = 0;
  for (int c = 1; c < static_cast<int>(post.size()); ++c)
    if (post[static_cast<std::size_t>(c)] > post[static_cast<std::size_t>(arg)]) arg = c;
  return arg;
}

inline std::vector<int> classify_all(const ScoreSet& scores,
                                     const std::vector<std::string>& ids) {
  std::vector<int> pred;
  pred.reserve(ids.size());
  for (const auto& id : ids) pred.push_back(classify(scores.at(id)));
  return pred;
}

struct WeightSearchResult {
  double best_w1 = 0.5;
  double best_ua = 0.0;
  std::vector<double> grid;
  std::vector<double> ua;
};

// Sweeps the speech weight over {0.00, 0.01, ..., 1.00} and keeps the value
// maximizing unweighted accuracy on the holdout labels; ties resolve to the
// smaller weight. The sweep runs on the raw scores as given.
inline WeightSearchResult search_weight(const ScoreSet& speech, const ScoreSet& text,
                                        const std::vector<std::string>& holdout_ids,
                                        const std::vector<int>& holdout_labels) {
  if (holdout_ids.empty())
    throw std::invalid_argument("search_weight: empty holdout set");
  if (holdout_ids.size() != holdout_labels.size())
    throw std::invalid_argument("search_weight: " + std::to_string(holdout_ids.size()) +
                                " ids but " + std::to_string(holdout_labels.size()) +
                                " labels");
  check_same_ids(speech, text);
  WeightSearchResult res;
  for (int step = 0; step <= 100; ++step) {
    const double w1 = static_cast<double>(step) / 100.0;
    std::vector<int> pred;
    pred.reserve(holdout_ids.size());
    for (const auto& id : holdout_ids) {
      const auto& s_speech = speech.at(id);
      const auto& s_text = text.at(id);
      std::vector<double> s(s_speech.size());
      for (std::size_t c = 0; c < s.size(); ++c)
        s[c] = w1 * s_speech[c] + (1.0 - w1) * s_text[c];
      pred.push_back(classify(s));
    }
    const eval::ConfusionMatrix cm = eval::confusion(holdout_labels, pred, speech.n_classes);
    const double ua = eval::unweighted_accuracy(cm);
    res.grid.push_back(w1);
    res.ua.push_back(ua);
    if (step == 0 || ua > res.best_ua) {
      res.best_ua = ua;
      res.best_w1 = w1;
    }
  }
  return res;
}

// Normalizes both modalities with holdout statistics, then fuses at equal
// weight. `pooled` selects scalar rather than per-class statistics.
inline ScoreSet equal_weight_fusion(const ScoreSet& speech, const ScoreSet& text,
                                    const ScoreSet& speech_holdout,
                                    const ScoreSet& text_holdout, bool pooled = false) {
  const NormStats speech_stats = estimate_norm_stats(speech_holdout, pooled);
  const NormStats text_stats = estimate_norm_stats(text_holdout, pooled);
  return fuse(znorm(speech, speech_stats), znorm(text, text_stats), 0.5);
}

}  // namespace emofuse::fusion

#endif  // EMOFUSE_FUSION_FUSION_HPP_

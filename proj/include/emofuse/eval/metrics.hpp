// emofuse/eval/metrics.hpp

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

#ifndef EMOFUSE_EVAL_METRICS_HPP_
#define EMOFUSE_EVAL_METRICS_HPP_

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "emofuse/common.hpp"

namespace emofuse::eval {

// counts[r][c]: reference class r, predicted class c.
struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<std::vector<std::int64_t>> counts;

  explicit ConfusionMatrix(int n = 0)
      : n_classes(n),
        counts(static_cast<std::size_t>(n),
               std::vector<std::int64_t>(static_cast<std::size_t>(n), 0)) {}

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& row : counts)
      for (auto v : row) t += v;
    return t;
  }

  std::int64_t row_total(int r) const {
    std::int64_t t = 0;
    for (auto v : counts[static_cast<std::size_t>(r)]) t += v;
    return t;
  }
};

inline ConfusionMatrix confusion(const std::vector<int>& reference,
                                 const std::vector<int>& predicted, int n_classes) {
  if (reference.size() != predicted.size())
    throw std::invalid_argument("confusion: " + std::to_string(reference.size()) +
                                " reference labels but " + std::to_string(predicted.size()) +
                                " predictions");
  if (n_classes < 1) throw std::invalid_argument("confusion: n_classes must be positive");
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const int r = reference[i], p = predicted[i];
    if (r < 0 || r >= n_classes || p < 0 || p >= n_classes)
      throw std::invalid_argument("confusion: label pair (" + std::to_string(r) + ", " +
                                  std::to_string(p) + ") outside [0, " +
                                  std::to_string(n_classes) + ") at index " +
                                  std::to_string(i));
    ++cm.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(p)];
  }
  return cm;
}

// Fraction of all segments classified correctly.
inline double weighted_accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("weighted_accuracy: empty confusion matrix");
  std::int64_t diag = 0;
  for (int c = 0; c < cm.n_classes; ++c)
    diag += cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  return static_cast<double>(diag) / static_cast<double>(total);
}

// Mean of per-class recalls. Classes with zero reference segments are
// excluded from the mean; their indices are reported via `skipped`.
inline double unweighted_accuracy(const ConfusionMatrix& cm,
                                  std::vector<int>* skipped = nullptr) {
  if (cm.total() == 0)
    throw std::invalid_argument("unweighted_accuracy: empty confusion matrix");
  double recall_sum = 0.0;
  int present = 0;
  for (int c = 0; c < cm.n_classes; ++c) {
    const std::int64_t support = cm.row_total(c);
    if (support == 0) {
      EMOFUSE_WARN("unweighted_accuracy: class %d has no reference segments; excluded", c);
      if (skipped) skipped->push_back(c);
      continue;
    }
    recall_sum += static_cast<double>(
                      cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) /
                  static_cast<double>(support);
    ++present;
  }
  return recall_sum / static_cast<double>(present);
}

struct FoldMetrics {
  int fold_index = 0;
  int test_session = 0;
  double wa = 0.0;
  double ua = 0.0;
  ConfusionMatrix cm;
};

struct AggregateMetrics {
  double mean_wa = 0.0;
  double mean_ua = 0.0;
};

// Unweighted mean over folds, so every held-out session counts equally.
inline AggregateMetrics aggregate(const std::vector<FoldMetrics>& folds) {
  if (folds.empty()) throw std::invalid_argument("aggregate: no folds");
  AggregateMetrics a;
  for (const auto& f : folds) {
    a.mean_wa += f.wa;
    a.mean_ua += f.ua;
  }
  a.mean_wa /= static_cast<double>(folds.size());
  a.mean_ua /= static_cast<double>(folds.size());
  return a;
}

inline std::string render_confusion_table(const ConfusionMatrix& cm,
                                          const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != cm.n_classes)
    throw std::invalid_argument("render_confusion_table: " +
                                std::to_string(class_names.size()) + " names for " +
                                std::to_string(cm.n_classes) + " classes");
  std::size_t w = 8;
  for (const auto& n : class_names) w = std::max(w, n.size() + 2);
  std::ostringstream os;
  os << std::setw(static_cast<int>(w)) << "ref\\pred";
  for (const auto& n : class_names) os << std::setw(static_cast<int>(w)) << n;
  os << "\n";
  for (int r = 0; r < cm.n_classes; ++r) {
    os << std::setw(static_cast<int>(w)) << class_names[static_cast<std::size_t>(r)];
    for (int c = 0; c < cm.n_classes; ++c)
      os << std::setw(static_cast<int>(w))
         << cm.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    os << "\n";
  }
  return os.str();
}

inline std::string render_fold_table(const std::vector<FoldMetrics>& folds) {
  std::ostringstream os;
  os << std::setw(6) << "fold" << std::setw(9) << "session" << std::setw(10) << "wa"
     << std::setw(10) << "ua" << "\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& f : folds)
    os << std::setw(6) << f.fold_index << std::setw(9) << f.test_session << std::setw(10)
       << f.wa << std::setw(10) << f.ua << "\n";
  const AggregateMetrics a = aggregate(folds);
  os << std::setw(6) << "mean" << std::setw(9) << "" << std::setw(10) << a.mean_wa
     << std::setw(10) << a.mean_ua << "\n";
  return os.str();
}

inline std::string render_fold_csv(const std::vector<FoldMetrics>& folds) {
  std::ostringstream os;
  os << "fold,session,wa,ua\n" << std::fixed << std::setprecision(6);
  for (const auto& f : folds)
    os << f.fold_index << "," << f.test_session << "," << f.wa << "," << f.ua << "\n";
  const AggregateMetrics a = aggregate(folds);
  os << "mean,," << a.mean_wa << "," << a.mean_ua << "\n";
  return os.str();
}

}  // namespace emofuse::eval

#endif  // EMOFUSE_EVAL_METRICS_HPP_

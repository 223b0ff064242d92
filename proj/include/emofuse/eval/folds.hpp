// emofuse/eval/folds.hpp

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

#ifndef EMOFUSE_EVAL_FOLDS_HPP_
#define EMOFUSE_EVAL_FOLDS_HPP_

#include <string>
#include <vector>

#include "emofuse/eval/manifest.hpp"

namespace emofuse::eval {

struct FoldPlan {
  int fold_index = 0;
  int test_session = 0;
  int validation_session = 0;  // 0 when the plan has no validation split
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;
};

// Leave-one-session-out folds. Sessions are taken in sorted order; fold i
// tests session i. With three or more sessions, the next session in rotation
// serves as the validation holdout and the rest train. With exactly two
// sessions there is nothing left to hold out, so validation is empty and all
// non-test segments train.
inline std::vector<FoldPlan> loso_folds(const DatasetManifest& manifest) {
  manifest.validate();
  const std::vector<int> sessions = manifest.sessions();
  const int m = static_cast<int>(sessions.size());
  if (m < 2)
    throw std::invalid_argument("loso_folds: need at least 2 sessions, got " +
                                std::to_string(m));
  std::vector<FoldPlan> folds;
  for (int i = 0; i < m; ++i) {
    FoldPlan f;
    f.fold_index = i;
    f.test_session = sessions[static_cast<std::size_t>(i)];
    f.validation_session =
        (m >= 3) ? sessions[static_cast<std::size_t>((i + 1) % m)] : 0;
    for (const auto& e : manifest.entries) {
      if (e.session == f.test_session)
        f.test_ids.push_back(e.id);
      else if (m >= 3 && e.session == f.validation_session)
        f.validation_ids.push_back(e.id);
      else
        f.train_ids.push_back(e.id);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace emofuse::eval

#endif  // EMOFUSE_EVAL_FOLDS_HPP_

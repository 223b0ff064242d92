// emofuse/nn/gradcheck.hpp

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

#ifndef EMOFUSE_NN_GRADCHECK_HPP_
#define EMOFUSE_NN_GRADCHECK_HPP_

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "emofuse/autograd.hpp"
#include "emofuse/common.hpp"

namespace emofuse::nn {

// Builds a graph from leaf inputs and returns its (not necessarily scalar)
// output. A fresh tape is supplied per invocation.
using GradCheckFn =
    std::function<VarId(Tape<double>&, const std::vector<VarId>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "input 2, element 17"
};

// Compares reverse-mode gradients against central differences at 64-bit
// precision. The output is contracted to a scalar with fixed random weights so
// every output element influences the objective. Relative error is
// |a - n| / max(1, |a|, |n|).
inline GradCheckResult grad_check(const GradCheckFn& fn, std::vector<Tensor<double>> inputs,
                                  std::uint64_t seed, double epsilon = 1e-5) {
  Rng rng(seed);
  // One forward to size the weight vector.
  std::vector<double> weights;
  {
    Tape<double> tape;
    std::vector<VarId> ids;
    ids.reserve(inputs.size());
    for (auto& in : inputs) ids.push_back(tape.leaf(in, true));
    VarId out = fn(tape, ids);
    weights.resize(static_cast<std::size_t>(tape.value(out).numel()));
    for (auto& w : weights) w = rng.uniform_real(-1.0, 1.0);
  }

  auto objective = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape;
    std::vector<VarId> ids;
    ids.reserve(xs.size());
    for (const auto& in : xs) ids.push_back(tape.leaf(in, false));
    VarId out = fn(tape, ids);
    const Tensor<double>& y = tape.value(out);
    double s = 0.0;
    for (std::int64_t i = 0; i < y.numel(); ++i) s += weights[i] * y[i];
    return s;
  };

  // Analytic gradients.
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<VarId> ids;
    for (auto& in : inputs) ids.push_back(tape.leaf(in, true));
    VarId out = fn(tape, ids);
    VarId obj = weighted_sum(tape, out, weights);
    tape.backward(obj);
    for (auto id : ids) analytic.push_back(tape.grad(id));
  }

  GradCheckResult res;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::int64_t i = 0; i < inputs[k].numel(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + epsilon;
      const double hi = objective(inputs);
      inputs[k][i] = saved - epsilon;
      const double lo = objective(inputs);
      inputs[k][i] = saved;
      const double numeric = (hi - lo) / (2.0 * epsilon);
      const double a = analytic[k][i];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = "input " + std::to_string(k) + ", element " + std::to_string(i);
      }
    }
  }
  return res;
}

}  // namespace emofuse::nn

#endif  // EMOFUSE_NN_GRADCHECK_HPP_

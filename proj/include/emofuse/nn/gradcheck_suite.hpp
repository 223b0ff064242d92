// emofuse/nn/gradcheck_suite.hpp

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

#ifndef EMOFUSE_NN_GRADCHECK_SUITE_HPP_
#define EMOFUSE_NN_GRADCHECK_SUITE_HPP_

#include <string>
#include <vector>

#include "emofuse/nn/gradcheck.hpp"
#include "emofuse/nn/layers.hpp"

namespace emofuse::nn {

struct GradSuiteRow {
  std::string op;
  int seeds = 0;
  double max_rel_err = 0.0;
  bool passed = false;
};

namespace suite_detail {

inline Tensor<double> rand_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor<double> t(shape);
  for (auto& v : t.data) v = rng.normal() * scale;
  return t;
}

// Runs `fn` over `n_seeds` random drawings of the given input shapes and
// keeps the worst relative error.
inline GradSuiteRow check_op(const std::string& op, const std::vector<Shape>& input_shapes,
                             const GradCheckFn& fn, int n_seeds, double tol,
                             std::uint64_t salt) {
  GradSuiteRow row;
  row.op = op;
  row.seeds = n_seeds;
  for (int s = 0; s < n_seeds; ++s) {
    Rng rng(0xabcdef12u + salt * 1000003ULL + static_cast<std::uint64_t>(s));
    std::vector<Tensor<double>> inputs;
    for (const auto& sh : input_shapes) inputs.push_back(rand_tensor(sh, rng));
    const GradCheckResult r =
        grad_check(fn, std::move(inputs), 0x5151u + static_cast<std::uint64_t>(s));
    row.max_rel_err = std::max(row.max_rel_err, r.max_rel_err);
  }
  row.passed = row.max_rel_err < tol;
  return row;
}

}  // namespace suite_detail

// Finite-difference checks for every differentiable op used by the models,
// plus an end-to-end transformer block. 64-bit arithmetic, epsilon 1e-5.
inline std::vector<GradSuiteRow> run_gradient_suite(int n_seeds = 10, double tol = 1e-4) {
  using suite_detail::check_op;
  std::vector<GradSuiteRow> rows;
  std::uint64_t salt = 0;

  rows.push_back(check_op(
      "linear", {{3, 5}, {5, 4}, {4}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        return linear(t, in[0], in[1], in[2]);
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "conv2d", {{2, 3, 6, 5}, {4, 3, 3, 3}, {4}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        return conv2d(t, in[0], in[1], in[2], 2, 1, 1, 1);
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "max_pool2d", {{2, 3, 6, 4}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        return max_pool2d(t, in[0], 2);
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "batch_norm_train", {{4, 3, 2, 2}, {3}, {3}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        static thread_local Tensor<double> rm, rv;
        rm = Tensor<double>({3});
        rv = Tensor<double>::full({3}, 1.0);
        return batch_norm(t, in[0], in[1], in[2], rm, rv, 0.1, 1e-5, true);
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "prelu", {{2, 3, 4, 2}, {3}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        return prelu(t, in[0], in[1]);
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "stats_pool", {{3, 5, 4}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        return stats_pool(t, in[0], true);
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "layer_norm", {{3, 6}, {6}, {6}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        return layer_norm(t, in[0], in[1], in[2], 1e-5);
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "gelu", {{4, 5}},
      [](Tape<double>& t, const std::vector<VarId>& in) { return gelu(t, in[0]); },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "log_softmax_xent", {{5, 4}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        return cross_entropy(t, log_softmax(t, in[0]), {0, 3, 1, 2, 1});
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "softmax_bmm", {{4, 3, 3}, {4, 3, 2}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        return bmm(t, softmax(t, in[0]), in[1]);
      },
      n_seeds, tol, ++salt));

  rows.push_back(check_op(
      "attention_block", {{2, 4, 8}},
      [](Tape<double>& t, const std::vector<VarId>& in) {
        Rng wrng(77);
        TransformerBlock<double> block("gc", 8, 2, 16, wrng);
        ParamSet<double> ps = block.param_set();
        stage(t, ps, true);
        std::vector<std::uint8_t> mask = {1, 1, 1, 0, 1, 1, 1, 1};
        return block.forward(t, in[0], mask);
      },
      n_seeds, tol, ++salt));

  return rows;
}

}  // namespace emofuse::nn

#endif  // EMOFUSE_NN_GRADCHECK_SUITE_HPP_

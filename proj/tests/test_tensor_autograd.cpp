// Copyright 2026  Emofuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE, MERCHANTABLITY OR
// NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <limits>
#include <vector>

#include "catch_amalgamated.hpp"
#include "emofuse/autograd.hpp"
#include "emofuse/nn/gradcheck_suite.hpp"
#include "emofuse/nn/optim.hpp"

using namespace emofuse;
using nn::Tape;
using nn::Tensor;
using nn::VarId;

TEST_CASE("log_softmax of equal logits is a flat log(1/n)", "[autograd]") {
  Tape<double> t;
  VarId x = t.leaf(Tensor<double>::from({1, 4}, {0.7, 0.7, 0.7, 0.7}));
  VarId y = nn::log_softmax(t, x);
  for (int i = 0; i < 4; ++i)
    REQUIRE_THAT(t.value(y)[i], Catch::Matchers::WithinAbs(std::log(0.25), 1e-12));
}

TEST_CASE("log_softmax is shift invariant", "[autograd]") {
  Tape<double> t;
  VarId a = t.leaf(Tensor<double>::from({1, 3}, {0.3, -1.1, 2.0}));
  VarId b = t.leaf(Tensor<double>::from({1, 3}, {100.3, 98.9, 102.0}));
  VarId ya = nn::log_softmax(t, a);
  VarId yb = nn::log_softmax(t, b);
  for (int i = 0; i < 3; ++i)
    REQUIRE_THAT(t.value(ya)[i], Catch::Matchers::WithinAbs(t.value(yb)[i], 1e-9));
}

TEST_CASE("log_softmax survives extreme logits", "[autograd]") {
  Tape<double> t;
  VarId x = t.leaf(Tensor<double>::from({1, 2}, {1000.0, 0.0}));
  VarId y = nn::log_softmax(t, x);
  REQUIRE(std::isfinite(t.value(y)[0]));
  REQUIRE(std::isfinite(t.value(y)[1]));
  REQUIRE_THAT(t.value(y)[0], Catch::Matchers::WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(t.value(y)[1], Catch::Matchers::WithinAbs(-1000.0, 1e-9));
}

TEST_CASE("cross entropy of uniform two-way logits is log 2", "[autograd]") {
  Tape<double> t;
  VarId x = t.leaf(Tensor<double>::from({1, 2}, {0.0, 0.0}));
  VarId loss = nn::cross_entropy(t, nn::log_softmax(t, x), {0});
  REQUIRE_THAT(t.value(loss)[0], Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));
}

TEST_CASE("softmax rows sum to one and masked keys get exactly zero", "[autograd]") {
  Tape<double> t;
  // One sample, one head, sequence length 4, key 2 masked out.
  VarId s = t.leaf(Tensor<double>::from({1, 4, 4}, {
      0.3, -1.0, 0.8, 0.1,  0.0, 0.2, -0.5, 1.0,
      1.1, 0.4, 0.0, -0.2,  0.6, -0.9, 0.25, 0.0}));
  VarId masked = nn::mask_attention_scores(t, s, {1, 1, 0, 1}, 1);
  VarId p = nn::softmax(t, masked);
  for (int row = 0; row < 4; ++row) {
    double sum = 0.0;
    for (int col = 0; col < 4; ++col) sum += t.value(p)[row * 4 + col];
    REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE(t.value(p)[row * 4 + 2] == 0.0);  // exact, not merely small
  }
}

TEST_CASE("stats_pool output is invariant to frame order", "[autograd]") {
  Rng rng(2024);
  Tensor<double> x({2, 7, 5});
  for (auto& v : x.data) v = rng.normal();
  Tensor<double> perm = x;
  const std::vector<int> order = {6, 0, 4, 2, 1, 5, 3};
  for (int n = 0; n < 2; ++n)
    for (int f = 0; f < 7; ++f)
      for (int d = 0; d < 5; ++d)
        perm.data[(n * 7 + f) * 5 + d] = x.data[(n * 7 + order[f]) * 5 + d];

  Tape<double> t;
  VarId a = nn::stats_pool(t, t.leaf(x));
  VarId b = nn::stats_pool(t, t.leaf(perm));
  for (std::int64_t i = 0; i < t.value(a).numel(); ++i)
    REQUIRE_THAT(t.value(a)[i], Catch::Matchers::WithinAbs(t.value(b)[i], 1e-12));
}

TEST_CASE("stats_pool mean and population std on a worked example", "[autograd]") {
  Tape<double> t;
  // One sample, 3 frames, 1 dim: {1, 2, 3} -> mean 2, std sqrt(2/3).
  VarId x = t.leaf(Tensor<double>::from({1, 3, 1}, {1.0, 2.0, 3.0}));
  VarId y = nn::stats_pool(t, x);
  REQUIRE_THAT(t.value(y)[0], Catch::Matchers::WithinAbs(2.0, 1e-12));
  REQUIRE_THAT(t.value(y)[1], Catch::Matchers::WithinAbs(std::sqrt(2.0 / 3.0), 1e-12));
}

TEST_CASE("sgd momentum follows the v=mu*v+g update", "[autograd]") {
  // Constant gradient g = 0.5 at lr = 0.1:
  //   step 1: v = 0.5,  p takes -lr*g         -> 1.0 - 0.05  = 0.950
  //   step 2: v = 0.95, p takes -1.9*lr*g     -> 0.95 - 0.095 = 0.855
  nn::Param<double> p;
  p.name = "w";
  p.value = Tensor<double>::from({1}, {1.0});
  nn::ParamSet<double> ps;
  ps.params = {&p};
  nn::SgdMomentum<double> opt(0.1);
  for (int step = 0; step < 2; ++step) {
    Tape<double> t;
    nn::stage(t, ps);
    VarId loss = nn::weighted_sum(t, p.id, {0.5});
    t.backward(loss);
    opt.step(t, ps);
    if (step == 0) REQUIRE_THAT(p.value[0], Catch::Matchers::WithinAbs(0.95, 1e-12));
  }
  REQUIRE_THAT(p.value[0], Catch::Matchers::WithinAbs(0.855, 1e-12));
}

TEST_CASE("sgd momentum honours per-parameter lr scale including zero", "[autograd]") {
  nn::Param<double> frozen, live;
  frozen.name = "backbone";
  frozen.value = Tensor<double>::from({1}, {2.0});
  frozen.lr_scale = 0.0;
  live.name = "head";
  live.value = Tensor<double>::from({1}, {2.0});
  nn::ParamSet<double> ps;
  ps.params = {&frozen, &live};
  nn::SgdMomentum<double> opt(0.1);
  Tape<double> t;
  nn::stage(t, ps);
  VarId sum = nn::add(t, frozen.id, live.id);
  t.backward(nn::weighted_sum(t, sum, {1.0}));
  opt.step(t, ps);
  REQUIRE(frozen.value[0] == 2.0);
  REQUIRE(live.value[0] < 2.0);
}

TEST_CASE("adam's first step moves by about lr regardless of gradient size", "[autograd]") {
  for (double g : {3.0, 0.004}) {
    nn::Param<double> p;
    p.name = "w";
    p.value = Tensor<double>::from({1}, {1.0});
    nn::ParamSet<double> ps;
    ps.params = {&p};
    nn::Adam<double> opt(0.01);
    Tape<double> t;
    nn::stage(t, ps);
    t.backward(nn::weighted_sum(t, p.id, {g}));
    opt.step(t, ps);
    REQUIRE_THAT(p.value[0], Catch::Matchers::WithinAbs(0.99, 1e-5));
  }
}

TEST_CASE("adam drives x^2 near zero in 200 steps", "[autograd]") {
  nn::Param<double> p;
  p.name = "x";
  p.value = Tensor<double>::from({1}, {1.0});
  nn::ParamSet<double> ps;
  ps.params = {&p};
  nn::Adam<double> opt(0.1);
  for (int step = 0; step < 200; ++step) {
    Tape<double> t;
    nn::stage(t, ps);
    // d(x^2)/dx = 2x, delivered through a weighted sum with weight 2x.
    t.backward(nn::weighted_sum(t, p.id, {2.0 * p.value[0]}));
    opt.step(t, ps);
  }
  REQUIRE(std::abs(p.value[0]) < 0.05);
}

TEST_CASE("learning-rate staircase holds then halves every period", "[autograd]") {
  REQUIRE(nn::lr_at(0.1, 1) == 0.1);
  REQUIRE(nn::lr_at(0.1, 8) == 0.1);
  REQUIRE_THAT(nn::lr_at(0.1, 9), Catch::Matchers::WithinAbs(0.05, 1e-15));
  REQUIRE_THAT(nn::lr_at(0.1, 10), Catch::Matchers::WithinAbs(0.05, 1e-15));
  REQUIRE_THAT(nn::lr_at(0.1, 11), Catch::Matchers::WithinAbs(0.025, 1e-15));
  REQUIRE_THAT(nn::lr_at(0.1, 12), Catch::Matchers::WithinAbs(0.025, 1e-15));
  REQUIRE_THAT(nn::lr_at(0.1, 13), Catch::Matchers::WithinAbs(0.0125, 1e-15));
  REQUIRE_THROWS_AS(nn::lr_at(0.1, 0), std::invalid_argument);
  // A period of 3 stretches each plateau.
  REQUIRE_THAT(nn::lr_at(0.1, 9, 8, 3), Catch::Matchers::WithinAbs(0.05, 1e-15));
  REQUIRE_THAT(nn::lr_at(0.1, 11, 8, 3), Catch::Matchers::WithinAbs(0.05, 1e-15));
  REQUIRE_THAT(nn::lr_at(0.1, 12, 8, 3), Catch::Matchers::WithinAbs(0.025, 1e-15));
}

TEST_CASE("backward rejects non-scalar roots", "[autograd]") {
  Tape<double> t;
  VarId x = t.leaf(Tensor<double>::from({2}, {1.0, 2.0}), true);
  REQUIRE_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("gradient suite smoke run at one seed", "[autograd]") {
  auto rows = nn::run_gradient_suite(1, 1e-4);
  REQUIRE(rows.size() >= 11);
  for (const auto& row : rows) {
    INFO(row.op << " max rel err " << row.max_rel_err);
    REQUIRE(row.passed);
  }
}

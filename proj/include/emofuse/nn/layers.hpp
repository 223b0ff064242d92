// emofuse/nn/layers.hpp

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

#ifndef EMOFUSE_NN_LAYERS_HPP_
#define EMOFUSE_NN_LAYERS_HPP_

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "emofuse/autograd.hpp"
#include "emofuse/common.hpp"
#include "emofuse/tensor.hpp"

namespace emofuse::nn {

// A named trainable tensor. `id` is only meaningful for the tape it was last
// staged on. lr_scale lets one optimizer drive parameter groups at different
// rates (e.g. a frozen-then-thawed backbone).
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  VarId id{};
  T lr_scale = T(1);
};

// Non-trainable persistent state (running statistics).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T> value;
};

template <typename T>
struct ParamSet {
  std::vector<Param<T>*> params;
  std::vector<Buffer<T>*> buffers;
};

// Leaf every parameter onto a fresh tape. With `trainable` false the
// parameters participate in the forward pass but receive no gradient.
template <typename T>
void stage(Tape<T>& t, ParamSet<T>& ps, bool trainable = true) {
  for (auto* p : ps.params) p->id = t.leaf(p->value, trainable);
}

template <typename T>
void append(ParamSet<T>& dst, ParamSet<T> src) {
  dst.params.insert(dst.params.end(), src.params.begin(), src.params.end());
  dst.buffers.insert(dst.buffers.end(), src.buffers.begin(), src.buffers.end());
}

inline std::string join_name(const std::string& prefix, const std::string& leafname) {
  return prefix.empty() ? leafname : prefix + "." + leafname;
}

// Zero-mean normal with variance 2 / fan_in.
template <typename T>
void he_init(Tensor<T>& w, std::int64_t fan_in, Rng& rng) {
  const double s = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : w.data) v = static_cast<T>(rng.normal() * s);
}

template <typename T>
struct Linear {
  Param<T> w, b;
  bool has_bias = true;

  Linear() = default;
  Linear(const std::string& name, std::int64_t in, std::int64_t out, Rng& rng,
         bool bias = true)
      : has_bias(bias) {
    w.name = join_name(name, "w");
    w.value = Tensor<T>({in, out});
    he_init(w.value, in, rng);
    if (bias) {
      b.name = join_name(name, "b");
      b.value = Tensor<T>({out});
    }
  }
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    ps.params.push_back(&w);
    if (has_bias) ps.params.push_back(&b);
    return ps;
  }
  VarId forward(Tape<T>& t, VarId x) { return linear(t, x, w.id, has_bias ? b.id : VarId{}); }
};

template <typename T>
struct Conv2d {
  Param<T> w, b;
  std::int64_t stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0;
  bool has_bias = true;

  Conv2d() = default;
  Conv2d(const std::string& name, std::int64_t cin, std::int64_t cout, std::int64_t k,
         std::int64_t stride, std::int64_t pad, Rng& rng, bool bias = true)
      : stride_h(stride), stride_w(stride), pad_h(pad), pad_w(pad), has_bias(bias) {
    w.name = join_name(name, "w");
    w.value = Tensor<T>({cout, cin, k, k});
    he_init(w.value, cin * k * k, rng);
    if (bias) {
      b.name = join_name(name, "b");
      b.value = Tensor<T>({cout});
    }
  }
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    ps.params.push_back(&w);
    if (has_bias) ps.params.push_back(&b);
    return ps;
  }
  VarId forward(Tape<T>& t, VarId x) {
    return conv2d(t, x, w.id, has_bias ? b.id : VarId{}, stride_h, stride_w, pad_h, pad_w);
  }
};

template <typename T>
struct BatchNorm2d {
  Param<T> gamma, beta;
  Buffer<T> running_mean, running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, std::int64_t c) {
    gamma.name = join_name(name, "gamma");
    gamma.value = Tensor<T>::full({c}, T(1));
    beta.name = join_name(name, "beta");
    beta.value = Tensor<T>({c});
    running_mean.name = join_name(name, "running_mean");
    running_mean.value = Tensor<T>({c});
    running_var.name = join_name(name, "running_var");
    running_var.value = Tensor<T>::full({c}, T(1));
  }
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    ps.params = {&gamma, &beta};
    ps.buffers = {&running_mean, &running_var};
    return ps;
  }
  VarId forward(Tape<T>& t, VarId x, bool training) {
    return batch_norm(t, x, gamma.id, beta.id, running_mean.value, running_var.value,
                      momentum, eps, training);
  }
};

template <typename T>
struct PRelu {
  Param<T> slopes;

  PRelu() = default;
  PRelu(const std::string& name, std::int64_t channels) {
    slopes.name = join_name(name, "slopes");
    slopes.value = Tensor<T>::full({channels}, T(0.25));
  }
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    ps.params = {&slopes};
    return ps;
  }
  VarId forward(Tape<T>& t, VarId x) { return prelu(t, x, slopes.id); }
};

template <typename T>
struct LayerNorm {
  Param<T> gamma, beta;
  T eps = T(1e-5);

  LayerNorm() = default;
  LayerNorm(const std::string& name, std::int64_t d) {
    gamma.name = join_name(name, "gamma");
    gamma.value = Tensor<T>::full({d}, T(1));
    beta.name = join_name(name, "beta");
    beta.value = Tensor<T>({d});
  }
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    ps.params = {&gamma, &beta};
    return ps;
  }
  VarId forward(Tape<T>& t, VarId x) { return layer_norm(t, x, gamma.id, beta.id, eps); }
};

template <typename T>
struct EmbeddingTable {
  Param<T> table;

  EmbeddingTable() = default;
  EmbeddingTable(const std::string& name, std::int64_t vocab, std::int64_t d, Rng& rng) {
    table.name = join_name(name, "table");
    table.value = Tensor<T>({vocab, d});
    for (auto& v : table.value.data) v = static_cast<T>(rng.normal() * 0.02);
  }
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    ps.params = {&table};
    return ps;
  }
  VarId forward(Tape<T>& t, const std::vector<std::int64_t>& ids, std::int64_t n,
                std::int64_t l) {
    return embedding(t, ids, n, l, table.id);
  }
};

// Scaled dot-product self-attention with h heads over an N x L x D input.
// Padded key positions (key_mask == 0) receive exactly zero weight. When
// `captured` is non-null the post-softmax weights (N*H x L x L) are copied out
// for inspection.
template <typename T>
struct MultiHeadSelfAttention {
  Linear<T> wq, wk, wv, wo;
  std::int64_t dim = 0, heads = 0;

  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(const std::string& name, std::int64_t d, std::int64_t h, Rng& rng)
      : wq(join_name(name, "q"), d, d, rng),
        wk(join_name(name, "k"), d, d, rng),
        wv(join_name(name, "v"), d, d, rng),
        wo(join_name(name, "o"), d, d, rng),
        dim(d),
        heads(h) {
    if (d % h != 0)
      throw std::invalid_argument("attention: dim " + std::to_string(d) +
                                  " not divisible by heads " + std::to_string(h));
  }
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    append(ps, wq.param_set());
    append(ps, wk.param_set());
    append(ps, wv.param_set());
    append(ps, wo.param_set());
    return ps;
  }

  VarId forward(Tape<T>& t, VarId x, const std::vector<std::uint8_t>& key_mask,
                Tensor<T>* captured = nullptr) {
    const Tensor<T>& xv = t.value(x);
    if (xv.ndim() != 3 || xv.shape[2] != dim)
      throw std::invalid_argument("attention: expected (N,L," + std::to_string(dim) +
                                  ") input, got " + shape_str(xv.shape));
    const std::int64_t n = xv.shape[0], l = xv.shape[1], dk = dim / heads;
    auto split = [&](VarId v) {
      VarId r = reshape(t, v, {n, l, heads, dk});
      r = permute(t, r, {0, 2, 1, 3});
      return reshape(t, r, {n * heads, l, dk});
    };
    VarId q = split(wq.forward(t, x));
    VarId k = split(wk.forward(t, x));
    VarId v = split(wv.forward(t, x));
    VarId scores = bmm(t, q, k, /*trans_b=*/true);
    scores = scale(t, scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk))));
    scores = mask_attention_scores(t, scores, key_mask, heads);
    VarId attn = softmax(t, scores);
    if (captured) *captured = t.value(attn);
    VarId ctx = bmm(t, attn, v);
    ctx = reshape(t, ctx, {n, heads, l, dk});
    ctx = permute(t, ctx, {0, 2, 1, 3});
    ctx = reshape(t, ctx, {n, l, dim});
    return wo.forward(t, ctx);
  }
};

// Post-norm transformer encoder block: self-attention and a 4x feed-forward
// expansion, each followed by residual add and layer norm.
template <typename T>
struct TransformerBlock {
  MultiHeadSelfAttention<T> attn;
  LayerNorm<T> ln1, ln2;
  Linear<T> ff1, ff2;

  TransformerBlock() = default;
  TransformerBlock(const std::string& name, std::int64_t d, std::int64_t h,
                   std::int64_t ff_dim, Rng& rng)
      : attn(join_name(name, "attn"), d, h, rng),
        ln1(join_name(name, "ln1"), d),
        ln2(join_name(name, "ln2"), d),
        ff1(join_name(name, "ff1"), d, ff_dim, rng),
        ff2(join_name(name, "ff2"), ff_dim, d, rng) {}
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    append(ps, attn.param_set());
    append(ps, ln1.param_set());
    append(ps, ln2.param_set());
    append(ps, ff1.param_set());
    append(ps, ff2.param_set());
    return ps;
  }
  VarId forward(Tape<T>& t, VarId x, const std::vector<std::uint8_t>& key_mask,
                Tensor<T>* captured = nullptr) {
    VarId a = attn.forward(t, x, key_mask, captured);
    x = ln1.forward(t, add(t, x, a));
    VarId f = ff2.forward(t, gelu(t, ff1.forward(t, x)));
    return ln2.forward(t, add(t, x, f));
  }
};

// Basic residual block: two 3x3 convolutions with per-layer batch norm, PReLU
// in between and after the residual add. A 1x1 projection aligns the skip
// path whenever shape changes.
template <typename T>
struct ResidualBlock {
  Conv2d<T> conv1, conv2;
  BatchNorm2d<T> bn1, bn2;
  PRelu<T> act1, act_out;
  bool has_projection = false;
  Conv2d<T> proj;
  BatchNorm2d<T> proj_bn;

  ResidualBlock() = default;
  ResidualBlock(const std::string& name, std::int64_t cin, std::int64_t cout,
                std::int64_t stride, Rng& rng)
      : conv1(join_name(name, "conv1"), cin, cout, 3, stride, 1, rng, /*bias=*/false),
        conv2(join_name(name, "conv2"), cout, cout, 3, 1, 1, rng, /*bias=*/false),
        bn1(join_name(name, "bn1"), cout),
        bn2(join_name(name, "bn2"), cout),
        act1(join_name(name, "act1"), cout),
        act_out(join_name(name, "act_out"), cout),
        has_projection(stride != 1 || cin != cout) {
    if (has_projection) {
      proj = Conv2d<T>(join_name(name, "proj"), cin, cout, 1, stride, 0, rng, /*bias=*/false);
      proj_bn = BatchNorm2d<T>(join_name(name, "proj_bn"), cout);
    }
  }
  ParamSet<T> param_set() {
    ParamSet<T> ps;
    append(ps, conv1.param_set());
    append(ps, bn1.param_set());
    append(ps, act1.param_set());
    append(ps, conv2.param_set());
    append(ps, bn2.param_set());
    if (has_projection) {
      append(ps, proj.param_set());
      append(ps, proj_bn.param_set());
    }
    append(ps, act_out.param_set());
    return ps;
  }
  VarId forward(Tape<T>& t, VarId x, bool training) {
    VarId y = act1.forward(t, bn1.forward(t, conv1.forward(t, x), training));
    y = bn2.forward(t, conv2.forward(t, y), training);
    VarId skip = x;
    if (has_projection) skip = proj_bn.forward(t, proj.forward(t, x), training);
    return act_out.forward(t, add(t, y, skip));
  }
};

}  // namespace emofuse::nn

#endif  // EMOFUSE_NN_LAYERS_HPP_

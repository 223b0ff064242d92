// emofuse/autograd.hpp

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

#ifndef EMOFUSE_AUTOGRAD_HPP_
#define EMOFUSE_AUTOGRAD_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "emofuse/tensor.hpp"

namespace emofuse::nn {

using emofuse::Shape;
using emofuse::Tensor;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct VarId {
  int v = -1;
  bool valid() const { return v >= 0; }
};

// Reverse-mode tape. Ops run their forward pass eagerly and record a closure
// that propagates gradients to their inputs; creation order is a topological
// order, so backward() is a single reverse sweep. One tape per training step.
template <typename T>
class Tape {
 public:
  using BackFn = std::function<void(Tape&, VarId)>;

  VarId leaf(Tensor<T> value, bool needs_grad = false) {
    return emit(std::move(value), needs_grad, nullptr);
  }

  VarId emit(Tensor<T> value, bool needs_grad, BackFn back) {
    nodes_.push_back(Node{std::move(value), Tensor<T>{}, std::move(back), needs_grad});
    return VarId{static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& value(VarId id) const { return nodes_.at(id.v).value; }

  bool needs_grad(VarId id) const { return id.valid() && nodes_.at(id.v).needs_grad; }

  // Gradient buffer, zero-initialized to the value's shape on first access.
  Tensor<T>& grad(VarId id) {
    Node& n = nodes_.at(id.v);
    if (n.grad.data.empty() && n.value.numel() > 0) n.grad = Tensor<T>(n.value.shape);
    return n.grad;
  }

  bool has_grad(VarId id) const { return !nodes_.at(id.v).grad.data.empty(); }

  void backward(VarId root) {
    if (value(root).numel() != 1)
      throw std::invalid_argument("backward: root must be a scalar");
    grad(root).data[0] = T(1);
    for (int i = root.v; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.needs_grad && n.backward && !n.grad.data.empty())
        n.backward(*this, VarId{i});
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackFn backward;
    bool needs_grad;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Elementwise and shape ops

template <typename T>
VarId add(Tape<T>& t, VarId a, VarId b) {
  check_same_shape(t.value(a), t.value(b), "add");
  Tensor<T> out = t.value(a);
  const Tensor<T>& bv = t.value(b);
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.emit(std::move(out), ng, [a, b](Tape<T>& tp, VarId self) {
    const Tensor<T>& g = tp.grad(self);
    if (tp.needs_grad(a)) {
      Tensor<T>& ga = tp.grad(a);
      for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      Tensor<T>& gb = tp.grad(b);
      for (std::int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
    }
  });
}

template <typename T>
VarId scale(Tape<T>& t, VarId a, T c) {
  Tensor<T> out = t.value(a);
  for (auto& v : out.data) v *= c;
  return t.emit(std::move(out), t.needs_grad(a), [a, c](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(a)) return;
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += c * g[i];
  });
}

template <typename T>
VarId reshape(Tape<T>& t, VarId a, Shape shape) {
  if (shape_numel(shape) != t.value(a).numel())
    throw std::invalid_argument("reshape: numel mismatch " + shape_str(t.value(a).shape) +
                                " -> " + shape_str(shape));
  Tensor<T> out(shape, t.value(a).data);
  return t.emit(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(a)) return;
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

namespace detail {

inline std::vector<std::int64_t> row_major_strides(const Shape& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * shape[i + 1];
  return s;
}

// out[idx] = in[perm applied]; used forward and (with the inverse permutation)
// backward.
template <typename T>
void permute_copy(const Tensor<T>& in, const std::vector<int>& perm, Tensor<T>& out,
                  bool accumulate) {
  const auto in_strides = row_major_strides(in.shape);
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = in.shape[perm[i]];
  const auto out_strides = row_major_strides(out_shape);
  const int nd = static_cast<int>(perm.size());
  std::vector<std::int64_t> idx(nd, 0);
  const std::int64_t n = in.numel();
  for (std::int64_t flat = 0; flat < n; ++flat) {
    std::int64_t rem = flat;
    std::int64_t src = 0;
    for (int d = 0; d < nd; ++d) {
      std::int64_t od = rem / out_strides[d];
      rem %= out_strides[d];
      src += od * in_strides[perm[d]];
    }
    if (accumulate)
      out[flat] += in[src];
    else
      out[flat] = in[src];
  }
}

}  // namespace detail

template <typename T>
VarId permute(Tape<T>& t, VarId a, std::vector<int> perm) {
  const Tensor<T>& x = t.value(a);
  if (static_cast<int>(perm.size()) != x.ndim())
    throw std::invalid_argument("permute: rank mismatch");
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = x.shape[perm[i]];
  Tensor<T> out(out_shape);
  detail::permute_copy(x, perm, out, false);
  return t.emit(std::move(out), t.needs_grad(a), [a, perm](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(a)) return;
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    // grad(self) has the permuted shape; applying the inverse permutation
    // accumulates into the input layout.
    detail::permute_copy(tp.grad(self), inv, tp.grad(a), true);
  });
}

// x: N x L x D, returns row `pos` of every sample: N x D.
template <typename T>
VarId select_pos(Tape<T>& t, VarId a, std::int64_t pos) {
  const Tensor<T>& x = t.value(a);
  if (x.ndim() != 3) throw std::invalid_argument("select_pos: expected rank-3 input");
  const std::int64_t n = x.shape[0], l = x.shape[1], d = x.shape[2];
  if (pos < 0 || pos >= l) throw std::invalid_argument("select_pos: position out of range");
  Tensor<T> out({n, d});
  for (std::int64_t i = 0; i < n; ++i)
    std::copy_n(&x.data[(i * l + pos) * d], d, &out.data[i * d]);
  return t.emit(std::move(out), t.needs_grad(a), [a, pos](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(a)) return;
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& ga = tp.grad(a);
    const std::int64_t n = g.shape[0], d = g.shape[1], l = ga.shape[1];
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) ga.data[(i * l + pos) * d + j] += g.data[i * d + j];
  });
}

template <typename T>
VarId gelu(Tape<T>& t, VarId a) {
  const Tensor<T>& x = t.value(a);
  Tensor<T> out(x.shape);
  const double inv_sqrt2 = 0.7071067811865475244;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    double xv = static_cast<double>(x[i]);
    out[i] = static_cast<T>(0.5 * xv * (1.0 + std::erf(xv * inv_sqrt2)));
  }
  return t.emit(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(a)) return;
    const Tensor<T>& g = tp.grad(self);
    const Tensor<T>& x = tp.value(a);
    Tensor<T>& ga = tp.grad(a);
    const double inv_sqrt2 = 0.7071067811865475244;
    const double inv_sqrt2pi = 0.3989422804014326779;
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      double xv = static_cast<double>(x[i]);
      double d = 0.5 * (1.0 + std::erf(xv * inv_sqrt2)) +
                 xv * inv_sqrt2pi * std::exp(-0.5 * xv * xv);
      ga[i] += g[i] * static_cast<T>(d);
    }
  });
}

// ---------------------------------------------------------------------------
// Dense algebra

// a: m x k, b: k x n -> m x n.
template <typename T>
VarId matmul(Tape<T>& t, VarId a, VarId b) {
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  if (av.ndim() != 2 || bv.ndim() != 2 || av.shape[1] != bv.shape[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(av.shape) + " x " +
                                shape_str(bv.shape));
  const std::int64_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
  Tensor<T> out({m, n});
  ConstMatMap<T> A(av.data.data(), m, k), B(bv.data.data(), k, n);
  MatMap<T>(out.data.data(), m, n).noalias() = A * B;
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.emit(std::move(out), ng, [a, b, m, k, n](Tape<T>& tp, VarId self) {
    ConstMatMap<T> G(tp.grad(self).data.data(), m, n);
    if (tp.needs_grad(a)) {
      ConstMatMap<T> B(tp.value(b).data.data(), k, n);
      MatMap<T>(tp.grad(a).data.data(), m, k).noalias() += G * B.transpose();
    }
    if (tp.needs_grad(b)) {
      ConstMatMap<T> A(tp.value(a).data.data(), m, k);
      MatMap<T>(tp.grad(b).data.data(), k, n).noalias() += A.transpose() * G;
    }
  });
}

// x: ... x In (leading dims batched), w: In x Out, b: Out (optional).
template <typename T>
VarId linear(Tape<T>& t, VarId x, VarId w, VarId b) {
  const Tensor<T>& xv = t.value(x);
  const Tensor<T>& wv = t.value(w);
  if (xv.ndim() < 2 || wv.ndim() != 2 || xv.shape.back() != wv.shape[0])
    throw std::invalid_argument("linear: incompatible shapes " + shape_str(xv.shape) + " x " +
                                shape_str(wv.shape));
  const std::int64_t in = wv.shape[0], out_dim = wv.shape[1];
  const std::int64_t rows = xv.numel() / in;
  if (b.valid() && t.value(b).numel() != out_dim)
    throw std::invalid_argument("linear: bias size " + shape_str(t.value(b).shape) +
                                " does not match output dim " + std::to_string(out_dim));
  Shape out_shape = xv.shape;
  out_shape.back() = out_dim;
  Tensor<T> out(out_shape);
  ConstMatMap<T> X(xv.data.data(), rows, in), W(wv.data.data(), in, out_dim);
  MatMap<T> Y(out.data.data(), rows, out_dim);
  Y.noalias() = X * W;
  if (b.valid()) {
    ConstMatMap<T> B(t.value(b).data.data(), 1, out_dim);
    Y.rowwise() += B.row(0);
  }
  bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.emit(std::move(out), ng, [x, w, b, rows, in, out_dim](Tape<T>& tp, VarId self) {
    ConstMatMap<T> G(tp.grad(self).data.data(), rows, out_dim);
    if (tp.needs_grad(x)) {
      ConstMatMap<T> W(tp.value(w).data.data(), in, out_dim);
      MatMap<T>(tp.grad(x).data.data(), rows, in).noalias() += G * W.transpose();
    }
    if (tp.needs_grad(w)) {
      ConstMatMap<T> X(tp.value(x).data.data(), rows, in);
      MatMap<T>(tp.grad(w).data.data(), in, out_dim).noalias() += X.transpose() * G;
    }
    if (b.valid() && tp.needs_grad(b)) {
      MatMap<T> GB(tp.grad(b).data.data(), 1, out_dim);
      GB.row(0) += G.colwise().sum();
    }
  });
}

// Batched matmul: a: B x m x k; b: B x k x n, or B x n x k when trans_b.
template <typename T>
VarId bmm(Tape<T>& t, VarId a, VarId b, bool trans_b = false) {
  const Tensor<T>& av = t.value(a);
  const Tensor<T>& bv = t.value(b);
  if (av.ndim() != 3 || bv.ndim() != 3 || av.shape[0] != bv.shape[0])
    throw std::invalid_argument("bmm: incompatible shapes " + shape_str(av.shape) + " x " +
                                shape_str(bv.shape));
  const std::int64_t nb = av.shape[0], m = av.shape[1], k = av.shape[2];
  const std::int64_t n = trans_b ? bv.shape[1] : bv.shape[2];
  const std::int64_t bk = trans_b ? bv.shape[2] : bv.shape[1];
  if (bk != k)
    throw std::invalid_argument("bmm: inner dims disagree " + shape_str(av.shape) + " x " +
                                shape_str(bv.shape));
  Tensor<T> out({nb, m, n});
  for (std::int64_t i = 0; i < nb; ++i) {
    ConstMatMap<T> A(&av.data[i * m * k], m, k);
    MatMap<T> C(&out.data[i * m * n], m, n);
    if (trans_b) {
      ConstMatMap<T> B(&bv.data[i * n * k], n, k);
      C.noalias() = A * B.transpose();
    } else {
      ConstMatMap<T> B(&bv.data[i * k * n], k, n);
      C.noalias() = A * B;
    }
  }
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.emit(std::move(out), ng, [a, b, trans_b, nb, m, k, n](Tape<T>& tp, VarId self) {
    const Tensor<T>& gv = tp.grad(self);
    for (std::int64_t i = 0; i < nb; ++i) {
      ConstMatMap<T> G(&gv.data[i * m * n], m, n);
      if (tp.needs_grad(a)) {
        MatMap<T> GA(&tp.grad(a).data[i * m * k], m, k);
        if (trans_b) {
          ConstMatMap<T> B(&tp.value(b).data[i * n * k], n, k);
          GA.noalias() += G * B;
        } else {
          ConstMatMap<T> B(&tp.value(b).data[i * k * n], k, n);
          GA.noalias() += G * B.transpose();
        }
      }
      if (tp.needs_grad(b)) {
        ConstMatMap<T> A(&tp.value(a).data[i * m * k], m, k);
        if (trans_b) {
          MatMap<T> GB(&tp.grad(b).data[i * n * k], n, k);
          GB.noalias() += G.transpose() * A;
        } else {
          MatMap<T> GB(&tp.grad(b).data[i * k * n], k, n);
          GB.noalias() += A.transpose() * G;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution and pooling

namespace detail {

template <typename T>
void im2col(const Tensor<T>& x, std::int64_t kh, std::int64_t kw, std::int64_t sh,
            std::int64_t sw, std::int64_t ph, std::int64_t pw, std::int64_t oh, std::int64_t ow,
            std::vector<T>& col) {
  const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  const std::int64_t kk = c * kh * kw;
  col.assign(static_cast<std::size_t>(n * oh * ow * kk), T(0));
  for (std::int64_t ni = 0; ni < n; ++ni) {
    for (std::int64_t oi = 0; oi < oh; ++oi) {
      const std::int64_t ih0 = oi * sh - ph;
      for (std::int64_t oj = 0; oj < ow; ++oj) {
        const std::int64_t iw0 = oj * sw - pw;
        T* dst = &col[((ni * oh + oi) * ow + oj) * kk];
        for (std::int64_t ci = 0; ci < c; ++ci) {
          const T* src = &x.data[((ni * c + ci) * h) * w];
          for (std::int64_t ki = 0; ki < kh; ++ki) {
            const std::int64_t ih = ih0 + ki;
            if (ih < 0 || ih >= h) {
              dst += kw;
              continue;
            }
            for (std::int64_t kj = 0; kj < kw; ++kj) {
              const std::int64_t iw = iw0 + kj;
              *dst++ = (iw >= 0 && iw < w) ? src[ih * w + iw] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const std::vector<T>& col, std::int64_t kh, std::int64_t kw,
                       std::int64_t sh, std::int64_t sw, std::int64_t ph, std::int64_t pw,
                       std::int64_t oh, std::int64_t ow, Tensor<T>& gx) {
  const std::int64_t n = gx.shape[0], c = gx.shape[1], h = gx.shape[2], w = gx.shape[3];
  const std::int64_t kk = c * kh * kw;
  for (std::int64_t ni = 0; ni < n; ++ni) {
    for (std::int64_t oi = 0; oi < oh; ++oi) {
      const std::int64_t ih0 = oi * sh - ph;
      for (std::int64_t oj = 0; oj < ow; ++oj) {
        const std::int64_t iw0 = oj * sw - pw;
        const T* src = &col[((ni * oh + oi) * ow + oj) * kk];
        for (std::int64_t ci = 0; ci < c; ++ci) {
          T* dst = &gx.data[((ni * c + ci) * h) * w];
          for (std::int64_t ki = 0; ki < kh; ++ki) {
            const std::int64_t ih = ih0 + ki;
            if (ih < 0 || ih >= h) {
              src += kw;
              continue;
            }
            for (std::int64_t kj = 0; kj < kw; ++kj) {
              const std::int64_t iw = iw0 + kj;
              if (iw >= 0 && iw < w) dst[ih * w + iw] += src[kj];
            }
            src += kw;
          }
        }
      }
    }
  }
}

// (N*oh*ow) x Cout <-> N x Cout x oh x ow
template <typename T>
void rows_to_nchw(const std::vector<T>& rows, std::int64_t n, std::int64_t cout,
                  std::int64_t oh, std::int64_t ow, Tensor<T>& out) {
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t oi = 0; oi < oh; ++oi)
      for (std::int64_t oj = 0; oj < ow; ++oj) {
        const T* src = &rows[((ni * oh + oi) * ow + oj) * cout];
        for (std::int64_t co = 0; co < cout; ++co)
          out.data[((ni * cout + co) * oh + oi) * ow + oj] = src[co];
      }
}

template <typename T>
void nchw_to_rows(const Tensor<T>& x, std::vector<T>& rows) {
  const std::int64_t n = x.shape[0], c = x.shape[1], oh = x.shape[2], ow = x.shape[3];
  rows.assign(static_cast<std::size_t>(n * oh * ow * c), T(0));
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t co = 0; co < c; ++co)
      for (std::int64_t oi = 0; oi < oh; ++oi)
        for (std::int64_t oj = 0; oj < ow; ++oj)
          rows[((ni * oh + oi) * ow + oj) * c + co] =
              x.data[((ni * c + co) * oh + oi) * ow + oj];
}

}  // namespace detail

// x: N x Cin x H x W, w: Cout x Cin x kh x kw, b: Cout (optional, pass
// invalid VarId for none). Cross-correlation; the im2col buffer is recomputed
// in backward rather than kept alive.
template <typename T>
VarId conv2d(Tape<T>& t, VarId x, VarId w, VarId b, std::int64_t sh, std::int64_t sw,
             std::int64_t ph, std::int64_t pw) {
  const Tensor<T>& xv = t.value(x);
  const Tensor<T>& wv = t.value(w);
  if (xv.ndim() != 4 || wv.ndim() != 4)
    throw std::invalid_argument("conv2d: expected rank-4 input and kernel, got " +
                                shape_str(xv.shape) + " and " + shape_str(wv.shape));
  if (xv.shape[1] != wv.shape[1])
    throw std::invalid_argument("conv2d: input channels " + std::to_string(xv.shape[1]) +
                                " != kernel channels " + std::to_string(wv.shape[1]));
  const std::int64_t n = xv.shape[0], h = xv.shape[2], ww = xv.shape[3];
  const std::int64_t cout = wv.shape[0], kh = wv.shape[2], kw = wv.shape[3];
  const std::int64_t oh = (h + 2 * ph - kh) / sh + 1;
  const std::int64_t ow = (ww + 2 * pw - kw) / sw + 1;
  if (h + 2 * ph < kh || ww + 2 * pw < kw || oh < 1 || ow < 1)
    throw std::invalid_argument("conv2d: input " + shape_str(xv.shape) +
                                " too small for kernel " + shape_str(wv.shape));
  const std::int64_t kk = wv.numel() / cout;

  std::vector<T> col;
  detail::im2col(xv, kh, kw, sh, sw, ph, pw, oh, ow, col);
  std::vector<T> rows(static_cast<std::size_t>(n * oh * ow * cout));
  {
    ConstMatMap<T> C(col.data(), n * oh * ow, kk);
    ConstMatMap<T> W(wv.data.data(), cout, kk);
    MatMap<T> Y(rows.data(), n * oh * ow, cout);
    Y.noalias() = C * W.transpose();
    if (b.valid()) {
      ConstMatMap<T> B(t.value(b).data.data(), 1, cout);
      Y.rowwise() += B.row(0);
    }
  }
  Tensor<T> out({n, cout, oh, ow});
  detail::rows_to_nchw(rows, n, cout, oh, ow, out);

  bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.emit(std::move(out), ng,
                [x, w, b, sh, sw, ph, pw, oh, ow, kh, kw, cout, kk](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const std::int64_t n = gy.shape[0];
    std::vector<T> grows;
    detail::nchw_to_rows(gy, grows);
    ConstMatMap<T> G(grows.data(), n * oh * ow, cout);
    if (tp.needs_grad(w)) {
      std::vector<T> col;
      detail::im2col(tp.value(x), kh, kw, sh, sw, ph, pw, oh, ow, col);
      ConstMatMap<T> C(col.data(), n * oh * ow, kk);
      MatMap<T> GW(tp.grad(w).data.data(), cout, kk);
      GW.noalias() += G.transpose() * C;
    }
    if (b.valid() && tp.needs_grad(b)) {
      MatMap<T> GB(tp.grad(b).data.data(), 1, cout);
      GB.row(0) += G.colwise().sum();
    }
    if (tp.needs_grad(x)) {
      std::vector<T> gcol(static_cast<std::size_t>(n * oh * ow * kk));
      ConstMatMap<T> W(tp.value(w).data.data(), cout, kk);
      MatMap<T>(gcol.data(), n * oh * ow, kk).noalias() = G * W;
      detail::col2im_accumulate(gcol, kh, kw, sh, sw, ph, pw, oh, ow, tp.grad(x));
    }
  });
}

// Non-overlapping max pooling with kernel = stride = k over both spatial dims.
template <typename T>
VarId max_pool2d(Tape<T>& t, VarId x, std::int64_t k) {
  const Tensor<T>& xv = t.value(x);
  if (xv.ndim() != 4) throw std::invalid_argument("max_pool2d: expected rank-4 input");
  const std::int64_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], w = xv.shape[3];
  const std::int64_t oh = h / k, ow = w / k;
  if (oh < 1 || ow < 1)
    throw std::invalid_argument("max_pool2d: input " + shape_str(xv.shape) +
                                " smaller than pool window " + std::to_string(k));
  Tensor<T> out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel());
  std::int64_t o = 0;
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t oi = 0; oi < oh; ++oi)
        for (std::int64_t oj = 0; oj < ow; ++oj, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::int64_t best_idx = 0;
          for (std::int64_t ki = 0; ki < k; ++ki)
            for (std::int64_t kj = 0; kj < k; ++kj) {
              std::int64_t idx = ((ni * c + ci) * h + oi * k + ki) * w + oj * k + kj;
              if (xv.data[idx] > best) {
                best = xv.data[idx];
                best_idx = idx;
              }
            }
          out.data[o] = best;
          (*argmax)[o] = best_idx;
        }
  return t.emit(std::move(out), t.needs_grad(x), [x, argmax](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(x)) return;
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) gx.data[(*argmax)[i]] += g.data[i];
  });
}

// ---------------------------------------------------------------------------
// Normalization and activations

// Per-channel batch normalization over (N, H, W) for rank-4 input or over N
// for rank-2 input. Population statistics are used both for normalization and
// for the running buffers, which are updated in place during training.
template <typename T>
VarId batch_norm(Tape<T>& t, VarId x, VarId gamma, VarId beta, Tensor<T>& running_mean,
                 Tensor<T>& running_var, T momentum, T eps, bool training) {
  const Tensor<T>& xv = t.value(x);
  if (xv.ndim() != 4 && xv.ndim() != 2)
    throw std::invalid_argument("batch_norm: expected rank-2 or rank-4 input");
  const std::int64_t n = xv.shape[0];
  const std::int64_t c = xv.shape[1];
  const std::int64_t spatial = xv.numel() / (n * c);
  if (training && n < 2)
    throw std::invalid_argument("batch_norm: training mode requires batch size >= 2, got " +
                                std::to_string(n));
  if (t.value(gamma).numel() != c || t.value(beta).numel() != c ||
      running_mean.numel() != c || running_var.numel() != c)
    throw std::invalid_argument("batch_norm: parameter size does not match channels " +
                                std::to_string(c));

  auto mean = std::make_shared<std::vector<double>>(c, 0.0);
  auto inv_std = std::make_shared<std::vector<double>>(c, 0.0);
  const std::int64_t count = n * spatial;
  if (training) {
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t ci = 0; ci < c; ++ci) {
        const T* p = &xv.data[(ni * c + ci) * spatial];
        double s = 0.0;
        for (std::int64_t i = 0; i < spatial; ++i) s += p[i];
        (*mean)[ci] += s;
      }
    for (std::int64_t ci = 0; ci < c; ++ci) (*mean)[ci] /= static_cast<double>(count);
    std::vector<double> var(c, 0.0);
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t ci = 0; ci < c; ++ci) {
        const T* p = &xv.data[(ni * c + ci) * spatial];
        double s = 0.0;
        for (std::int64_t i = 0; i < spatial; ++i) {
          double d = p[i] - (*mean)[ci];
          s += d * d;
        }
        var[ci] += s;
      }
    for (std::int64_t ci = 0; ci < c; ++ci) {
      var[ci] /= static_cast<double>(count);
      (*inv_std)[ci] = 1.0 / std::sqrt(var[ci] + static_cast<double>(eps));
      running_mean[ci] = static_cast<T>((1.0 - momentum) * running_mean[ci] +
                                        momentum * (*mean)[ci]);
      running_var[ci] =
          static_cast<T>((1.0 - momentum) * running_var[ci] + momentum * var[ci]);
    }
  } else {
    for (std::int64_t ci = 0; ci < c; ++ci) {
      (*mean)[ci] = running_mean[ci];
      (*inv_std)[ci] = 1.0 / std::sqrt(static_cast<double>(running_var[ci]) +
                                       static_cast<double>(eps));
    }
  }

  const Tensor<T>& gv = t.value(gamma);
  const Tensor<T>& bv = t.value(beta);
  Tensor<T> out(xv.shape);
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const T* p = &xv.data[(ni * c + ci) * spatial];
      T* q = &out.data[(ni * c + ci) * spatial];
      const double m = (*mean)[ci], is = (*inv_std)[ci];
      const double ga = gv[ci], be = bv[ci];
      for (std::int64_t i = 0; i < spatial; ++i)
        q[i] = static_cast<T>((p[i] - m) * is * ga + be);
    }

  bool ng = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
  return t.emit(std::move(out), ng,
                [x, gamma, beta, mean, inv_std, n, c, spatial, training](Tape<T>& tp,
                                                                         VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& xv = tp.value(x);
    const std::int64_t count = n * spatial;
    // Per-channel sums of dy and dy * xhat.
    std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t ci = 0; ci < c; ++ci) {
        const T* p = &xv.data[(ni * c + ci) * spatial];
        const T* g = &gy.data[(ni * c + ci) * spatial];
        const double m = (*mean)[ci], is = (*inv_std)[ci];
        for (std::int64_t i = 0; i < spatial; ++i) {
          sum_dy[ci] += g[i];
          sum_dy_xhat[ci] += g[i] * (p[i] - m) * is;
        }
      }
    if (tp.needs_grad(gamma)) {
      Tensor<T>& gg = tp.grad(gamma);
      for (std::int64_t ci = 0; ci < c; ++ci) gg[ci] += static_cast<T>(sum_dy_xhat[ci]);
    }
    if (tp.needs_grad(beta)) {
      Tensor<T>& gb = tp.grad(beta);
      for (std::int64_t ci = 0; ci < c; ++ci) gb[ci] += static_cast<T>(sum_dy[ci]);
    }
    if (tp.needs_grad(x)) {
      Tensor<T>& gx = tp.grad(x);
      const Tensor<T>& gv = tp.value(gamma);
      for (std::int64_t ni = 0; ni < n; ++ni)
        for (std::int64_t ci = 0; ci < c; ++ci) {
          const T* p = &xv.data[(ni * c + ci) * spatial];
          const T* g = &gy.data[(ni * c + ci) * spatial];
          T* q = &gx.data[(ni * c + ci) * spatial];
          const double m = (*mean)[ci], is = (*inv_std)[ci];
          const double ga = gv[ci];
          if (training) {
            const double mdy = sum_dy[ci] / count, mdyx = sum_dy_xhat[ci] / count;
            for (std::int64_t i = 0; i < spatial; ++i) {
              double xhat = (p[i] - m) * is;
              q[i] += static_cast<T>(ga * is * (g[i] - mdy - xhat * mdyx));
            }
          } else {
            for (std::int64_t i = 0; i < spatial; ++i)
              q[i] += static_cast<T>(ga * is * g[i]);
          }
        }
    }
  });
}

// Normalization over the last dimension; gamma/beta sized to it.
template <typename T>
VarId layer_norm(Tape<T>& t, VarId x, VarId gamma, VarId beta, T eps) {
  const Tensor<T>& xv = t.value(x);
  const std::int64_t d = xv.shape.back();
  const std::int64_t rows = xv.numel() / d;
  if (t.value(gamma).numel() != d || t.value(beta).numel() != d)
    throw std::invalid_argument("layer_norm: parameter size does not match last dim " +
                                std::to_string(d));
  auto mean = std::make_shared<std::vector<double>>(rows);
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const Tensor<T>& gv = t.value(gamma);
  const Tensor<T>& bv = t.value(beta);
  Tensor<T> out(xv.shape);
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* p = &xv.data[r * d];
    double m = 0.0;
    for (std::int64_t i = 0; i < d; ++i) m += p[i];
    m /= d;
    double v = 0.0;
    for (std::int64_t i = 0; i < d; ++i) v += (p[i] - m) * (p[i] - m);
    v /= d;
    (*mean)[r] = m;
    (*inv_std)[r] = 1.0 / std::sqrt(v + static_cast<double>(eps));
    T* q = &out.data[r * d];
    for (std::int64_t i = 0; i < d; ++i)
      q[i] = static_cast<T>((p[i] - m) * (*inv_std)[r] * gv[i] + bv[i]);
  }
  bool ng = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
  return t.emit(std::move(out), ng,
                [x, gamma, beta, mean, inv_std, rows, d](Tape<T>& tp, VarId self) {
    const Tensor<T>& gy = tp.grad(self);
    const Tensor<T>& xv = tp.value(x);
    const Tensor<T>& gv = tp.value(gamma);
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* p = &xv.data[r * d];
      const T* g = &gy.data[r * d];
      const double m = (*mean)[r], is = (*inv_std)[r];
      if (tp.needs_grad(gamma)) {
        Tensor<T>& gg = tp.grad(gamma);
        for (std::int64_t i = 0; i < d; ++i)
          gg[i] += static_cast<T>(g[i] * (p[i] - m) * is);
      }
      if (tp.needs_grad(beta)) {
        Tensor<T>& gb = tp.grad(beta);
        for (std::int64_t i = 0; i < d; ++i) gb[i] += g[i];
      }
      if (tp.needs_grad(x)) {
        double sum_h = 0.0, sum_hx = 0.0;
        for (std::int64_t i = 0; i < d; ++i) {
          double h = g[i] * gv[i];
          sum_h += h;
          sum_hx += h * (p[i] - m) * is;
        }
        Tensor<T>& gx = tp.grad(x);
        T* q = &gx.data[r * d];
        for (std::int64_t i = 0; i < d; ++i) {
          double h = g[i] * gv[i];
          double xhat = (p[i] - m) * is;
          q[i] += static_cast<T>(is * (h - sum_h / d - xhat * sum_hx / d));
        }
      }
    }
  });
}

// PReLU. slopes has 1 entry (shared) or one per channel, where the channel is
// dim 1 for inputs of rank >= 2 and the whole tensor for rank 1.
template <typename T>
VarId prelu(Tape<T>& t, VarId x, VarId slopes) {
  const Tensor<T>& xv = t.value(x);
  const Tensor<T>& av = t.value(slopes);
  const std::int64_t c = xv.ndim() >= 2 ? xv.shape[1] : 1;
  if (av.numel() != 1 && av.numel() != c)
    throw std::invalid_argument("prelu: slope count " + std::to_string(av.numel()) +
                                " must be 1 or channel count " + std::to_string(c));
  std::int64_t inner = 1;
  for (int i = 2; i < xv.ndim(); ++i) inner *= xv.shape[i];
  const bool shared = av.numel() == 1;
  Tensor<T> out(xv.shape);
  for (std::int64_t i = 0; i < xv.numel(); ++i) {
    const std::int64_t ci = shared ? 0 : (i / inner) % c;
    out[i] = xv[i] >= T(0) ? xv[i] : av[ci] * xv[i];
  }
  bool ng = t.needs_grad(x) || t.needs_grad(slopes);
  return t.emit(std::move(out), ng, [x, slopes, c, inner, shared](Tape<T>& tp, VarId self) {
    const Tensor<T>& g = tp.grad(self);
    const Tensor<T>& xv = tp.value(x);
    const Tensor<T>& av = tp.value(slopes);
    if (tp.needs_grad(x)) {
      Tensor<T>& gx = tp.grad(x);
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        const std::int64_t ci = shared ? 0 : (i / inner) % c;
        gx[i] += g[i] * (xv[i] >= T(0) ? T(1) : av[ci]);
      }
    }
    if (tp.needs_grad(slopes)) {
      Tensor<T>& ga = tp.grad(slopes);
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        if (xv[i] < T(0)) {
          const std::int64_t ci = shared ? 0 : (i / inner) % c;
          ga[ci] += g[i] * xv[i];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Pooling over frames, softmax family, loss

// x: N x F x D -> N x 2D (mean then population std per dim) or N x D when
// with_std is false. The std output is exact (0 for constant input); the
// epsilon only guards the backward division.
template <typename T>
VarId stats_pool(Tape<T>& t, VarId x, bool with_std = true, T eps = T(1e-8)) {
  const Tensor<T>& xv = t.value(x);
  if (xv.ndim() != 3) throw std::invalid_argument("stats_pool: expected rank-3 input (N,F,D)");
  const std::int64_t n = xv.shape[0], f = xv.shape[1], d = xv.shape[2];
  if (f < 1) throw std::invalid_argument("stats_pool: need at least one frame");
  Tensor<T> out({n, with_std ? 2 * d : d});
  for (std::int64_t ni = 0; ni < n; ++ni) {
    for (std::int64_t di = 0; di < d; ++di) {
      double m = 0.0;
      for (std::int64_t fi = 0; fi < f; ++fi) m += xv.data[(ni * f + fi) * d + di];
      m /= f;
      out.at(ni, di) = static_cast<T>(m);
      if (with_std) {
        double v = 0.0;
        for (std::int64_t fi = 0; fi < f; ++fi) {
          double dd = xv.data[(ni * f + fi) * d + di] - m;
          v += dd * dd;
        }
        out.at(ni, d + di) = static_cast<T>(std::sqrt(v / f));
      }
    }
  }
  return t.emit(std::move(out), t.needs_grad(x),
                [x, with_std, eps, n, f, d](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(x)) return;
    const Tensor<T>& g = tp.grad(self);
    const Tensor<T>& yv = tp.value(self);
    const Tensor<T>& xv = tp.value(x);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t di = 0; di < d; ++di) {
        const double gm = g.at(ni, di);
        const double m = yv.at(ni, di);
        double gs = 0.0, s = 0.0;
        if (with_std) {
          gs = g.at(ni, d + di);
          s = std::max<double>(yv.at(ni, d + di), static_cast<double>(eps));
        }
        for (std::int64_t fi = 0; fi < f; ++fi) {
          double add = gm / f;
          if (with_std)
            add += gs * (xv.data[(ni * f + fi) * d + di] - m) / (f * s);
          gx.data[(ni * f + fi) * d + di] += static_cast<T>(add);
        }
      }
  });
}

// Log-softmax over the last dimension, computed with a max shift.
template <typename T>
VarId log_softmax(Tape<T>& t, VarId x) {
  const Tensor<T>& xv = t.value(x);
  const std::int64_t d = xv.shape.back();
  if (d < 1) throw std::invalid_argument("log_softmax: need at least one class");
  const std::int64_t rows = xv.numel() / d;
  Tensor<T> out(xv.shape);
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* p = &xv.data[r * d];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < d; ++i) mx = std::max(mx, static_cast<double>(p[i]));
    double lse = 0.0;
    for (std::int64_t i = 0; i < d; ++i) lse += std::exp(p[i] - mx);
    lse = std::log(lse) + mx;
    T* q = &out.data[r * d];
    for (std::int64_t i = 0; i < d; ++i) q[i] = static_cast<T>(p[i] - lse);
  }
  return t.emit(std::move(out), t.needs_grad(x), [x, rows, d](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(x)) return;
    const Tensor<T>& g = tp.grad(self);
    const Tensor<T>& y = tp.value(self);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::int64_t i = 0; i < d; ++i) gsum += g.data[r * d + i];
      for (std::int64_t i = 0; i < d; ++i)
        gx.data[r * d + i] += static_cast<T>(g.data[r * d + i] -
                                             std::exp(y.data[r * d + i]) * gsum);
    }
  });
}

// Softmax over the last dimension. -inf logits produce exactly-zero weights.
template <typename T>
VarId softmax(Tape<T>& t, VarId x) {
  const Tensor<T>& xv = t.value(x);
  const std::int64_t d = xv.shape.back();
  const std::int64_t rows = xv.numel() / d;
  Tensor<T> out(xv.shape);
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* p = &xv.data[r * d];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < d; ++i) mx = std::max(mx, static_cast<double>(p[i]));
    double z = 0.0;
    T* q = &out.data[r * d];
    for (std::int64_t i = 0; i < d; ++i) {
      double e = std::exp(p[i] - mx);
      q[i] = static_cast<T>(e);
      z += e;
    }
    for (std::int64_t i = 0; i < d; ++i) q[i] = static_cast<T>(q[i] / z);
  }
  return t.emit(std::move(out), t.needs_grad(x), [x, rows, d](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(x)) return;
    const Tensor<T>& g = tp.grad(self);
    const Tensor<T>& y = tp.value(self);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::int64_t i = 0; i < d; ++i) dot += g.data[r * d + i] * y.data[r * d + i];
      for (std::int64_t i = 0; i < d; ++i)
        gx.data[r * d + i] += static_cast<T>(y.data[r * d + i] * (g.data[r * d + i] - dot));
    }
  });
}

// Mean negative log-likelihood of the given labels under log-posteriors
// (N x C). Composed with log_softmax this gives d loss / d logits =
// (softmax - one_hot) / N.
template <typename T>
VarId cross_entropy(Tape<T>& t, VarId log_posteriors, const std::vector<int>& labels) {
  const Tensor<T>& lp = t.value(log_posteriors);
  if (lp.ndim() != 2) throw std::invalid_argument("cross_entropy: expected rank-2 input (N,C)");
  const std::int64_t n = lp.shape[0], c = lp.shape[1];
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw std::invalid_argument("cross_entropy: label count " + std::to_string(labels.size()) +
                                " != batch size " + std::to_string(n));
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(labels[i]) +
                                  " outside [0," + std::to_string(c) + ")");
    loss -= lp.at(i, labels[i]);
  }
  Tensor<T> out({1});
  out[0] = static_cast<T>(loss / n);
  return t.emit(std::move(out), t.needs_grad(log_posteriors),
                [log_posteriors, labels, n](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(log_posteriors)) return;
    const T g = tp.grad(self)[0];
    Tensor<T>& glp = tp.grad(log_posteriors);
    for (std::int64_t i = 0; i < n; ++i)
      glp.at(i, labels[i]) -= g / static_cast<T>(n);
  });
}

// Scalar reduction sum_i w_i * x_i; used to build scalar objectives.
template <typename T>
VarId weighted_sum(Tape<T>& t, VarId x, std::vector<T> weights) {
  const Tensor<T>& xv = t.value(x);
  if (static_cast<std::int64_t>(weights.size()) != xv.numel())
    throw std::invalid_argument("weighted_sum: weight count " +
                                std::to_string(weights.size()) + " != numel " +
                                std::to_string(xv.numel()));
  double s = 0.0;
  for (std::int64_t i = 0; i < xv.numel(); ++i) s += static_cast<double>(weights[i]) * xv[i];
  Tensor<T> out({1});
  out[0] = static_cast<T>(s);
  return t.emit(std::move(out), t.needs_grad(x),
                [x, weights = std::move(weights)](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(x)) return;
    const T g = tp.grad(self)[0];
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g * weights[i];
  });
}

// ---------------------------------------------------------------------------
// Attention helpers

// Gather rows of an embedding table. ids are row indices flattened over
// (N, L); out is N x L x D.
template <typename T>
VarId embedding(Tape<T>& t, const std::vector<std::int64_t>& ids, std::int64_t n,
                std::int64_t l, VarId table) {
  const Tensor<T>& tb = t.value(table);
  if (tb.ndim() != 2) throw std::invalid_argument("embedding: table must be rank 2");
  if (static_cast<std::int64_t>(ids.size()) != n * l)
    throw std::invalid_argument("embedding: id count does not match (N,L)");
  const std::int64_t v = tb.shape[0], d = tb.shape[1];
  for (auto id : ids)
    if (id < 0 || id >= v)
      throw std::invalid_argument("embedding: id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(v));
  Tensor<T> out({n, l, d});
  for (std::int64_t i = 0; i < n * l; ++i)
    std::copy_n(&tb.data[ids[i] * d], d, &out.data[i * d]);
  return t.emit(std::move(out), t.needs_grad(table),
                [table, ids, d](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(table)) return;
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& gt = tp.grad(table);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::int64_t j = 0; j < d; ++j)
        gt.data[ids[i] * d + j] += g.data[static_cast<std::int64_t>(i) * d + j];
  });
}

// Adds -inf to attention logits at masked key positions so that softmax
// assigns them exactly zero weight. scores: (N*H) x L x L; key_mask: N x L
// flattened, nonzero = real token.
template <typename T>
VarId mask_attention_scores(Tape<T>& t, VarId scores,
                            const std::vector<std::uint8_t>& key_mask, std::int64_t heads) {
  const Tensor<T>& sv = t.value(scores);
  if (sv.ndim() != 3 || sv.shape[1] != sv.shape[2])
    throw std::invalid_argument("mask_attention_scores: expected (N*H, L, L) scores");
  const std::int64_t nh = sv.shape[0], l = sv.shape[1];
  if (nh % heads != 0 ||
      static_cast<std::int64_t>(key_mask.size()) != (nh / heads) * l)
    throw std::invalid_argument("mask_attention_scores: mask size does not match scores");
  const T neg_inf = -std::numeric_limits<T>::infinity();
  Tensor<T> out = sv;
  for (std::int64_t b = 0; b < nh; ++b) {
    const std::int64_t sample = b / heads;
    for (std::int64_t j = 0; j < l; ++j) {
      if (key_mask[sample * l + j]) continue;
      for (std::int64_t i = 0; i < l; ++i) out.data[(b * l + i) * l + j] = neg_inf;
    }
  }
  return t.emit(std::move(out), t.needs_grad(scores), [scores](Tape<T>& tp, VarId self) {
    if (!tp.needs_grad(scores)) return;
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& gs = tp.grad(scores);
    for (std::int64_t i = 0; i < g.numel(); ++i) gs[i] += g[i];
  });
}

}  // namespace emofuse::nn

#endif  // EMOFUSE_AUTOGRAD_HPP_

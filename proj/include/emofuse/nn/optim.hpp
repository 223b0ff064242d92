// emofuse/nn/optim.hpp

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

#ifndef EMOFUSE_NN_OPTIM_HPP_
#define EMOFUSE_NN_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "emofuse/nn/layers.hpp"

namespace emofuse::nn {

// Learning-rate staircase: the base rate holds for `constant_epochs` epochs
// (1-based), then halves every `halving_period` epochs.
template <typename T>
T lr_at(T base, int epoch, int constant_epochs = 8, int halving_period = 2) {
  if (epoch < 1) throw std::invalid_argument("lr_at: epoch is 1-based");
  if (halving_period < 1) throw std::invalid_argument("lr_at: halving period must be >= 1");
  if (epoch <= constant_epochs) return base;
  const int steps = (epoch - constant_epochs + halving_period - 1) / halving_period;
  return base * static_cast<T>(std::pow(0.5, steps));
}

// Classical SGD with momentum: v <- mu * v + g, p <- p - lr * v.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(T lr, T mu = T(0.9)) : lr_(lr), mu_(mu) {}

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }

  void step(Tape<T>& tape, ParamSet<T>& ps) {
    for (auto* p : ps.params) {
      if (!tape.needs_grad(p->id)) continue;
      const Tensor<T>& g = tape.grad(p->id);
      Tensor<T>& v = velocity_[p->name];
      if (v.data.empty()) v = Tensor<T>(p->value.shape);
      const T eff_lr = lr_ * p->lr_scale;
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        v[i] = mu_ * v[i] + g[i];
        p->value[i] -= eff_lr * v[i];
      }
    }
  }

  std::map<std::string, Tensor<T>>& state() { return velocity_; }

 private:
  T lr_, mu_;
  std::map<std::string, Tensor<T>> velocity_;
};

// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8 by default).
template <typename T>
class Adam {
 public:
  explicit Adam(T lr, T b1 = T(0.9), T b2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }

  void step(Tape<T>& tape, ParamSet<T>& ps) {
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(b1_), t_);
    const double bc2 = 1.0 - std::pow(static_cast<double>(b2_), t_);
    for (auto* p : ps.params) {
      if (!tape.needs_grad(p->id)) continue;
      const Tensor<T>& g = tape.grad(p->id);
      Slot& s = slots_[p->name];
      if (s.m.data.empty()) {
        s.m = Tensor<T>(p->value.shape);
        s.v = Tensor<T>(p->value.shape);
      }
      const T eff_lr = lr_ * p->lr_scale;
      for (std::int64_t i = 0; i < g.numel(); ++i) {
        s.m[i] = b1_ * s.m[i] + (T(1) - b1_) * g[i];
        s.v[i] = b2_ * s.v[i] + (T(1) - b2_) * g[i] * g[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        p->value[i] -= static_cast<T>(eff_lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  struct Slot {
    Tensor<T> m, v;
  };
  std::map<std::string, Slot>& state() { return slots_; }
  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  T lr_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
  std::map<std::string, Slot> slots_;
};

}  // namespace emofuse::nn

#endif  // EMOFUSE_NN_OPTIM_HPP_

// SPDX-License-Identifier: Apache-2.0
//
// Vectorized (Eigen array) forward and backward passes for every activation
// kind. These are what the network layers and the timing harness run; the
// scalar kernels in activation.hpp are the reference they are tested against.

#pragma once

#include <algorithm>
#include <array>

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>

#include "sqish/activation.hpp"

namespace sqish {

template <typename T>
using ArrayX = Eigen::Array<T, Eigen::Dynamic, 1>;

/// Block length of the elementwise kernels.
inline constexpr Eigen::Index kActivationBlock = 1024;

template <typename T>
using BlockArray = Eigen::Array<T, Eigen::Dynamic, 1, Eigen::ColMajor, kActivationBlock>;

template <typename T>
struct ActivationBackward {
  ArrayX<T> dx;
  /// Sum over elements of upstream * d f / d param, same slot order as
  /// activate_grad_params. Accumulated in double.
  std::array<double, 3> dparams{0.0, 0.0, 0.0};
};

namespace detail {

template <typename T, typename In>
BlockArray<T> activate_block(const In& x, const ActivationKind& kind) {
  using Buf = BlockArray<T>;
  return std::visit(
      Overloaded{
          [&](const act::Relu&) -> Buf { return x.max(T(0)); },
          [&](const act::LeakyRelu& k) -> Buf { return x.max(T(0)) + static_cast<T>(k.a) * x.min(T(0)); },
          [&](const act::Prelu& k) -> Buf { return x.max(T(0)) + static_cast<T>(k.a) * x.min(T(0)); },
          [&](const act::Elu& k) -> Buf {
            const Buf neg = static_cast<T>(k.alpha) * x.min(T(0)).expm1();
            return (x > T(0)).select(x, neg);
          },
          [&](const act::Swish& k) -> Buf { return x * (static_cast<T>(k.beta) * x).logistic(); },
          [&](const act::Gelu&) -> Buf {
            return x * (T(0.5) * (T(1) + (x * T(1.0 / std::numbers::sqrt2)).erf()));
          },
          [&](const act::Mish&) -> Buf {
            const Buf sp = (-x.abs()).exp().log1p() + x.max(T(0));
            return x * sp.tanh();
          },
          [&](const act::Sqish& k) -> Buf {
            const T a = static_cast<T>(k.params.a());
            const T c = T(1) - a;
            const Buf e = ((T(-2) * static_cast<T>(k.params.gamma()) * c) * x).exp();
            return x * (a + c * (T(1) + static_cast<T>(k.params.beta()) * e).rsqrt());
          },
      },
      kind);
}

template <typename T, typename In>
void activate_backward_block(const In& x, const In& g, const ActivationKind& kind, bool param_grads,
                             Eigen::Ref<ArrayX<T>> dx, std::array<double, 3>& dparams) {
  using Buf = BlockArray<T>;
  std::visit(
      Overloaded{
          [&](const act::Relu&) { dx = (x > T(0)).select(g, T(0)); },
          [&](const act::LeakyRelu& k) {
            const Buf ag = static_cast<T>(k.a) * g;
            dx = (x > T(0)).select(g, ag);
          },
          [&](const act::Prelu& k) {
            const Buf ag = static_cast<T>(k.a) * g;
            dx = (x > T(0)).select(g, ag);
            if (param_grads) dparams[0] += static_cast<double>((g * x.min(T(0))).sum());
          },
          [&](const act::Elu& k) {
            const Buf neg = g * static_cast<T>(k.alpha) * x.min(T(0)).exp();
            dx = (x > T(0)).select(g, neg);
          },
          [&](const act::Swish& k) {
            const T beta = static_cast<T>(k.beta);
            const Buf sg = (beta * x).logistic();
            const Buf sg1 = sg * (T(1) - sg);
            dx = g * (sg + beta * x * sg1);
            if (param_grads) dparams[0] += static_cast<double>((g * x.square() * sg1).sum());
          },
          [&](const act::Gelu&) {
            const Buf cdf = T(0.5) * (T(1) + (x * T(1.0 / std::numbers::sqrt2)).erf());
            const Buf pdf = (T(-0.5) * x.square()).exp() * T(1.0 / std::sqrt(2.0 * std::numbers::pi));
            dx = g * (cdf + x * pdf);
          },
          [&](const act::Mish&) {
            const Buf th = ((-x.abs()).exp().log1p() + x.max(T(0))).tanh();
            dx = g * (th + x * (T(1) - th.square()) * x.logistic());
          },
          [&](const act::Sqish& k) {
            const T a = static_cast<T>(k.params.a());
            const T beta = static_cast<T>(k.params.beta());
            const T gamma = static_cast<T>(k.params.gamma());
            const T c = T(1) - a;
            // With E = exp(z): s = 1/sqrt(1 + beta E), q = E / (1 + beta E),
            // t = s q and 1 - s = beta q / (1 + s). Finite for E in {0, inf}.
            const Buf e = ((T(-2) * gamma * c) * x).exp();
            const Buf s = (T(1) + beta * e).rsqrt();
            const Buf q = (e.inverse() + beta).inverse();
            const Buf xt = x * s * q;
            dx = g * (a + c * s + (c * c * beta * gamma) * xt);
            if (param_grads) {
              const Buf u = beta * q / (T(1) + s);
              const Buf gx = g * x;
              dparams[0] += static_cast<double>((gx * (u - (beta * gamma * c) * xt)).sum());
              dparams[1] += static_cast<double>((T(-0.5) * c * (g * xt)).sum());
              dparams[2] += static_cast<double>(((c * c * beta) * (gx * xt)).sum());
            }
          },
      },
      kind);
}

}  // namespace detail

template <typename T>
ArrayX<T> activate(const Eigen::Ref<const ArrayX<T>>& x, const ActivationKind& kind) {
  ArrayX<T> y(x.size());
  for (Eigen::Index i = 0; i < x.size(); i += kActivationBlock) {
    const Eigen::Index n = std::min(kActivationBlock, x.size() - i);
    y.segment(i, n) = detail::activate_block<T>(x.segment(i, n), kind);
  }
  return y;
}

/// dx = upstream * f'(x); parameter gradient sums only when `param_grads`.
template <typename T>
ActivationBackward<T> activate_backward(const Eigen::Ref<const ArrayX<T>>& x,
                                        const Eigen::Ref<const ArrayX<T>>& upstream,
                                        const ActivationKind& kind, bool param_grads) {
  if (upstream.size() != x.size()) {
    throw StructuralError("activation backward: " + std::to_string(upstream.size()) + " upstream values for " +
                          std::to_string(x.size()) + " inputs");
  }
  ActivationBackward<T> out;
  out.dx.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); i += kActivationBlock) {
    const Eigen::Index n = std::min(kActivationBlock, x.size() - i);
    Eigen::Ref<ArrayX<T>> dx = out.dx.segment(i, n);
    detail::activate_backward_block<T>(x.segment(i, n), upstream.segment(i, n), kind, param_grads, dx,
                                       out.dparams);
  }
  return out;
}

}  // namespace sqish

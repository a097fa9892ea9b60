// SPDX-License-Identifier: Apache-2.0
//
// SGD with momentum, Adam, and the learning-rate schedules used by the
// training protocol.

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "sqish/activation.hpp"
#include "sqish/network.hpp"

namespace sqish {

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

namespace detail {

/// Weight decay applies to weights and biases only; activation parameters
/// are exempt.
inline bool decays(ParamRole role) { return !is_activation_param(role); }

/// Projects beta and gamma onto [SqishParams::kMinPositive, inf). Swish beta
/// shares the beta role and is kept positive the same way.
template <typename T>
void project(ParamSlot<T>& slot) {
  if (slot.role == ParamRole::ActivationBeta || slot.role == ParamRole::ActivationGamma) {
    auto& v = (*slot.value)[0];
    v = std::max(v, static_cast<T>(SqishParams::kMinPositive));
  }
}

template <typename T>
void match_buffers(std::vector<Tensor<T>>& buffers, std::span<const ParamSlot<T>> params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].grad->shape() != params[i].value->shape()) {
      throw StructuralError("optimizer: gradient shape mismatch for parameter " + std::to_string(i));
    }
  }
  if (buffers.empty()) {
    for (const auto& p : params) buffers.emplace_back(p.value->shape());
    return;
  }
  if (buffers.size() != params.size()) throw StructuralError("optimizer: parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (buffers[i].shape() != params[i].value->shape()) {
      throw StructuralError("optimizer: buffer shape mismatch for parameter " + std::to_string(i));
    }
  }
}

}  // namespace detail

/**
 * Classic SGD with momentum and coupled weight decay:
 *   v <- mu v + g + lambda w,   w <- w - lr v
 */
template <typename T>
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<ParamSlot<T>> params, double lr) {
    if (lr < 0.0) throw DomainError("sgd: negative learning rate");
    detail::match_buffers(velocity_, std::span<const ParamSlot<T>>(params));
    const T mu = static_cast<T>(cfg_.momentum);
    const T wd = static_cast<T>(cfg_.weight_decay);
    const T eta = static_cast<T>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = params[i].value->vec();
      auto& v = velocity_[i].vec();
      if (detail::decays(params[i].role) && wd != T(0)) {
        v = mu * v + params[i].grad->vec() + wd * w;
      } else {
        v = mu * v + params[i].grad->vec();
      }
      w -= eta * v;
      detail::project(params[i]);
    }
    ++step_count_;
  }

  void step(Network<T>& net, double lr) {
    auto params = net.parameters();
    step(std::span<ParamSlot<T>>(params), lr);
    net.mark_updated();
  }

  std::size_t step_count() const { return step_count_; }
  const std::vector<Tensor<T>>& velocity() const { return velocity_; }

 private:
  SgdConfig cfg_;
  std::vector<Tensor<T>> velocity_;
  std::size_t step_count_ = 0;
};

/// Bias-corrected Adam; weight decay (if any) is added to the gradient.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<ParamSlot<T>> params, double lr) {
    if (lr < 0.0) throw DomainError("adam: negative learning rate");
    detail::match_buffers(m_, std::span<const ParamSlot<T>>(params));
    detail::match_buffers(v_, std::span<const ParamSlot<T>>(params));
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, t));
    const T c2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, t));
    const T eps = static_cast<T>(cfg_.eps), eta = static_cast<T>(lr), wd = static_cast<T>(cfg_.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& w = params[i].value->vec();
      VectorX<T> g = params[i].grad->vec();
      if (detail::decays(params[i].role) && wd != T(0)) g += wd * w;
      auto& m = m_[i].vec();
      auto& v = v_[i].vec();
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
      w.array() -= eta * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      detail::project(params[i]);
    }
  }

  void step(Network<T>& net, double lr) {
    auto params = net.parameters();
    step(std::span<ParamSlot<T>>(params), lr);
    net.mark_updated();
  }

  std::size_t step_count() const { return step_count_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  std::size_t step_count_ = 0;
};

struct ConstantLr {
  double lr = 0.01;
};

/// eta_t = eta_min + (eta_max - eta_min) (1 + cos(pi t / T)) / 2 for 0 <= t <= T.
struct CosineAnnealing {
  double eta_max = 0.01;
  double eta_min = 0.0;
  int total = 1;
};

using LrSchedule = std::variant<ConstantLr, CosineAnnealing>;

inline double cosine_lr(const CosineAnnealing& s, int t) {
  if (s.total <= 0) throw DomainError("cosine_lr: T must be positive");
  if (t < 0 || t > s.total) throw DomainError("cosine_lr: t outside [0, T]");
  if (t == 0) return s.eta_max;
  if (t == s.total) return s.eta_min;
  if (2 * t == s.total) return 0.5 * (s.eta_max + s.eta_min);
  const double c = std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(s.total));
  return s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + c);
}

inline double learning_rate(const LrSchedule& s, int t) {
  return std::visit(Overloaded{
                        [](const ConstantLr& c) { return c.lr; },
                        [&](const CosineAnnealing& c) { return cosine_lr(c, t); },
                    },
                    s);
}

}  // namespace sqish

// SPDX-License-Identifier: Apache-2.0
//
// Single-step white-box FGSM attack and attacked-accuracy evaluation.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sqish/data.hpp"
#include "sqish/loss.hpp"
#include "sqish/network.hpp"

namespace sqish {

struct AttackConfig {
  double epsilon = 0.04;
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;

  void validate() const {
    if (!std::isfinite(epsilon) || epsilon < 0.0) throw DomainError("fgsm: epsilon must be >= 0");
    if (!(clamp_lo < clamp_hi)) throw DomainError("fgsm: clamp_lo must be < clamp_hi");
    if (epsilon > clamp_hi - clamp_lo) throw DomainError("fgsm: epsilon exceeds the input range");
  }
};

/// x_adv = clamp(x + eps * sign(dL/dx), lo, hi) with L the mean softmax
/// cross-entropy at the true labels; sign(0) = 0. Gradients come from the
/// network's own forward/backward pass; the network is not modified.
template <typename T>
Tensor<T> fgsm_perturb(const Network<T>& net, const Tensor<T>& batch, std::span<const int> labels,
                       const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0) return batch;
  auto fwd = net.forward(batch);
  const auto loss = softmax_cross_entropy(fwd.logits, labels);
  const Tensor<T> grad = net.input_gradient(fwd.cache, loss.dlogits);
  Tensor<T> adv(batch.shape());
  for (Index i = 0; i < batch.size(); ++i) {
    const double x = static_cast<double>(batch[i]);
    const double g = static_cast<double>(grad[i]);
    const double step = g > 0.0 ? cfg.epsilon : (g < 0.0 ? -cfg.epsilon : 0.0);
    T v = static_cast<T>(std::clamp(x + step, cfg.clamp_lo, cfg.clamp_hi));
    // Rounding to T may overshoot the budget or the range by an ulp.
    while (v != batch[i] && (std::abs(static_cast<double>(v) - x) > cfg.epsilon || static_cast<double>(v) > cfg.clamp_hi ||
           static_cast<double>(v) < cfg.clamp_lo)) {
      v = std::nextafter(v, batch[i]);
    }
    adv[i] = v;
  }
  return adv;
}

struct AttackResult {
  double epsilon = 0.0;
  double clean_acc = 0.0;
  double adv_acc = 0.0;
  /// Largest |x_adv - x| seen over all batches.
  double max_perturbation = 0.0;
  /// Every perturbed input stayed inside [clamp_lo, clamp_hi].
  bool in_range = true;

  bool operator==(const AttackResult&) const = default;
};

/// Clean and FGSM-attacked accuracy over the whole dataset.
template <typename T>
AttackResult evaluate_under_attack(const Network<T>& net, const Dataset<T>& ds, const AttackConfig& cfg,
                                   Index batch_size = 500) {
  cfg.validate();
  AttackResult res{cfg.epsilon};
  std::size_t clean = 0, adv = 0;
  for (const auto& idx : make_batches(ds.size(), batch_size, false, 0, 0)) {
    const auto b = gather(ds, idx);
    clean += count_correct(net.predict(b.inputs), b.labels);
    const Tensor<T> x_adv = fgsm_perturb(net, b.inputs, b.labels, cfg);
    adv += count_correct(net.predict(x_adv), b.labels);
    for (Index i = 0; i < x_adv.size(); ++i) {
      const double v = static_cast<double>(x_adv[i]);
      res.max_perturbation = std::max(res.max_perturbation, std::abs(v - static_cast<double>(b.inputs[i])));
      res.in_range = res.in_range && v >= cfg.clamp_lo && v <= cfg.clamp_hi;
    }
  }
  const double n = static_cast<double>(std::max<Index>(ds.size(), 1));
  res.clean_acc = static_cast<double>(clean) / n;
  res.adv_acc = static_cast<double>(adv) / n;
  return res;
}

}  // namespace sqish

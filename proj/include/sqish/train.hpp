// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <algorithm>
#include <random>
#include <variant>
#include <vector>

#include "sqish/data.hpp"
#include "sqish/loss.hpp"
#include "sqish/network.hpp"
#include "sqish/optim.hpp"

namespace sqish {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  int epochs = 5;
  Index batch_size = 128;
  double lr = 0.01;
  double lr_min = 0.0;
  bool cosine = true;  // per-epoch cosine annealing over `epochs`, else constant
  OptimizerKind optimizer = OptimizerKind::Sgd;
  SgdConfig sgd{};
  AdamConfig adam{};
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool mixup = false;
  double mixup_alpha = 1.0;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

struct EvalResult {
  double loss = 0.0;
  double acc = 0.0;
};

template <typename T>
EvalResult evaluate(const Network<T>& net, const Dataset<T>& ds, Index batch_size = 1000) {
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& idx : make_batches(ds.size(), batch_size, false, 0, 0)) {
    const auto b = gather(ds, idx);
    const auto logits = net.predict(b.inputs);
    loss += softmax_cross_entropy(logits, b.labels).loss * static_cast<double>(idx.size());
    correct += count_correct(logits, b.labels);
  }
  const double n = static_cast<double>(std::max<Index>(ds.size(), 1));
  return {loss / n, static_cast<double>(correct) / n};
}

/// SGD or Adam behind one interface.
template <typename T>
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) {
    if (cfg.optimizer == OptimizerKind::Sgd) {
      impl_ = Sgd<T>(cfg.sgd);
    } else {
      impl_ = Adam<T>(cfg.adam);
    }
  }

  void step(Network<T>& net, double lr) {
    std::visit([&](auto& opt) { opt.step(net, lr); }, impl_);
  }

 private:
  std::variant<Sgd<T>, Adam<T>> impl_;
};

/**
 * Minibatch training with softmax cross-entropy (optionally MixUp with one
 * lambda ~ Beta(alpha, alpha) per batch, partner samples taken from a
 * permutation of the same batch). Throws NumericalError on a non-finite loss.
 * `test` may be null; test metrics are then left at zero.
 */
template <typename T>
std::vector<EpochMetrics> train_classifier(Network<T>& net, const Dataset<T>& train, const Dataset<T>* test,
                                           const TrainConfig& cfg,
                                           const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  if (cfg.epochs < 1) throw DomainError("train: epochs must be >= 1");
  Optimizer<T> opt(cfg);
  const LrSchedule schedule = cfg.cosine ? LrSchedule{CosineAnnealing{cfg.lr, cfg.lr_min, cfg.epochs}}
                                         : LrSchedule{ConstantLr{cfg.lr}};
  std::mt19937_64 mix_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<EpochMetrics> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMetrics m{epoch, learning_rate(schedule, epoch)};
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& idx : make_batches(train.size(), cfg.batch_size, cfg.shuffle, cfg.seed,
                                        static_cast<std::uint64_t>(epoch))) {
      const auto b = gather(train, idx);
      net.zero_grad();
      LossResult<T> loss;
      Tensor<T> logits;
      if (cfg.mixup) {
        std::vector<Index> perm(idx.size());
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), mix_rng);
        const auto partner = gather(Dataset<T>{b.inputs, b.labels, train.num_classes}, perm);
        const auto mixed = mixup(b.inputs, partner.inputs, b.labels, partner.labels, cfg.mixup_alpha, mix_rng);
        auto fwd = net.forward(mixed.inputs);
        loss = mixup_cross_entropy(fwd.logits, mixed.labels_a, mixed.labels_b, mixed.lambda);
        net.backward(fwd.cache, loss.dlogits, false);
        logits = std::move(fwd.logits);
        correct += count_correct(logits, mixed.lambda >= 0.5 ? mixed.labels_a : mixed.labels_b);
      } else {
        auto fwd = net.forward(b.inputs);
        loss = softmax_cross_entropy(fwd.logits, b.labels);
        net.backward(fwd.cache, loss.dlogits, false);
        correct += count_correct(fwd.logits, b.labels);
      }
      if (!std::isfinite(loss.loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += loss.loss * static_cast<double>(idx.size());
      opt.step(net, m.lr);
    }
    const double n = static_cast<double>(train.size());
    m.train_loss = loss_sum / n;
    m.train_acc = static_cast<double>(correct) / n;
    if (test != nullptr) {
      const auto ev = evaluate(net, *test);
      m.test_loss = ev.loss;
      m.test_acc = ev.acc;
    }
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

struct FitResult {
  double final_mse = 0.0;
  int steps = 0;  // steps taken until MSE < target (or the step budget)
  bool converged = false;

  bool operator==(const FitResult&) const = default;
};

/**
 * Fits sin(x) on 256 evenly spaced points of [-pi, pi] with a
 * Dense(1,hidden)-activation-Dense(hidden,1) network trained full-batch by
 * Adam on MSE, stopping as soon as the MSE drops below `target`.
 */
inline FitResult fit_sine(std::uint64_t seed, const ActivationKind& activation, int max_steps = 5000,
                          Index hidden = 64, double lr = 0.01, double target = 1e-3) {
  constexpr Index kSamples = 256;
  Tensor<double> x({kSamples, 1}), y({kSamples, 1});
  for (Index i = 0; i < kSamples; ++i) {
    x[i] = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(kSamples - 1);
    y[i] = std::sin(x[i]);
  }
  Network<double> net(mlp(1, {hidden}, 1, activation), {1}, seed);
  Adam<double> opt(AdamConfig{});
  FitResult res;
  for (int step = 0; step < max_steps; ++step) {
    net.zero_grad();
    auto fwd = net.forward(x);
    const auto loss = mse_loss(fwd.logits, y);
    res.final_mse = loss.loss;
    res.steps = step;
    if (loss.loss < target) {
      res.converged = true;
      return res;
    }
    if (!std::isfinite(loss.loss)) throw NumericalError("fit_sine: non-finite loss");
    net.backward(fwd.cache, loss.dlogits, false);
    opt.step(net, lr);
  }
  res.final_mse = mse_loss(net.predict(x), y).loss;
  res.steps = max_steps;
  res.converged = res.final_mse < target;
  return res;
}

/// Current activation parameters of every activation layer, in layer order.
template <typename T>
std::vector<ActivationKind> activation_snapshot(const Network<T>& net) {
  std::vector<ActivationKind> out;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    if (const auto* a = dynamic_cast<const ActivationLayer<T>*>(&net.layer(i))) out.push_back(a->kind());
  }
  return out;
}

}  // namespace sqish

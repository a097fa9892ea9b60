// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "sqish/train.hpp"

using namespace sqish;

namespace {

const Dataset<double>* const kNoTest = nullptr;

TrainConfig spiral_config() {
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 50;
  cfg.lr = 0.01;
  cfg.lr_min = 0.0;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.seed = 1;
  return cfg;
}

}  // namespace

TEST(Train, SpiralsReachFullTrainAccuracy) {
  const auto ds = synthetic_two_spirals(1000, 0.0, 7);
  Network<double> net(mlp(2, {32, 32}, 2, act::Sqish{}), {2}, 3);
  const auto hist = train_classifier(net, ds, kNoTest, spiral_config());
  EXPECT_EQ(evaluate(net, ds).acc, 1.0);
  EXPECT_EQ(hist.size(), 300u);
}

TEST(Train, ActivationParametersMove) {
  const auto ds = synthetic_two_spirals(200, 0.0, 2);
  Network<double> net(mlp(2, {16}, 2, act::Sqish{}), {2}, 5);
  TrainConfig cfg = spiral_config();
  cfg.epochs = 5;
  train_classifier(net, ds, kNoTest, cfg);
  const auto kinds = activation_snapshot(net);
  ASSERT_EQ(kinds.size(), 1u);
  const auto& p = std::get<act::Sqish>(kinds[0]).params;
  EXPECT_NE(p.a(), 0.0);
  EXPECT_NE(p.beta(), 1.0);
  EXPECT_NE(p.gamma(), 1.0);
}

TEST(Train, FrozenParametersStayPut) {
  const auto ds = synthetic_two_spirals(200, 0.0, 2);
  const TrainableMask mask{true, false, false};
  Network<double> net(mlp(2, {16}, 2, act::Sqish{SqishParams(0.0, 2.0, 3.0, mask)}), {2}, 5);
  TrainConfig cfg = spiral_config();
  cfg.epochs = 3;
  train_classifier(net, ds, kNoTest, cfg);
  const auto snap = activation_snapshot(net);
  const auto& p = std::get<act::Sqish>(snap[0]).params;
  EXPECT_NE(p.a(), 0.0);
  EXPECT_EQ(p.beta(), 2.0);
  EXPECT_EQ(p.gamma(), 3.0);
}

TEST(Train, ProjectionHoldsEveryStep) {
  const auto ds = synthetic_two_spirals(200, 0.0, 4);
  Network<double> net(mlp(2, {8}, 2, act::Sqish{SqishParams(0.0, 2e-4, 2e-4)}), {2}, 1);
  Sgd<double> opt(SgdConfig{0.9, 0.0});
  bool clamped = false;
  for (int step = 0; step < 200; ++step) {
    net.zero_grad();
    auto fwd = net.forward(ds.images);
    net.backward(fwd.cache, softmax_cross_entropy(fwd.logits, ds.labels).dlogits);
    for (auto& slot : net.parameters()) {
      if (slot.role == ParamRole::ActivationBeta || slot.role == ParamRole::ActivationGamma) {
        (*slot.grad)[0] += step % 2 == 0 ? 1.0 : -0.5;
      }
    }
    opt.step(net, 0.5);
    const auto snap = activation_snapshot(net);
    const auto& p = std::get<act::Sqish>(snap[0]).params;
    ASSERT_GE(p.beta(), SqishParams::kMinPositive);
    ASSERT_GE(p.gamma(), SqishParams::kMinPositive);
    clamped |= p.beta() == SqishParams::kMinPositive || p.gamma() == SqishParams::kMinPositive;
  }
  EXPECT_TRUE(clamped);
}

TEST(Train, BitIdenticalTrajectories) {
  const auto ds = synthetic_two_spirals(400, 0.05, 9).cast<float>();
  TrainConfig cfg = spiral_config();
  cfg.epochs = 4;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.mixup = true;
  const auto run = [&] {
    Network<float> net(mlp(2, {16, 16}, 2, act::Sqish{}), {2}, 11);
    return train_classifier(net, ds, &ds, cfg);
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Train, NonFiniteLossThrows) {
  auto ds = synthetic_two_spirals(100, 0.0, 1);
  ds.images[17] = std::numeric_limits<double>::quiet_NaN();
  Network<double> net(mlp(2, {4}, 2, act::Relu{}), {2}, 1);
  TrainConfig cfg = spiral_config();
  cfg.epochs = 1;
  EXPECT_THROW(train_classifier(net, ds, kNoTest, cfg), NumericalError);
  cfg.epochs = 0;
  EXPECT_THROW(train_classifier(net, ds, kNoTest, cfg), DomainError);
}

TEST(Train, EpochCallbackAndSchedule) {
  const auto ds = synthetic_two_spirals(100, 0.0, 1);
  Network<double> net(mlp(2, {4}, 2, act::Relu{}), {2}, 1);
  TrainConfig cfg = spiral_config();
  cfg.epochs = 4;
  cfg.lr = 0.2;
  std::vector<double> lrs;
  train_classifier(net, ds, &ds, cfg, [&](const EpochMetrics& m) { lrs.push_back(m.lr); });
  ASSERT_EQ(lrs.size(), 4u);
  EXPECT_EQ(lrs[0], 0.2);
  EXPECT_DOUBLE_EQ(lrs[2], 0.1);
}

TEST(FitSine, SqishConvergesForThreeSeeds) {
  for (const std::uint64_t seed : {0, 1, 2}) {
    const auto r = fit_sine(seed, act::Sqish{});
    EXPECT_TRUE(r.converged) << "seed " << seed << " mse " << r.final_mse;
    EXPECT_LT(r.final_mse, 1e-3);
    EXPECT_LE(r.steps, 5000);
  }
}

TEST(FitSine, Deterministic) { EXPECT_EQ(fit_sine(4, act::Sqish{}, 300), fit_sine(4, act::Sqish{}, 300)); }

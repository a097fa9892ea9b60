// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "sqish/certify.hpp"
#include "sqish/robustness.hpp"

using namespace sqish;

namespace {

/// Two-class linear softmax with logits (0, x).
Network<double> linear_model() {
  Network<double> net({DenseSpec{1, 2}}, {1}, 0);
  net.layer(0).params()[0].vec() << 0.0, 1.0;
  net.layer(0).params()[1].set_zero();
  return net;
}

Dataset<double> random_images(Index n, std::uint64_t seed) {
  Dataset<double> ds;
  ds.images = Tensor<double>({n, 1, 8, 8});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < ds.images.size(); ++i) ds.images[i] = u(rng);
  for (Index i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(i % 10));
  ds.num_classes = 10;
  return ds;
}

std::vector<LayerSpec> small_cnn() {
  return parse_architecture("conv:1:4:3:1:1,act,pool:2,flatten,dense:64:10", act::Sqish{});
}

}  // namespace

TEST(Fgsm, LinearExample) {
  const auto net = linear_model();
  Tensor<double> x({1, 1}, VectorX<double>{{0.5}});
  const auto adv = fgsm_perturb(net, x, std::vector<int>{0}, AttackConfig{0.04});
  EXPECT_NEAR(adv[0], 0.54, 1e-15);
  const auto away = fgsm_perturb(net, x, std::vector<int>{1}, AttackConfig{0.04});
  EXPECT_NEAR(away[0], 0.46, 1e-15);
}

TEST(Fgsm, ClampsToRange) {
  const auto net = linear_model();
  Tensor<double> x({2, 1}, VectorX<double>{{0.99, 0.01}});
  const auto adv = fgsm_perturb(net, x, std::vector<int>{0, 1}, AttackConfig{0.04});
  EXPECT_EQ(adv[0], 1.0);
  EXPECT_EQ(adv[1], 0.0);
}

TEST(Fgsm, ZeroEpsilonIsIdentity) {
  Network<double> net(small_cnn(), {1, 8, 8}, 1);
  const auto ds = random_images(20, 2);
  EXPECT_EQ(fgsm_perturb(net, ds.images, ds.labels, AttackConfig{0.0}), ds.images);
  const auto r = evaluate_under_attack(net, ds, AttackConfig{0.0});
  EXPECT_EQ(r.adv_acc, r.clean_acc);
  EXPECT_EQ(r.max_perturbation, 0.0);
}

TEST(Fgsm, BudgetAndRangeContracts) {
  Network<float> net(small_cnn(), {1, 8, 8}, 3);
  const auto ds = random_images(64, 4).cast<float>();
  for (const double eps : {0.01, 0.04, 0.08, 0.3}) {
    const auto adv = fgsm_perturb(net, ds.images, ds.labels, AttackConfig{eps});
    for (Index i = 0; i < adv.size(); ++i) {
      ASSERT_LE(std::abs(static_cast<double>(adv[i]) - static_cast<double>(ds.images[i])), eps);
      ASSERT_GE(adv[i], 0.0f);
      ASSERT_LE(adv[i], 1.0f);
    }
    const auto r = evaluate_under_attack(net, ds, AttackConfig{eps}, 16);
    EXPECT_LE(r.max_perturbation, eps);
    EXPECT_TRUE(r.in_range);
  }
}

TEST(Fgsm, DoesNotModifyNetwork) {
  Network<double> net(small_cnn(), {1, 8, 8}, 5);
  const Network<double> copy = net;
  const auto ds = random_images(8, 6);
  const auto before = net.version();
  fgsm_perturb(net, ds.images, ds.labels, AttackConfig{0.1});
  EXPECT_EQ(net.version(), before);
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    for (std::size_t j = 0; j < net.layer(i).params().size(); ++j) {
      EXPECT_EQ(net.layer(i).params()[j], copy.layer(i).params()[j]);
      EXPECT_EQ(net.layer(i).grads()[j].vec().squaredNorm(), 0.0);
    }
  }
}

TEST(Fgsm, InputGradientMatchesFiniteDifferences) {
  const Network<double> net(small_cnn(), {1, 8, 8}, 7);
  const auto ds = random_images(3, 9);
  const auto r = check_input_gradient(net, ds.images, ds.labels);
  EXPECT_TRUE(r.pass) << r.max_rel_err;
}

TEST(Fgsm, UntrainedNetworkCleanAccuracyIsNearChance) {
  const Network<float> net(small_cnn(), {1, 8, 8}, 9);
  const auto ds = random_images(2000, 10).cast<float>();
  const auto r = evaluate_under_attack(net, ds, AttackConfig{0.04});
  const double sigma = std::sqrt(0.1 * 0.9 / 2000.0);
  EXPECT_NEAR(r.clean_acc, 0.1, 3 * sigma);
  EXPECT_LE(r.adv_acc, r.clean_acc);
}

TEST(AttackConfig, Validation) {
  EXPECT_THROW(AttackConfig({-0.1}).validate(), DomainError);
  EXPECT_THROW(AttackConfig({0.1, 1.0, 0.0}).validate(), DomainError);
  EXPECT_THROW(AttackConfig({2.0, 0.0, 1.0}).validate(), DomainError);
  EXPECT_THROW(AttackConfig({std::nan("")}).validate(), DomainError);
  const auto net = linear_model();
  Tensor<double> x({1, 1});
  EXPECT_THROW(fgsm_perturb(net, x, std::vector<int>{0}, AttackConfig{-1.0}), DomainError);
}

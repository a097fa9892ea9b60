// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sqish/certify.hpp"
#include "sqish/layer_spec.hpp"
#include "sqish/loss.hpp"
#include "sqish/network.hpp"

using namespace sqish;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

/// Direct-loop convolution, independent of the im2col path.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, Index stride,
                          Index pad) {
  const Index n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const Index co = w.dim(0), k = w.dim(2);
  const Index ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  Tensor<double> y({n, co, ho, wo});
  for (Index s = 0; s < n; ++s)
    for (Index o = 0; o < co; ++o)
      for (Index i = 0; i < ho; ++i)
        for (Index j = 0; j < wo; ++j) {
          double acc = b[o];
          for (Index c = 0; c < ci; ++c)
            for (Index p = 0; p < k; ++p)
              for (Index q = 0; q < k; ++q) {
                const Index r = i * stride + p - pad, cc = j * stride + q - pad;
                if (r < 0 || r >= h || cc < 0 || cc >= wd) continue;
                acc += w[((o * ci + c) * k + p) * k + q] * x[((s * ci + c) * h + r) * wd + cc];
              }
          y[((s * co + o) * ho + i) * wo + j] = acc;
        }
  return y;
}

std::vector<int> labels_for(Index n, int classes) {
  std::vector<int> out;
  for (Index i = 0; i < n; ++i) out.push_back(static_cast<int>(i % classes));
  return out;
}

}  // namespace

TEST(Dense, Examples) {
  Network<double> id({DenseSpec{2, 2}}, {2}, 0);
  auto& p = id.layer(0).params();
  p[0].vec() << 1, 0, 0, 1;
  p[1].set_zero();
  Tensor<double> x({1, 2}, VectorX<double>{{1.0, 2.0}});
  EXPECT_EQ(id.predict(x).vec(), (VectorX<double>{{1.0, 2.0}}));

  Network<double> sum({DenseSpec{2, 1}}, {2}, 0);
  sum.layer(0).params()[0].vec() << 1, 1;
  sum.layer(0).params()[1].set_zero();
  Tensor<double> x2({1, 2}, VectorX<double>{{3.0, 4.0}});
  EXPECT_EQ(sum.predict(x2)[0], 7.0);
}

TEST(Dense, SquaredLossGradientIsNormalEquation) {
  Network<double> net({DenseSpec{3, 1}}, {3}, 5);
  const Tensor<double> x = random_tensor({6, 3}, 1);
  const Tensor<double> y = random_tensor({6, 1}, 2);
  net.zero_grad();
  auto fwd = net.forward(x);
  const auto loss = mse_loss(fwd.logits, y);
  net.backward(fwd.cache, loss.dlogits);
  const auto X = x.matrix(6, 3);
  const Eigen::VectorXd w = net.layer(0).params()[0].vec();
  const double b = net.layer(0).params()[1][0];
  const Eigen::VectorXd r = (X * w).array() + b - y.vec().array();
  const Eigen::VectorXd gw = 2.0 / 6.0 * X.transpose() * r;
  EXPECT_TRUE(net.layer(0).grads()[0].vec().isApprox(gw, 1e-12));
  EXPECT_NEAR(net.layer(0).grads()[1][0], 2.0 / 6.0 * r.sum(), 1e-12);
}

TEST(ActivationLayer, SqishWithUnitSlopeIsIdentity) {
  Network<double> net({FlattenSpec{}, ActivationSpec{act::Sqish{SqishParams(1.0, 3.0, 2.0)}}}, {3, 2}, 0);
  const Tensor<double> x = random_tensor({4, 3, 2}, 3, -20.0, 20.0);
  const Tensor<double> y = net.predict(x);
  EXPECT_EQ(y.vec(), x.vec());
}

TEST(Conv2D, MatchesDirectLoops) {
  for (const auto& [k, stride, pad] : std::vector<std::tuple<Index, Index, Index>>{{3, 1, 1}, {3, 2, 0}, {5, 1, 2}, {5, 2, 1}, {3, 1, 0}}) {
    Conv2DLayer<double> conv(Conv2DSpec{2, 3, k, stride, pad});
    conv.params()[0] = random_tensor(conv.params()[0].shape(), 10 + static_cast<std::uint64_t>(k));
    conv.params()[1] = random_tensor({3}, 20);
    const Tensor<double> x = random_tensor({2, 2, 9, 8}, 30);
    const Tensor<double> y = conv.forward(x, nullptr);
    const Tensor<double> want = naive_conv(x, conv.params()[0], conv.params()[1], stride, pad);
    ASSERT_EQ(y.shape(), want.shape());
    EXPECT_TRUE(y.vec().isApprox(want.vec(), 1e-12)) << "k=" << k << " stride=" << stride << " pad=" << pad;
  }
}

TEST(Conv2D, Geometry) {
  EXPECT_THROW(Conv2DLayer<double>(Conv2DSpec{1, 1, 0, 1, 0}), StructuralError);
  Conv2DLayer<double> conv(Conv2DSpec{1, 2, 5, 1, 0});
  EXPECT_THROW(conv.output_shape({1, 1, 3, 3}), StructuralError);
  EXPECT_THROW(conv.output_shape({1, 2, 9, 9}), StructuralError);
  EXPECT_EQ(conv.output_shape({4, 1, 9, 9}), (Shape{4, 2, 5, 5}));
}

TEST(MaxPool, PicksMaximumAndRoutesGradient) {
  MaxPoolLayer<double> pool(MaxPoolSpec{2, 2});
  Tensor<double> x({1, 1, 2, 4}, VectorX<double>{{1, 5, 2, 0, 3, 4, 8, 7}});
  LayerCache<double> cache;
  const auto y = pool.forward(x, &cache);
  EXPECT_EQ(y.vec(), (VectorX<double>{{5, 8}}));
  Tensor<double> dy({1, 1, 1, 2}, VectorX<double>{{10, 20}});
  const auto dx = pool.backward(cache, dy, nullptr, true);
  EXPECT_EQ(dx.vec(), (VectorX<double>{{0, 10, 0, 0, 0, 0, 20, 0}}));
}

TEST(Network, ShapeMismatchIsStructural) {
  Network<double> net(mlp(3, {4}, 2, act::Relu{}), {3}, 0);
  EXPECT_THROW(net.predict(Tensor<double>({2, 4})), StructuralError);
  EXPECT_THROW(Network<double>({DenseSpec{3, 4}, DenseSpec{5, 2}}, {3}, 0), StructuralError);
  EXPECT_THROW(Network<double>({Conv2DSpec{1, 2, 3, 1, 1}}, {1, 4, 4}, 0), StructuralError);
}

TEST(Network, StaleCacheIsStructural) {
  Network<double> net(mlp(3, {4}, 2, act::Sqish{}), {3}, 0);
  const Tensor<double> x = random_tensor({2, 3}, 1);
  auto fwd = net.forward(x);
  const auto loss = softmax_cross_entropy(fwd.logits, std::vector<int>{0, 1});
  net.mark_updated();
  EXPECT_THROW(net.backward(fwd.cache, loss.dlogits), StructuralError);

  Network<double> other = net;
  auto fwd2 = net.forward(x);
  EXPECT_THROW(other.backward(fwd2.cache, loss.dlogits), StructuralError);
}

TEST(Network, InitIsReproducible) {
  const auto specs = default_cnn(act::Sqish{});
  Network<float> a(specs, {1, 28, 28}, 7), b(specs, {1, 28, 28}, 7), c(specs, {1, 28, 28}, 8);
  for (std::size_t i = 0; i < a.num_layers(); ++i) {
    for (std::size_t j = 0; j < a.layer(i).params().size(); ++j) {
      EXPECT_EQ(a.layer(i).params()[j], b.layer(i).params()[j]);
    }
  }
  EXPECT_NE(a.layer(0).params()[0], c.layer(0).params()[0]);
  EXPECT_EQ(a.layer(0).params()[1].vec().squaredNorm(), 0.0f);
}

TEST(Network, HeUniformVariance) {
  Network<double> net({DenseSpec{100, 100}}, {100}, 3);
  const auto& w = net.layer(0).params()[0].vec();
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
  EXPECT_NEAR(var, 2.0 / 100.0, 0.2 * 2.0 / 100.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 100.0));
}

TEST(Network, InitRestoresActivationParams) {
  Network<double> net(mlp(2, {3}, 2, act::Sqish{SqishParams(0.1, 2.0, 3.0)}), {2}, 0);
  auto& p = net.layer(1).params();
  p[0][0] = 5.0;
  p[2][0] = 0.5;
  net.init_params(1);
  EXPECT_EQ(p[0][0], 0.1);
  EXPECT_EQ(p[1][0], 2.0);
  EXPECT_EQ(p[2][0], 3.0);
}

TEST(Network, ActivationLayerExposesOneParameterSet) {
  Network<double> net(mlp(2, {3, 3}, 2, act::Sqish{}), {2}, 0);
  std::size_t act_params = 0;
  for (const auto& slot : net.parameters()) {
    if (is_activation_param(slot.role)) {
      ++act_params;
      EXPECT_EQ(slot.value->size(), 1);
    }
  }
  EXPECT_EQ(act_params, 6u);

  TrainableMask mask{false, true, false};
  Network<double> frozen(mlp(2, {3}, 2, act::Sqish{SqishParams(0.0, 1.0, 1.0, mask)}), {2}, 0);
  std::size_t trainable = 0;
  for (const auto& slot : frozen.parameters()) trainable += is_activation_param(slot.role);
  EXPECT_EQ(trainable, 1u);
}

TEST(NetworkGradients, MlpSixteenHidden) {
  Network<double> net(mlp(10, {16}, 3, act::Sqish{SqishParams(0.1, 1.5, 0.8)}), {10}, 4);
  const auto r = check_network_gradients(net, random_tensor({4, 10}, 5), labels_for(4, 3));
  EXPECT_TRUE(r.pass) << r.max_rel_err << " " << r.max_abs_err;
  EXPECT_GT(r.num_points, 16u * 10u);
}

TEST(NetworkGradients, SqishParametersAtNetworkLevel) {
  Network<double> net(mlp(3, {5, 4}, 2, act::Sqish{SqishParams(-0.2, 0.6, 2.0)}), {3}, 9);
  const Tensor<double> x = random_tensor({5, 3}, 6, -2.0, 2.0);
  const auto labels = labels_for(5, 2);
  net.zero_grad();
  auto fwd = net.forward(x);
  net.backward(fwd.cache, softmax_cross_entropy(fwd.logits, labels).dlogits);
  for (std::size_t li : {1u, 3u}) {
    auto& layer = net.layer(li);
    for (std::size_t j = 0; j < 3; ++j) {
      double& v = layer.params()[j][0];
      const double saved = v;
      const double num = central_difference(
          [&](double t) {
            v = t;
            return softmax_cross_entropy(net.predict(x), labels).loss;
          },
          saved, 1e-4);
      v = saved;
      const double ana = layer.grads()[j][0];
      EXPECT_LT(std::abs(ana - num), 1e-5 * std::max(std::abs(num), 1e-3)) << "layer " << li << " param " << j;
    }
  }
}

TEST(NetworkGradients, EveryArchitectureInTests) {
  const std::vector<std::pair<std::vector<LayerSpec>, Shape>> nets = {
      {parse_architecture("conv:1:2:3:1:1,act,pool:2,conv:2:3:3:2:1,act,flatten,dense:12:3", act::Sqish{}), {1, 6, 6}},
      {parse_architecture("conv:2:2:5:2:2,act,flatten,dense:18:3", act::Swish{1.3}), {2, 5, 5}},
      {parse_architecture("conv:1:2:3,act,pool:2:1,flatten,dense:4:3", act::Prelu{0.2}), {1, 5, 4}},
      {mlp(4, {6}, 3, act::Mish{}), {4}},
      {mlp(4, {6}, 3, act::Gelu{}), {4}},
      {mlp(4, {6}, 3, act::Elu{0.7}), {4}},
      {mlp(2, {32, 32}, 2, act::Sqish{}), {2}},
  };
  std::uint64_t seed = 100;
  for (const auto& [specs, shape] : nets) {
    Network<double> net(specs, shape, seed);
    Shape batch{3};
    batch.insert(batch.end(), shape.begin(), shape.end());
    const Tensor<double> x = random_tensor(batch, seed++);
    const auto labels = labels_for(3, static_cast<int>(net.output_size()));
    const auto r = check_network_gradients(net, x, labels);
    EXPECT_TRUE(r.pass) << r.max_rel_err << " worst param " << r.worst_input[0];
    const auto ri = check_input_gradient(net, x, labels);
    EXPECT_TRUE(ri.pass) << ri.max_rel_err;
  }
}

TEST(NetworkGradients, DefaultCnnInDouble) {
  Network<double> net(default_cnn(act::Sqish{SqishParams(0.05, 1.2, 1.1)}), {1, 28, 28}, 2);
  const Tensor<double> x = random_tensor({2, 1, 28, 28}, 8, 0.0, 1.0);
  const auto ri = check_input_gradient(net, x, std::vector<int>{3, 7});
  EXPECT_TRUE(ri.pass) << ri.max_rel_err;
}

TEST(NetworkGradients, BackwardWithoutInputGradientKeepsParameterGradients) {
  Network<double> net(default_cnn(act::Sqish{}), {1, 28, 28}, 1);
  const Tensor<double> x = random_tensor({3, 1, 28, 28}, 4, 0.0, 1.0);
  const std::vector<int> labels{1, 2, 3};
  net.zero_grad();
  auto f1 = net.forward(x);
  const auto l1 = softmax_cross_entropy(f1.logits, labels);
  const Tensor<double> dx = net.backward(f1.cache, l1.dlogits, true);
  EXPECT_EQ(dx.shape(), x.shape());
  std::vector<Tensor<double>> first;
  for (const auto& s : net.parameters()) first.push_back(*s.grad);
  net.zero_grad();
  auto f2 = net.forward(x);
  EXPECT_EQ(net.backward(f2.cache, l1.dlogits, false).size(), 0);
  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(*params[i].grad, first[i]);
}

TEST(Loss, Examples) {
  Tensor<double> equal({3, 5});
  EXPECT_NEAR(softmax_cross_entropy(equal, std::vector<int>{0, 2, 4}).loss, std::log(5.0), 1e-15);
  Tensor<double> perfect({2, 3});
  perfect[0] = 100.0;
  perfect[5] = 100.0;
  EXPECT_LT(softmax_cross_entropy(perfect, std::vector<int>{0, 2}).loss, 1e-40);
  EXPECT_THROW(softmax_cross_entropy(equal, std::vector<int>{0, 5, 1}), DomainError);
  EXPECT_THROW(softmax_cross_entropy(equal, std::vector<int>{0, -1, 1}), DomainError);
  EXPECT_THROW(softmax_cross_entropy(equal, std::vector<int>{0, 1}), StructuralError);
}

TEST(Loss, DlogitsMatchFiniteDifferences) {
  Tensor<double> logits = random_tensor({4, 3}, 12, -3.0, 3.0);
  const std::vector<int> labels{0, 2, 1, 2};
  const auto res = softmax_cross_entropy(logits, labels);
  GradCheckAccumulator acc("dlogits", GradTolerance{1e-7, 1e-10, 1e-5});
  for (Index i = 0; i < logits.size(); ++i) {
    const double saved = logits[i];
    const double num = central_difference(
        [&](double v) {
          logits[i] = v;
          return softmax_cross_entropy(logits, labels).loss;
        },
        saved, 1e-5);
    logits[i] = saved;
    acc.add(res.dlogits[i], num, {static_cast<double>(i)});
  }
  EXPECT_TRUE(acc.report().pass) << acc.report().max_rel_err;
}

TEST(Loss, MixupIdentityAtEndpoints) {
  const Tensor<double> logits = random_tensor({5, 4}, 3, -4.0, 4.0);
  const std::vector<int> a{0, 1, 2, 3, 0}, b{3, 3, 1, 0, 2};
  EXPECT_NEAR(mixup_cross_entropy(logits, a, b, 1.0).loss, softmax_cross_entropy(logits, a).loss, 1e-12);
  EXPECT_NEAR(mixup_cross_entropy(logits, a, b, 0.0).loss, softmax_cross_entropy(logits, b).loss, 1e-12);
  const double mid = mixup_cross_entropy(logits, a, b, 0.3).loss;
  EXPECT_NEAR(mid, 0.3 * softmax_cross_entropy(logits, a).loss + 0.7 * softmax_cross_entropy(logits, b).loss, 1e-12);
  const auto g = mixup_cross_entropy(logits, a, b, 0.3).dlogits;
  for (Index i = 0; i < 5; ++i) EXPECT_NEAR(g.matrix(5, 4).row(i).sum(), 0.0, 1e-15);
  EXPECT_THROW(mixup_cross_entropy(logits, a, b, 1.5), DomainError);
}

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "sqish/activation_array.hpp"
#include "sqish/certify.hpp"
#include "sqish/gradcheck.hpp"

using namespace sqish;

namespace {

std::vector<ActivationKind> all_kinds() {
  return {act::Relu{},  act::LeakyRelu{0.1}, act::Prelu{0.25}, act::Elu{1.0},
          act::Swish{1.5}, act::Gelu{},      act::Mish{},       act::Sqish{SqishParams(0.2, 2.0, 3.0)}};
}

ArrayX<double> extreme_inputs() {
  ArrayX<double> x(14);
  x << -1e8, -1e4, -800.0, -60.0, -1.0, -1e-300, 0.0, 1e-300, 1e-3, 1.0, 60.0, 800.0, 1e4, 1e8;
  return x;
}

}  // namespace

TEST(ArrayKernels, AgreeWithScalarReference) {
  for (const auto& r : certify_array_kernels(3000, 11)) EXPECT_TRUE(r.pass) << r.op_name << " " << r.max_rel_err;
}

TEST(ArrayKernels, ExtremeInputsMatchScalar) {
  const ArrayX<double> x = extreme_inputs();
  const ArrayX<double> g = ArrayX<double>::Ones(x.size());
  for (const auto& k : all_kinds()) {
    const ArrayX<double> y = activate<double>(x, k);
    const auto back = activate_backward<double>(x, g, k, true);
    for (Index i = 0; i < x.size(); ++i) {
      const double want = activate(x[i], k);
      EXPECT_NEAR(y[i], want, 1e-12 * std::max(1.0, std::abs(want))) << activation_name(k) << " x=" << x[i];
      const double dwant = activate_grad_x(x[i], k);
      EXPECT_NEAR(back.dx[i], dwant, 1e-12 * std::max(1.0, std::abs(dwant))) << activation_name(k) << " x=" << x[i];
    }
    EXPECT_TRUE(y.allFinite());
    EXPECT_TRUE(back.dx.allFinite());
    for (const double d : back.dparams) EXPECT_TRUE(std::isfinite(d));
  }
}

TEST(ArrayKernels, FloatStaysFinite) {
  const ArrayX<float> x = extreme_inputs().cast<float>();
  const ArrayX<float> g = ArrayX<float>::Ones(x.size());
  for (const auto& k : all_kinds()) {
    EXPECT_TRUE(activate<float>(x, k).allFinite()) << activation_name(k);
    const auto back = activate_backward<float>(x, g, k, true);
    EXPECT_TRUE(back.dx.allFinite()) << activation_name(k);
  }
}

TEST(ArrayKernels, FloatCloseToDouble) {
  const auto pts = uniform_points(5000, -12.0, 12.0, 5);
  ArrayX<double> xd = Eigen::Map<const ArrayX<double>>(pts.data(), static_cast<Index>(pts.size()));
  const ArrayX<float> xf = xd.cast<float>();
  xd = xf.cast<double>();
  for (const auto& k : all_kinds()) {
    const ArrayX<double> yd = activate<double>(xd, k);
    const ArrayX<double> yf = activate<float>(xf, k).cast<double>();
    EXPECT_LT(((yd - yf).abs() / (1.0 + yd.abs())).maxCoeff(), 1e-5) << activation_name(k);
  }
}

TEST(ArrayKernels, ParamGradsAreSums) {
  const ActivationKind k = act::Sqish{SqishParams(-0.3, 0.7, 1.9)};
  const auto pts = uniform_points(2500, -8.0, 8.0, 2);
  const ArrayX<double> x = Eigen::Map<const ArrayX<double>>(pts.data(), static_cast<Index>(pts.size()));
  const ArrayX<double> g = (x * 0.5).sin();
  const auto back = activate_backward<double>(x, g, k, true);
  std::array<double, 3> want{0.0, 0.0, 0.0};
  for (Index i = 0; i < x.size(); ++i) {
    const auto d = activate_grad_params(x[i], k);
    for (std::size_t s = 0; s < 3; ++s) want[s] += g[i] * d[s];
  }
  for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(back.dparams[s], want[s], 1e-10 * (1.0 + std::abs(want[s])));

  const auto no_params = activate_backward<double>(x, g, k, false);
  EXPECT_TRUE(no_params.dx.isApprox(back.dx));
  for (const double d : no_params.dparams) EXPECT_EQ(d, 0.0);
}

TEST(ArrayKernels, EmptyInput) {
  const ArrayX<double> x(0);
  EXPECT_EQ(activate<double>(x, act::Sqish{}).size(), 0);
  EXPECT_EQ(activate_backward<double>(x, x, act::Sqish{}, true).dx.size(), 0);
}

TEST(ArrayKernels, MismatchedUpstream) {
  const ArrayX<double> x = ArrayX<double>::Ones(4), g = ArrayX<double>::Ones(3);
  EXPECT_THROW(activate_backward<double>(x, g, act::Relu{}, false), StructuralError);
}

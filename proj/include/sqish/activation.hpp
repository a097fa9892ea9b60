// SPDX-License-Identifier: Apache-2.0
//
// Scalar Sqish activation, its smooth-max foundations and the baseline
// activations it is compared against. Everything here is a pure function.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "sqish/errors.hpp"

namespace sqish {

/// Which of (a, beta, gamma) receive gradient updates.
struct TrainableMask {
  bool a = true;
  bool beta = true;
  bool gamma = true;

  bool any() const { return a || beta || gamma; }
  bool operator==(const TrainableMask&) const = default;
};

/**
 * Parameters of the Sqish activation
 *
 *   f(x) = a x + (1 - a) x / sqrt(1 + beta exp(-2 gamma (1 - a) x))
 *
 * `a` is the slope of the negative asymptote and is left unconstrained.
 * `beta` and `gamma` must stay strictly positive; trained values are
 * projected onto [kMinPositive, inf) by `projected`.
 */
class SqishParams {
 public:
  static constexpr double kMinPositive = 1e-4;

  SqishParams() = default;

  SqishParams(double a, double beta, double gamma, TrainableMask mask = {})
      : a_(a), beta_(beta), gamma_(gamma), mask_(mask) {
    if (!std::isfinite(a)) throw DomainError("Sqish: a must be finite");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("Sqish: beta must be > 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("Sqish: gamma must be > 0");
  }

  /// Builds parameters from raw (possibly out-of-range) optimizer values.
  static SqishParams projected(double a, double beta, double gamma, TrainableMask mask = {}) {
    return {a, std::max(beta, kMinPositive), std::max(gamma, kMinPositive), mask};
  }

  double a() const { return a_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  const TrainableMask& trainable() const { return mask_; }

  bool operator==(const SqishParams&) const = default;

 private:
  double a_ = 0.0;
  double beta_ = 1.0;
  double gamma_ = 1.0;
  TrainableMask mask_{};
};

namespace act {
struct Relu {
  bool operator==(const Relu&) const = default;
};
struct LeakyRelu {
  double a = 0.01;
  bool operator==(const LeakyRelu&) const = default;
};
/// Leaky ReLU whose negative slope is trained.
struct Prelu {
  double a = 0.25;
  bool operator==(const Prelu&) const = default;
};
struct Elu {
  double alpha = 1.0;
  bool operator==(const Elu&) const = default;
};
/// x * sigmoid(beta x), beta trained.
struct Swish {
  double beta = 1.0;
  bool operator==(const Swish&) const = default;
};
/// Exact form x * Phi(x) with the Gaussian CDF.
struct Gelu {
  bool operator==(const Gelu&) const = default;
};
struct Mish {
  bool operator==(const Mish&) const = default;
};
struct Sqish {
  SqishParams params{};
  bool operator==(const Sqish&) const = default;
};
}  // namespace act

using ActivationKind = std::variant<act::Relu, act::LeakyRelu, act::Prelu, act::Elu, act::Swish,
                                    act::Gelu, act::Mish, act::Sqish>;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::string_view activation_name(const ActivationKind& kind);

/// Parses "relu", "leaky_relu", "prelu", "elu", "swish", "gelu", "mish", "sqish"
/// with default parameters. Throws ConfigError on unknown names.
ActivationKind parse_activation(std::string_view name);

/// Number of trainable scalars carried by the kind (0, 1 or 3).
int trainable_count(const ActivationKind& kind);

/// Throws DomainError if kind-specific parameters are invalid.
void validate(const ActivationKind& kind);

namespace detail {

/// Shared terms of the Sqish forward and gradient formulas, with
/// E = exp(-2 gamma (1 - a) x):
///   s = (1 + beta E)^(-1/2),  u = 1 - s,  t = E (1 + beta E)^(-3/2).
/// For z = -2 gamma (1 - a) x > 0 both are rewritten with m = exp(-z) so no
/// exponential ever exceeds 1.
template <typename T>
struct SqishTerms {
  T s;
  T u;
  T t;
};

template <typename T>
SqishTerms<T> sqish_terms(T x, T a, T beta, T gamma) {
  const T z = T(-2) * gamma * (T(1) - a) * x;
  const T m = std::exp(-std::abs(z));
  if (z > T(0)) {
    const T d = m + beta;
    const T rd = std::sqrt(d);
    const T rm = std::sqrt(m);
    const T s = rm / rd;
    return {s, T(1) - s, rm / (d * rd)};
  }
  const T d = T(1) + beta * m;
  const T rd = std::sqrt(d);
  return {T(1) / rd, beta * m / (rd * (rd + T(1))), m / (d * rd)};
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T softplus(T x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, T(0));
}

template <typename T>
T gaussian_cdf(T x) {
  return T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gaussian_pdf(T x) {
  return std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
}

template <typename T>
void require_positive_gamma(T gamma) {
  if (!(gamma > T(0)) || !std::isfinite(gamma)) throw DomainError("gamma must be > 0");
}

}  // namespace detail

/// x / sqrt(1 + exp(-2 gamma x)): smooth approximation of max(0, x).
template <typename T>
T smooth_relu_approx(T x, T gamma) {
  if (!std::isfinite(x)) throw DomainError("smooth_relu_approx: x must be finite");
  detail::require_positive_gamma(gamma);
  return x * detail::sqish_terms(x, T(0), T(1), gamma).s;
}

/// Smooth approximation of max(x1, x2), exact when x1 == x2.
template <typename T>
T smooth_max(T x1, T x2, T gamma) {
  detail::require_positive_gamma(gamma);
  const T diff = x2 - x1;
  return x1 + diff * detail::sqish_terms(diff, T(0), T(1), gamma).s;
}

/// Two-piece Maxout approximant smooth_max(a x, b x).
template <typename T>
T maxout_approx(T x, T a, T b, T gamma) {
  return smooth_max(a * x, b * x, gamma);
}

template <typename T>
T sqish_forward(T x, const SqishParams& p) {
  const T a = static_cast<T>(p.a());
  const auto k = detail::sqish_terms(x, a, static_cast<T>(p.beta()), static_cast<T>(p.gamma()));
  return a * x + (T(1) - a) * x * k.s;
}

template <typename T>
T sqish_grad_x(T x, const SqishParams& p) {
  const T a = static_cast<T>(p.a());
  const T beta = static_cast<T>(p.beta());
  const T gamma = static_cast<T>(p.gamma());
  const T c = T(1) - a;
  const auto k = detail::sqish_terms(x, a, beta, gamma);
  return a + c * k.s + c * c * beta * gamma * x * k.t;
}

template <typename T>
struct SqishParamGrad {
  T da;
  T dbeta;
  T dgamma;
};

template <typename T>
SqishParamGrad<T> sqish_grad_params(T x, const SqishParams& p) {
  const T a = static_cast<T>(p.a());
  const T beta = static_cast<T>(p.beta());
  const T gamma = static_cast<T>(p.gamma());
  const T c = T(1) - a;
  const auto k = detail::sqish_terms(x, a, beta, gamma);
  const T xt = x * k.t;
  return {x * k.u - beta * gamma * c * x * xt, T(-0.5) * c * xt, c * c * beta * x * xt};
}

/// Forward map of any activation kind.
template <typename T>
T activate(T x, const ActivationKind& kind) {
  return std::visit(
      Overloaded{
          [&](const act::Relu&) { return x > T(0) ? x : T(0); },
          [&](const act::LeakyRelu& k) { return x > T(0) ? x : static_cast<T>(k.a) * x; },
          [&](const act::Prelu& k) { return x > T(0) ? x : static_cast<T>(k.a) * x; },
          [&](const act::Elu& k) { return x > T(0) ? x : static_cast<T>(k.alpha) * std::expm1(x); },
          [&](const act::Swish& k) { return x * detail::sigmoid(static_cast<T>(k.beta) * x); },
          [&](const act::Gelu&) { return x * detail::gaussian_cdf(x); },
          [&](const act::Mish&) { return x * std::tanh(detail::softplus(x)); },
          [&](const act::Sqish& k) { return sqish_forward(x, k.params); },
      },
      kind);
}

/// Input gradient of any activation kind. Subgradient convention at the
/// kink: ReLU'(0) = 0, LeakyReLU'(0) = PReLU'(0) = a.
template <typename T>
T activate_grad_x(T x, const ActivationKind& kind) {
  return std::visit(
      Overloaded{
          [&](const act::Relu&) { return x > T(0) ? T(1) : T(0); },
          [&](const act::LeakyRelu& k) { return x > T(0) ? T(1) : static_cast<T>(k.a); },
          [&](const act::Prelu& k) { return x > T(0) ? T(1) : static_cast<T>(k.a); },
          [&](const act::Elu& k) { return x > T(0) ? T(1) : static_cast<T>(k.alpha) * std::exp(x); },
          [&](const act::Swish& k) {
            const T bx = static_cast<T>(k.beta) * x;
            const T sg = detail::sigmoid(bx);
            return sg + bx * sg * (T(1) - sg);
          },
          [&](const act::Gelu&) { return detail::gaussian_cdf(x) + x * detail::gaussian_pdf(x); },
          [&](const act::Mish&) {
            const T th = std::tanh(detail::softplus(x));
            return th + x * (T(1) - th * th) * detail::sigmoid(x);
          },
          [&](const act::Sqish& k) { return sqish_grad_x(x, k.params); },
      },
      kind);
}

/// Gradients with respect to the trainable parameters, in declaration order
/// (PReLU: {da}, Swish: {dbeta}, Sqish: {da, dbeta, dgamma}); unused slots are 0.
template <typename T>
std::array<T, 3> activate_grad_params(T x, const ActivationKind& kind) {
  return std::visit(
      Overloaded{
          [&](const act::Prelu&) { return std::array<T, 3>{x > T(0) ? T(0) : x, T(0), T(0)}; },
          [&](const act::Swish& k) {
            const T sg = detail::sigmoid(static_cast<T>(k.beta) * x);
            return std::array<T, 3>{x * x * sg * (T(1) - sg), T(0), T(0)};
          },
          [&](const act::Sqish& k) {
            const auto g = sqish_grad_params(x, k.params);
            return std::array<T, 3>{g.da, g.dbeta, g.dgamma};
          },
          [&](const auto&) { return std::array<T, 3>{T(0), T(0), T(0)}; },
      },
      kind);
}

/// Uniform grid lo, lo + step, ..., up to hi.
struct Grid {
  double lo;
  double hi;
  double step;

  std::size_t size() const;
  double at(std::size_t i) const { return lo + static_cast<double>(i) * step; }
};

/// sup over the grid of |Sqish(x; p) - target(x)| where target is ReLU or
/// Leaky ReLU. Throws DomainError for other targets or an empty grid.
double approx_gap(const ActivationKind& target, const SqishParams& p, const Grid& grid);

}  // namespace sqish

// SPDX-License-Identifier: Apache-2.0
#include "sqish/certify.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "sqish/activation_array.hpp"

namespace sqish {
namespace {

struct Sample {
  double x;
  SqishParams p;
};

bool near_kink(const ActivationKind& kind, double x) {
  const bool kinked = std::holds_alternative<act::Relu>(kind) || std::holds_alternative<act::LeakyRelu>(kind) ||
                      std::holds_alternative<act::Prelu>(kind) || std::holds_alternative<act::Elu>(kind);
  return kinked && std::abs(x) < 1e-3;
}

std::vector<Sample> draw(std::size_t n, std::uint64_t seed, const ActivationKind& kind) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-10.0, 10.0), ua(-0.5, 0.9), ubg(0.1, 10.0);
  std::vector<Sample> out;
  out.reserve(n);
  while (out.size() < n) {
    const double x = ux(rng);
    const double a = ua(rng), b = ubg(rng), g = ubg(rng);
    if (near_kink(kind, x)) continue;
    out.push_back({x, SqishParams(a, b, g)});
  }
  return out;
}

double numeric(const ScalarFn& f, double at, double h, const std::string& op) {
  try {
    return central_difference(f, at, h);
  } catch (const OracleError& e) {
    std::ostringstream os;
    os << op << " at " << at << ": " << e.what();
    throw OracleError(os.str());
  }
}

/// Kind with the sampled Sqish parameters substituted in.
ActivationKind with_params(const ActivationKind& kind, const SqishParams& p) {
  if (std::holds_alternative<act::Sqish>(kind)) return act::Sqish{p};
  return kind;
}

ActivationKind with_param(const ActivationKind& kind, std::size_t slot, double v, const SqishParams& p) {
  return std::visit(Overloaded{
                        [&](const act::Prelu&) -> ActivationKind { return act::Prelu{v}; },
                        [&](const act::Swish&) -> ActivationKind { return act::Swish{v}; },
                        [&](const act::Sqish&) -> ActivationKind {
                          return act::Sqish{SqishParams(slot == 0 ? v : p.a(), slot == 1 ? v : p.beta(),
                                                        slot == 2 ? v : p.gamma())};
                        },
                        [&](const auto& k) -> ActivationKind { return k; },
                    },
                    kind);
}

double param_value(const ActivationKind& kind, std::size_t slot) {
  return std::visit(Overloaded{
                        [](const act::Prelu& k) { return k.a; },
                        [](const act::Swish& k) { return k.beta; },
                        [&](const act::Sqish& k) {
                          return slot == 0 ? k.params.a() : slot == 1 ? k.params.beta() : k.params.gamma();
                        },
                        [](const auto&) { return 0.0; },
                    },
                    kind);
}

const char* param_label(const ActivationKind& kind, std::size_t slot) {
  if (std::holds_alternative<act::Swish>(kind)) return "dbeta";
  if (std::holds_alternative<act::Prelu>(kind)) return "da";
  return slot == 0 ? "da" : slot == 1 ? "dbeta" : "dgamma";
}

std::vector<ActivationKind> certified_kinds() {
  return {act::Relu{}, act::LeakyRelu{0.1}, act::Prelu{0.25}, act::Elu{1.0},
          act::Swish{1.5}, act::Gelu{},     act::Mish{},       act::Sqish{}};
}

}  // namespace

std::vector<GradCheckReport> certify_activations(std::size_t points, std::uint64_t seed, GradTolerance tol) {
  std::vector<GradCheckReport> reports;
  for (const auto& base : certified_kinds()) {
    const std::string name(activation_name(base));
    const auto samples = draw(points, seed, base);
    GradCheckAccumulator dx(name + ".dx", tol);
    for (const auto& s : samples) {
      const ActivationKind k = with_params(base, s.p);
      const double num = numeric([&](double x) { return activate(x, k); }, s.x, tol.h, name + ".dx");
      dx.add(activate_grad_x(s.x, k), num, {s.x, s.p.a(), s.p.beta(), s.p.gamma()});
    }
    reports.push_back(dx.report());
    const int slots = trainable_count(base);
    for (int slot = 0; slot < slots; ++slot) {
      const auto j = static_cast<std::size_t>(slot);
      GradCheckAccumulator acc(name + "." + param_label(base, j), tol);
      for (const auto& s : samples) {
        const ActivationKind k = with_params(base, s.p);
        const double at = param_value(k, j);
        const double num = numeric([&](double v) { return activate(s.x, with_param(k, j, v, s.p)); }, at, tol.h,
                                   acc.report().op_name);
        acc.add(activate_grad_params(s.x, k)[j], num, {s.x, s.p.a(), s.p.beta(), s.p.gamma()});
      }
      reports.push_back(acc.report());
    }
  }
  return reports;
}

std::vector<GradCheckReport> certify_array_kernels(std::size_t points, std::uint64_t seed) {
  std::vector<GradCheckReport> reports;
  const GradTolerance tol{1e-10, 1e-12, 0.0};
  for (const auto& base : certified_kinds()) {
    const auto samples = draw(points, seed, base);
    // One parameter set per call, shared by a small block of inputs.
    const SqishParams p = samples.front().p;
    const ActivationKind k = with_params(base, p);
    ArrayX<double> x(static_cast<Index>(samples.size())), g(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      x[i] = samples[static_cast<std::size_t>(i)].x;
      g[i] = 1.0 + 0.25 * std::sin(static_cast<double>(i));
    }
    const ArrayX<double> y = activate<double>(x, k);
    const auto back = activate_backward<double>(x, g, k, true);
    const std::string name(activation_name(base));
    GradCheckAccumulator acc(name + ".array", tol);
    std::array<double, 3> ref{0.0, 0.0, 0.0};
    for (Index i = 0; i < x.size(); ++i) {
      acc.add(y[i], activate(x[i], k), {x[i]});
      acc.add(back.dx[i], g[i] * activate_grad_x(x[i], k), {x[i]});
      const auto dp = activate_grad_params(x[i], k);
      for (std::size_t s = 0; s < 3; ++s) ref[s] += g[i] * dp[s];
    }
    reports.push_back(acc.report());
    GradCheckAccumulator sums(name + ".array.dparams", {1e-9, 1e-10, 0.0});
    for (std::size_t s = 0; s < 3; ++s) sums.add(back.dparams[s], ref[s], {static_cast<double>(s)});
    reports.push_back(sums.report());
  }
  return reports;
}

GradCheckReport check_network_gradients(Network<double>& net, const Tensor<double>& x, std::span<const int> labels,
                                        GradTolerance tol) {
  net.zero_grad();
  auto fwd = net.forward(x);
  const auto loss = softmax_cross_entropy(fwd.logits, labels);
  net.backward(fwd.cache, loss.dlogits);
  const auto loss_at = [&](const Network<double>& n) { return softmax_cross_entropy(n.predict(x), labels).loss; };
  GradCheckAccumulator acc("network", tol);
  std::size_t param_index = 0;
  for (auto& slot : net.parameters()) {
    for (Index i = 0; i < slot.value->size(); ++i) {
      double& w = (*slot.value)[i];
      const double saved = w;
      const double num = numeric(
          [&](double v) {
            w = v;
            return loss_at(net);
          },
          saved, tol.h, "network param " + std::to_string(param_index));
      w = saved;
      acc.add((*slot.grad)[i], num, {static_cast<double>(param_index), static_cast<double>(i)});
    }
    ++param_index;
  }
  net.zero_grad();
  net.mark_updated();
  return acc.report();
}

GradCheckReport check_input_gradient(const Network<double>& net, const Tensor<double>& x, std::span<const int> labels,
                                     GradTolerance tol) {
  auto fwd = net.forward(x);
  const auto loss = softmax_cross_entropy(fwd.logits, labels);
  const Tensor<double> grad = net.input_gradient(fwd.cache, loss.dlogits);
  GradCheckAccumulator acc("input", tol);
  Tensor<double> probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double num = numeric(
        [&](double v) {
          probe[i] = v;
          return softmax_cross_entropy(net.predict(probe), labels).loss;
        },
        x[i], tol.h, "input element " + std::to_string(i));
    probe[i] = x[i];
    acc.add(grad[i], num, {static_cast<double>(i)});
  }
  return acc.report();
}

}  // namespace sqish

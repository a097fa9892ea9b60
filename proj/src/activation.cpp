// SPDX-License-Identifier: Apache-2.0
#include "sqish/activation.hpp"

#include <string>

namespace sqish {

std::string_view activation_name(const ActivationKind& kind) {
  return std::visit(Overloaded{
                        [](const act::Relu&) { return std::string_view{"relu"}; },
                        [](const act::LeakyRelu&) { return std::string_view{"leaky_relu"}; },
                        [](const act::Prelu&) { return std::string_view{"prelu"}; },
                        [](const act::Elu&) { return std::string_view{"elu"}; },
                        [](const act::Swish&) { return std::string_view{"swish"}; },
                        [](const act::Gelu&) { return std::string_view{"gelu"}; },
                        [](const act::Mish&) { return std::string_view{"mish"}; },
                        [](const act::Sqish&) { return std::string_view{"sqish"}; },
                    },
                    kind);
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "relu") return act::Relu{};
  if (name == "leaky_relu" || name == "lrelu") return act::LeakyRelu{};
  if (name == "prelu") return act::Prelu{};
  if (name == "elu") return act::Elu{};
  if (name == "swish") return act::Swish{};
  if (name == "gelu") return act::Gelu{};
  if (name == "mish") return act::Mish{};
  if (name == "sqish") return act::Sqish{};
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

int trainable_count(const ActivationKind& kind) {
  return std::visit(Overloaded{
                        [](const act::Prelu&) { return 1; },
                        [](const act::Swish&) { return 1; },
                        [](const act::Sqish&) { return 3; },
                        [](const auto&) { return 0; },
                    },
                    kind);
}

void validate(const ActivationKind& kind) {
  std::visit(Overloaded{
                 [](const act::LeakyRelu& k) {
                   if (!std::isfinite(k.a)) throw DomainError("leaky_relu: slope must be finite");
                 },
                 [](const act::Prelu& k) {
                   if (!std::isfinite(k.a)) throw DomainError("prelu: slope must be finite");
                 },
                 [](const act::Elu& k) {
                   if (!(k.alpha > 0.0) || !std::isfinite(k.alpha)) throw DomainError("elu: alpha must be > 0");
                 },
                 [](const act::Swish& k) {
                   if (!std::isfinite(k.beta)) throw DomainError("swish: beta must be finite");
                 },
                 [](const act::Sqish& k) {
                   // Re-run the constructor checks.
                   SqishParams(k.params.a(), k.params.beta(), k.params.gamma());
                 },
                 [](const auto&) {},
             },
             kind);
}

std::size_t Grid::size() const {
  if (!(step > 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) return 0;
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

double approx_gap(const ActivationKind& target, const SqishParams& p, const Grid& grid) {
  if (!std::holds_alternative<act::Relu>(target) && !std::holds_alternative<act::LeakyRelu>(target)) {
    throw DomainError("approx_gap: target must be relu or leaky_relu");
  }
  validate(target);
  const std::size_t n = grid.size();
  if (n == 0) throw DomainError("approx_gap: empty grid");
  double gap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid.at(i);
    gap = std::max(gap, std::abs(sqish_forward(x, p) - activate(x, target)));
  }
  return gap;
}

}  // namespace sqish

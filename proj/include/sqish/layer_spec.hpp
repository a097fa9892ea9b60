// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sqish/activation.hpp"
#include "sqish/tensor.hpp"

namespace sqish {

struct DenseSpec {
  Index in = 0;
  Index out = 0;
  bool operator==(const DenseSpec&) const = default;
};

/// Square kernels, zero padding.
struct Conv2DSpec {
  Index in_ch = 0;
  Index out_ch = 0;
  Index kernel = 3;
  Index stride = 1;
  Index pad = 0;
  bool operator==(const Conv2DSpec&) const = default;
};

struct MaxPoolSpec {
  Index kernel = 2;
  Index stride = 2;
  bool operator==(const MaxPoolSpec&) const = default;
};

struct FlattenSpec {
  bool operator==(const FlattenSpec&) const = default;
};

struct ActivationSpec {
  ActivationKind kind = act::Sqish{};
  bool operator==(const ActivationSpec&) const = default;
};

using LayerSpec = std::variant<DenseSpec, Conv2DSpec, MaxPoolSpec, FlattenSpec, ActivationSpec>;

/**
 * Parses a comma-separated layer list:
 *
 *   dense:IN:OUT
 *   conv:IN_CH:OUT_CH:K[:STRIDE[:PAD]]
 *   pool:K[:STRIDE]
 *   flatten
 *   act            (uses `activation`)
 *
 * Throws ConfigError on malformed entries.
 */
std::vector<LayerSpec> parse_architecture(std::string_view text, const ActivationKind& activation);

/// Conv(1->8,3x3,pad 1)-act-MaxPool(2)-Conv(8->16,3x3,pad 1)-act-MaxPool(2)-Flatten-Dense(784->10)
/// for 1x28x28 inputs.
std::vector<LayerSpec> default_cnn(const ActivationKind& activation);

/// in -> hidden... -> out with `activation` after every hidden dense layer.
std::vector<LayerSpec> mlp(Index in, const std::vector<Index>& hidden, Index out,
                           const ActivationKind& activation);

}  // namespace sqish

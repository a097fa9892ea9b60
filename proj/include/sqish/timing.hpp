// SPDX-License-Identifier: Apache-2.0
//
// Forward/backward microbenchmarks of the vectorized activation kernels.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sqish/activation_array.hpp"
#include "sqish/report.hpp"

namespace sqish {

/// Calls are split into this many consecutive groups for median-of-means.
inline constexpr int kTimingGroups = 5;

/// Deterministic benchmark input, uniform on [-4, 4).
ArrayX<float> timing_input(const Shape& shape, std::uint64_t seed);

/**
 * Times `iters` forward and `iters` backward calls after `warmup` untimed
 * calls of each. Backward includes the parameter-gradient sums when the
 * kind has trainable parameters and `param_grads` is set. Throws
 * DomainError for iters < 30 or warmup < 5.
 */
TimingRecord time_activation(const std::string& label, const ActivationKind& kind, const ArrayX<float>& input,
                             const Shape& shape, int iters, int warmup, bool param_grads = true);

/// The benchmarked kinds: the eight activations plus Sqish with frozen
/// parameters (forward identical, backward without parameter gradients).
std::vector<std::pair<std::string, ActivationKind>> timing_kinds();

/// One record per timing_kinds() entry, all on the same input buffer.
std::vector<TimingRecord> time_all_activations(const Shape& shape, int iters, int warmup, std::uint64_t seed);

}  // namespace sqish

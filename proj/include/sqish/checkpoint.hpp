// SPDX-License-Identifier: Apache-2.0
//
// JSON network checkpoints: layer list, activation parameters, every
// parameter tensor and the init seed. Values are written with enough digits
// to reload bit-exactly in the stored precision.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sqish/network.hpp"

namespace sqish {

inline constexpr int kCheckpointVersion = 1;

template <typename T>
std::string checkpoint_to_json(const Network<T>& net);

/// Throws FormatError on malformed input, an unknown version or a precision
/// that differs from T.
template <typename T>
Network<T> checkpoint_from_json(std::string_view text);

/// Throws DataError naming the path on IO failure.
template <typename T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path);

template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace sqish

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <exception>
#include <ostream>

#include "sqish/config.hpp"
#include "sqish/report.hpp"

namespace sqish {

enum class ExitCode : int { Ok = 0, Usage = 1, Config = 2, Data = 3, Numerical = 4, Internal = 5 };

/// ConfigError / DomainError -> Config, DataError / FormatError -> Data,
/// NumericalError -> Numerical, anything else -> Internal.
ExitCode exit_code_for(const std::exception& e);

/// Numerical when any seed failed or a gradient check did not pass.
ExitCode exit_code_for(const RunReport& report);

/**
 * Runs cfg.task once per seed and fills the summary block. A non-finite
 * training loss aborts only that seed: its run is marked
 * "numerical_failure" and report.ok becomes false. Missing data files throw
 * DataError; an invalid config throws ConfigError. Progress lines go to
 * `log` when it is non-null.
 */
RunReport run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

}  // namespace sqish

// SPDX-License-Identifier: Apache-2.0
//
// Run reports and their JSON / CSV serialization.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sqish/gradcheck.hpp"
#include "sqish/robustness.hpp"
#include "sqish/tensor.hpp"
#include "sqish/train.hpp"

namespace sqish {

inline constexpr int kReportSchemaVersion = 1;

/// Forward/backward wall time of one activation kind, in microseconds per call.
struct TimingRecord {
  std::string op;
  Shape shape;
  int iters = 0;
  int warmup = 0;
  double forward_mean_us = 0.0;
  double forward_std_us = 0.0;
  double forward_median_of_means_us = 0.0;
  double backward_mean_us = 0.0;
  double backward_std_us = 0.0;
  double backward_median_of_means_us = 0.0;

  bool operator==(const TimingRecord&) const = default;
};

/// Final (a, beta, gamma)-style parameters of one activation layer.
struct ActivationState {
  std::size_t layer = 0;
  std::string kind;
  std::vector<double> params;

  bool operator==(const ActivationState&) const = default;
};

/// Everything produced by one seed.
struct SeedRun {
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | numerical_failure
  std::string message;
  std::vector<EpochMetrics> epochs;
  double final_test_loss = 0.0;
  double final_test_acc = 0.0;
  std::vector<AttackResult> attacks;
  std::optional<FitResult> fit;
  std::vector<ActivationState> activations;
  double wall_seconds = 0.0;

  bool operator==(const SeedRun&) const = default;
};

/// Mean and (for >= 2 values) sample standard deviation of one metric.
struct SummaryStat {
  std::string metric;
  std::size_t count = 0;
  double mean = 0.0;
  std::optional<double> std;

  bool operator==(const SummaryStat&) const = default;
};

struct RunReport {
  int schema_version = kReportSchemaVersion;
  std::string task;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<SeedRun> runs;
  std::vector<SummaryStat> summary;
  std::vector<TimingRecord> timings;
  std::vector<GradCheckReport> gradchecks;
  double wall_seconds = 0.0;
  bool ok = true;
  std::string error;

  bool operator==(const RunReport&) const = default;
};

SummaryStat summarize(std::string metric, const std::vector<double>& values);

/// Fills report.summary from the per-seed runs.
void summarize_runs(RunReport& report);

/// Non-finite numbers are written as the strings "nan", "inf", "-inf".
std::string report_to_json(const RunReport& report);

/// Throws FormatError on malformed JSON or a schema version mismatch.
RunReport report_from_json(std::string_view text);

/// Wall-clock fields are the only non-deterministic parts of a report.
RunReport without_wall_clock(RunReport report);

/// Writes report.json plus one CSV per non-empty table (epochs, summary,
/// attacks, fit, timing, gradcheck, activations). Returns the files written.
/// Throws DataError naming the path on IO failure.
std::vector<std::filesystem::path> emit_report(const RunReport& report, const std::filesystem::path& dir);

RunReport load_report(const std::filesystem::path& json_path);

}  // namespace sqish

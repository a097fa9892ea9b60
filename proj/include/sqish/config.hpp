// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: a key = value text file plus flag overrides.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sqish/activation.hpp"
#include "sqish/layer_spec.hpp"
#include "sqish/train.hpp"

namespace sqish {

enum class Task { Classify, Attack, Mixup, ApproxFit, Timing, Gradcheck };
enum class Precision { F32, F64 };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);  // also accepts the CLI spelling "fit-sin"

struct ExperimentConfig {
  Task task = Task::Classify;

  std::string dataset = "mnist";  // mnist | spirals
  std::string data_root;          // empty: $SQISH_DATA_ROOT
  Index train_limit = 0;          // 0: whole split
  Index test_limit = 0;
  Index spiral_points = 1000;
  double spiral_noise = 0.0;

  std::string architecture = "default";
  std::string activation = "sqish";
  double leaky_slope = 0.01;
  double prelu_slope = 0.25;
  double elu_alpha = 1.0;
  double swish_beta = 1.0;
  double sqish_a = 0.0;
  double sqish_beta = 1.0;
  double sqish_gamma = 1.0;
  TrainableMask sqish_trainable{};

  TrainConfig train{};
  std::vector<std::uint64_t> seeds{0};
  Precision precision = Precision::F32;

  std::vector<double> epsilons{0.04};
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;

  int timing_iters = 30;
  int timing_warmup = 5;
  Shape timing_shape{1, 3, 224, 224};

  int fit_steps = 5000;
  Index fit_hidden = 64;
  double fit_lr = 0.01;
  double fit_target = 1e-3;

  std::size_t gradcheck_points = 1000;

  std::string output_dir = "results";
  bool save_checkpoints = false;  // one checkpoint per seed in output_dir

  /// The configured activation with its parameters.
  ActivationKind activation_kind() const;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

/// Sets one key. Throws ConfigError for unknown keys or unparsable values.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Parses "key = value" lines; '#' starts a comment. Later keys win.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});

/// Throws DataError if the file cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Every key with its current value, in a fixed order. Feeding the pairs
/// back through apply_setting reproduces the config.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);

/// Dataset root: the config value, else $SQISH_DATA_ROOT, else empty.
std::filesystem::path resolve_data_root(const ExperimentConfig& cfg);

/// The layer list the config describes ("default" picks the small CNN for
/// image data and a 2-32-32-2 MLP for spirals).
std::vector<LayerSpec> resolve_architecture(const ExperimentConfig& cfg);

}  // namespace sqish

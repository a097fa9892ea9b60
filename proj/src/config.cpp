// SPDX-License-Identifier: Apache-2.0
#include "sqish/config.hpp"

#include "sqish/robustness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace sqish {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(trim(text.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config: bad value '" + std::string(value) + "' for '" + std::string(key) + "' (expected " +
                    std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

template <typename I>
I to_int(std::string_view key, std::string_view v) {
  I out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true/false");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename Range, typename F>
std::string join(const Range& r, const char* sep, F f) {
  std::string out;
  for (const auto& x : r) {
    if (!out.empty()) out += sep;
    out += f(x);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define SQISH_DOUBLE_KEY(key, field)                                                    \
  Key {                                                                                  \
    key, [](ExperimentConfig& c, std::string_view v) { c.field = to_double(key, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.field); }                           \
  }
#define SQISH_INT_KEY(key, field)                                                                       \
  Key {                                                                                                  \
    key, [](ExperimentConfig& c, std::string_view v) { c.field = to_int<decltype(c.field)>(key, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                                \
  }
#define SQISH_BOOL_KEY(key, field)                                                    \
  Key {                                                                                \
    key, [](ExperimentConfig& c, std::string_view v) { c.field = to_bool(key, v); }, \
        [](const ExperimentConfig& c) { return fmt_bool(c.field); }                    \
  }
#define SQISH_STRING_KEY(key, field)                                                   \
  Key {                                                                                 \
    key, [](ExperimentConfig& c, std::string_view v) { c.field = std::string(v); },   \
        [](const ExperimentConfig& c) { return c.field; }                               \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"task", [](ExperimentConfig& c, std::string_view v) { c.task = parse_task(v); },
       [](const ExperimentConfig& c) { return std::string(task_name(c.task)); }},
      {"dataset",
       [](ExperimentConfig& c, std::string_view v) {
         if (v != "mnist" && v != "spirals") bad_value("dataset", v, "mnist or spirals");
         c.dataset = std::string(v);
       },
       [](const ExperimentConfig& c) { return c.dataset; }},
      SQISH_STRING_KEY("data_root", data_root),
      SQISH_INT_KEY("train_limit", train_limit),
      SQISH_INT_KEY("test_limit", test_limit),
      SQISH_INT_KEY("spiral_points", spiral_points),
      SQISH_DOUBLE_KEY("spiral_noise", spiral_noise),
      SQISH_STRING_KEY("architecture", architecture),
      {"activation",
       [](ExperimentConfig& c, std::string_view v) {
         parse_activation(v);
         c.activation = std::string(v);
       },
       [](const ExperimentConfig& c) { return c.activation; }},
      SQISH_DOUBLE_KEY("leaky_slope", leaky_slope),
      SQISH_DOUBLE_KEY("prelu_slope", prelu_slope),
      SQISH_DOUBLE_KEY("elu_alpha", elu_alpha),
      SQISH_DOUBLE_KEY("swish_beta", swish_beta),
      SQISH_DOUBLE_KEY("sqish_a", sqish_a),
      SQISH_DOUBLE_KEY("sqish_beta", sqish_beta),
      SQISH_DOUBLE_KEY("sqish_gamma", sqish_gamma),
      {"sqish_trainable",
       [](ExperimentConfig& c, std::string_view v) {
         TrainableMask m{false, false, false};
         if (v != "none") {
           for (const auto part : split(v, ',')) {
             if (part == "a") {
               m.a = true;
             } else if (part == "beta") {
               m.beta = true;
             } else if (part == "gamma") {
               m.gamma = true;
             } else {
               bad_value("sqish_trainable", v, "a subset of a,beta,gamma or none");
             }
           }
         }
         c.sqish_trainable = m;
       },
       [](const ExperimentConfig& c) {
         std::vector<std::string> parts;
         if (c.sqish_trainable.a) parts.emplace_back("a");
         if (c.sqish_trainable.beta) parts.emplace_back("beta");
         if (c.sqish_trainable.gamma) parts.emplace_back("gamma");
         return parts.empty() ? std::string("none") : join(parts, ",", [](const std::string& s) { return s; });
       }},
      SQISH_INT_KEY("epochs", train.epochs),
      SQISH_INT_KEY("batch_size", train.batch_size),
      SQISH_DOUBLE_KEY("lr", train.lr),
      SQISH_DOUBLE_KEY("lr_min", train.lr_min),
      {"schedule",
       [](ExperimentConfig& c, std::string_view v) {
         if (v != "cosine" && v != "constant") bad_value("schedule", v, "cosine or constant");
         c.train.cosine = v == "cosine";
       },
       [](const ExperimentConfig& c) { return std::string(c.train.cosine ? "cosine" : "constant"); }},
      {"optimizer",
       [](ExperimentConfig& c, std::string_view v) {
         if (v != "sgd" && v != "adam") bad_value("optimizer", v, "sgd or adam");
         c.train.optimizer = v == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
       },
       [](const ExperimentConfig& c) {
         return std::string(c.train.optimizer == OptimizerKind::Sgd ? "sgd" : "adam");
       }},
      SQISH_DOUBLE_KEY("momentum", train.sgd.momentum),
      SQISH_DOUBLE_KEY("weight_decay", train.sgd.weight_decay),
      SQISH_DOUBLE_KEY("adam_beta1", train.adam.beta1),
      SQISH_DOUBLE_KEY("adam_beta2", train.adam.beta2),
      SQISH_DOUBLE_KEY("adam_eps", train.adam.eps),
      SQISH_DOUBLE_KEY("adam_weight_decay", train.adam.weight_decay),
      SQISH_BOOL_KEY("shuffle", train.shuffle),
      SQISH_BOOL_KEY("mixup", train.mixup),
      SQISH_DOUBLE_KEY("mixup_alpha", train.mixup_alpha),
      {"seeds",
       [](ExperimentConfig& c, std::string_view v) {
         std::vector<std::uint64_t> seeds;
         for (const auto part : split(v, ',')) seeds.push_back(to_int<std::uint64_t>("seeds", part));
         c.seeds = std::move(seeds);
       },
       [](const ExperimentConfig& c) {
         return join(c.seeds, ",", [](std::uint64_t s) { return std::to_string(s); });
       }},
      {"precision",
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "f32" || v == "float32") {
           c.precision = Precision::F32;
         } else if (v == "f64" || v == "float64") {
           c.precision = Precision::F64;
         } else {
           bad_value("precision", v, "f32 or f64");
         }
       },
       [](const ExperimentConfig& c) { return std::string(c.precision == Precision::F32 ? "f32" : "f64"); }},
      {"epsilons",
       [](ExperimentConfig& c, std::string_view v) {
         std::vector<double> eps;
         for (const auto part : split(v, ',')) eps.push_back(to_double("epsilons", part));
         c.epsilons = std::move(eps);
       },
       [](const ExperimentConfig& c) { return join(c.epsilons, ",", fmt); }},
      SQISH_DOUBLE_KEY("clamp_lo", clamp_lo),
      SQISH_DOUBLE_KEY("clamp_hi", clamp_hi),
      SQISH_INT_KEY("timing_iters", timing_iters),
      SQISH_INT_KEY("timing_warmup", timing_warmup),
      {"timing_shape",
       [](ExperimentConfig& c, std::string_view v) {
         Shape shape;
         for (const auto part : split(v, 'x')) shape.push_back(to_int<Index>("timing_shape", part));
         c.timing_shape = std::move(shape);
       },
       [](const ExperimentConfig& c) {
         return join(c.timing_shape, "x", [](Index d) { return std::to_string(d); });
       }},
      SQISH_INT_KEY("fit_steps", fit_steps),
      SQISH_INT_KEY("fit_hidden", fit_hidden),
      SQISH_DOUBLE_KEY("fit_lr", fit_lr),
      SQISH_DOUBLE_KEY("fit_target", fit_target),
      SQISH_INT_KEY("gradcheck_points", gradcheck_points),
      SQISH_STRING_KEY("output_dir", output_dir),
      SQISH_BOOL_KEY("save_checkpoints", save_checkpoints),
  };
  return table;
}

#undef SQISH_DOUBLE_KEY
#undef SQISH_INT_KEY
#undef SQISH_BOOL_KEY
#undef SQISH_STRING_KEY

}  // namespace

std::string_view task_name(Task task) {
  switch (task) {
    case Task::Classify: return "classify";
    case Task::Attack: return "attack";
    case Task::Mixup: return "mixup";
    case Task::ApproxFit: return "approx_fit";
    case Task::Timing: return "timing";
    case Task::Gradcheck: return "gradcheck";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  for (const Task t : {Task::Classify, Task::Attack, Task::Mixup, Task::ApproxFit, Task::Timing, Task::Gradcheck}) {
    if (name == task_name(t)) return t;
  }
  if (name == "fit-sin" || name == "fit_sin") return Task::ApproxFit;
  throw ConfigError("config: unknown task '" + std::string(name) + "'");
}

ActivationKind ExperimentConfig::activation_kind() const {
  ActivationKind kind = parse_activation(activation);
  std::visit(Overloaded{
                 [&](act::LeakyRelu& k) { k.a = leaky_slope; },
                 [&](act::Prelu& k) { k.a = prelu_slope; },
                 [&](act::Elu& k) { k.alpha = elu_alpha; },
                 [&](act::Swish& k) { k.beta = swish_beta; },
                 [&](act::Sqish& k) {
                   try {
                     k.params = SqishParams(sqish_a, sqish_beta, sqish_gamma, sqish_trainable);
                   } catch (const DomainError& e) {
                     throw ConfigError(std::string("config: ") + e.what());
                   }
                 },
                 [](auto&) {},
             },
             kind);
  return kind;
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  try {
    sqish::validate(activation_kind());
  } catch (const DomainError& e) {
    fail(e.what());
  }
  if (train.epochs < 1) fail("epochs must be >= 1");
  if (train.batch_size < 1) fail("batch_size must be >= 1");
  if (!(train.lr >= 0.0) || !(train.lr_min >= 0.0)) fail("learning rates must be >= 0");
  if (!(train.sgd.momentum >= 0.0 && train.sgd.momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (train.sgd.weight_decay < 0.0 || train.adam.weight_decay < 0.0) fail("weight decay must be >= 0");
  if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0) || !(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0)) {
    fail("adam betas must be in [0, 1)");
  }
  if (!(train.adam.eps > 0.0)) fail("adam_eps must be > 0");
  if (!(train.mixup_alpha > 0.0)) fail("mixup_alpha must be > 0");
  if (seeds.empty()) fail("at least one seed is required");
  if (train_limit < 0 || test_limit < 0) fail("limits must be >= 0");
  if (spiral_points < 2 || spiral_points % 2 != 0) fail("spiral_points must be even and >= 2");
  if (spiral_noise < 0.0) fail("spiral_noise must be >= 0");
  if (epsilons.empty()) fail("at least one epsilon is required");
  for (const double e : epsilons) {
    AttackConfig ac{e, clamp_lo, clamp_hi};
    try {
      ac.validate();
    } catch (const DomainError& err) {
      fail(err.what());
    }
  }
  if (timing_iters < 30) fail("timing_iters must be >= 30");
  if (timing_warmup < 5) fail("timing_warmup must be >= 5");
  if (timing_shape.empty() || std::any_of(timing_shape.begin(), timing_shape.end(), [](Index d) { return d < 1; })) {
    fail("timing_shape dimensions must be >= 1");
  }
  if (fit_steps < 1 || fit_hidden < 1 || !(fit_lr > 0.0) || !(fit_target > 0.0)) fail("invalid fit settings");
  if (gradcheck_points < 1) fail("gradcheck_points must be >= 1");
  if (output_dir.empty()) fail("output_dir must not be empty");
  resolve_architecture(*this);
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::filesystem::path resolve_data_root(const ExperimentConfig& cfg) {
  if (!cfg.data_root.empty()) return cfg.data_root;
  if (const char* env = std::getenv("SQISH_DATA_ROOT"); env != nullptr && *env != '\0') return env;
  return {};
}

std::vector<LayerSpec> resolve_architecture(const ExperimentConfig& cfg) {
  const ActivationKind kind = cfg.activation_kind();
  if (cfg.architecture != "default") return parse_architecture(cfg.architecture, kind);
  if (cfg.dataset == "spirals") return mlp(2, {32, 32}, 2, kind);
  return default_cnn(kind);
}

}  // namespace sqish

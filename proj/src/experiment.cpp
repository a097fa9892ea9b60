// SPDX-License-Identifier: Apache-2.0
#include "sqish/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <iomanip>

#include "sqish/certify.hpp"
#include "sqish/checkpoint.hpp"
#include "sqish/timing.hpp"

namespace sqish {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<double> kind_params(const ActivationKind& kind) {
  return std::visit(Overloaded{
                        [](const act::LeakyRelu& k) { return std::vector<double>{k.a}; },
                        [](const act::Prelu& k) { return std::vector<double>{k.a}; },
                        [](const act::Elu& k) { return std::vector<double>{k.alpha}; },
                        [](const act::Swish& k) { return std::vector<double>{k.beta}; },
                        [](const act::Sqish& k) {
                          return std::vector<double>{k.params.a(), k.params.beta(), k.params.gamma()};
                        },
                        [](const auto&) { return std::vector<double>{}; },
                    },
                    kind);
}

template <typename T>
std::vector<ActivationState> activation_states(const Network<T>& net) {
  std::vector<ActivationState> out;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    if (const auto* a = dynamic_cast<const ActivationLayer<T>*>(&net.layer(i))) {
      const ActivationKind k = a->kind();
      out.push_back({i, std::string(activation_name(k)), kind_params(k)});
    }
  }
  return out;
}

template <typename T>
struct Splits {
  Dataset<T> train;
  Dataset<T> test;
};

template <typename T>
Splits<T> load_splits(const ExperimentConfig& cfg) {
  if (cfg.dataset == "spirals") {
    return {synthetic_two_spirals(cfg.spiral_points, cfg.spiral_noise, 1).template cast<T>(),
            synthetic_two_spirals(cfg.spiral_points, cfg.spiral_noise, 2).template cast<T>()};
  }
  const auto root = resolve_data_root(cfg);
  if (root.empty()) throw DataError("no dataset root: set data_root in the config or SQISH_DATA_ROOT");
  return {load_mnist<T>(root, true).head(cfg.train_limit), load_mnist<T>(root, false).head(cfg.test_limit)};
}

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, std::uint64_t seed) {
  return std::filesystem::path(cfg.output_dir) /
         ("checkpoint_" + std::string(task_name(cfg.task)) + "_seed" + std::to_string(seed) + ".json");
}

template <typename T>
void train_seeds(const ExperimentConfig& cfg, RunReport& report, std::ostream* log) {
  const Splits<T> data = load_splits<T>(cfg);
  const auto specs = resolve_architecture(cfg);
  for (const std::uint64_t seed : cfg.seeds) {
    const auto t0 = Clock::now();
    SeedRun run;
    run.seed = seed;
    Network<T> net(specs, data.train.sample_shape(), seed);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.mixup = tc.mixup || cfg.task == Task::Mixup;
    try {
      run.epochs = train_classifier(net, data.train, &data.test, tc, [&](const EpochMetrics& m) {
        if (log == nullptr) return;
        *log << "seed " << seed << " epoch " << (m.epoch + 1) << "/" << tc.epochs << std::fixed
             << std::setprecision(4) << " lr " << m.lr << " train_loss " << m.train_loss << " train_acc "
             << m.train_acc << " test_loss " << m.test_loss << " test_acc " << m.test_acc << std::defaultfloat
             << std::endl;
      });
      run.final_test_loss = run.epochs.back().test_loss;
      run.final_test_acc = run.epochs.back().test_acc;
      if (cfg.task == Task::Attack) {
        for (const double eps : cfg.epsilons) {
          run.attacks.push_back(evaluate_under_attack(net, data.test, AttackConfig{eps, cfg.clamp_lo, cfg.clamp_hi}));
          if (log != nullptr) {
            const auto& a = run.attacks.back();
            *log << "seed " << seed << " fgsm eps " << eps << " clean_acc " << a.clean_acc << " adv_acc "
                 << a.adv_acc << std::endl;
          }
        }
      }
      if (cfg.save_checkpoints) {
        std::filesystem::create_directories(cfg.output_dir);
        save_checkpoint(net, checkpoint_path(cfg, seed));
      }
    } catch (const NumericalError& e) {
      run.status = "numerical_failure";
      run.message = e.what();
      report.ok = false;
      if (log != nullptr) *log << "seed " << seed << ": " << e.what() << std::endl;
    }
    run.activations = activation_states(net);
    run.wall_seconds = seconds_since(t0);
    report.runs.push_back(std::move(run));
  }
}

void fit_seeds(const ExperimentConfig& cfg, RunReport& report, std::ostream* log) {
  const ActivationKind kind = cfg.activation_kind();
  for (const std::uint64_t seed : cfg.seeds) {
    const auto t0 = Clock::now();
    SeedRun run;
    run.seed = seed;
    try {
      run.fit = fit_sine(seed, kind, cfg.fit_steps, cfg.fit_hidden, cfg.fit_lr, cfg.fit_target);
      if (log != nullptr) {
        *log << "seed " << seed << " fit mse " << run.fit->final_mse << " after " << run.fit->steps << " steps"
             << (run.fit->converged ? "" : " (not converged)") << std::endl;
      }
    } catch (const NumericalError& e) {
      run.status = "numerical_failure";
      run.message = e.what();
      report.ok = false;
    }
    run.wall_seconds = seconds_since(t0);
    report.runs.push_back(std::move(run));
  }
}

void run_timing(const ExperimentConfig& cfg, RunReport& report, std::ostream* log) {
  report.timings = time_all_activations(cfg.timing_shape, cfg.timing_iters, cfg.timing_warmup, cfg.seeds.front());
  if (log == nullptr) return;
  for (const auto& t : report.timings) {
    *log << std::left << std::setw(14) << t.op << std::right << std::fixed << std::setprecision(1) << " fwd "
         << t.forward_mean_us << " +- " << t.forward_std_us << " us  bwd " << t.backward_mean_us << " +- "
         << t.backward_std_us << " us" << std::defaultfloat << std::endl;
  }
}

/// Two inputs per class through a small CNN and a Sqish MLP.
std::vector<GradCheckReport> network_checks(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::vector<GradCheckReport> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ActivationKind kind = cfg.activation_kind();

  Network<double> cnn(parse_architecture("conv:1:2:3:1:1,act,pool:2,conv:2:3:3:2:1,act,flatten,dense:12:3", kind),
                      {1, 6, 6}, seed);
  Tensor<double> img({2, 1, 6, 6});
  for (Index i = 0; i < img.size(); ++i) img[i] = u(rng);
  const std::vector<int> img_labels{0, 2};
  auto r = check_network_gradients(cnn, img, img_labels);
  r.op_name = "network.cnn";
  out.push_back(r);
  r = check_input_gradient(cnn, img, img_labels);
  r.op_name = "network.cnn.input";
  out.push_back(r);

  Network<double> net(mlp(2, {5, 4}, 3, kind), {2}, seed);
  Tensor<double> x({4, 2});
  for (Index i = 0; i < x.size(); ++i) x[i] = 2.0 * u(rng) - 1.0;
  const std::vector<int> labels{0, 1, 2, 1};
  r = check_network_gradients(net, x, labels);
  r.op_name = "network.mlp";
  out.push_back(r);
  return out;
}

void run_gradcheck(const ExperimentConfig& cfg, RunReport& report, std::ostream* log) {
  const std::uint64_t seed = cfg.seeds.front();
  report.gradchecks = certify_activations(cfg.gradcheck_points, seed);
  for (auto& r : certify_array_kernels(cfg.gradcheck_points, seed)) report.gradchecks.push_back(std::move(r));
  for (auto& r : network_checks(cfg, seed)) report.gradchecks.push_back(std::move(r));
  for (const auto& g : report.gradchecks) {
    if (!g.pass) {
      report.ok = false;
      report.error += (report.error.empty() ? "" : "; ") + g.op_name + " failed";
    }
    if (log != nullptr) {
      *log << std::left << std::setw(22) << g.op_name << std::right << (g.pass ? " pass" : " FAIL") << " points "
           << g.num_points << " max_rel " << g.max_rel_err << " max_abs " << g.max_abs_err << std::endl;
    }
  }
}

}  // namespace

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return ExitCode::Config;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const FormatError*>(&e)) return ExitCode::Data;
  if (dynamic_cast<const NumericalError*>(&e)) return ExitCode::Numerical;
  return ExitCode::Internal;
}

ExitCode exit_code_for(const RunReport& report) { return report.ok ? ExitCode::Ok : ExitCode::Numerical; }

RunReport run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const auto t0 = Clock::now();
  RunReport report;
  report.task = std::string(task_name(cfg.task));
  report.config = config_entries(cfg);
  switch (cfg.task) {
    case Task::Classify:
    case Task::Attack:
    case Task::Mixup:
      if (cfg.precision == Precision::F32) {
        train_seeds<float>(cfg, report, log);
      } else {
        train_seeds<double>(cfg, report, log);
      }
      break;
    case Task::ApproxFit: fit_seeds(cfg, report, log); break;
    case Task::Timing: run_timing(cfg, report, log); break;
    case Task::Gradcheck: run_gradcheck(cfg, report, log); break;
  }
  if (!report.ok && report.error.empty()) {
    std::size_t failed = 0;
    for (const auto& r : report.runs) failed += r.status != "ok";
    report.error = std::to_string(failed) + " seed(s) hit a non-finite loss";
  }
  summarize_runs(report);
  report.wall_seconds = seconds_since(t0);
  return report;
}

}  // namespace sqish

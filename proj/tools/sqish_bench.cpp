// SPDX-License-Identifier: Apache-2.0
//
// sqish_bench: training, attack, MixUp, sin-fit, timing and gradient-check
// experiments driven by a key = value config file.
//
//   sqish_bench classify --config mnist.cfg --seeds 0,1,2 --output results/mnist
//   sqish_bench timing --set timing_iters=100
//
// Exit codes: 0 ok, 1 usage, 2 config error, 3 data error, 4 numerical
// failure (diverged seed or failed gradient check), 5 internal error.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sqish/experiment.hpp"
#include "sqish/runtime.hpp"

namespace {

struct Options {
  std::string config;
  std::string output;
  std::string seeds;
  std::string precision;
  std::vector<std::string> settings;
  bool quiet = false;
};

sqish::ExperimentConfig build_config(sqish::Task task, const Options& opt) {
  sqish::ExperimentConfig cfg;
  if (!opt.config.empty()) cfg = sqish::load_config(opt.config);
  cfg.task = task;
  for (const auto& kv : opt.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sqish::ConfigError("--set expects key=value, got '" + kv + "'");
    sqish::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opt.seeds.empty()) sqish::apply_setting(cfg, "seeds", opt.seeds);
  if (!opt.precision.empty()) sqish::apply_setting(cfg, "precision", opt.precision);
  if (!opt.output.empty()) sqish::apply_setting(cfg, "output_dir", opt.output);
  return cfg;
}

int run(sqish::Task task, const Options& opt) {
  using sqish::ExitCode;
  try {
    const auto cfg = build_config(task, opt);
    const auto report = sqish::run_experiment(cfg, opt.quiet ? nullptr : &std::cerr);
    for (const auto& s : report.summary) {
      std::cout << s.metric << " = " << s.mean;
      if (s.std) std::cout << " +- " << *s.std;
      std::cout << " (n=" << s.count << ")\n";
    }
    for (const auto& path : sqish::emit_report(report, cfg.output_dir)) std::cout << "wrote " << path.string() << "\n";
    if (!report.ok) std::cerr << "error: " << report.error << "\n";
    return static_cast<int>(sqish::exit_code_for(report));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(sqish::exit_code_for(e));
  }
}

}  // namespace

int main(int argc, char** argv) {
  sqish::configure_allocator();
  CLI::App app{"Sqish activation experiments"};
  app.require_subcommand(1);
  Options opt;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"classify", "train the configured network and report test accuracy"},
      {"attack", "train, then evaluate FGSM accuracy at each epsilon"},
      {"mixup", "train with MixUp augmentation"},
      {"fit-sin", "fit sin(x) on [-pi, pi] with a one-hidden-layer network"},
      {"timing", "forward/backward microbenchmark of every activation"},
      {"gradcheck", "finite-difference certification of every analytic gradient"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", opt.config, "key = value config file");
    sub->add_option("-o,--output", opt.output, "output directory for report.json and CSV tables");
    sub->add_option("-s,--seeds", opt.seeds, "comma-separated seed list, e.g. 0,1,2");
    sub->add_option("-p,--precision", opt.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    sub->add_option("--set", opt.settings, "override a config key (key=value), repeatable");
    sub->add_flag("-q,--quiet", opt.quiet, "no progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(sqish::ExitCode::Usage);
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return run(sqish::parse_task(name), opt);
}

// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
//   sqish_acceptance [--only 1,2,6] [--data-root DIR] [--output DIR]
//
// MNIST is read from --data-root, else $SQISH_DATA_ROOT, else /root/data/mnist.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sqish/certify.hpp"
#include "sqish/checkpoint.hpp"
#include "sqish/experiment.hpp"
#include "sqish/runtime.hpp"
#include "sqish/timing.hpp"

namespace fs = std::filesystem;
using namespace sqish;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path data_root;
  fs::path output;
  // Sqish runs of criterion 3, reused by criterion 4.
  std::vector<std::uint64_t> seeds{0, 1, 2};
  bool trained = false;
};

std::string pct(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::fixed << 100.0 * v << "%";
  return os.str();
}

double mean_of(const RunReport& r, const std::string& metric) {
  for (const auto& s : r.summary) {
    if (s.metric == metric) return s.mean;
  }
  return std::nan("");
}

ExperimentConfig mnist_config(const Context& ctx, Task task, const std::string& activation, const std::string& dir) {
  ExperimentConfig cfg;
  cfg.task = task;
  cfg.dataset = "mnist";
  cfg.data_root = ctx.data_root.string();
  cfg.activation = activation;
  cfg.seeds = ctx.seeds;
  cfg.output_dir = (ctx.output / dir).string();
  cfg.train.epochs = 5;
  cfg.train.batch_size = 128;
  cfg.train.lr = 0.01;
  cfg.train.cosine = true;
  cfg.train.optimizer = OptimizerKind::Sgd;
  cfg.train.sgd = SgdConfig{0.9, 5e-4};
  return cfg;
}

// ---- 1 ----------------------------------------------------------------------

Outcome gradient_certification(Context&) {
  const auto t0 = Clock::now();
  const auto reports = certify_activations(1000, 7, GradTolerance{1e-6, 1e-8, 1e-5});
  const double secs = seconds_since(t0);
  std::ostringstream os;
  bool ok = secs < 10.0;
  int passed = 0;
  for (const auto& r : reports) {
    if (r.pass && r.num_points == 1000) {
      ++passed;
    } else {
      ok = false;
      os << r.op_name << " max_rel " << r.max_rel_err << " max_abs " << r.max_abs_err << "; ";
    }
  }
  os << passed << "/" << reports.size() << " derivatives certified on 1000 points in " << secs << " s";
  return {ok && passed == static_cast<int>(reports.size()), os.str()};
}

// ---- 2 ----------------------------------------------------------------------

Outcome approximation(Context&) {
  const auto t0 = Clock::now();
  const Grid grid{-10.0, 10.0, 1e-3};
  std::ostringstream os;
  bool ok = true;
  for (const double a : {0.0, 0.1}) {
    const ActivationKind target = a == 0.0 ? ActivationKind{act::Relu{}} : ActivationKind{act::LeakyRelu{a}};
    double prev = std::numeric_limits<double>::infinity();
    os << activation_name(target) << ":";
    for (const double g : {1.0, 10.0, 100.0, 1000.0}) {
      const double gap = approx_gap(target, SqishParams(a, 1.0, g), grid);
      ok = ok && gap < prev;
      prev = gap;
      os << " " << gap;
    }
    const double far = approx_gap(target, SqishParams(a, 1.0, 1e6), grid);
    ok = ok && far < 1e-3;
    os << " | gamma=1e6 " << far << "; ";
  }
  const double secs = seconds_since(t0);
  os << secs << " s";
  return {ok && secs < 5.0, os.str()};
}

// ---- 3 ----------------------------------------------------------------------

Outcome mnist_accuracy(Context& ctx) {
  const auto t0 = Clock::now();
  ExperimentConfig sq = mnist_config(ctx, Task::Classify, "sqish", "classify_sqish");
  sq.save_checkpoints = true;
  const RunReport sqish_report = run_experiment(sq, &std::cerr);
  emit_report(sqish_report, sq.output_dir);
  ctx.trained = sqish_report.ok;
  const ExperimentConfig re = mnist_config(ctx, Task::Classify, "relu", "classify_relu");
  const RunReport relu_report = run_experiment(re, &std::cerr);
  emit_report(relu_report, re.output_dir);
  const double secs = seconds_since(t0);

  const double sq_mean = mean_of(sqish_report, "final_test_acc");
  const double relu_mean = mean_of(relu_report, "final_test_acc");
  double sq_min = 1.0;
  for (const auto& r : sqish_report.runs) sq_min = std::min(sq_min, r.final_test_acc);
  std::ostringstream os;
  os << "sqish " << pct(sq_mean) << " (min seed " << pct(sq_min) << "), relu " << pct(relu_mean) << ", "
     << secs / 60.0 << " min";
  const bool ok = sqish_report.ok && relu_report.ok && sqish_report.runs.size() == 3 && sq_min >= 0.98 &&
                  sq_mean >= relu_mean - 0.003 && secs < 20.0 * 60.0;
  return {ok, os.str()};
}

// ---- 4 ----------------------------------------------------------------------

Outcome fgsm(Context& ctx) {
  if (!ctx.trained) return {false, "needs the trained Sqish networks of criterion 3"};
  const ExperimentConfig cfg = mnist_config(ctx, Task::Attack, "sqish", "attack_sqish");
  const Dataset<float> test = load_mnist<float>(ctx.data_root, false);
  const auto t0 = Clock::now();
  RunReport report;
  report.task = "attack";
  report.config = config_entries(cfg);
  bool ok = true;
  std::ostringstream os;
  for (const auto seed : ctx.seeds) {
    const fs::path ckpt = ctx.output / "classify_sqish" / ("checkpoint_classify_seed" + std::to_string(seed) + ".json");
    const Network<float> net = load_checkpoint<float>(ckpt);
    SeedRun run;
    run.seed = seed;
    for (const double eps : {0.04, 0.08}) run.attacks.push_back(evaluate_under_attack(net, test, AttackConfig{eps}));
    const auto& a4 = run.attacks[0];
    const auto& a8 = run.attacks[1];
    const bool seed_ok = a4.adv_acc < a4.clean_acc && a4.max_perturbation <= 0.04 && a8.max_perturbation <= 0.08 &&
                         a4.in_range && a8.in_range && a8.adv_acc <= a4.adv_acc + 0.01;
    ok = ok && seed_ok;
    os << "seed " << seed << " clean " << pct(a4.clean_acc) << " adv@0.04 " << pct(a4.adv_acc) << " adv@0.08 "
       << pct(a8.adv_acc) << (seed_ok ? "" : " (violated)") << "; ";
    report.runs.push_back(std::move(run));
  }
  const double secs = seconds_since(t0);
  summarize_runs(report);
  emit_report(report, cfg.output_dir);
  os << secs << " s";
  return {ok && secs < 120.0, os.str()};
}

// ---- 5 ----------------------------------------------------------------------

double reference_ce(const Tensor<double>& logits, std::span<const int> labels) {
  long double total = 0.0L;
  const Index c = logits.dim(1);
  for (Index i = 0; i < logits.dim(0); ++i) {
    long double mx = logits[i * c];
    for (Index j = 1; j < c; ++j) mx = std::max<long double>(mx, logits[i * c + j]);
    long double s = 0.0L;
    for (Index j = 0; j < c; ++j) s += std::exp(static_cast<long double>(logits[i * c + j]) - mx);
    total += mx + std::log(s) - logits[i * c + labels[static_cast<std::size_t>(i)]];
  }
  return static_cast<double>(total / static_cast<long double>(logits.dim(0)));
}

Outcome mixup_run(Context& ctx) {
  const auto t0 = Clock::now();
  ExperimentConfig cfg = mnist_config(ctx, Task::Mixup, "sqish", "mixup_sqish");
  cfg.seeds = {0};
  cfg.train.mixup_alpha = 1.0;
  const RunReport report = run_experiment(cfg, &std::cerr);
  emit_report(report, cfg.output_dir);
  const double secs = seconds_since(t0);
  bool finite = report.ok && report.runs.size() == 1;
  for (const auto& r : report.runs) {
    for (const auto& e : r.epochs) finite = finite && std::isfinite(e.train_loss) && std::isfinite(e.test_loss);
  }

  // Forced lambda in {0, 1}: the mixed loss must equal the unmixed one.
  const Dataset<double> test = load_mnist<double>(ctx.data_root, false).head(256);
  const Network<double> net(resolve_architecture(cfg), test.sample_shape(), 0);
  std::vector<Index> ia(128), ib(128);
  for (Index i = 0; i < 128; ++i) {
    ia[static_cast<std::size_t>(i)] = i;
    ib[static_cast<std::size_t>(i)] = 255 - i;
  }
  const auto a = gather(test, ia);
  const auto b = gather(test, ib);
  double worst = 0.0;
  for (const double lambda : {0.0, 1.0}) {
    const auto mixed = mix_with_lambda(a.inputs, b.inputs, a.labels, b.labels, lambda);
    const auto logits = net.predict(mixed.inputs);
    const double mixed_loss = mixup_cross_entropy(logits, mixed.labels_a, mixed.labels_b, lambda).loss;
    const auto& plain = lambda == 1.0 ? a : b;
    const double unmixed = reference_ce(net.predict(plain.inputs), plain.labels);
    worst = std::max(worst, std::abs(mixed_loss - unmixed));
  }
  std::ostringstream os;
  os << "final test acc " << pct(report.runs.empty() ? 0.0 : report.runs[0].final_test_acc)
     << ", loss finite " << (finite ? "yes" : "no") << ", lambda identity error " << worst << ", " << secs / 60.0
     << " min";
  return {finite && worst <= 1e-12 && secs < 20.0 * 60.0, os.str()};
}

// ---- 6 ----------------------------------------------------------------------

Outcome sine_fit(Context&) {
  const auto t0 = Clock::now();
  int converged = 0;
  std::ostringstream os;
  for (const std::uint64_t seed : {0, 1, 2}) {
    const FitResult r = fit_sine(seed, act::Sqish{}, 5000, 64, 0.01, 1e-3);
    converged += r.converged;
    os << "seed " << seed << " mse " << r.final_mse << " @ " << r.steps << " steps; ";
  }
  const double secs = seconds_since(t0);
  os << converged << "/3 converged, " << secs << " s";
  return {converged == 3 && secs < 60.0, os.str()};
}

// ---- 7 ----------------------------------------------------------------------

Outcome timing(Context& ctx) {
  const auto t0 = Clock::now();
  ExperimentConfig cfg;
  cfg.task = Task::Timing;
  cfg.timing_shape = {1, 3, 224, 224};
  cfg.timing_iters = 100;
  cfg.timing_warmup = 10;
  cfg.output_dir = (ctx.output / "timing").string();
  const RunReport report = run_experiment(cfg, &std::cerr);
  emit_report(report, cfg.output_dir);
  const double secs = seconds_since(t0);
  std::set<std::string> ops;
  bool positive = true;
  double sq = 0.0, sw = 0.0;
  for (const auto& t : report.timings) {
    ops.insert(t.op);
    positive = positive && t.forward_mean_us > 0.0 && t.backward_mean_us > 0.0 && std::isfinite(t.forward_std_us) &&
               std::isfinite(t.backward_std_us);
    if (t.op == "sqish") sq = t.forward_mean_us;
    if (t.op == "swish") sw = t.forward_mean_us;
  }
  std::ostringstream os;
  os << ops.size() << " kinds timed, sqish fwd " << sq << " us vs swish " << sw << " us (ratio " << sq / sw << "), "
     << secs << " s";
  return {ops.size() == 9 && positive && sw > 0.0 && sq <= 3.0 * sw && secs < 120.0, os.str()};
}

// ---- 8 ----------------------------------------------------------------------

bool rejects(const std::vector<std::uint8_t>& bytes, bool images) {
  try {
    if (images) {
      parse_idx_images(bytes);
    } else {
      parse_idx_labels(bytes);
    }
  } catch (const FormatError&) {
    return true;
  }
  return false;
}

Outcome determinism(Context& ctx) {
  std::ostringstream os;
  ExperimentConfig cfg;
  cfg.task = Task::Attack;
  cfg.data_root = ctx.data_root.string();
  cfg.train_limit = 2000;
  cfg.test_limit = 500;
  cfg.train.epochs = 2;
  cfg.seeds = {3, 4};
  cfg.epsilons = {0.04};
  cfg.output_dir = (ctx.output / "determinism").string();
  const RunReport first = run_experiment(cfg, nullptr);
  const RunReport second = run_experiment(cfg, nullptr);
  const bool same = without_wall_clock(first) == without_wall_clock(second);
  os << "repeat run identical: " << (same ? "yes" : "no");

  emit_report(first, cfg.output_dir);
  const RunReport reloaded = load_report(fs::path(cfg.output_dir) / "report.json");
  bool round_trip = reloaded == first && report_from_json(report_to_json(second)) == second;
  RunReport odd = first;
  odd.runs[0].final_test_loss = std::nan("");
  odd.runs[0].epochs[0].train_loss = std::numeric_limits<double>::infinity();
  const RunReport odd_back = report_from_json(report_to_json(odd));
  round_trip = round_trip && std::isnan(odd_back.runs[0].final_test_loss) && std::isinf(odd_back.runs[0].epochs[0].train_loss);
  os << ", JSON round trip: " << (round_trip ? "yes" : "no");

  const auto images = read_file(ctx.data_root / "t10k-images-idx3-ubyte");
  const auto labels = read_file(ctx.data_root / "t10k-labels-idx1-ubyte");
  int rejected = 0, cases = 0;
  const auto expect = [&](std::vector<std::uint8_t> bytes, bool is_images) {
    ++cases;
    rejected += rejects(bytes, is_images);
  };
  auto bad_magic = images;
  bad_magic[3] = 0x01;
  expect(bad_magic, true);
  expect(std::vector<std::uint8_t>(images.begin(), images.end() - 1), true);
  expect(std::vector<std::uint8_t>(images.begin(), images.begin() + 10), true);
  auto trailing = images;
  trailing.push_back(0);
  expect(trailing, true);
  auto bad_count = images;
  bad_count[7] += 1;
  expect(bad_count, true);
  auto bad_label_magic = labels;
  bad_label_magic[2] = 0x09;
  expect(bad_label_magic, false);
  expect(std::vector<std::uint8_t>(labels.begin(), labels.end() - 3), false);
  const fs::path fixtures = ctx.output / "fixtures";
  fs::create_directories(fixtures);
  write_file(fixtures / "images", images);
  write_file(fixtures / "labels", std::vector<std::uint8_t>(labels.begin(), labels.end() - 1));
  ++cases;
  try {
    load_idx<float>(fixtures / "images", fixtures / "labels");
  } catch (const FormatError&) {
    ++rejected;
  }
  os << ", corrupted IDX fixtures rejected: " << rejected << "/" << cases;
  return {same && round_trip && rejected == cases, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Sqish acceptance run"};
  std::string only;
  std::string data_root;
  std::string output = "acceptance_results";
  app.add_option("--only", only, "comma-separated criteria to run (default: all)");
  app.add_option("--data-root", data_root, "MNIST directory");
  app.add_option("--output", output, "directory for the reports written along the way");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  if (!data_root.empty()) {
    ctx.data_root = data_root;
  } else if (const char* env = std::getenv("SQISH_DATA_ROOT"); env != nullptr && *env != '\0') {
    ctx.data_root = env;
  } else {
    ctx.data_root = "/root/data/mnist";
  }
  ctx.output = output;

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty()) selected.insert(std::stoi(tok));
  }

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria = {
      {"gradient certification", gradient_certification},
      {"smooth-max approximation", approximation},
      {"MNIST accuracy, Sqish vs ReLU", mnist_accuracy},
      {"FGSM robustness", fgsm},
      {"MixUp training", mixup_run},
      {"sin(x) approximation", sine_fit},
      {"activation timing", timing},
      {"determinism and formats", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome out;
    try {
      out = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    failures += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << out.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

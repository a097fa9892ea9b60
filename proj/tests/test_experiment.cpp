// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "sqish/experiment.hpp"

using namespace sqish;

namespace {

ExperimentConfig spirals(Task task) {
  ExperimentConfig cfg;
  cfg.task = task;
  cfg.dataset = "spirals";
  cfg.spiral_points = 200;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 50;
  cfg.train.lr = 0.05;
  cfg.seeds = {1, 2};
  cfg.precision = Precision::F64;
  return cfg;
}

std::filesystem::path scratch(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SQISH_BENCH_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Experiment, ClassifyTwoSeeds) {
  std::ostringstream log;
  const auto r = run_experiment(spirals(Task::Classify), &log);
  EXPECT_TRUE(r.ok) << r.error;
  EXPECT_EQ(r.task, "classify");
  ASSERT_EQ(r.runs.size(), 2u);
  for (const auto& run : r.runs) {
    EXPECT_EQ(run.status, "ok");
    EXPECT_EQ(run.epochs.size(), 3u);
    EXPECT_EQ(run.final_test_acc, run.epochs.back().test_acc);
    ASSERT_EQ(run.activations.size(), 2u);
    EXPECT_EQ(run.activations[0].kind, "sqish");
    EXPECT_EQ(run.activations[0].params.size(), 3u);
  }
  ASSERT_FALSE(r.summary.empty());
  EXPECT_EQ(r.summary[0].count, 2u);
  EXPECT_TRUE(r.summary[0].std.has_value());
  EXPECT_FALSE(log.str().empty());
  EXPECT_EQ(exit_code_for(r), ExitCode::Ok);
}

TEST(Experiment, RepeatableWithoutWallClock) {
  for (const auto precision : {Precision::F32, Precision::F64}) {
    auto cfg = spirals(Task::Mixup);
    cfg.precision = precision;
    EXPECT_EQ(without_wall_clock(run_experiment(cfg)), without_wall_clock(run_experiment(cfg)));
  }
}

TEST(Experiment, AttackPerEpsilon) {
  auto cfg = spirals(Task::Attack);
  cfg.epsilons = {0.0, 0.05, 0.2};
  const auto r = run_experiment(cfg);
  ASSERT_EQ(r.runs.size(), 2u);
  for (const auto& run : r.runs) {
    ASSERT_EQ(run.attacks.size(), 3u);
    EXPECT_EQ(run.attacks[0].adv_acc, run.attacks[0].clean_acc);
    for (const auto& a : run.attacks) {
      EXPECT_TRUE(a.in_range);
      EXPECT_LE(a.max_perturbation, a.epsilon + 1e-12);
    }
  }
}

TEST(Experiment, NumericalFailureIsRecorded) {
  auto cfg = spirals(Task::Classify);
  cfg.train.lr = 1e30;
  cfg.train.cosine = false;
  cfg.train.epochs = 5;
  const auto r = run_experiment(cfg);
  EXPECT_FALSE(r.ok);
  ASSERT_EQ(r.runs.size(), 2u);
  for (const auto& run : r.runs) EXPECT_EQ(run.status, "numerical_failure");
  EXPECT_TRUE(r.summary.empty());
  EXPECT_EQ(exit_code_for(r), ExitCode::Numerical);
  EXPECT_EQ(report_from_json(report_to_json(r)).runs[0].status, "numerical_failure");
}

TEST(Experiment, MissingDataRoot) {
  auto cfg = spirals(Task::Classify);
  cfg.dataset = "mnist";
  cfg.data_root = (std::filesystem::temp_directory_path() / "sqish_no_mnist_here").string();
  EXPECT_THROW(run_experiment(cfg), DataError);
}

TEST(Experiment, InvalidConfig) {
  auto cfg = spirals(Task::Classify);
  cfg.train.epochs = 0;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(Experiment, FitSine) {
  auto cfg = spirals(Task::ApproxFit);
  cfg.seeds = {0};
  const auto r = run_experiment(cfg);
  ASSERT_EQ(r.runs.size(), 1u);
  ASSERT_TRUE(r.runs[0].fit.has_value());
  EXPECT_TRUE(r.runs[0].fit->converged);
}

TEST(Experiment, GradcheckTaskPasses) {
  auto cfg = spirals(Task::Gradcheck);
  cfg.gradcheck_points = 200;
  const auto r = run_experiment(cfg);
  EXPECT_TRUE(r.ok) << r.error;
  EXPECT_GE(r.gradchecks.size(), 13u + 16u + 3u);
  for (const auto& g : r.gradchecks) EXPECT_TRUE(g.pass) << g.op_name;
}

TEST(Experiment, TimingTask) {
  auto cfg = spirals(Task::Timing);
  cfg.timing_shape = {1, 2, 8, 8};
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.timings.size(), 9u);
  EXPECT_TRUE(r.runs.empty());
}

TEST(Experiment, ExitCodeMapping) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), ExitCode::Config);
  EXPECT_EQ(exit_code_for(DomainError("x")), ExitCode::Config);
  EXPECT_EQ(exit_code_for(DataError("x")), ExitCode::Data);
  EXPECT_EQ(exit_code_for(FormatError("x", 3)), ExitCode::Data);
  EXPECT_EQ(exit_code_for(NumericalError("x")), ExitCode::Numerical);
  EXPECT_EQ(exit_code_for(StructuralError("x")), ExitCode::Internal);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), ExitCode::Internal);
}

TEST(Cli, ExitCodes) {
  const auto out = scratch("sqish_cli_test");
  const std::string common = " -q -o " + out.string() + " --set dataset=spirals --set spiral_points=100";
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("classify --bogus"), 1);
  EXPECT_EQ(run_cli("classify -p f16" + common), 1);
  EXPECT_EQ(run_cli("classify --set nope=1" + common), 2);
  EXPECT_EQ(run_cli("classify --set epochs=0" + common), 2);
  EXPECT_EQ(run_cli("classify -c /nonexistent/sqish.cfg" + common), 3);
  EXPECT_EQ(run_cli("classify --set lr=1e30 --set schedule=constant" + common), 4);
  EXPECT_EQ(run_cli("classify -s 5,6 --set epochs=1" + common), 0);
  EXPECT_TRUE(std::filesystem::exists(out / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(out / "epochs.csv"));
  const auto r = load_report(out / "report.json");
  EXPECT_EQ(r.runs.size(), 2u);
  std::filesystem::remove_all(out);
}

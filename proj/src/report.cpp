// SPDX-License-Identifier: Apache-2.0
#include "sqish/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace sqish {
namespace {

using nlohmann::json;

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double get_num(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("report: bad number '" + s + "'", 0);
  }
  return j.get<double>();
}

json nums(const std::vector<double>& v) {
  json out = json::array();
  for (const double x : v) out.push_back(num(x));
  return out;
}

std::vector<double> get_nums(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(get_num(x));
  return out;
}

json epoch_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},           {"lr", num(m.lr)},
          {"train_loss", num(m.train_loss)}, {"train_acc", num(m.train_acc)},
          {"test_loss", num(m.test_loss)},   {"test_acc", num(m.test_acc)}};
}

EpochMetrics epoch_from(const json& j) {
  return {j.at("epoch").get<int>(),         get_num(j.at("lr")),        get_num(j.at("train_loss")),
          get_num(j.at("train_acc")),       get_num(j.at("test_loss")), get_num(j.at("test_acc"))};
}

json attack_json(const AttackResult& a) {
  return {{"epsilon", num(a.epsilon)},
          {"clean_acc", num(a.clean_acc)},
          {"adv_acc", num(a.adv_acc)},
          {"max_perturbation", num(a.max_perturbation)},
          {"in_range", a.in_range}};
}

AttackResult attack_from(const json& j) {
  return {get_num(j.at("epsilon")), get_num(j.at("clean_acc")), get_num(j.at("adv_acc")),
          get_num(j.at("max_perturbation")), j.at("in_range").get<bool>()};
}

json run_json(const SeedRun& r) {
  json j = {{"seed", r.seed},
            {"status", r.status},
            {"message", r.message},
            {"final_test_loss", num(r.final_test_loss)},
            {"final_test_acc", num(r.final_test_acc)},
            {"wall_seconds", num(r.wall_seconds)}};
  j["epochs"] = json::array();
  for (const auto& e : r.epochs) j["epochs"].push_back(epoch_json(e));
  j["attacks"] = json::array();
  for (const auto& a : r.attacks) j["attacks"].push_back(attack_json(a));
  if (r.fit) {
    j["fit"] = {{"final_mse", num(r.fit->final_mse)}, {"steps", r.fit->steps}, {"converged", r.fit->converged}};
  } else {
    j["fit"] = nullptr;
  }
  j["activations"] = json::array();
  for (const auto& a : r.activations) {
    j["activations"].push_back({{"layer", a.layer}, {"kind", a.kind}, {"params", nums(a.params)}});
  }
  return j;
}

SeedRun run_from(const json& j) {
  SeedRun r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.status = j.at("status").get<std::string>();
  r.message = j.at("message").get<std::string>();
  r.final_test_loss = get_num(j.at("final_test_loss"));
  r.final_test_acc = get_num(j.at("final_test_acc"));
  r.wall_seconds = get_num(j.at("wall_seconds"));
  for (const auto& e : j.at("epochs")) r.epochs.push_back(epoch_from(e));
  for (const auto& a : j.at("attacks")) r.attacks.push_back(attack_from(a));
  if (const auto& f = j.at("fit"); !f.is_null()) {
    r.fit = FitResult{get_num(f.at("final_mse")), f.at("steps").get<int>(), f.at("converged").get<bool>()};
  }
  for (const auto& a : j.at("activations")) {
    r.activations.push_back({a.at("layer").get<std::size_t>(), a.at("kind").get<std::string>(),
                             get_nums(a.at("params"))});
  }
  return r;
}

json timing_json(const TimingRecord& t) {
  return {{"op", t.op},
          {"shape", t.shape},
          {"iters", t.iters},
          {"warmup", t.warmup},
          {"forward_mean_us", num(t.forward_mean_us)},
          {"forward_std_us", num(t.forward_std_us)},
          {"forward_median_of_means_us", num(t.forward_median_of_means_us)},
          {"backward_mean_us", num(t.backward_mean_us)},
          {"backward_std_us", num(t.backward_std_us)},
          {"backward_median_of_means_us", num(t.backward_median_of_means_us)}};
}

TimingRecord timing_from(const json& j) {
  TimingRecord t;
  t.op = j.at("op").get<std::string>();
  t.shape = j.at("shape").get<Shape>();
  t.iters = j.at("iters").get<int>();
  t.warmup = j.at("warmup").get<int>();
  t.forward_mean_us = get_num(j.at("forward_mean_us"));
  t.forward_std_us = get_num(j.at("forward_std_us"));
  t.forward_median_of_means_us = get_num(j.at("forward_median_of_means_us"));
  t.backward_mean_us = get_num(j.at("backward_mean_us"));
  t.backward_std_us = get_num(j.at("backward_std_us"));
  t.backward_median_of_means_us = get_num(j.at("backward_median_of_means_us"));
  return t;
}

json gradcheck_json(const GradCheckReport& g) {
  return {{"op_name", g.op_name},
          {"num_points", g.num_points},
          {"max_rel_err", num(g.max_rel_err)},
          {"max_abs_err", num(g.max_abs_err)},
          {"worst_input", nums(g.worst_input)},
          {"pass", g.pass}};
}

GradCheckReport gradcheck_from(const json& j) {
  return {j.at("op_name").get<std::string>(), j.at("num_points").get<std::size_t>(),
          get_num(j.at("max_rel_err")),        get_num(j.at("max_abs_err")),
          get_nums(j.at("worst_input")),       j.at("pass").get<bool>()};
}

// ---- CSV ---------------------------------------------------------------------

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { row(std::move(header)); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os_ << (i ? "," : "") << csv_field(fields[i]);
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string shape_field(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

}  // namespace

SummaryStat summarize(std::string metric, const std::vector<double>& values) {
  SummaryStat s{std::move(metric), values.size(), 0.0, std::nullopt};
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

void summarize_runs(RunReport& report) {
  report.summary.clear();
  std::vector<const SeedRun*> ok;
  for (const auto& r : report.runs) {
    if (r.status == "ok") ok.push_back(&r);
  }
  if (ok.empty()) return;
  const auto collect = [&](auto get) {
    std::vector<double> v;
    for (const auto* r : ok) v.push_back(get(*r));
    return v;
  };
  if (!ok.front()->epochs.empty()) {
    report.summary.push_back(summarize("final_test_acc", collect([](const SeedRun& r) { return r.final_test_acc; })));
    report.summary.push_back(
        summarize("final_test_loss", collect([](const SeedRun& r) { return r.final_test_loss; })));
  }
  for (std::size_t i = 0; i < ok.front()->attacks.size(); ++i) {
    const std::string eps = fmt(ok.front()->attacks[i].epsilon);
    report.summary.push_back(
        summarize("clean_acc@" + eps, collect([&](const SeedRun& r) { return r.attacks.at(i).clean_acc; })));
    report.summary.push_back(
        summarize("adv_acc@" + eps, collect([&](const SeedRun& r) { return r.attacks.at(i).adv_acc; })));
  }
  if (ok.front()->fit) {
    report.summary.push_back(summarize("fit_final_mse", collect([](const SeedRun& r) { return r.fit->final_mse; })));
    report.summary.push_back(
        summarize("fit_steps", collect([](const SeedRun& r) { return static_cast<double>(r.fit->steps); })));
  }
}

std::string report_to_json(const RunReport& report) {
  json j;
  j["schema_version"] = report.schema_version;
  j["task"] = report.task;
  j["config"] = json::array();
  for (const auto& [k, v] : report.config) j["config"].push_back({k, v});
  j["runs"] = json::array();
  for (const auto& r : report.runs) j["runs"].push_back(run_json(r));
  j["summary"] = json::array();
  for (const auto& s : report.summary) {
    j["summary"].push_back({{"metric", s.metric},
                            {"count", s.count},
                            {"mean", num(s.mean)},
                            {"std", s.std ? num(*s.std) : json(nullptr)}});
  }
  j["timings"] = json::array();
  for (const auto& t : report.timings) j["timings"].push_back(timing_json(t));
  j["gradchecks"] = json::array();
  for (const auto& g : report.gradchecks) j["gradchecks"].push_back(gradcheck_json(g));
  j["wall_seconds"] = num(report.wall_seconds);
  j["ok"] = report.ok;
  j["error"] = report.error;
  return j.dump(2);
}

RunReport report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("report: ") + e.what(), e.byte);
  }
  try {
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw FormatError("report: schema version " + std::to_string(r.schema_version) + ", expected " +
                            std::to_string(kReportSchemaVersion),
                        0);
    }
    r.task = j.at("task").get<std::string>();
    for (const auto& kv : j.at("config")) r.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    for (const auto& run : j.at("runs")) r.runs.push_back(run_from(run));
    for (const auto& s : j.at("summary")) {
      SummaryStat st{s.at("metric").get<std::string>(), s.at("count").get<std::size_t>(), get_num(s.at("mean")),
                     std::nullopt};
      if (!s.at("std").is_null()) st.std = get_num(s.at("std"));
      r.summary.push_back(std::move(st));
    }
    for (const auto& t : j.at("timings")) r.timings.push_back(timing_from(t));
    for (const auto& g : j.at("gradchecks")) r.gradchecks.push_back(gradcheck_from(g));
    r.wall_seconds = get_num(j.at("wall_seconds"));
    r.ok = j.at("ok").get<bool>();
    r.error = j.at("error").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what(), 0);
  }
}

RunReport without_wall_clock(RunReport report) {
  report.wall_seconds = 0.0;
  for (auto& r : report.runs) r.wall_seconds = 0.0;
  report.timings.clear();
  return report;
}

std::vector<std::filesystem::path> emit_report(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  const auto put = [&](const char* name, const std::string& text) {
    const auto path = dir / name;
    write_text(path, text);
    written.push_back(path);
  };
  put("report.json", report_to_json(report));

  if (!report.runs.empty()) {
    Csv runs({"seed", "status", "final_test_loss", "final_test_acc", "wall_seconds"});
    for (const auto& r : report.runs) {
      runs.row({std::to_string(r.seed), r.status, fmt(r.final_test_loss), fmt(r.final_test_acc), fmt(r.wall_seconds)});
    }
    put("runs.csv", runs.str());
  }
  bool any_epochs = false, any_attacks = false, any_fit = false, any_acts = false;
  Csv epochs({"seed", "epoch", "lr", "train_loss", "train_acc", "test_loss", "test_acc"});
  Csv attacks({"seed", "epsilon", "clean_acc", "adv_acc", "max_perturbation", "in_range"});
  Csv fit({"seed", "final_mse", "steps", "converged"});
  Csv acts({"seed", "layer", "kind", "p0", "p1", "p2"});
  for (const auto& r : report.runs) {
    const std::string seed = std::to_string(r.seed);
    for (const auto& e : r.epochs) {
      any_epochs = true;
      epochs.row({seed, std::to_string(e.epoch), fmt(e.lr), fmt(e.train_loss), fmt(e.train_acc), fmt(e.test_loss),
                  fmt(e.test_acc)});
    }
    for (const auto& a : r.attacks) {
      any_attacks = true;
      attacks.row({seed, fmt(a.epsilon), fmt(a.clean_acc), fmt(a.adv_acc), fmt(a.max_perturbation),
                   a.in_range ? "true" : "false"});
    }
    if (r.fit) {
      any_fit = true;
      fit.row({seed, fmt(r.fit->final_mse), std::to_string(r.fit->steps), r.fit->converged ? "true" : "false"});
    }
    for (const auto& a : r.activations) {
      any_acts = true;
      std::vector<std::string> row{seed, std::to_string(a.layer), a.kind};
      for (std::size_t i = 0; i < 3; ++i) row.push_back(i < a.params.size() ? fmt(a.params[i]) : "");
      acts.row(row);
    }
  }
  if (any_epochs) put("epochs.csv", epochs.str());
  if (any_attacks) put("attacks.csv", attacks.str());
  if (any_fit) put("fit.csv", fit.str());
  if (any_acts) put("activations.csv", acts.str());

  if (!report.summary.empty()) {
    Csv summary({"metric", "count", "mean", "std"});
    for (const auto& s : report.summary) {
      summary.row({s.metric, std::to_string(s.count), fmt(s.mean), s.std ? fmt(*s.std) : ""});
    }
    put("summary.csv", summary.str());
  }
  if (!report.timings.empty()) {
    Csv timing({"op", "shape", "iters", "warmup", "forward_mean_us", "forward_std_us", "forward_median_of_means_us",
                "backward_mean_us", "backward_std_us", "backward_median_of_means_us"});
    for (const auto& t : report.timings) {
      timing.row({t.op, shape_field(t.shape), std::to_string(t.iters), std::to_string(t.warmup),
                  fmt(t.forward_mean_us), fmt(t.forward_std_us), fmt(t.forward_median_of_means_us),
                  fmt(t.backward_mean_us), fmt(t.backward_std_us), fmt(t.backward_median_of_means_us)});
    }
    put("timing.csv", timing.str());
  }
  if (!report.gradchecks.empty()) {
    Csv gc({"op_name", "num_points", "max_rel_err", "max_abs_err", "pass"});
    for (const auto& g : report.gradchecks) {
      gc.row({g.op_name, std::to_string(g.num_points), fmt(g.max_rel_err), fmt(g.max_abs_err),
              g.pass ? "true" : "false"});
    }
    put("gradcheck.csv", gc.str());
  }
  return written;
}

RunReport load_report(const std::filesystem::path& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw DataError("cannot open " + json_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

}  // namespace sqish

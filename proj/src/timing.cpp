// SPDX-License-Identifier: Apache-2.0
#include "sqish/timing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace sqish {
namespace {

struct Stats {
  double mean = 0.0;
  double std = 0.0;
  double median_of_means = 0.0;
};

Stats stats(const std::vector<double>& us) {
  Stats s;
  const double n = static_cast<double>(us.size());
  s.mean = std::accumulate(us.begin(), us.end(), 0.0) / n;
  double ss = 0.0;
  for (const double v : us) ss += (v - s.mean) * (v - s.mean);
  s.std = us.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> means;
  const std::size_t per = us.size() / kTimingGroups;
  for (int g = 0; g < kTimingGroups; ++g) {
    const auto begin = us.begin() + static_cast<std::ptrdiff_t>(g * per);
    const auto end = g + 1 == kTimingGroups ? us.end() : begin + static_cast<std::ptrdiff_t>(per);
    means.push_back(std::accumulate(begin, end, 0.0) / static_cast<double>(end - begin));
  }
  std::sort(means.begin(), means.end());
  s.median_of_means = means[means.size() / 2];
  return s;
}

volatile float g_sink = 0.0f;

}  // namespace

ArrayX<float> timing_input(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-4.0f, 4.0f);
  ArrayX<float> x(numel(shape));
  for (Index i = 0; i < x.size(); ++i) x[i] = dist(rng);
  return x;
}

TimingRecord time_activation(const std::string& label, const ActivationKind& kind, const ArrayX<float>& input,
                             const Shape& shape, int iters, int warmup, bool param_grads) {
  if (iters < 30) throw DomainError("timing: iters must be >= 30");
  if (warmup < 5) throw DomainError("timing: warmup must be >= 5");
  if (input.size() != numel(shape)) throw StructuralError("timing: input does not match shape " + shape_str(shape));
  validate(kind);
  using Clock = std::chrono::steady_clock;
  const bool grads = param_grads && trainable_count(kind) > 0;
  const ArrayX<float> upstream = ArrayX<float>::Ones(input.size());
  std::vector<double> fwd, bwd;
  fwd.reserve(static_cast<std::size_t>(iters));
  bwd.reserve(static_cast<std::size_t>(iters));
  for (int i = 0; i < warmup + iters; ++i) {
    const auto t0 = Clock::now();
    const ArrayX<float> y = activate<float>(input, kind);
    const auto t1 = Clock::now();
    const auto back = activate_backward<float>(input, upstream, kind, grads);
    const auto t2 = Clock::now();
    g_sink = g_sink + y[0] + back.dx[0] + static_cast<float>(back.dparams[0]);
    if (i >= warmup) {
      fwd.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
      bwd.push_back(std::chrono::duration<double, std::micro>(t2 - t1).count());
    }
  }
  const Stats f = stats(fwd), b = stats(bwd);
  return {label, shape, iters, warmup, f.mean, f.std, f.median_of_means, b.mean, b.std, b.median_of_means};
}

std::vector<std::pair<std::string, ActivationKind>> timing_kinds() {
  return {
      {"relu", act::Relu{}},
      {"leaky_relu", act::LeakyRelu{}},
      {"prelu", act::Prelu{}},
      {"elu", act::Elu{}},
      {"swish", act::Swish{}},
      {"gelu", act::Gelu{}},
      {"mish", act::Mish{}},
      {"sqish", act::Sqish{}},
      {"sqish_frozen", act::Sqish{SqishParams(0.0, 1.0, 1.0, TrainableMask{false, false, false})}},
  };
}

std::vector<TimingRecord> time_all_activations(const Shape& shape, int iters, int warmup, std::uint64_t seed) {
  const ArrayX<float> input = timing_input(shape, seed);
  std::vector<TimingRecord> out;
  for (const auto& [label, kind] : timing_kinds()) {
    const bool frozen = std::holds_alternative<act::Sqish>(kind) && !std::get<act::Sqish>(kind).params.trainable().any();
    out.push_back(time_activation(label, kind, input, shape, iters, warmup, !frozen));
  }
  return out;
}

}  // namespace sqish

// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference oracle. Independent of every analytic gradient in the
// library: it only ever evaluates forward maps.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sqish {

struct GradCheckReport {
  std::string op_name;
  std::size_t num_points = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::vector<double> worst_input;
  bool pass = true;

  bool operator==(const GradCheckReport&) const = default;
};

struct GradTolerance {
  double rel = 1e-6;
  double abs = 1e-8;
  double h = 1e-5;
};

using ScalarFn = std::function<double(double)>;

/// (f(x + h) - f(x - h)) / 2h. Throws OracleError if either evaluation is
/// not finite or h <= 0.
double central_difference(const ScalarFn& f, double x, double h);

/// Folds (analytic, numeric) pairs into a report. A point passes when its
/// relative error is below tol.rel or its absolute error is below tol.abs.
class GradCheckAccumulator {
 public:
  GradCheckAccumulator(std::string op_name, GradTolerance tol);

  void add(double analytic, double numeric, std::vector<double> input);
  GradCheckReport report() const;

 private:
  GradCheckReport report_;
  GradTolerance tol_;
  double worst_score_ = -1.0;
};

/// Compares `analytic(x)` with the central difference of `target` at every
/// point. Throws OracleError on an empty point set or when the oracle fails
/// (the message names the offending point).
GradCheckReport check_gradient(const std::string& op_name, const ScalarFn& analytic,
                               const ScalarFn& target, std::span<const double> points,
                               GradTolerance tol = {});

/// Deterministic uniform samples on [lo, hi).
std::vector<double> uniform_points(std::size_t n, double lo, double hi, std::uint64_t seed);

}  // namespace sqish

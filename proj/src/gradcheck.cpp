// SPDX-License-Identifier: Apache-2.0
#include "sqish/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "sqish/errors.hpp"

namespace sqish {

double central_difference(const ScalarFn& f, double x, double h) {
  if (!(h > 0.0)) throw OracleError("central_difference: h must be > 0");
  const double fp = f(x + h);
  const double fm = f(x - h);
  if (!std::isfinite(fp) || !std::isfinite(fm)) {
    std::ostringstream os;
    os << "central_difference: non-finite evaluation near x = " << x;
    throw OracleError(os.str());
  }
  return (fp - fm) / (2.0 * h);
}

GradCheckAccumulator::GradCheckAccumulator(std::string op_name, GradTolerance tol) : tol_(tol) {
  report_.op_name = std::move(op_name);
}

void GradCheckAccumulator::add(double analytic, double numeric, std::vector<double> input) {
  const double abs_err = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
  const bool ok = std::isfinite(analytic) && (rel_err < tol_.rel || abs_err < tol_.abs);
  ++report_.num_points;
  report_.max_abs_err = std::max(report_.max_abs_err, abs_err);
  report_.max_rel_err = std::max(report_.max_rel_err, rel_err);
  if (!ok) report_.pass = false;
  // The worst point is the one that misses its tolerance by the widest margin.
  const double score = std::isfinite(analytic) ? std::min(rel_err / tol_.rel, abs_err / tol_.abs)
                                               : std::numeric_limits<double>::infinity();
  if (score > worst_score_) {
    worst_score_ = score;
    report_.worst_input = std::move(input);
  }
}

GradCheckReport GradCheckAccumulator::report() const { return report_; }

GradCheckReport check_gradient(const std::string& op_name, const ScalarFn& analytic,
                               const ScalarFn& target, std::span<const double> points,
                               GradTolerance tol) {
  if (points.empty()) throw OracleError("check_gradient(" + op_name + "): empty point set");
  GradCheckAccumulator acc(op_name, tol);
  for (const double x : points) {
    double numeric = 0.0;
    try {
      numeric = central_difference(target, x, tol.h);
    } catch (const OracleError& e) {
      std::ostringstream os;
      os << "check_gradient(" << op_name << ") at x = " << x << ": " << e.what();
      throw OracleError(os.str());
    }
    acc.add(analytic(x), numeric, {x});
  }
  return acc.report();
}

std::vector<double> uniform_points(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> pts(n);
  std::generate(pts.begin(), pts.end(), [&] { return dist(rng); });
  return pts;
}

}  // namespace sqish

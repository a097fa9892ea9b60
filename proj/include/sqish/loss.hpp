// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sqish/tensor.hpp"

namespace sqish {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> dlogits;
};

namespace detail {

template <typename T>
void check_labels(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || static_cast<Index>(labels.size()) != logits.dim(0)) {
    throw StructuralError("cross entropy: logits " + shape_str(logits.shape()) + " vs " +
                          std::to_string(labels.size()) + " labels");
  }
  for (const int y : labels) {
    if (y < 0 || y >= logits.dim(1)) throw DomainError("cross entropy: label " + std::to_string(y) + " out of range");
  }
}

}  // namespace detail

/**
 * Mixed softmax cross-entropy  lambda * CE(labels_a) + (1 - lambda) * CE(labels_b),
 * averaged over the batch. dlogits = (softmax - soft_target) / N where the
 * soft target puts lambda on labels_a and 1 - lambda on labels_b.
 * Log-sum-exp is evaluated in double.
 */
template <typename T>
LossResult<T> mixup_cross_entropy(const Tensor<T>& logits, std::span<const int> labels_a,
                                  std::span<const int> labels_b, double lambda) {
  detail::check_labels(logits, labels_a);
  detail::check_labels(logits, labels_b);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("cross entropy: lambda outside [0,1]");
  const Index n = logits.dim(0), c = logits.dim(1);
  LossResult<T> out{0.0, Tensor<T>(logits.shape())};
  const auto lm = logits.matrix(n, c);
  auto dm = out.dlogits.matrix(n, c);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = lm.row(i).transpose().template cast<double>();
    const double mx = row.maxCoeff();
    const Eigen::VectorXd e = (row.array() - mx).exp().matrix();
    const double sum = e.sum();
    const double lse = mx + std::log(sum);
    const int ya = labels_a[static_cast<std::size_t>(i)];
    const int yb = labels_b[static_cast<std::size_t>(i)];
    double li = 0.0;
    if (lambda > 0.0) li += lambda * (lse - row[ya]);
    if (lambda < 1.0) li += (1.0 - lambda) * (lse - row[yb]);
    out.loss += li * inv_n;
    Eigen::VectorXd g = e / sum;
    g[ya] -= lambda;
    g[yb] -= 1.0 - lambda;
    dm.row(i) = (g * inv_n).transpose().template cast<T>();
  }
  return out;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  return mixup_cross_entropy(logits, labels, labels, 1.0);
}

/// Mean over all elements of (pred - target)^2.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) throw StructuralError("mse: shape mismatch");
  LossResult<T> out{0.0, Tensor<T>(pred.shape())};
  const auto diff = (pred.vec() - target.vec()).template cast<double>();
  const double n = static_cast<double>(pred.size());
  out.loss = diff.squaredNorm() / n;
  out.dlogits.vec() = (diff * (2.0 / n)).template cast<T>();
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  const Index n = logits.dim(0), c = logits.dim(1);
  const auto m = logits.matrix(n, c);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    m.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const int> labels) {
  const auto pred = argmax_rows(logits);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == labels[i] ? 1 : 0;
  return ok;
}

}  // namespace sqish

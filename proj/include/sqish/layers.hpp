// SPDX-License-Identifier: Apache-2.0
//
// Layers of the feed-forward engine. Each layer is stateless with respect to
// a forward pass: everything backward needs is written to a LayerCache, so a
// const layer can serve concurrent inference and white-box attacks.

#pragma once

#include <algorithm>
#include <memory>
#include <utility>
#include <string>
#include <vector>

#include "sqish/activation_array.hpp"
#include "sqish/layer_spec.hpp"
#include "sqish/tensor.hpp"

namespace sqish {

enum class ParamRole { Weight, Bias, ActivationA, ActivationBeta, ActivationGamma };

inline bool is_activation_param(ParamRole role) {
  return role == ParamRole::ActivationA || role == ParamRole::ActivationBeta ||
         role == ParamRole::ActivationGamma;
}

/// Non-owning view of one trainable parameter and its gradient.
template <typename T>
struct ParamSlot {
  Tensor<T>* value;
  Tensor<T>* grad;
  ParamRole role;
};

template <typename T>
struct LayerCache {
  Tensor<T> input;
  Shape input_shape;               // set when `input` itself is not kept
  std::vector<RowMatrix<T>> cols;  // conv: im2col of the whole batch
  std::vector<Index> argmax;       // pool: flat input index of each output
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// Output shape (batch dimension included) for an input shape; throws
  /// StructuralError when incompatible.
  virtual Shape output_shape(const Shape& in) const = 0;

  /// `cache` may be null for inference.
  virtual Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const = 0;

  /// Returns dL/dx (an empty tensor when `input_grad` is false and the layer
  /// can skip it). When `grads` is non-null, parameter gradients are added
  /// into it (same layout as params()).
  virtual Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::vector<Tensor<T>>* grads,
                             bool input_grad) const = 0;

  std::vector<Tensor<T>>& params() { return params_; }
  const std::vector<Tensor<T>>& params() const { return params_; }
  std::vector<Tensor<T>>& grads() { return grads_; }
  const std::vector<Tensor<T>>& grads() const { return grads_; }
  const std::vector<ParamRole>& roles() const { return roles_; }

  /// Which params the optimizer may update.
  virtual bool is_trainable(std::size_t /*param*/) const { return true; }

  void zero_grad() {
    for (auto& g : grads_) g.set_zero();
  }

 protected:
  void add_param(Tensor<T> value, ParamRole role) {
    grads_.emplace_back(value.shape());
    params_.push_back(std::move(value));
    roles_.push_back(role);
  }

  std::vector<Tensor<T>> params_;
  std::vector<Tensor<T>> grads_;
  std::vector<ParamRole> roles_;
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  explicit DenseLayer(DenseSpec s) : spec_(s) {
    this->add_param(Tensor<T>({s.out, s.in}), ParamRole::Weight);
    this->add_param(Tensor<T>({s.out}), ParamRole::Bias);
  }

  LayerSpec spec() const override { return spec_; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<DenseLayer>(*this); }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 2 || in[1] != spec_.in) {
      throw StructuralError("dense: expected (N," + std::to_string(spec_.in) + "), got " + shape_str(in));
    }
    return {in[0], spec_.out};
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override {
    const Shape out_shape = output_shape(x.shape());
    const Index n = x.dim(0);
    Tensor<T> y(out_shape);
    const auto& w = this->params_[0];
    y.matrix(n, spec_.out).noalias() = x.matrix(n, spec_.in) * w.matrix(spec_.out, spec_.in).transpose();
    y.matrix(n, spec_.out).rowwise() += this->params_[1].vec().transpose();
    if (cache) cache->input = x;
    return y;
  }

  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::vector<Tensor<T>>* grads,
                     bool input_grad) const override {
    const Index n = cache.input.dim(0);
    const auto dy_m = dy.matrix(n, spec_.out);
    if (grads) {
      (*grads)[0].matrix(spec_.out, spec_.in).noalias() += dy_m.transpose() * cache.input.matrix(n, spec_.in);
      (*grads)[1].vec() += dy_m.colwise().sum().transpose();
    }
    if (!input_grad) return {};
    Tensor<T> dx(cache.input.shape());
    dx.matrix(n, spec_.in).noalias() = dy_m * this->params_[0].matrix(spec_.out, spec_.in);
    return dx;
  }

 private:
  DenseSpec spec_;
};

template <typename T>
class Conv2DLayer final : public Layer<T> {
 public:
  explicit Conv2DLayer(Conv2DSpec s) : spec_(s) {
    if (s.kernel <= 0 || s.stride <= 0 || s.pad < 0) throw StructuralError("conv2d: invalid geometry");
    this->add_param(Tensor<T>({s.out_ch, s.in_ch, s.kernel, s.kernel}), ParamRole::Weight);
    this->add_param(Tensor<T>({s.out_ch}), ParamRole::Bias);
  }

  LayerSpec spec() const override { return spec_; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2DLayer>(*this); }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4 || in[1] != spec_.in_ch) {
      throw StructuralError("conv2d: expected (N," + std::to_string(spec_.in_ch) + ",H,W), got " +
                            shape_str(in));
    }
    const Index ho = (in[2] + 2 * spec_.pad - spec_.kernel) / spec_.stride + 1;
    const Index wo = (in[3] + 2 * spec_.pad - spec_.kernel) / spec_.stride + 1;
    if (in[2] + 2 * spec_.pad < spec_.kernel || in[3] + 2 * spec_.pad < spec_.kernel) {
      throw StructuralError("conv2d: kernel larger than padded input " + shape_str(in));
    }
    return {in[0], spec_.out_ch, ho, wo};
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override {
    const Shape os = output_shape(x.shape());
    const Index n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const Index plane = os[2] * os[3];
    const Index patch = spec_.in_ch * spec_.kernel * spec_.kernel;
    RowMatrix<T> col(patch, n * plane);
    im2col(x.data(), n, h, w, os[2], os[3], col.data());
    RowMatrix<T> prod(spec_.out_ch, n * plane);
    prod.noalias() = this->params_[0].matrix(spec_.out_ch, patch) * col;
    prod.colwise() += this->params_[1].vec();
    Tensor<T> y(os);
    for (Index s = 0; s < n; ++s) {
      Eigen::Map<RowMatrix<T>>(y.data() + s * spec_.out_ch * plane, spec_.out_ch, plane) =
          prod.middleCols(s * plane, plane);
    }
    if (cache) {
      cache->input_shape = x.shape();
      cache->cols.assign(1, std::move(col));
    }
    return y;
  }

  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::vector<Tensor<T>>* grads,
                     bool input_grad) const override {
    const Shape& in = cache.input_shape;
    if (in.size() != 4) throw StructuralError("conv2d: cache missing input shape");
    const Index n = in[0], h = in[2], w = in[3];
    const Index ho = dy.dim(2), wo = dy.dim(3), plane = ho * wo;
    const Index patch = spec_.in_ch * spec_.kernel * spec_.kernel;
    if (cache.cols.size() != 1 || cache.cols[0].cols() != n * plane) {
      throw StructuralError("conv2d: cache missing columns");
    }
    RowMatrix<T> dys(spec_.out_ch, n * plane);
    for (Index s = 0; s < n; ++s) {
      dys.middleCols(s * plane, plane) =
          Eigen::Map<const RowMatrix<T>>(dy.data() + s * spec_.out_ch * plane, spec_.out_ch, plane);
    }
    if (grads) {
      (*grads)[0].matrix(spec_.out_ch, patch).noalias() += dys * cache.cols[0].transpose();
      (*grads)[1].vec() += dys.rowwise().sum();
    }
    if (!input_grad) return {};
    RowMatrix<T> dcol(patch, n * plane);
    dcol.noalias() = this->params_[0].matrix(spec_.out_ch, patch).transpose() * dys;
    Tensor<T> dx(in);
    col2im(dcol.data(), n, h, w, ho, wo, dx.data());
    return dx;
  }

 private:
  /// Valid output columns [lo, hi) for kernel column kj.
  std::pair<Index, Index> valid_range(Index kj, Index w, Index wo) const {
    const Index off = kj - spec_.pad;
    Index lo = off >= 0 ? 0 : (-off + spec_.stride - 1) / spec_.stride;
    Index hi = w - off <= 0 ? 0 : (w - off - 1) / spec_.stride + 1;
    hi = std::min(hi, wo);
    lo = std::min(lo, hi);
    return {lo, hi};
  }

  /// col(patch, n * ho * wo), column index = sample * ho * wo + position.
  void im2col(const T* x, Index n, Index h, Index w, Index ho, Index wo, T* col) const {
    const Index k = spec_.kernel, st = spec_.stride, plane = ho * wo;
    for (Index c = 0; c < spec_.in_ch; ++c) {
      for (Index ki = 0; ki < k; ++ki) {
        for (Index kj = 0; kj < k; ++kj) {
          const auto [lo, hi] = valid_range(kj, w, wo);
          T* out = col + ((c * k + ki) * k + kj) * n * plane;
          for (Index s = 0; s < n; ++s) {
            const T* img = x + (s * spec_.in_ch + c) * h * w;
            for (Index oh = 0; oh < ho; ++oh, out += wo) {
              const Index ih = oh * st - spec_.pad + ki;
              if (ih < 0 || ih >= h) {
                std::fill(out, out + wo, T(0));
                continue;
              }
              const T* src = img + ih * w + kj - spec_.pad;
              std::fill(out, out + lo, T(0));
              if (st == 1) {
                std::copy(src + lo, src + hi, out + lo);
              } else {
                for (Index ow = lo; ow < hi; ++ow) out[ow] = src[ow * st];
              }
              std::fill(out + hi, out + wo, T(0));
            }
          }
        }
      }
    }
  }

  void col2im(const T* col, Index n, Index h, Index w, Index ho, Index wo, T* x) const {
    const Index k = spec_.kernel, st = spec_.stride, plane = ho * wo;
    for (Index c = 0; c < spec_.in_ch; ++c) {
      for (Index ki = 0; ki < k; ++ki) {
        for (Index kj = 0; kj < k; ++kj) {
          const auto [lo, hi] = valid_range(kj, w, wo);
          const T* in = col + ((c * k + ki) * k + kj) * n * plane;
          for (Index s = 0; s < n; ++s) {
            T* img = x + (s * spec_.in_ch + c) * h * w;
            for (Index oh = 0; oh < ho; ++oh, in += wo) {
              const Index ih = oh * st - spec_.pad + ki;
              if (ih < 0 || ih >= h) continue;
              T* dst = img + ih * w + kj - spec_.pad;
              if (st == 1) {
                Eigen::Map<ArrayX<T>>(dst + lo, hi - lo) += Eigen::Map<const ArrayX<T>>(in + lo, hi - lo);
              } else {
                for (Index ow = lo; ow < hi; ++ow) dst[ow * st] += in[ow];
              }
            }
          }
        }
      }
    }
  }

  Conv2DSpec spec_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  explicit MaxPoolLayer(MaxPoolSpec s) : spec_(s) {
    if (s.kernel <= 0 || s.stride <= 0) throw StructuralError("maxpool: invalid geometry");
  }

  LayerSpec spec() const override { return spec_; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4 || in[2] < spec_.kernel || in[3] < spec_.kernel) {
      throw StructuralError("maxpool: expected (N,C,H,W) with H,W >= kernel, got " + shape_str(in));
    }
    return {in[0], in[1], (in[2] - spec_.kernel) / spec_.stride + 1, (in[3] - spec_.kernel) / spec_.stride + 1};
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override {
    const Shape os = output_shape(x.shape());
    const Index planes = os[0] * os[1], h = x.dim(2), w = x.dim(3), ho = os[2], wo = os[3];
    Tensor<T> y(os);
    std::vector<Index> argmax(static_cast<std::size_t>(y.size()));
    for (Index p = 0; p < planes; ++p) {
      const T* src = x.data() + p * h * w;
      for (Index oh = 0; oh < ho; ++oh) {
        for (Index ow = 0; ow < wo; ++ow) {
          Index best = (oh * spec_.stride) * w + ow * spec_.stride;
          for (Index ki = 0; ki < spec_.kernel; ++ki) {
            for (Index kj = 0; kj < spec_.kernel; ++kj) {
              const Index idx = (oh * spec_.stride + ki) * w + ow * spec_.stride + kj;
              if (src[idx] > src[best]) best = idx;
            }
          }
          const Index o = (p * ho + oh) * wo + ow;
          y[o] = src[best];
          argmax[static_cast<std::size_t>(o)] = p * h * w + best;
        }
      }
    }
    if (cache) {
      cache->input_shape = x.shape();
      cache->argmax = std::move(argmax);
    }
    return y;
  }

  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::vector<Tensor<T>>* /*grads*/,
                     bool /*input_grad*/) const override {
    if (static_cast<Index>(cache.argmax.size()) != dy.size()) throw StructuralError("maxpool: cache mismatch");
    Tensor<T> dx(cache.input_shape);
    for (Index o = 0; o < dy.size(); ++o) dx[cache.argmax[static_cast<std::size_t>(o)]] += dy[o];
    return dx;
  }

 private:
  MaxPoolSpec spec_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  LayerSpec spec() const override { return FlattenSpec{}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<FlattenLayer>(*this); }

  Shape output_shape(const Shape& in) const override {
    if (in.empty()) throw StructuralError("flatten: rank-0 input");
    return {in[0], numel(in) / std::max<Index>(in[0], 1)};
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override {
    if (cache) cache->input_shape = x.shape();
    return x.reshaped(output_shape(x.shape()));
  }

  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::vector<Tensor<T>>* /*grads*/,
                     bool /*input_grad*/) const override {
    return dy.reshaped(cache.input_shape);
  }
};

/**
 * Elementwise activation. PReLU (a), Swish (beta) and Sqish (a, beta, gamma)
 * carry one parameter set shared by the whole layer; each scalar is stored
 * as a one-element tensor. Their gradients are sums over every element
 * of the layer input.
 */
template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(ActivationSpec s) : initial_(s.kind) {
    validate(s.kind);
    std::visit(Overloaded{
                   [&](const act::Prelu& k) { add_scalar(k.a, ParamRole::ActivationA, true); },
                   [&](const act::Swish& k) { add_scalar(k.beta, ParamRole::ActivationBeta, true); },
                   [&](const act::Sqish& k) {
                     const auto& p = k.params;
                     add_scalar(p.a(), ParamRole::ActivationA, p.trainable().a);
                     add_scalar(p.beta(), ParamRole::ActivationBeta, p.trainable().beta);
                     add_scalar(p.gamma(), ParamRole::ActivationGamma, p.trainable().gamma);
                   },
                   [](const auto&) {},
               },
               s.kind);
  }

  LayerSpec spec() const override { return ActivationSpec{kind()}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ActivationLayer>(*this); }

  Shape output_shape(const Shape& in) const override { return in; }

  bool is_trainable(std::size_t param) const override { return trainable_.at(param); }

  /// The activation with the current parameter values.
  ActivationKind kind() const {
    return std::visit(
        Overloaded{
            [&](const act::Prelu&) -> ActivationKind { return act::Prelu{scalar(0)}; },
            [&](const act::Swish&) -> ActivationKind { return act::Swish{scalar(0)}; },
            [&](const act::Sqish& k) -> ActivationKind {
              return act::Sqish{SqishParams(scalar(0), scalar(1), scalar(2), k.params.trainable())};
            },
            [](const auto& k) -> ActivationKind { return k; },
        },
        initial_);
  }

  /// Restores the configured initial parameter values.
  void reset() {
    ActivationLayer fresh(ActivationSpec{initial_});
    this->params_ = fresh.params_;
  }

  Tensor<T> forward(const Tensor<T>& x, LayerCache<T>* cache) const override {
    Tensor<T> y(x.shape());
    y.vec() = activate<T>(x.array(), kind()).matrix();
    if (cache) cache->input = x;
    return y;
  }

  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::vector<Tensor<T>>* grads,
                     bool /*input_grad*/) const override {
    const bool want = grads != nullptr && !this->params_.empty();
    auto res = activate_backward<T>(cache.input.array(), dy.array(), kind(), want);
    if (want) {
      for (std::size_t i = 0; i < this->params_.size(); ++i) {
        (*grads)[i][0] += static_cast<T>(res.dparams[i]);
      }
    }
    return Tensor<T>(cache.input.shape(), res.dx.matrix());
  }

 private:
  void add_scalar(double v, ParamRole role, bool trainable) {
    Tensor<T> t({1});
    t[0] = static_cast<T>(v);
    this->add_param(std::move(t), role);
    trainable_.push_back(trainable);
  }

  double scalar(std::size_t i) const { return static_cast<double>(this->params_[i][0]); }

  ActivationKind initial_;
  std::vector<bool> trainable_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const DenseSpec& s) -> std::unique_ptr<Layer<T>> { return std::make_unique<DenseLayer<T>>(s); },
                        [](const Conv2DSpec& s) -> std::unique_ptr<Layer<T>> { return std::make_unique<Conv2DLayer<T>>(s); },
                        [](const MaxPoolSpec& s) -> std::unique_ptr<Layer<T>> { return std::make_unique<MaxPoolLayer<T>>(s); },
                        [](const FlattenSpec&) -> std::unique_ptr<Layer<T>> { return std::make_unique<FlattenLayer<T>>(); },
                        [](const ActivationSpec& s) -> std::unique_ptr<Layer<T>> {
                          return std::make_unique<ActivationLayer<T>>(s);
                        },
                    },
                    spec);
}

}  // namespace sqish

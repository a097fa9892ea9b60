// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "sqish/layers.hpp"

namespace sqish {

template <typename T>
class Network;

/// Everything backward needs from one forward pass. Tied to the network
/// and parameter version that produced it.
template <typename T>
struct ForwardCache {
  const Network<T>* owner = nullptr;
  std::uint64_t version = 0;
  std::vector<LayerCache<T>> layers;
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;
  ForwardCache<T> cache;
};

/// Ordered layer list. Forward visits layers front to back, backward in the
/// exact reverse order.
template <typename T>
class Network {
 public:
  Network() = default;

  /// `input_shape` excludes the batch dimension. Parameters are initialized
  /// with init_params(seed).
  Network(const std::vector<LayerSpec>& specs, Shape input_shape, std::uint64_t seed)
      : input_shape_(std::move(input_shape)), seed_(seed) {
    for (const auto& s : specs) layers_.push_back(make_layer<T>(s));
    Shape shape = batch_shape(1);
    for (const auto& layer : layers_) shape = layer->output_shape(shape);
    if (shape.size() != 2) throw StructuralError("network: final layer must produce (N, outputs), got " + shape_str(shape));
    init_params(seed);
  }

  Network(const Network& other) : input_shape_(other.input_shape_), seed_(other.seed_), version_(other.version_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Network& operator=(const Network& other) {
    if (this != &other) *this = Network(other);
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_shape_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t version() const { return version_; }
  std::size_t num_layers() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l->spec());
    return out;
  }

  Index output_size() const {
    Shape shape = batch_shape(1);
    for (const auto& layer : layers_) shape = layer->output_shape(shape);
    return shape[1];
  }

  /**
   * He-uniform fan-in initialization: weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)),
   * zero biases, activation parameters back to their configured values.
   * Bit-reproducible for a fixed seed.
   */
  void init_params(std::uint64_t seed) {
    seed_ = seed;
    std::mt19937_64 rng(seed);
    for (auto& layer : layers_) {
      if (auto* act = dynamic_cast<ActivationLayer<T>*>(layer.get())) {
        act->reset();
        continue;
      }
      auto& params = layer->params();
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (layer->roles()[i] != ParamRole::Weight) {
          params[i].set_zero();
          continue;
        }
        const Index fan_in = params[i].size() / params[i].dim(0);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Index j = 0; j < params[i].size(); ++j) params[i][j] = static_cast<T>(dist(rng));
      }
    }
    zero_grad();
    ++version_;
  }

  ForwardResult<T> forward(const Tensor<T>& batch) const {
    check_input(batch);
    ForwardResult<T> out;
    out.cache.owner = this;
    out.cache.version = version_;
    out.cache.layers.resize(layers_.size());
    Tensor<T> x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) x = layers_[i]->forward(x, &out.cache.layers[i]);
    out.logits = std::move(x);
    return out;
  }

  Tensor<T> predict(const Tensor<T>& batch) const {
    check_input(batch);
    Tensor<T> x = batch;
    for (const auto& layer : layers_) x = layer->forward(x, nullptr);
    return x;
  }

  /// Accumulates parameter gradients (including activation parameters) and
  /// returns dL/d(input), or an empty tensor when `input_grad` is false.
  Tensor<T> backward(const ForwardCache<T>& cache, const Tensor<T>& dlogits, bool input_grad = true) {
    check_cache(cache);
    Tensor<T> g = dlogits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      g = layers_[i]->backward(cache.layers[i], g, &layers_[i]->grads(), input_grad || i > 0);
    }
    return g;
  }

  /// dL/d(input) only; parameters and their gradients are untouched.
  Tensor<T> input_gradient(const ForwardCache<T>& cache, const Tensor<T>& dlogits) const {
    check_cache(cache);
    Tensor<T> g = dlogits;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(cache.layers[i], g, nullptr, true);
    return g;
  }

  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

  /// Trainable parameters in layer order.
  std::vector<ParamSlot<T>> parameters() {
    std::vector<ParamSlot<T>> out;
    for (auto& l : layers_) {
      for (std::size_t i = 0; i < l->params().size(); ++i) {
        if (l->is_trainable(i)) out.push_back({&l->params()[i], &l->grads()[i], l->roles()[i]});
      }
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) {
      for (const auto& p : l->params()) n += static_cast<std::size_t>(p.size());
    }
    return n;
  }

  /// Invalidates outstanding forward caches; called after every parameter update.
  void mark_updated() { ++version_; }

  template <typename U>
  Network<U> cast() const {
    Network<U> out(specs(), input_shape_, seed_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (std::size_t j = 0; j < layers_[i]->params().size(); ++j) {
        out.layer(i).params()[j] = layers_[i]->params()[j].template cast<U>();
      }
    }
    out.mark_updated();
    return out;
  }

 private:
  Shape batch_shape(Index n) const {
    Shape s{n};
    s.insert(s.end(), input_shape_.begin(), input_shape_.end());
    return s;
  }

  void check_input(const Tensor<T>& batch) const {
    if (batch.rank() < 1 || batch.shape() != batch_shape(batch.dim(0))) {
      throw StructuralError("network: batch shape " + shape_str(batch.shape()) + " does not match input " +
                            shape_str(batch_shape(batch.rank() ? batch.dim(0) : 0)));
    }
  }

  void check_cache(const ForwardCache<T>& cache) const {
    if (cache.owner != this || cache.version != version_ || cache.layers.size() != layers_.size()) {
      throw StructuralError("network: stale or foreign forward cache");
    }
  }

  std::vector<std::unique_ptr<Layer<T>>> layers_;
  Shape input_shape_;
  std::uint64_t seed_ = 0;
  std::uint64_t version_ = 0;
};

}  // namespace sqish

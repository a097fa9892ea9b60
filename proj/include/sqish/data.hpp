// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sqish/tensor.hpp"

namespace sqish {

/// Images N x C x H x W scaled to [0, 1] (or N x F feature rows), integer labels.
template <typename T>
struct Dataset {
  Tensor<T> images;
  std::vector<int> labels;
  int num_classes = 0;

  Index size() const { return static_cast<Index>(labels.size()); }

  /// Per-sample shape (batch dimension removed).
  Shape sample_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }

  template <typename U>
  Dataset<U> cast() const {
    return {images.template cast<U>(), labels, num_classes};
  }

  /// First `n` samples (all of them when n <= 0 or n >= size()).
  Dataset head(Index n) const {
    if (n <= 0 || n >= size()) return *this;
    return gather_all(n);
  }

 private:
  Dataset gather_all(Index n) const {
    Shape s = images.shape();
    s[0] = n;
    const Index per = images.size() / std::max<Index>(size(), 1);
    return {Tensor<T>(s, images.vec().head(n * per)),
            std::vector<int>(labels.begin(), labels.begin() + n), num_classes};
  }
};

template <typename T>
struct Batch {
  Tensor<T> inputs;
  std::vector<int> labels;
};

/// Copies the given samples into a contiguous batch.
template <typename T>
Batch<T> gather(const Dataset<T>& ds, std::span<const Index> indices) {
  Shape s = ds.images.shape();
  const Index per = ds.images.size() / std::max<Index>(ds.size(), 1);
  s[0] = static_cast<Index>(indices.size());
  Batch<T> b{Tensor<T>(s), {}};
  b.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    b.inputs.vec().segment(static_cast<Index>(i) * per, per) = ds.images.vec().segment(indices[i] * per, per);
    b.labels.push_back(ds.labels[static_cast<std::size_t>(indices[i])]);
  }
  return b;
}

// ---- IDX files ------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Raw contents of an IDX image file.
struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// Parse an in-memory IDX image/label file. Throws FormatError with the byte
/// offset of the first problem (bad magic, truncated payload, trailing bytes).
IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

/// Throws DataError when the file cannot be read.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Loads an image/label file pair into a (N,1,H,W) dataset with pixels / 255.
/// num_classes = max label + 1. Throws FormatError (bad magic, truncation,
/// count mismatch between the files) or DataError (missing files).
template <typename T>
Dataset<T> load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const IdxImages img = parse_idx_images(read_file(images_path));
  const auto lab = parse_idx_labels(read_file(labels_path));
  if (lab.size() != img.count) {
    // Offset 4 is the item count field of the label header.
    throw FormatError("idx: " + std::to_string(img.count) + " images but " + std::to_string(lab.size()) +
                          " labels in " + labels_path.string(),
                      4);
  }
  Dataset<T> ds;
  ds.images = Tensor<T>({static_cast<Index>(img.count), 1, static_cast<Index>(img.rows), static_cast<Index>(img.cols)});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    ds.images[static_cast<Index>(i)] = static_cast<T>(img.pixels[i]) / static_cast<T>(255);
  }
  ds.labels.assign(lab.begin(), lab.end());
  int mx = -1;
  for (const int y : ds.labels) mx = std::max(mx, y);
  ds.num_classes = mx + 1;
  return ds;
}

/// Writes a (N,1,H,W) dataset as an IDX pair, pixels rounded to u8.
template <typename T>
void write_idx(const Dataset<T>& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  if (ds.images.rank() != 4 || ds.images.dim(1) != 1) throw StructuralError("write_idx: expected (N,1,H,W) images");
  IdxImages img{static_cast<std::uint32_t>(ds.size()), static_cast<std::uint32_t>(ds.images.dim(2)),
                static_cast<std::uint32_t>(ds.images.dim(3)), {}};
  img.pixels.resize(static_cast<std::size_t>(ds.images.size()));
  for (Index i = 0; i < ds.images.size(); ++i) {
    const double v = std::clamp(static_cast<double>(ds.images[i]), 0.0, 1.0);
    img.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  std::vector<std::uint8_t> lab(ds.labels.begin(), ds.labels.end());
  write_file(images_path, encode_idx_images(img));
  write_file(labels_path, encode_idx_labels(lab));
}

/// MNIST file pair under `root` (train-* or t10k-*).
template <typename T>
Dataset<T> load_mnist(const std::filesystem::path& root, bool train) {
  const std::string prefix = train ? "train" : "t10k";
  return load_idx<T>(root / (prefix + "-images-idx3-ubyte"), root / (prefix + "-labels-idx1-ubyte"));
}

// ---- synthetic data -----------------------------------------------------------

/// Two interleaved spirals, n/2 points each, coordinates rescaled into
/// [0, 1]. Shape (n, 2), labels 0/1. Throws DomainError for odd n.
Dataset<double> synthetic_two_spirals(Index n, double noise, std::uint64_t seed);

// ---- batching -----------------------------------------------------------------

/// Index batches covering 0..n-1 exactly once, the final partial batch
/// included. With `shuffle` the permutation is a function of (seed, epoch).
std::vector<std::vector<Index>> make_batches(Index n, Index batch_size, bool shuffle, std::uint64_t seed,
                                             std::uint64_t epoch);

// ---- MixUp ----------------------------------------------------------------------

template <typename T>
struct MixupBatch {
  Tensor<T> inputs;
  std::vector<int> labels_a;
  std::vector<int> labels_b;
  double lambda = 1.0;
};

/// Beta(alpha, beta) via two Gamma draws.
double sample_beta(double alpha, double beta, std::mt19937_64& rng);

/// inputs = lambda * a + (1 - lambda) * b.
template <typename T>
MixupBatch<T> mix_with_lambda(const Tensor<T>& batch_a, const Tensor<T>& batch_b, std::span<const int> labels_a,
                              std::span<const int> labels_b, double lambda) {
  if (batch_a.shape() != batch_b.shape() || labels_a.size() != labels_b.size() ||
      static_cast<Index>(labels_a.size()) != batch_a.dim(0)) {
    throw StructuralError("mixup: batch shapes differ");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("mixup: lambda outside [0,1]");
  MixupBatch<T> out;
  const T l = static_cast<T>(lambda);
  out.inputs = Tensor<T>(batch_a.shape());
  out.inputs.vec() = l * batch_a.vec() + (T(1) - l) * batch_b.vec();
  out.labels_a.assign(labels_a.begin(), labels_a.end());
  out.labels_b.assign(labels_b.begin(), labels_b.end());
  out.lambda = lambda;
  return out;
}

/// One lambda ~ Beta(alpha, alpha) for the whole batch.
template <typename T>
MixupBatch<T> mixup(const Tensor<T>& batch_a, const Tensor<T>& batch_b, std::span<const int> labels_a,
                    std::span<const int> labels_b, double alpha, std::mt19937_64& rng) {
  if (!(alpha > 0.0)) throw DomainError("mixup: alpha must be > 0");
  return mix_with_lambda(batch_a, batch_b, labels_a, labels_b, sample_beta(alpha, alpha, rng));
}

}  // namespace sqish

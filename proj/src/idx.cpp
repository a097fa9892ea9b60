// SPDX-License-Identifier: Apache-2.0
//
// IDX parsing/encoding, synthetic data, batching and Beta sampling.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "sqish/data.hpp"

namespace sqish {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4) {
    throw FormatError(std::string("idx: truncated header, missing ") + what, bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::uint32_t magic, std::uint32_t expected) {
  if (magic != expected) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "idx: bad magic 0x%08x, expected 0x%08x", magic, expected);
    throw FormatError(buf, 0);
  }
}

void check_payload(std::span<const std::uint8_t> bytes, std::size_t header, std::size_t payload) {
  if (bytes.size() < header + payload) {
    throw FormatError("idx: truncated payload, expected " + std::to_string(header + payload) + " bytes, found " +
                          std::to_string(bytes.size()),
                      bytes.size());
  }
  if (bytes.size() > header + payload) throw FormatError("idx: trailing bytes after payload", header + payload);
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(read_be32(bytes, 0, "magic"), kIdxImagesMagic);
  IdxImages img;
  img.count = read_be32(bytes, 4, "image count");
  img.rows = read_be32(bytes, 8, "row count");
  img.cols = read_be32(bytes, 12, "column count");
  const std::size_t payload = std::size_t{img.count} * img.rows * img.cols;
  check_payload(bytes, 16, payload);
  img.pixels.assign(bytes.begin() + 16, bytes.end());
  return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(read_be32(bytes, 0, "magic"), kIdxLabelsMagic);
  const std::uint32_t count = read_be32(bytes, 4, "label count");
  check_payload(bytes, 8, count);
  return {bytes.begin() + 8, bytes.end()};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  if (images.pixels.size() != std::size_t{images.count} * images.rows * images.cols) {
    throw StructuralError("idx: pixel buffer does not match header dimensions");
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  write_be32(out, kIdxImagesMagic);
  write_be32(out, images.count);
  write_be32(out, images.rows);
  write_be32(out, images.cols);
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Dataset<double> synthetic_two_spirals(Index n, double noise, std::uint64_t seed) {
  if (n <= 0 || n % 2 != 0) throw DomainError("two_spirals: n must be positive and even");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const Index half = n / 2;
  constexpr double kTurns = 1.75;
  Dataset<double> ds{Tensor<double>({n, 2}), std::vector<int>(static_cast<std::size_t>(n)), 2};
  for (Index i = 0; i < half; ++i) {
    // Radius grows linearly with the angle, starting away from the origin.
    const double t = 0.15 + (1.0 - 0.15) * static_cast<double>(i) / static_cast<double>(half);
    const double angle = t * kTurns * 2.0 * std::numbers::pi;
    for (int cls = 0; cls < 2; ++cls) {
      const double sign = cls == 0 ? 1.0 : -1.0;
      double x = sign * t * std::cos(angle);
      double y = sign * t * std::sin(angle);
      if (noise > 0.0) {
        x += noise * jitter(rng);
        y += noise * jitter(rng);
      }
      const Index row = 2 * i + cls;
      ds.images[2 * row] = std::clamp(0.5 + 0.5 * x, 0.0, 1.0);
      ds.images[2 * row + 1] = std::clamp(0.5 + 0.5 * y, 0.0, 1.0);
      ds.labels[static_cast<std::size_t>(row)] = cls;
    }
  }
  return ds;
}

std::vector<std::vector<Index>> make_batches(Index n, Index batch_size, bool shuffle, std::uint64_t seed,
                                             std::uint64_t epoch) {
  if (batch_size < 1) throw DomainError("batches: batch_size must be >= 1");
  std::vector<Index> order(static_cast<std::size_t>(std::max<Index>(n, 0)));
  std::iota(order.begin(), order.end(), Index{0});
  if (shuffle) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<Index>> out;
  for (Index start = 0; start < n; start += batch_size) {
    const Index end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  return out;
}

double sample_beta(double alpha, double beta, std::mt19937_64& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("beta sampler: parameters must be > 0");
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

}  // namespace sqish

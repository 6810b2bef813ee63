#pragma once
/*
 * CIFAR-10/100 binary readers and writer, seeded train/valid split,
 * synthetic Gaussian blobs and deterministic mini-batch iteration.
 *
 * CIFAR-10 record: 1 label byte + 3072 pixel bytes (R, G, B planes of 32x32,
 * row-major). CIFAR-100 record: coarse label byte, fine label byte, 3072
 * pixel bytes; the fine label is used. Pixels are scaled by 1/255.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "telu_lab/errors.hpp"
#include "telu_lab/rng.hpp"
#include "telu_lab/tensor.hpp"

namespace telu_lab {

struct DatasetMeta {
  std::string name;
  std::size_t num_classes = 0;
  std::string split_tag;
};

struct Dataset {
  Tensor images;  // (N, ...) e.g. (N, 3, 32, 32) or (N, dim)
  std::vector<int> labels;
  DatasetMeta meta;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
  std::size_t sample_size() const { return images.size() / std::max<std::size_t>(1, labels.size()); }

  void validate() const {
    if (labels.empty()) throw FormatError("dataset " + meta.name + " is empty");
    if (images.dim(0) != labels.size()) throw FormatError("dataset " + meta.name + ": image/label count mismatch");
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= meta.num_classes) throw FormatError("dataset " + meta.name + ": label out of range");
  }

  // Rows `idx` in order, as a new dataset.
  Dataset subset(std::span<const std::size_t> idx, std::string tag) const {
    if (idx.empty()) throw ConfigError("subset of " + meta.name + " would be empty");
    const std::size_t per = sample_size();
    Shape shape = images.shape();
    shape[0] = idx.size();
    std::vector<double> data;
    data.reserve(idx.size() * per);
    std::vector<int> ys;
    ys.reserve(idx.size());
    for (std::size_t i : idx) {
      const auto row = images.data().subspan(i * per, per);
      data.insert(data.end(), row.begin(), row.end());
      ys.push_back(labels.at(i));
    }
    return Dataset{Tensor(std::move(shape), std::move(data)), std::move(ys), {meta.name, meta.num_classes, std::move(tag)}};
  }

  // First n samples.
  Dataset head(std::size_t n, std::string tag) const {
    std::vector<std::size_t> idx(std::min(n, size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return subset(idx, std::move(tag));
  }
};

// ---------------------------------------------------------------------------
// CIFAR binary format

namespace detail {

inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// label_bytes = 1 (CIFAR-10) or 2 (CIFAR-100, fine label last).
inline Dataset decode_cifar(const std::vector<std::vector<unsigned char>>& files, std::size_t label_bytes,
                            std::size_t num_classes, std::string name, std::string tag) {
  const std::size_t record = label_bytes + kCifarPixels;
  std::size_t total = 0;
  for (const auto& f : files) {
    if (f.empty() || f.size() % record != 0) {
      throw FormatError(name + ": file length " + std::to_string(f.size()) + " is not a positive multiple of " +
                        std::to_string(record));
    }
    total += f.size() / record;
  }
  std::vector<double> pixels(total * kCifarPixels);
  std::vector<int> labels(total);
  std::size_t r = 0;
  for (const auto& f : files) {
    for (std::size_t off = 0; off < f.size(); off += record, ++r) {
      const int y = f[off + label_bytes - 1];
      if (static_cast<std::size_t>(y) >= num_classes) {
        throw FormatError(name + ": record " + std::to_string(r) + " has label " + std::to_string(y) + " >= " +
                          std::to_string(num_classes));
      }
      labels[r] = y;
      for (std::size_t p = 0; p < kCifarPixels; ++p) pixels[r * kCifarPixels + p] = f[off + label_bytes + p] / 255.0;
    }
  }
  return Dataset{Tensor({total, 3, 32, 32}, std::move(pixels)), std::move(labels), {std::move(name), num_classes, std::move(tag)}};
}

inline std::vector<std::vector<unsigned char>> read_all(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::vector<unsigned char>> out;
  for (const auto& p : paths) out.push_back(read_file(p));
  return out;
}

}  // namespace detail

// `path` is either one batch file or a directory holding data_batch_1..5.bin
// (train) or test_batch.bin (when test is set).
inline Dataset load_cifar10(const std::filesystem::path& path, bool test = false) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    if (test) {
      files.push_back(path / "test_batch.bin");
    } else {
      for (int i = 1; i <= 5; ++i) files.push_back(path / ("data_batch_" + std::to_string(i) + ".bin"));
    }
  } else {
    files.push_back(path);
  }
  return detail::decode_cifar(detail::read_all(files), 1, 10, "cifar10", test ? "test" : "train");
}

// `path` is train.bin / test.bin or the directory holding them.
inline Dataset load_cifar100(const std::filesystem::path& path, bool test = false) {
  std::filesystem::path file = path;
  if (std::filesystem::is_directory(path)) file = path / (test ? "test.bin" : "train.bin");
  return detail::decode_cifar(detail::read_all({file}), 2, 100, "cifar100", test ? "test" : "train");
}

// Inverse of the readers for (N, 3, 32, 32) datasets with pixels k/255.
// CIFAR-100 files get coarse label 0.
inline void write_cifar(const Dataset& ds, const std::filesystem::path& path, bool cifar100 = false) {
  if (ds.sample_shape() != Shape{3, 32, 32}) throw ConfigError("write_cifar: need (N, 3, 32, 32) images");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  std::vector<char> rec;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    rec.clear();
    if (cifar100) rec.push_back(0);
    rec.push_back(static_cast<char>(ds.labels[r]));
    for (std::size_t p = 0; p < detail::kCifarPixels; ++p) {
      const double v = ds.images[r * detail::kCifarPixels + p];
      rec.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    }
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  }
}

// ---------------------------------------------------------------------------
// Split

struct SplitSpec {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;  // informational; the test set is loaded separately
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
};

// Unstratified: one seeded permutation, first `train` indices then `valid`.
inline SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  if (spec.train == 0 || spec.valid == 0) throw ConfigError("dataset.split: train and valid counts must be positive");
  if (spec.train + spec.valid != n) {
    throw ConfigError("dataset.split: train + valid = " + std::to_string(spec.train + spec.valid) +
                      " but the source has " + std::to_string(n) + " samples");
  }
  CounterRng rng(spec.seed, 0x5b1);
  const auto perm = permutation(n, rng);
  return {std::vector<std::size_t>(perm.begin(), perm.begin() + spec.train),
          std::vector<std::size_t>(perm.begin() + spec.train, perm.end())};
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  const auto idx = split_indices(ds.size(), spec);
  return {ds.subset(idx.train, "train"), ds.subset(idx.valid, "valid")};
}

// Per-channel (axis 1) standardization with statistics from `reference`.
inline void standardize(std::vector<Dataset*> sets, const Dataset& reference) {
  const std::size_t c = reference.images.rank() >= 2 ? reference.images.dim(1) : 1;
  const std::size_t inner = reference.sample_size() / c;
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  const double count = static_cast<double>(reference.size() * inner);
  for (std::size_t i = 0; i < reference.size(); ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < inner; ++s) mean[ch] += reference.images[(i * c + ch) * inner + s];
  for (double& m : mean) m /= count;
  for (std::size_t i = 0; i < reference.size(); ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < inner; ++s) {
        const double d = reference.images[(i * c + ch) * inner + s] - mean[ch];
        var[ch] += d * d;
      }
  std::vector<double> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] / count + 1e-12);
  for (Dataset* ds : sets)
    for (std::size_t i = 0; i < ds->size(); ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t s = 0; s < inner; ++s) {
          double& v = ds->images[(i * c + ch) * inner + s];
          v = (v - mean[ch]) * inv_std[ch];
        }
}

// ---------------------------------------------------------------------------
// Synthetic blobs

// Class means are the vertices of a regular simplex of radius 1 centred at
// the origin: e_c minus the centroid of e_0..e_{classes-1}, rescaled.
inline std::vector<std::vector<double>> simplex_means(std::size_t classes, std::size_t dim) {
  if (classes < 2) throw ConfigError("synthetic_blobs: need at least 2 classes");
  if (dim < classes) throw ConfigError("synthetic_blobs: dim must be >= classes");
  const double off = 1.0 / static_cast<double>(classes);
  const double radius = std::sqrt((1.0 - off) * (1.0 - off) + (classes - 1) * off * off);
  std::vector<std::vector<double>> means(classes, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t d = 0; d < classes; ++d) means[c][d] = ((c == d ? 1.0 : 0.0) - off) / radius;
  return means;
}

// Sample i has label i mod classes and coordinates mean + spread * N(0, 1),
// drawn from stream i of the seed.
inline Dataset synthetic_blobs(std::size_t n, std::size_t classes, std::size_t dim, double spread, std::uint64_t seed) {
  if (n == 0) throw ConfigError("synthetic_blobs: n must be positive");
  if (!(spread >= 0.0)) throw ConfigError("synthetic_blobs: spread must be >= 0");
  const auto means = simplex_means(classes, dim);
  std::vector<double> data(n * dim);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    labels[i] = static_cast<int>(c);
    CounterRng rng(seed, 0xb10b0000ULL + i);
    for (std::size_t d = 0; d < dim; ++d) data[i * dim + d] = means[c][d] + spread * rng.normal();
  }
  return Dataset{Tensor({n, dim}, std::move(data)), std::move(labels), {"blobs", classes, "all"}};
}

// ---------------------------------------------------------------------------
// Batching

struct Batch {
  Tensor images;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

// Batches in stored order, or in a permutation that depends only on
// (seed, epoch). The final short batch is kept.
inline std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch, bool shuffle,
                                                           std::uint64_t seed, std::uint64_t epoch) {
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  if (shuffle) {
    CounterRng rng(seed, 0xe0c0000000ULL + epoch);
    order = permutation(n, rng);
  } else {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch)
    out.emplace_back(order.begin() + start, order.begin() + std::min(n, start + batch));
  return out;
}

inline Batch make_batch(const Dataset& ds, std::span<const std::size_t> idx) {
  Dataset sub = ds.subset(idx, ds.meta.split_tag);
  return Batch{std::move(sub.images), std::move(sub.labels), std::vector<std::size_t>(idx.begin(), idx.end())};
}

inline std::vector<Batch> batch_iter(const Dataset& ds, std::size_t batch, bool shuffle, std::uint64_t seed,
                                     std::uint64_t epoch) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(ds.size(), batch, shuffle, seed, epoch)) out.push_back(make_batch(ds, idx));
  return out;
}

}  // namespace telu_lab

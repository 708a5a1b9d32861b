#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "exitnet/errors.hpp"
#include "exitnet/tensor.hpp"

namespace exitnet {

struct Dataset {
  Tensor x;            // n x input_dim
  std::vector<int> y;  // n labels in [0, classes)
  int num_classes = 0;

  int n() const { return x.dim(0); }
  int input_dim() const { return x.dim(1); }

  Dataset slice(const std::vector<int>& idx) const {
    Tensor xs({static_cast<int>(idx.size()), input_dim()});
    std::vector<int> ys(idx.size());
    const double* src = x.data();
    double* dst = xs.data();
    int d = input_dim();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const double* row = src + static_cast<long>(idx[r]) * d;
      std::copy(row, row + d, dst + static_cast<long>(r) * d);
      ys[r] = y[static_cast<std::size_t>(idx[r])];
    }
    return {xs, std::move(ys), num_classes};
  }
};

struct DataSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

enum class DatasetKind { synthetic_blobs, synthetic_easy_hard, idx_files };

inline std::string dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::synthetic_blobs: return "synthetic_blobs";
    case DatasetKind::synthetic_easy_hard: return "synthetic_easy_hard";
    case DatasetKind::idx_files: return "idx_files";
  }
  return "?";
}

inline DatasetKind dataset_kind_from_name(const std::string& s) {
  if (s == "synthetic_blobs") return DatasetKind::synthetic_blobs;
  if (s == "synthetic_easy_hard") return DatasetKind::synthetic_easy_hard;
  if (s == "idx_files") return DatasetKind::idx_files;
  throw ConfigError("unknown dataset kind: " + s);
}

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic_easy_hard;
  int n_train = 0;
  int n_val = 0;
  int n_test = 0;
  int input_dim = 0;
  int classes = 0;
  double difficulty_mix = 0.3;  // fraction of hard samples
  std::uint64_t seed = 0;
  std::string idx_images;  // idx_files kind only
  std::string idx_labels;

  void validate() const {
    if (kind != DatasetKind::idx_files) {
      if (n_train < 1 || n_val < 1 || n_test < 1)
        throw ConfigError("DatasetSpec: all splits must be nonempty");
      if (input_dim < 1) throw ConfigError("DatasetSpec: input_dim must be >= 1");
      if (classes < 2) throw ConfigError("DatasetSpec: classes must be >= 2");
      if (difficulty_mix < 0.0 || difficulty_mix > 1.0)
        throw ConfigError("DatasetSpec: difficulty_mix must be in [0,1]");
    } else {
      if (idx_images.empty() || idx_labels.empty())
        throw ConfigError("DatasetSpec: idx_files needs image and label paths");
      if (n_val < 1 || n_test < 1)
        throw ConfigError("DatasetSpec: idx_files needs n_val and n_test to carve out");
    }
  }
};

namespace detail {

/// Class centers: random unit directions scaled to `radius`, rejected until
/// every pair is at least 60 degrees apart. Low-dimensional inputs cannot fit
/// many such directions; failing to place them is a configuration error.
inline std::vector<std::vector<double>> place_class_means(int classes, int dim,
                                                          double radius,
                                                          std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> means;
  int attempts = 0;
  const int max_attempts = 400 * classes;
  while (static_cast<int>(means.size()) < classes) {
    if (++attempts > max_attempts)
      throw ConfigError("generate_synthetic: cannot place " +
                        std::to_string(classes) +
                        " separated class centers in " + std::to_string(dim) +
                        " dimensions");
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    for (double& c : v) {
      c = gauss(rng);
      norm2 += c * c;
    }
    double norm = std::sqrt(norm2);
    if (norm < 1e-12) continue;
    for (double& c : v) c /= norm;
    bool ok = true;
    for (const auto& m : means) {
      double dot = 0.0;
      for (int i = 0; i < dim; ++i) dot += v[static_cast<std::size_t>(i)] * m[static_cast<std::size_t>(i)];
      if (dot > 0.5) {  // closer than 60 degrees
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    for (double& c : v) c *= radius;
    means.push_back(std::move(v));
  }
  return means;
}

inline Dataset sample_mixture(int n, int classes, int dim,
                              const std::vector<std::vector<double>>& means,
                              int n_hard, double sigma_easy, double sigma_hard,
                              std::mt19937_64& rng) {
  // Round-robin labels keep the histogram balanced; the first n_hard slots
  // get the noisy cluster scale. Row order is shuffled afterwards.
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<char> hard(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = i % classes;
    if (i < n_hard) hard[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  Tensor x({n, dim});
  std::vector<int> y(static_cast<std::size_t>(n));
  std::normal_distribution<double> gauss(0.0, 1.0);
  double* xv = x.data();
  for (int r = 0; r < n; ++r) {
    int src = order[static_cast<std::size_t>(r)];
    int cls = labels[static_cast<std::size_t>(src)];
    double sigma = hard[static_cast<std::size_t>(src)] ? sigma_hard : sigma_easy;
    const auto& mu = means[static_cast<std::size_t>(cls)];
    double* row = xv + static_cast<long>(r) * dim;
    for (int c = 0; c < dim; ++c) row[c] = mu[static_cast<std::size_t>(c)] + sigma * gauss(rng);
    y[static_cast<std::size_t>(r)] = cls;
  }
  return {x, std::move(y), classes};
}

}  // namespace detail

/// Deterministic synthetic datasets. `synthetic_blobs` is a single-scale
/// Gaussian mixture; `synthetic_easy_hard` mixes tight clusters (classifiable
/// by a shallow exit) with heavily overlapping ones at configured proportion.
inline DataSplits generate_synthetic(const DatasetSpec& spec) {
  spec.validate();
  if (spec.kind == DatasetKind::idx_files)
    throw ConfigError("generate_synthetic: spec kind is idx_files");
  std::mt19937_64 rng(spec.seed);
  const double radius = 3.0;
  auto means = detail::place_class_means(spec.classes, spec.input_dim, radius, rng);
  double sigma_easy, sigma_hard, mix;
  if (spec.kind == DatasetKind::synthetic_blobs) {
    sigma_easy = sigma_hard = 0.8;
    mix = 0.0;
  } else {
    sigma_easy = 0.25;
    sigma_hard = 2.2;
    mix = spec.difficulty_mix;
  }
  auto draw = [&](int n) {
    int n_hard = static_cast<int>(std::lround(mix * n));
    return detail::sample_mixture(n, spec.classes, spec.input_dim, means,
                                  n_hard, sigma_easy, sigma_hard, rng);
  };
  DataSplits s;
  s.train = draw(spec.n_train);
  s.val = draw(spec.n_val);
  s.test = draw(spec.n_test);
  return s;
}

// ---- IDX container (big-endian magic + dims, ubyte payload) ----

struct IdxData {
  std::vector<int> dims;
  std::vector<std::uint8_t> payload;
};

inline IdxData read_idx(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path);
  auto read_u32be = [&](std::size_t offset) -> std::uint32_t {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4)
      throw FormatError(path + ": truncated at byte offset " +
                        std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
  };
  std::uint32_t magic = read_u32be(0);
  if ((magic >> 8) != 0x000008)
    throw FormatError(path + ": bad magic at byte offset 0 (got 0x" +
                      [&] {
                        char buf[16];
                        std::snprintf(buf, sizeof buf, "%08x", magic);
                        return std::string(buf);
                      }() +
                      ", expected unsigned-byte type 0x000008..)");
  int ndims = static_cast<int>(magic & 0xff);
  if (ndims < 1 || ndims > 4)
    throw FormatError(path + ": unsupported dimension count " +
                      std::to_string(ndims));
  IdxData d;
  std::size_t expected = 1;
  for (int i = 0; i < ndims; ++i) {
    std::uint32_t dim = read_u32be(4 + 4 * static_cast<std::size_t>(i));
    d.dims.push_back(static_cast<int>(dim));
    expected *= dim;
  }
  d.payload.resize(expected);
  is.read(reinterpret_cast<char*>(d.payload.data()),
          static_cast<std::streamsize>(expected));
  std::size_t got = static_cast<std::size_t>(is.gcount());
  if (got != expected)
    throw FormatError(path + ": truncated payload, expected " +
                      std::to_string(expected) + " bytes, got " +
                      std::to_string(got));
  return d;
}

inline void write_idx(const std::string& path, const IdxData& d) {
  if (d.dims.empty() || d.dims.size() > 4)
    throw FormatError("write_idx: dimension count must be 1..4");
  std::size_t expected = 1;
  for (int dim : d.dims) expected *= static_cast<std::size_t>(dim);
  if (expected != d.payload.size())
    throw FormatError("write_idx: payload size does not match dims");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for write: " + path);
  auto write_u32be = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
  };
  write_u32be(0x00000800u | static_cast<std::uint32_t>(d.dims.size()));
  for (int dim : d.dims) write_u32be(static_cast<std::uint32_t>(dim));
  os.write(reinterpret_cast<const char*>(d.payload.data()),
           static_cast<std::streamsize>(d.payload.size()));
  if (!os) throw FormatError("write failed: " + path);
}

/// Loads an image/label IDX pair, normalizes pixels to [0,1], flattens each
/// sample, and carves val/test splits off the tail.
inline DataSplits load_idx_dataset(const DatasetSpec& spec) {
  spec.validate();
  IdxData images = read_idx(spec.idx_images);
  IdxData labels = read_idx(spec.idx_labels);
  if (labels.dims.size() != 1)
    throw FormatError(spec.idx_labels + ": labels must be 1-dimensional");
  if (images.dims.empty() || images.dims[0] != labels.dims[0])
    throw FormatError("image/label sample counts differ");
  int n = images.dims[0];
  int dim = 1;
  for (std::size_t i = 1; i < images.dims.size(); ++i) dim *= images.dims[i];
  if (dim < 1) throw FormatError(spec.idx_images + ": empty sample shape");
  int classes = 0;
  for (std::uint8_t b : labels.payload) classes = std::max(classes, int(b) + 1);
  if (spec.classes > 0) classes = std::max(classes, spec.classes);
  if (spec.n_val + spec.n_test >= n)
    throw ConfigError("load_idx_dataset: val+test splits exceed sample count");

  Dataset all;
  all.x = Tensor({n, dim});
  all.y.resize(static_cast<std::size_t>(n));
  all.num_classes = classes;
  double* xv = all.x.data();
  for (long i = 0; i < static_cast<long>(n) * dim; ++i)
    xv[i] = images.payload[static_cast<std::size_t>(i)] / 255.0;
  for (int i = 0; i < n; ++i) all.y[static_cast<std::size_t>(i)] = labels.payload[static_cast<std::size_t>(i)];

  int n_train = n - spec.n_val - spec.n_test;
  auto range = [](int lo, int hi) {
    std::vector<int> idx(static_cast<std::size_t>(hi - lo));
    std::iota(idx.begin(), idx.end(), lo);
    return idx;
  };
  DataSplits s;
  s.train = all.slice(range(0, n_train));
  s.val = all.slice(range(n_train, n_train + spec.n_val));
  s.test = all.slice(range(n_train + spec.n_val, n));
  return s;
}

inline DataSplits load_dataset(const DatasetSpec& spec) {
  if (spec.kind == DatasetKind::idx_files) return load_idx_dataset(spec);
  return generate_synthetic(spec);
}

}  // namespace exitnet

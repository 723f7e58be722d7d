/* Copyright 2026 The SBNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "sbnn/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace sbnn::dataio {

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  Dataset out;
  out.images = images.middleRows(static_cast<Eigen::Index>(begin),
                                 static_cast<Eigen::Index>(end - begin));
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
  out.classes = classes;
  out.shape = shape;
  out.mean = mean;
  out.stddev = stddev;
  return out;
}

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (static_cast<std::uint32_t>(b[at]) << 24) | (static_cast<std::uint32_t>(b[at + 1]) << 16) |
         (static_cast<std::uint32_t>(b[at + 2]) << 8) | static_cast<std::uint32_t>(b[at + 3]);
}

}  // namespace

Dataset load_cifar10_binary(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw DataError(DataError::Kind::SizeMismatch,
                    path.string() + ": size " + std::to_string(bytes.size()) +
                        " is not a positive multiple of 3073");
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  Dataset ds;
  ds.classes = 10;
  ds.shape = {3, 32, 32};
  ds.mean.assign(kCifar10Mean.begin(), kCifar10Mean.end());
  ds.stddev.assign(kCifar10Std.begin(), kCifar10Std.end());
  ds.images.resize(static_cast<Eigen::Index>(n), 3072);
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] >= 10) {
      throw DataError(DataError::Kind::LabelOutOfRange,
                      "record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
    }
    ds.labels[r] = rec[0];
    for (std::size_t k = 0; k < 3072; ++k) {
      const std::size_t c = k / 1024;
      ds.images(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          (rec[1 + k] / 255.0 - ds.mean[c]) / ds.stddev[c];
    }
  }
  return ds;
}

void write_cifar10_binary(const std::filesystem::path& path, std::span<const CifarRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::Io, "cannot open " + path.string() + " for writing");
  for (const auto& r : records) {
    out.put(static_cast<char>(r.label));
    out.write(reinterpret_cast<const char*>(r.pixels.data()), 3072);
  }
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = read_all(images);
  const auto lb = read_all(labels);
  if (ib.size() < 16 || be32(ib, 0) != 0x00000803U) {
    throw DataError(DataError::Kind::BadMagic, images.string() + ": not an IDX image file");
  }
  if (lb.size() < 8 || be32(lb, 0) != 0x00000801U) {
    throw DataError(DataError::Kind::BadMagic, labels.string() + ": not an IDX label file");
  }
  const std::size_t n = be32(ib, 4);
  const std::size_t rows = be32(ib, 8);
  const std::size_t cols = be32(ib, 12);
  const std::size_t nl = be32(lb, 4);
  if (n != nl) {
    throw DataError(DataError::Kind::CountMismatch,
                    std::to_string(n) + " images but " + std::to_string(nl) + " labels");
  }
  if (n == 0 || rows == 0 || cols == 0) {
    throw DataError(DataError::Kind::SizeMismatch, "IDX file declares an empty dimension");
  }
  if (ib.size() != 16 + n * rows * cols || lb.size() != 8 + n) {
    throw DataError(DataError::Kind::SizeMismatch, "IDX payload size does not match header");
  }
  Dataset ds;
  ds.shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
  const std::size_t pix = rows * cols;
  ds.images.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pix));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < pix; ++k) {
      ds.images(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = ib[16 + r * pix + k] / 255.0;
    }
  }
  int max_label = 0;
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    ds.labels[r] = lb[8 + r];
    max_label = std::max(max_label, ds.labels[r]);
  }
  ds.classes = max_label + 1;
  const double mean = ds.images.mean();
  const double var = (ds.images.array() - mean).square().mean();
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  ds.images = ((ds.images.array() - mean) / sd).matrix();
  ds.mean = {mean};
  ds.stddev = {sd};
  return ds;
}

Dataset synthetic_classification(std::uint64_t seed, std::size_t n, int classes,
                                 double difficulty, FeatureShape shape) {
  if (classes < 2) throw ValidationError("synthetic data needs at least 2 classes");
  if (n == 0 || n < static_cast<std::size_t>(classes)) {
    throw ValidationError("synthetic data needs n >= classes > 0");
  }
  if (difficulty < 0.0) throw ValidationError("difficulty must be >= 0");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, 0.5 + 2.0 * difficulty);
  const auto dim = static_cast<Eigen::Index>(shape.size());
  Batch prototypes(classes, dim);
  for (Eigen::Index c = 0; c < classes; ++c) {
    for (Eigen::Index k = 0; k < dim; ++k) prototypes(c, k) = coin(rng) ? 1.0 : -1.0;
  }
  Dataset ds;
  ds.classes = classes;
  ds.shape = shape;
  ds.images.resize(static_cast<Eigen::Index>(n), dim);
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const int label = static_cast<int>(r % static_cast<std::size_t>(classes));
    ds.labels[r] = label;
    for (Eigen::Index k = 0; k < dim; ++k) {
      ds.images(static_cast<Eigen::Index>(r), k) = prototypes(label, k) + noise(rng);
    }
  }
  ds.mean.assign(static_cast<std::size_t>(shape.channels), 0.0);
  ds.stddev.assign(static_cast<std::size_t>(shape.channels), 1.0);
  return ds;
}

void augment(Batch& images, const FeatureShape& shape, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> shift(-1, 1);
  std::bernoulli_distribution flip(0.5);
  const int h = shape.height;
  const int w = shape.width;
  Eigen::RowVectorXd src;
  for (Eigen::Index r = 0; r < images.rows(); ++r) {
    const bool f = flip(rng);
    const int dy = shift(rng);
    const int dx = shift(rng);
    src = images.row(r);
    for (int c = 0; c < shape.channels; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int sy = y + dy;
          int sx = x + dx;
          if (f) sx = w - 1 - sx;
          double v = 0.0;
          if (sy >= 0 && sy < h && sx >= 0 && sx < w) v = src((c * h + sy) * w + sx);
          images(r, (c * h + y) * w + x) = v;
        }
      }
    }
  }
}

}  // namespace sbnn::dataio

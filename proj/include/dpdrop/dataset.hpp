// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset loading and minibatch sampling. Two loaders are provided:
//   * IDX image/label pairs (big-endian binary, the handwritten-digit
//     archive convention): pixels scaled by 1/255, images flattened.
//   * 8x8 digits CSV: 65 comma-separated integers per row — 64 features in
//     [0, 16] scaled by 1/16, then the class label in [0, 9].
// Minibatches are uniform samples of S distinct indices per step.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dpdrop/errors.hpp"

namespace dpdrop {

struct Dataset {
  Eigen::MatrixXd features;  // N x D, every entry in [0, 1]
  Eigen::VectorXi labels;    // N, each in [0, n_classes)
  int n_classes = 0;

  long n_examples() const { return static_cast<long>(features.rows()); }
  long n_features() const { return static_cast<long>(features.cols()); }
};

struct Minibatch {
  std::vector<long> indices;  // S distinct positions into the dataset
  Eigen::MatrixXd features;   // S x D
  Eigen::VectorXi labels;     // S
};

namespace detail {

inline uint32_t read_u32_big_endian(std::ifstream& in, const std::string& path,
                                    const char* field) {
  uint8_t bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (in.gcount() != 4)
    throw FormatError(path + ": truncated " + field);
  return (static_cast<uint32_t>(bytes[0]) << 24) |
         (static_cast<uint32_t>(bytes[1]) << 16) |
         (static_cast<uint32_t>(bytes[2]) << 8) |
         static_cast<uint32_t>(bytes[3]);
}

}  // namespace detail

// Loads an IDX image file (magic 0x00000803) and its label file (magic
// 0x00000801) into a Dataset. Pixels are scaled by 1/255 and images
// flattened row-major into D = rows*cols features. Labels must lie in
// [0, 9]; the class count is fixed at 10.
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img.good())
    throw FormatError(images_path + ": cannot open image file");
  const uint32_t img_magic =
      detail::read_u32_big_endian(img, images_path, "image magic");
  if (img_magic != 0x00000803u)
    throw FormatError(images_path + ": bad image magic (expected 0x00000803)");
  const uint32_t count =
      detail::read_u32_big_endian(img, images_path, "image count");
  const uint32_t rows =
      detail::read_u32_big_endian(img, images_path, "image rows");
  const uint32_t cols =
      detail::read_u32_big_endian(img, images_path, "image cols");
  const size_t pixels_per_image = static_cast<size_t>(rows) * cols;
  std::vector<uint8_t> pixels(static_cast<size_t>(count) * pixels_per_image);
  img.read(reinterpret_cast<char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (static_cast<size_t>(img.gcount()) != pixels.size())
    throw FormatError(images_path + ": truncated image payload (expected " +
                      std::to_string(pixels.size()) + " pixel bytes)");

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab.good())
    throw FormatError(labels_path + ": cannot open label file");
  const uint32_t lab_magic =
      detail::read_u32_big_endian(lab, labels_path, "label magic");
  if (lab_magic != 0x00000801u)
    throw FormatError(labels_path + ": bad label magic (expected 0x00000801)");
  const uint32_t lab_count =
      detail::read_u32_big_endian(lab, labels_path, "label count");
  if (lab_count != count)
    throw FormatError(labels_path + ": label count " +
                      std::to_string(lab_count) + " does not match image count " +
                      std::to_string(count));
  std::vector<uint8_t> raw_labels(lab_count);
  lab.read(reinterpret_cast<char*>(raw_labels.data()),
           static_cast<std::streamsize>(raw_labels.size()));
  if (static_cast<size_t>(lab.gcount()) != raw_labels.size())
    throw FormatError(labels_path + ": truncated label payload");

  Dataset ds;
  ds.features.resize(count, static_cast<Eigen::Index>(pixels_per_image));
  ds.labels.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    for (size_t j = 0; j < pixels_per_image; ++j)
      ds.features(i, static_cast<Eigen::Index>(j)) =
          pixels[i * pixels_per_image + j] / 255.0;
    if (raw_labels[i] > 9)
      throw FormatError(labels_path + ": label " +
                        std::to_string(raw_labels[i]) + " out of range [0, 9]");
    ds.labels[i] = raw_labels[i];
  }
  ds.n_classes = 10;
  return ds;
}

namespace detail {

inline Dataset load_digits_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw FormatError(path + ": cannot open file");
  std::vector<std::array<int, 65>> rows;
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<int, 65> cells{};
    size_t pos = 0;
    int n_cells = 0;
    while (true) {
      const size_t comma = line.find(',', pos);
      const std::string cell =
          line.substr(pos, comma == std::string::npos ? std::string::npos
                                                      : comma - pos);
      if (n_cells >= 65)
        throw FormatError(path + ": row " + std::to_string(line_number) +
                          " has more than 65 columns");
      try {
        size_t used = 0;
        cells[static_cast<size_t>(n_cells)] = std::stoi(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError(path + ": row " + std::to_string(line_number) +
                          " column " + std::to_string(n_cells + 1) +
                          " is not an integer: '" + cell + "'");
      }
      ++n_cells;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (n_cells != 65)
      throw FormatError(path + ": row " + std::to_string(line_number) +
                        " has " + std::to_string(n_cells) +
                        " columns, expected 65");
    for (int j = 0; j < 64; ++j)
      if (cells[static_cast<size_t>(j)] < 0 || cells[static_cast<size_t>(j)] > 16)
        throw FormatError(path + ": row " + std::to_string(line_number) +
                          " feature " + std::to_string(j + 1) + " value " +
                          std::to_string(cells[static_cast<size_t>(j)]) +
                          " out of range [0, 16]");
    if (cells[64] < 0 || cells[64] > 9)
      throw FormatError(path + ": row " + std::to_string(line_number) +
                        " label " + std::to_string(cells[64]) +
                        " out of range [0, 9]");
    rows.push_back(cells);
  }
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), 64);
  ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < 64; ++j)
      ds.features(static_cast<Eigen::Index>(i), j) =
          rows[i][static_cast<size_t>(j)] / 16.0;
    ds.labels[static_cast<Eigen::Index>(i)] = rows[i][64];
  }
  ds.n_classes = 10;
  return ds;
}

}  // namespace detail

// Loads the digits train/test CSV pair. Any row counts are accepted here;
// the training harness asserts the bundled 1439/360 split.
inline std::pair<Dataset, Dataset> load_digits_csv(
    const std::string& train_path, const std::string& test_path) {
  return {detail::load_digits_csv_file(train_path),
          detail::load_digits_csv_file(test_path)};
}

// Loads a single digits CSV split (standalone evaluation sets).
inline Dataset load_digits_split(const std::string& path) {
  return detail::load_digits_csv_file(path);
}

// Uniform sample of `batch_size` distinct indices (partial Fisher-Yates),
// deterministic given the rng state. batch_size == N yields a permutation
// of the full index set.
inline Minibatch sample_minibatch(const Dataset& dataset, long batch_size,
                                  std::mt19937_64& rng) {
  const long n = dataset.n_examples();
  if (batch_size < 1)
    throw DomainError("sample_minibatch: batch_size must be >= 1");
  if (batch_size > n)
    throw DomainError("sample_minibatch: batch_size " +
                      std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(n));
  std::vector<long> pool(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
  Minibatch mb;
  mb.indices.resize(static_cast<size_t>(batch_size));
  for (long i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<long> pick(i, n - 1);
    const long j = pick(rng);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    mb.indices[static_cast<size_t>(i)] = pool[static_cast<size_t>(i)];
  }
  mb.features.resize(batch_size, dataset.features.cols());
  mb.labels.resize(batch_size);
  for (long i = 0; i < batch_size; ++i) {
    mb.features.row(i) = dataset.features.row(mb.indices[static_cast<size_t>(i)]);
    mb.labels[i] = dataset.labels[mb.indices[static_cast<size_t>(i)]];
  }
  return mb;
}

}  // namespace dpdrop
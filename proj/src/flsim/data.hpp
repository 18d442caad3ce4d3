/**
 * Copyright 2026 The flsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FLSIM_DATA_HPP_
#define FLSIM_DATA_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace flsim {

// Row-major matrix of samples; one row per sample.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double &operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Labeled samples. Used both for mini-batches and whole data stores.
struct Batch {
  Matrix inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  void append(std::span<const double> x, int label);
  Batch gather(std::span<const std::size_t> indices) const;
};

// Throws ConfigError if sizes disagree, the batch is empty, or a label is
// outside [0, num_classes).
void validate_batch(const Batch &b, std::size_t input_dim, std::size_t num_classes);

Batch concat(std::span<const Batch> parts);

struct ClientDataset {
  int client_id = 0;
  std::size_t num_classes = 0;
  Batch train;
  Batch test;
  std::vector<std::size_t> label_histogram;  // counts over train
};

std::vector<std::size_t> histogram(const Batch &b, std::size_t num_classes);

}  // namespace flsim

#endif  // FLSIM_DATA_HPP_

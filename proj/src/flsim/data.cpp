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

#include "flsim/data.hpp"

#include <string>

#include "flsim/error.hpp"

namespace flsim {

void Batch::append(std::span<const double> x, int label) {
  if (inputs.rows == 0 && inputs.cols == 0) inputs.cols = x.size();
  if (x.size() != inputs.cols) throw ConfigError("sample width does not match batch width");
  inputs.data.insert(inputs.data.end(), x.begin(), x.end());
  ++inputs.rows;
  labels.push_back(label);
}

Batch Batch::gather(std::span<const std::size_t> indices) const {
  Batch out;
  out.inputs = Matrix(indices.size(), inputs.cols);
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = inputs.row(indices[i]);
    std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

void validate_batch(const Batch &b, std::size_t input_dim, std::size_t num_classes) {
  if (b.empty()) throw ConfigError("batch is empty");
  if (b.inputs.rows != b.labels.size()) throw ConfigError("batch rows and labels differ in count");
  if (b.inputs.cols != input_dim) {
    throw ConfigError("batch width " + std::to_string(b.inputs.cols) + " != model input_dim " +
                      std::to_string(input_dim));
  }
  for (int y : b.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ConfigError("label " + std::to_string(y) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
}

Batch concat(std::span<const Batch> parts) {
  Batch out;
  for (const auto &p : parts) {
    if (p.empty()) continue;
    if (out.empty()) out.inputs.cols = p.inputs.cols;
    if (p.inputs.cols != out.inputs.cols) throw ConfigError("concat: width mismatch");
    out.inputs.data.insert(out.inputs.data.end(), p.inputs.data.begin(), p.inputs.data.end());
    out.inputs.rows += p.inputs.rows;
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

std::vector<std::size_t> histogram(const Batch &b, std::size_t num_classes) {
  std::vector<std::size_t> h(num_classes, 0);
  for (int y : b.labels) {
    if (y >= 0 && static_cast<std::size_t>(y) < num_classes) ++h[y];
  }
  return h;
}

}  // namespace flsim

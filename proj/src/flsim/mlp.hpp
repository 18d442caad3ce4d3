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

#ifndef FLSIM_MLP_HPP_
#define FLSIM_MLP_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flsim/data.hpp"
#include "flsim/params.hpp"

namespace flsim {

enum class Activation { kRelu, kTanh };

Activation parse_activation(const std::string &name);
std::string to_string(Activation a);

// Fully connected net. Each affine map contributes two layer slots: the
// weight (shape {out, in}) at id 2i and the bias (shape {out}) at id 2i+1.
// Activations carry no parameters and are not slots.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  Activation activation = Activation::kRelu;

  std::size_t num_affine() const { return hidden_dims.size() + 1; }
  std::size_t num_layers() const { return 2 * num_affine(); }
  std::size_t num_params() const;
  // Throws ConfigError on a zero dimension.
  void validate() const;
};

// Uniform(+-1/sqrt(fan_in)) weights from a stream keyed on (seed, layer_id);
// zero biases.
LayeredParams init_model(const MlpSpec &spec, std::uint64_t seed);

// Throws ConfigError unless `model` has the layout `spec` produces.
void require_matches(const MlpSpec &spec, const LayeredParams &model);

// Mean softmax cross-entropy over the batch.
double forward_loss(const MlpSpec &spec, const LayeredParams &model, const Batch &batch);

// Gradient of forward_loss, congruent with `model`. Non-trainable slots get
// zeros.
LayeredParams backward(const MlpSpec &spec, const LayeredParams &model, const Batch &batch);

// Loss and gradient from one forward pass.
double loss_and_gradient(const MlpSpec &spec, const LayeredParams &model, const Batch &batch,
                         LayeredParams *grad);

std::vector<double> logits(const MlpSpec &spec, const LayeredParams &model,
                           std::span<const double> x);

struct TrainOptions {
  int epochs = 1;
  double lr = 0.01;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

// E epochs of plain mini-batch SGD over data.train. Batch order in epoch e
// is a permutation keyed on (seed, e). Returns the trained copy.
LayeredParams local_train(const MlpSpec &spec, const LayeredParams &model,
                          const ClientDataset &data, const TrainOptions &opt);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

EvalResult evaluate_batch(const MlpSpec &spec, const LayeredParams &model, const Batch &batch);
// Accuracy and loss on data.test.
EvalResult evaluate(const MlpSpec &spec, const LayeredParams &model, const ClientDataset &data);

}  // namespace flsim

#endif  // FLSIM_MLP_HPP_

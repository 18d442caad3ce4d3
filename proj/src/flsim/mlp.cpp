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

#include "flsim/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flsim/error.hpp"
#include "flsim/rng.hpp"

namespace flsim {

Activation parse_activation(const std::string &name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("model.activation: expected \"relu\" or \"tanh\", got \"" + name + "\"");
}

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

namespace {

std::vector<std::size_t> widths(const MlpSpec &spec) {
  std::vector<std::size_t> w;
  w.push_back(spec.input_dim);
  w.insert(w.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  w.push_back(spec.output_dim);
  return w;
}

double activate(Activation a, double z) {
  return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the pre-activation.
double activate_grad(Activation a, double z) {
  if (a == Activation::kRelu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

void check_finite_inputs(const Batch &batch) {
  for (double v : batch.inputs.data) {
    if (!std::isfinite(v)) throw RuntimeError("non-finite value in batch inputs");
  }
}

void check_call(const MlpSpec &spec, const LayeredParams &model, const Batch &batch) {
  require_matches(spec, model);
  validate_batch(batch, spec.input_dim, spec.output_dim);
  if (!all_finite(model)) throw RuntimeError("non-finite value in model parameters");
  check_finite_inputs(batch);
}

// Activations per affine stage: acts[0] = inputs, pre[i] = acts[i] W_i^T + b_i,
// acts[i+1] = act(pre[i]) for hidden stages. pre.back() holds the logits.
struct ForwardCache {
  std::vector<Matrix> acts;
  std::vector<Matrix> pre;
};

ForwardCache run_forward(const MlpSpec &spec, const LayeredParams &model, const Batch &batch) {
  const auto w = widths(spec);
  const std::size_t n = batch.size();
  ForwardCache c;
  c.acts.push_back(batch.inputs);
  for (std::size_t i = 0; i < spec.num_affine(); ++i) {
    const std::size_t in = w[i], out = w[i + 1];
    auto weight = model.values(2 * i);
    auto bias = model.values(2 * i + 1);
    const Matrix &a = c.acts.back();
    Matrix z(n, out);
    for (std::size_t s = 0; s < n; ++s) {
      auto x = a.row(s);
      for (std::size_t o = 0; o < out; ++o) {
        double acc = bias[o];
        const double *wr = weight.data() + o * in;
        for (std::size_t j = 0; j < in; ++j) acc += wr[j] * x[j];
        z(s, o) = acc;
      }
    }
    const bool last = i + 1 == spec.num_affine();
    if (!last) {
      Matrix h(n, out);
      for (std::size_t k = 0; k < z.data.size(); ++k) h.data[k] = activate(spec.activation, z.data[k]);
      c.pre.push_back(std::move(z));
      c.acts.push_back(std::move(h));
    } else {
      c.pre.push_back(std::move(z));
    }
  }
  return c;
}

// Writes softmax(row) into probs and returns log-sum-exp.
double softmax_row(std::span<const double> z, std::span<double> probs) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    probs[k] = std::exp(z[k] - m);
    sum += probs[k];
  }
  for (auto &p : probs) p /= sum;
  return m + std::log(sum);
}

}  // namespace

std::size_t MlpSpec::num_params() const {
  const auto w = widths(*this);
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) n += w[i] * w[i + 1] + w[i + 1];
  return n;
}

void MlpSpec::validate() const {
  if (input_dim == 0) throw ConfigError("model.input_dim must be >= 1");
  if (output_dim == 0) throw ConfigError("model.output_dim must be >= 1");
  for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
    if (hidden_dims[i] == 0) {
      throw ConfigError("model.hidden_dims[" + std::to_string(i) + "] must be >= 1");
    }
  }
}

LayeredParams init_model(const MlpSpec &spec, std::uint64_t seed) {
  spec.validate();
  const auto w = widths(spec);
  std::vector<LayerSlot> slots;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const std::size_t in = w[i], out = w[i + 1];
    LayerSlot weight;
    weight.layer_id = static_cast<LayerId>(2 * i);
    weight.shape = {out, in};
    weight.values.resize(out * in);
    KeyedRng rng(seed, {static_cast<std::uint64_t>(weight.layer_id)});
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto &v : weight.values) v = rng.uniform(-bound, bound);
    LayerSlot bias;
    bias.layer_id = static_cast<LayerId>(2 * i + 1);
    bias.shape = {out};
    bias.values.assign(out, 0.0);
    slots.push_back(std::move(weight));
    slots.push_back(std::move(bias));
  }
  return LayeredParams(std::move(slots));
}

void require_matches(const MlpSpec &spec, const LayeredParams &model) {
  const auto w = widths(spec);
  if (model.num_layers() != spec.num_layers()) {
    throw ConfigError("model has " + std::to_string(model.num_layers()) + " layers, spec expects " +
                      std::to_string(spec.num_layers()));
  }
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const std::vector<std::size_t> ws{w[i + 1], w[i]};
    const std::vector<std::size_t> bs{w[i + 1]};
    if (model.layer(2 * i).shape != ws || model.layer(2 * i + 1).shape != bs) {
      throw ConfigError("model layer shapes do not match the network spec at affine map " +
                        std::to_string(i));
    }
  }
}

double forward_loss(const MlpSpec &spec, const LayeredParams &model, const Batch &batch) {
  check_call(spec, model, batch);
  const auto c = run_forward(spec, model, batch);
  const Matrix &z = c.pre.back();
  std::vector<double> probs(spec.output_dim);
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const double lse = softmax_row(z.row(s), probs);
    total += lse - z(s, batch.labels[s]);
  }
  return total / static_cast<double>(batch.size());
}

double loss_and_gradient(const MlpSpec &spec, const LayeredParams &model, const Batch &batch,
                         LayeredParams *grad) {
  check_call(spec, model, batch);
  const auto w = widths(spec);
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  auto c = run_forward(spec, model, batch);

  // dz = (softmax - onehot) / n on the logits.
  Matrix dz(n, spec.output_dim);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    auto zr = c.pre.back().row(s);
    auto pr = dz.row(s);
    const double lse = softmax_row(zr, pr);
    total += lse - zr[batch.labels[s]];
    pr[batch.labels[s]] -= 1.0;
    for (auto &v : pr) v *= inv_n;
  }

  *grad = zeros_like(model);
  for (std::size_t i = spec.num_affine(); i-- > 0;) {
    const std::size_t in = w[i], out = w[i + 1];
    const Matrix &a = c.acts[i];
    auto gw = grad->values(2 * i);
    auto gb = grad->values(2 * i + 1);
    for (std::size_t s = 0; s < n; ++s) {
      auto x = a.row(s);
      auto d = dz.row(s);
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += d[o];
        double *gr = gw.data() + o * in;
        for (std::size_t j = 0; j < in; ++j) gr[j] += d[o] * x[j];
      }
    }
    if (i == 0) break;
    auto weight = model.values(2 * i);
    Matrix da(n, in);
    for (std::size_t s = 0; s < n; ++s) {
      auto d = dz.row(s);
      auto out_row = da.row(s);
      for (std::size_t o = 0; o < out; ++o) {
        const double *wr = weight.data() + o * in;
        for (std::size_t j = 0; j < in; ++j) out_row[j] += d[o] * wr[j];
      }
    }
    const Matrix &zprev = c.pre[i - 1];
    for (std::size_t k = 0; k < da.data.size(); ++k) {
      da.data[k] *= activate_grad(spec.activation, zprev.data[k]);
    }
    dz = std::move(da);
  }
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    if (!model.layer(l).trainable) {
      auto g = grad->values(l);
      std::fill(g.begin(), g.end(), 0.0);
    }
  }
  return total * inv_n;
}

LayeredParams backward(const MlpSpec &spec, const LayeredParams &model, const Batch &batch) {
  LayeredParams grad;
  loss_and_gradient(spec, model, batch, &grad);
  return grad;
}

std::vector<double> logits(const MlpSpec &spec, const LayeredParams &model,
                           std::span<const double> x) {
  Batch b;
  b.append(x, 0);
  require_matches(spec, model);
  const auto c = run_forward(spec, model, b);
  auto r = c.pre.back().row(0);
  return {r.begin(), r.end()};
}

LayeredParams local_train(const MlpSpec &spec, const LayeredParams &model,
                          const ClientDataset &data, const TrainOptions &opt) {
  if (data.train.empty()) {
    throw RuntimeError("client " + std::to_string(data.client_id) + ": empty training set");
  }
  if (opt.epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (!(opt.lr >= 0.0) || !std::isfinite(opt.lr)) throw ConfigError("lr must be finite and >= 0");
  if (opt.batch_size == 0) throw ConfigError("batch_size must be >= 1");

  LayeredParams w = model;
  LayeredParams grad;
  const std::size_t n = data.train.size();
  std::vector<std::size_t> order(n);
  for (int e = 0; e < opt.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    KeyedRng rng(opt.seed, {static_cast<std::uint64_t>(e)});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::size_t stop = std::min(n, start + opt.batch_size);
      const Batch mb =
          data.train.gather(std::span<const std::size_t>(order.data() + start, stop - start));
      loss_and_gradient(spec, w, mb, &grad);
      for (std::size_t l = 0; l < w.num_layers(); ++l) {
        if (!w.layer(l).trainable) continue;
        auto p = w.values(l);
        auto g = grad.values(l);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= opt.lr * g[k];
      }
    }
  }
  return w;
}

EvalResult evaluate_batch(const MlpSpec &spec, const LayeredParams &model, const Batch &batch) {
  check_call(spec, model, batch);
  const auto c = run_forward(spec, model, batch);
  const Matrix &z = c.pre.back();
  std::vector<double> probs(spec.output_dim);
  double total = 0.0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    auto zr = z.row(s);
    total += softmax_row(zr, probs) - zr[batch.labels[s]];
    const auto pred = std::max_element(zr.begin(), zr.end()) - zr.begin();
    if (pred == batch.labels[s]) ++correct;
  }
  const double n = static_cast<double>(batch.size());
  return {static_cast<double>(correct) / n, total / n};
}

EvalResult evaluate(const MlpSpec &spec, const LayeredParams &model, const ClientDataset &data) {
  if (data.test.empty()) {
    throw RuntimeError("client " + std::to_string(data.client_id) + ": empty test split");
  }
  return evaluate_batch(spec, model, data.test);
}

}  // namespace flsim

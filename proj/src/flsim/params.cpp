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

#include "flsim/params.hpp"

#include <bit>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "flsim/error.hpp"

namespace flsim {

LayeredParams::LayeredParams(std::vector<LayerSlot> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto &slot = layers_[l];
    if (slot.layer_id != static_cast<LayerId>(l)) {
      throw ConfigError("layer ids must be contiguous from 0; slot " + std::to_string(l) +
                        " has id " + std::to_string(slot.layer_id));
    }
    const std::size_t expect = std::accumulate(slot.shape.begin(), slot.shape.end(),
                                               std::size_t{1}, std::multiplies<>());
    if (slot.shape.empty() || expect != slot.values.size()) {
      throw ConfigError("layer " + std::to_string(l) + ": value count " +
                        std::to_string(slot.values.size()) + " does not match its shape");
    }
  }
}

std::size_t LayeredParams::num_values() const {
  std::size_t n = 0;
  for (const auto &s : layers_) n += s.values.size();
  return n;
}

std::vector<bool> LayeredParams::trainable_flags() const {
  std::vector<bool> flags;
  flags.reserve(layers_.size());
  for (const auto &s : layers_) flags.push_back(s.trainable);
  return flags;
}

bool LayeredParams::operator==(const LayeredParams &other) const {
  if (!congruent(*this, other)) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].values != other.layers_[l].values) return false;
  }
  return true;
}

bool congruent(const LayeredParams &a, const LayeredParams &b) {
  if (a.num_layers() != b.num_layers()) return false;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const auto &x = a.layer(l);
    const auto &y = b.layer(l);
    if (x.shape != y.shape || x.trainable != y.trainable) return false;
  }
  return true;
}

void require_congruent(const LayeredParams &a, const LayeredParams &b, const char *what) {
  if (!congruent(a, b)) throw ConfigError(std::string(what) + ": models are not congruent");
}

LayeredParams zeros_like(const LayeredParams &p) {
  std::vector<LayerSlot> out = p.layers();
  for (auto &s : out) std::fill(s.values.begin(), s.values.end(), 0.0);
  return LayeredParams(std::move(out));
}

std::uint64_t content_hash(const LayeredParams &p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  feed(p.num_layers());
  for (const auto &s : p.layers()) {
    feed(s.trainable ? 1 : 0);
    for (auto d : s.shape) feed(d);
    for (double v : s.values) feed(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

bool all_finite(const LayeredParams &p) {
  for (const auto &s : p.layers()) {
    for (double v : s.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace flsim

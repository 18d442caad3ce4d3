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

#ifndef FLSIM_PARAMS_HPP_
#define FLSIM_PARAMS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flsim {

using LayerId = int;

struct LayerSlot {
  LayerId layer_id = 0;
  std::vector<double> values;
  std::vector<std::size_t> shape;
  bool trainable = true;
};

// A model's parameters as an ordered sequence of per-layer flat vectors.
// Layer ids are 0..L-1 and match the slot position.
class LayeredParams {
 public:
  LayeredParams() = default;
  explicit LayeredParams(std::vector<LayerSlot> layers);

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_values() const;

  const LayerSlot &layer(std::size_t l) const { return layers_.at(l); }
  LayerSlot &layer(std::size_t l) { return layers_.at(l); }
  std::span<const double> values(std::size_t l) const { return layers_.at(l).values; }
  std::span<double> values(std::size_t l) { return layers_.at(l).values; }

  const std::vector<LayerSlot> &layers() const { return layers_; }

  std::vector<bool> trainable_flags() const;

  bool operator==(const LayeredParams &other) const;

 private:
  std::vector<LayerSlot> layers_;
};

// Same L, shapes and trainable flags.
bool congruent(const LayeredParams &a, const LayeredParams &b);
// Throws ConfigError naming `what` when the two are not congruent.
void require_congruent(const LayeredParams &a, const LayeredParams &b, const char *what);

LayeredParams zeros_like(const LayeredParams &p);

// FNV-1a over layout and value bits. Used to check that operations leave
// their inputs untouched.
std::uint64_t content_hash(const LayeredParams &p);

bool all_finite(const LayeredParams &p);

}  // namespace flsim

#endif  // FLSIM_PARAMS_HPP_

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

#ifndef FLSIM_GDA_HPP_
#define FLSIM_GDA_HPP_

#include <map>
#include <span>
#include <vector>

#include "flsim/params.hpp"
#include "json.hpp"

namespace flsim {

// Server-side gradient divergence analysis. A client's trajectory for a
// round is the per-layer difference between the model it returned and the
// model it was sent; pairs of clients whose layer trajectories point more
// than a threshold apart count as conflicts for that layer.

struct Trajectory {
  int client_id = 0;
  int round = 0;
  LayeredParams delta;  // received - broadcast, congruent with the model
};

struct ConflictReport {
  int round = 0;
  double xi = 0.0;
  int k = 0;
  std::vector<int> client_ids;
  std::vector<int> gc_scores;                 // one per layer
  std::vector<LayerId> selected;              // ascending
  std::vector<std::vector<double>> cosines;   // per layer, row-major U x U
};

// Vectors whose norm falls below this are treated as vanished.
inline constexpr double kVanishedNorm = 1e-12;

Trajectory compute_trajectory(const LayeredParams &broadcast, const LayeredParams &received,
                              int client_id, int round);

// Cosine similarity; 0 when either vector has norm < kVanishedNorm.
double layer_cosine(std::span<const double> a, std::span<const double> b);

// Throws ConfigError unless -1 < xi <= 0.
void check_xi(double xi);

// Number of unordered client pairs with cos < xi (strict) on `layer`.
int gc_score(std::span<const Trajectory> trajectories, LayerId layer, double xi);

// Top-k layers by score, ties to the lower id, restricted to trainable
// layers when flags are given. Returned ascending.
std::vector<LayerId> select_layers(std::span<const int> gc_scores, int k,
                                   const std::vector<bool> &trainable = {});

using ModelMap = std::map<int, LayeredParams>;

// Trajectories -> pairwise cosines -> GC per layer -> top-k selection.
ConflictReport run_gda(const ModelMap &broadcast, const ModelMap &received, double xi, int k,
                       int round, bool keep_cosines = false);
ConflictReport run_gda(std::span<const Trajectory> trajectories, double xi, int k, int round,
                       bool keep_cosines = false);

nlohmann::json to_json(const ConflictReport &report, bool with_cosines);

}  // namespace flsim

#endif  // FLSIM_GDA_HPP_

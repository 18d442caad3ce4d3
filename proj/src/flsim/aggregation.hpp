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

#ifndef FLSIM_AGGREGATION_HPP_
#define FLSIM_AGGREGATION_HPP_

#include <map>
#include <string>
#include <vector>

#include "flsim/gda.hpp"
#include "flsim/params.hpp"

namespace flsim {

enum class StrategyKind { kFedAvg, kFedLag, kFixed };
enum class FixedPosition { kFirst, kLast, kMiddle };

StrategyKind parse_strategy_kind(const std::string &s);
FixedPosition parse_position(const std::string &s);
std::string to_string(StrategyKind k);
std::string to_string(FixedPosition p);

struct StrategySpec {
  StrategyKind kind = StrategyKind::kFedAvg;
  // fedlag
  double xi = 0.0;
  int k = 0;
  int warmup_rounds = 30;
  // fixed
  FixedPosition position = FixedPosition::kLast;
  int K = 1;

  // Checks the parameters of the selected kind. num_layers < 0 skips the
  // K <= L bound.
  void validate(int num_layers = -1) const;
  // True when this round's personalized set comes from a conflict report.
  bool needs_report(int round) const;
};

// Per-client models for the next round plus the plain mean of everything
// received.
struct BroadcastSet {
  ModelMap per_client;
  LayeredParams global_model;
  std::vector<LayerId> personalized;
};

// Optional per-client sample counts; when absent the mean is unweighted.
using ClientWeights = std::map<int, double>;

// Coordinate-wise mean, accumulated in ascending client id order.
LayeredParams aggregate_mean(const ModelMap &received, const ClientWeights *weights = nullptr);

// Mean on the global layers, each client's own values on `personalized`.
BroadcastSet split_broadcast(const ModelMap &received, const std::vector<LayerId> &personalized,
                             const ClientWeights *weights = nullptr);

std::vector<LayerId> fixed_selection(FixedPosition position, int K,
                                     const std::vector<bool> &trainable);

// One server aggregation step. `report` is required when
// spec.needs_report(round).
BroadcastSet strategy_step(const StrategySpec &spec, int round, const ModelMap &received,
                           const ConflictReport *report, const ClientWeights *weights = nullptr);

}  // namespace flsim

#endif  // FLSIM_AGGREGATION_HPP_

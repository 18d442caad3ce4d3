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

#include "flsim/aggregation.hpp"

#include <algorithm>

#include "flsim/error.hpp"

namespace flsim {

StrategyKind parse_strategy_kind(const std::string &s) {
  if (s == "fedavg") return StrategyKind::kFedAvg;
  if (s == "fedlag") return StrategyKind::kFedLag;
  if (s == "fixed") return StrategyKind::kFixed;
  throw ConfigError("strategy.kind: expected fedavg, fedlag or fixed, got \"" + s + "\"");
}

FixedPosition parse_position(const std::string &s) {
  if (s == "first") return FixedPosition::kFirst;
  if (s == "last") return FixedPosition::kLast;
  if (s == "middle") return FixedPosition::kMiddle;
  throw ConfigError("strategy.position: expected first, last or middle, got \"" + s + "\"");
}

std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::kFedAvg: return "fedavg";
    case StrategyKind::kFedLag: return "fedlag";
    case StrategyKind::kFixed: return "fixed";
  }
  return "?";
}

std::string to_string(FixedPosition p) {
  switch (p) {
    case FixedPosition::kFirst: return "first";
    case FixedPosition::kLast: return "last";
    case FixedPosition::kMiddle: return "middle";
  }
  return "?";
}

void StrategySpec::validate(int num_layers) const {
  switch (kind) {
    case StrategyKind::kFedAvg: break;
    case StrategyKind::kFedLag:
      check_xi(xi);
      if (k < 0) throw ConfigError("strategy.k must be >= 0");
      if (warmup_rounds < 0) throw ConfigError("strategy.warmup_rounds must be >= 0");
      break;
    case StrategyKind::kFixed:
      if (K < 1) throw ConfigError("strategy.K must be >= 1");
      if (num_layers >= 0 && K > num_layers) {
        throw ConfigError("strategy.K=" + std::to_string(K) + " exceeds the model's " +
                          std::to_string(num_layers) + " layers");
      }
      break;
  }
}

bool StrategySpec::needs_report(int round) const {
  return kind == StrategyKind::kFedLag && round >= warmup_rounds && k > 0;
}

LayeredParams aggregate_mean(const ModelMap &received, const ClientWeights *weights) {
  if (received.empty()) throw ConfigError("aggregate_mean: no models");
  const LayeredParams &first = received.begin()->second;
  LayeredParams acc = zeros_like(first);
  double total = 0.0;
  for (const auto &[id, model] : received) {
    require_congruent(first, model, "aggregate_mean");
    double w = 1.0;
    if (weights) {
      const auto it = weights->find(id);
      if (it == weights->end()) {
        throw ConfigError("aggregate_mean: no weight for client " + std::to_string(id));
      }
      w = it->second;
    }
    total += w;
    for (std::size_t l = 0; l < acc.num_layers(); ++l) {
      auto a = acc.values(l);
      auto v = model.values(l);
      if (weights) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += w * v[i];
      } else {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += v[i];
      }
    }
  }
  if (!(total > 0.0)) throw ConfigError("aggregate_mean: weights sum to zero");
  for (std::size_t l = 0; l < acc.num_layers(); ++l) {
    for (auto &x : acc.values(l)) x /= total;
  }
  return acc;
}

BroadcastSet split_broadcast(const ModelMap &received, const std::vector<LayerId> &personalized,
                             const ClientWeights *weights) {
  BroadcastSet out;
  out.global_model = aggregate_mean(received, weights);
  const auto L = static_cast<LayerId>(out.global_model.num_layers());
  for (LayerId l : personalized) {
    if (l < 0 || l >= L) {
      throw ConfigError("split_broadcast: unknown layer id " + std::to_string(l));
    }
  }
  out.personalized = personalized;
  std::sort(out.personalized.begin(), out.personalized.end());
  out.personalized.erase(std::unique(out.personalized.begin(), out.personalized.end()),
                         out.personalized.end());
  for (const auto &[id, model] : received) {
    LayeredParams mine = out.global_model;
    for (LayerId l : out.personalized) mine.layer(l).values = model.layer(l).values;
    out.per_client.emplace(id, std::move(mine));
  }
  return out;
}

std::vector<LayerId> fixed_selection(FixedPosition position, int K,
                                     const std::vector<bool> &trainable) {
  std::vector<LayerId> ids;
  for (std::size_t l = 0; l < trainable.size(); ++l) {
    if (trainable[l]) ids.push_back(static_cast<LayerId>(l));
  }
  const int lt = static_cast<int>(ids.size());
  if (K < 1 || K > lt) {
    throw ConfigError("fixed selection: K=" + std::to_string(K) + " outside [1, " +
                      std::to_string(lt) + "]");
  }
  int start = 0;
  switch (position) {
    case FixedPosition::kFirst: start = 0; break;
    case FixedPosition::kLast: start = lt - K; break;
    case FixedPosition::kMiddle:
      // Window centred on lt/2; when the centre falls between two slots the
      // window leans left.
      start = (lt - K) / 2;
      break;
  }
  return {ids.begin() + start, ids.begin() + start + K};
}

BroadcastSet strategy_step(const StrategySpec &spec, int round, const ModelMap &received,
                           const ConflictReport *report, const ClientWeights *weights) {
  if (received.empty()) throw ConfigError("strategy_step: no received models");
  std::vector<LayerId> personalized;
  switch (spec.kind) {
    case StrategyKind::kFedAvg: break;
    case StrategyKind::kFedLag:
      if (spec.needs_report(round)) {
        if (!report) {
          throw ConfigError("strategy_step: fedlag round " + std::to_string(round) +
                            " requires a conflict report");
        }
        personalized = report->selected;
      }
      break;
    case StrategyKind::kFixed:
      personalized = fixed_selection(spec.position, spec.K,
                                     received.begin()->second.trainable_flags());
      break;
  }
  return split_broadcast(received, personalized, weights);
}

}  // namespace flsim

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

#include "flsim/gda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flsim/error.hpp"

namespace flsim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Trajectory compute_trajectory(const LayeredParams &broadcast, const LayeredParams &received,
                              int client_id, int round) {
  require_congruent(broadcast, received, "compute_trajectory");
  Trajectory t{client_id, round, received};
  for (std::size_t l = 0; l < broadcast.num_layers(); ++l) {
    auto h = t.delta.values(l);
    auto b = broadcast.values(l);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] -= b[i];
  }
  return t;
}

double layer_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("layer_cosine: length mismatch");
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na < kVanishedNorm || nb < kVanishedNorm) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

void check_xi(double xi) {
  if (!(xi > -1.0 && xi <= 0.0)) {
    throw ConfigError("strategy.xi must satisfy -1 < xi <= 0, got " + std::to_string(xi));
  }
}

int gc_score(std::span<const Trajectory> trajectories, LayerId layer, double xi) {
  check_xi(xi);
  if (trajectories.size() < 2) throw ConfigError("gc_score needs at least two trajectories");
  int count = 0;
  for (std::size_t u = 0; u < trajectories.size(); ++u) {
    for (std::size_t v = u + 1; v < trajectories.size(); ++v) {
      if (layer_cosine(trajectories[u].delta.values(layer), trajectories[v].delta.values(layer)) <
          xi) {
        ++count;
      }
    }
  }
  return count;
}

std::vector<LayerId> select_layers(std::span<const int> gc_scores, int k,
                                   const std::vector<bool> &trainable) {
  if (k < 0) throw ConfigError("k must be >= 0");
  std::vector<LayerId> candidates;
  for (std::size_t l = 0; l < gc_scores.size(); ++l) {
    if (trainable.empty() || trainable.at(l)) candidates.push_back(static_cast<LayerId>(l));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](LayerId a, LayerId b) { return gc_scores[a] > gc_scores[b]; });
  candidates.resize(std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(k)));
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

ConflictReport run_gda(std::span<const Trajectory> trajectories, double xi, int k, int round,
                       bool keep_cosines) {
  check_xi(xi);
  if (trajectories.size() < 2) throw ConfigError("run_gda needs at least two clients");
  for (const auto &t : trajectories) {
    require_congruent(trajectories.front().delta, t.delta, "run_gda");
  }
  const std::size_t U = trajectories.size();
  const std::size_t L = trajectories.front().delta.num_layers();
  const auto trainable = trajectories.front().delta.trainable_flags();

  ConflictReport rep;
  rep.round = round;
  rep.xi = xi;
  rep.k = k;
  for (const auto &t : trajectories) rep.client_ids.push_back(t.client_id);
  rep.gc_scores.assign(L, 0);
  if (keep_cosines) rep.cosines.assign(L, std::vector<double>(U * U, 0.0));

  for (std::size_t l = 0; l < L; ++l) {
    if (!trainable[l]) continue;
    int count = 0;
    for (std::size_t u = 0; u < U; ++u) {
      auto hu = trajectories[u].delta.values(l);
      if (keep_cosines) {
        rep.cosines[l][u * U + u] = layer_cosine(hu, hu);
      }
      for (std::size_t v = u + 1; v < U; ++v) {
        const double c = layer_cosine(hu, trajectories[v].delta.values(l));
        if (c < xi) ++count;
        if (keep_cosines) {
          rep.cosines[l][u * U + v] = c;
          rep.cosines[l][v * U + u] = c;
        }
      }
    }
    rep.gc_scores[l] = count;
  }
  rep.selected = select_layers(rep.gc_scores, k, trainable);
  return rep;
}

ConflictReport run_gda(const ModelMap &broadcast, const ModelMap &received, double xi, int k,
                       int round, bool keep_cosines) {
  if (broadcast.size() != received.size()) {
    throw ConfigError("run_gda: broadcast and received client sets differ");
  }
  std::vector<Trajectory> traj;
  traj.reserve(received.size());
  for (const auto &[id, model] : received) {
    const auto it = broadcast.find(id);
    if (it == broadcast.end()) {
      throw ConfigError("run_gda: no broadcast model for client " + std::to_string(id));
    }
    traj.push_back(compute_trajectory(it->second, model, id, round));
  }
  return run_gda(traj, xi, k, round, keep_cosines);
}

nlohmann::json to_json(const ConflictReport &report, bool with_cosines) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < report.gc_scores.size(); ++l) {
    const bool sel = std::binary_search(report.selected.begin(), report.selected.end(),
                                        static_cast<LayerId>(l));
    layers.push_back({{"layer_id", l}, {"gc", report.gc_scores[l]}, {"selected", sel}});
  }
  nlohmann::json j = {{"round", report.round}, {"xi", report.xi}, {"k", report.k},
                      {"clients", report.client_ids}, {"layers", layers}};
  if (with_cosines && !report.cosines.empty()) j["cosines"] = report.cosines;
  return j;
}

}  // namespace flsim

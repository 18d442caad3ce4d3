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

#ifndef FLSIM_ORCHESTRATOR_HPP_
#define FLSIM_ORCHESTRATOR_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flsim/aggregation.hpp"
#include "flsim/data.hpp"
#include "flsim/datasets.hpp"
#include "flsim/gda.hpp"
#include "flsim/mlp.hpp"

namespace flsim {

enum class DatasetKind { kToy, kBlobs, kIdx };

DatasetKind parse_dataset_kind(const std::string &s);
std::string to_string(DatasetKind k);

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kToy;
  // toy
  double noise_fraction = 0.1;
  bool iid = false;
  // toy and blobs
  std::size_t n_per_class = 100;
  // blobs
  std::size_t num_classes = 10;
  std::size_t dim = 20;
  double spread = 1.0;
  // idx
  std::string images;
  std::string labels;
  // blobs and idx
  double alpha = 0.1;
  bool with_replacement = true;
  double test_fraction = 0.2;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t num_clients = 4;
  double participation_fraction = 1.0;
  int rounds = 1;
  int local_epochs = 1;
  double lr = 0.01;
  std::size_t batch_size = 32;
  // input_dim / output_dim of 0 are filled in from the dataset.
  MlpSpec model;
  DatasetConfig dataset;
  StrategySpec strategy;
  int eval_every = 1;
  bool probe_lemma1 = false;
  bool weighted_aggregation = false;
  bool keep_cosines = false;

  std::size_t clients_per_round() const;
  // Throws ConfigError naming the first offending field.
  void validate() const;
};

// Uniform sample without replacement of ceil(fraction * U) ids keyed on
// (seed, round); ascending.
std::vector<int> sample_clients(std::size_t num_clients, double fraction, int round,
                                std::uint64_t seed);

struct RoundRecord {
  int round = 0;
  std::vector<int> participants;
  bool evaluated = false;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double mean_loss = 0.0;
  double global_loss = 0.0;
  double global_acc = 0.0;
  std::vector<int> gc_scores;           // empty when < 2 participants
  std::vector<LayerId> selected;        // personalized layers applied this round
  double wall_ms = 0.0;
};

struct LemmaProbeRecord {
  int round = 0;
  std::vector<int> clients;
  std::vector<double> observed;   // L(split broadcast) - L(full mean), train loss
  std::vector<double> predicted;  // first-order prediction from trajectories
  std::vector<bool> agree;
  double lemma2_predicted = 0.0;
  double lemma2_observed = 0.0;   // mean of observed over clients
};

struct SimState {
  int round = 0;
  MlpSpec spec;
  std::vector<ClientDataset> clients;
  Batch pooled_test;
  std::vector<LayeredParams> broadcast;  // last model sent to each client
  LayeredParams global_model;
};

// Resolves model dims against the dataset and builds the initial state.
SimState init_state(const RunConfig &config);

struct RoundOutput {
  RoundRecord record;
  std::optional<ConflictReport> report;
  std::optional<LemmaProbeRecord> probe;
};

struct ExecOptions {
  std::size_t workers = 1;  // 0 = hardware concurrency
};

// One federated round. Advances state.round. A failing client aborts the
// round and leaves `state` untouched.
RoundOutput run_round(SimState &state, const RunConfig &config, const ExecOptions &exec = {});

// Compares the split broadcast against broadcasting the full mean on each
// client's training loss. Throws ConfigError unless fedlag is active.
LemmaProbeRecord probe_lemma1(const SimState &state, const RunConfig &config, int round,
                              const ModelMap &received, const std::vector<Trajectory> &traj,
                              const BroadcastSet &split);

// Lemma-1 first-order quantity for client index u among `traj`.
double lemma1_prediction(const std::vector<Trajectory> &traj, std::size_t u,
                         const std::vector<LayerId> &personalized, double lr);

struct RunResult {
  std::vector<RoundRecord> records;
  std::vector<ConflictReport> reports;
  std::vector<LemmaProbeRecord> probes;
  SimState final_state;
};

RunResult run_experiment(const RunConfig &config, const ExecOptions &exec = {});

// Binary checkpoint: "FLSIM1", then little-endian u64 seed, round, client
// count, and for every client (and finally the global model) its layers as
// (trainable u8, rank u64, dims u64..., count u64, f64 values).
void write_checkpoint(const std::string &path, const SimState &state, std::uint64_t seed);
struct Checkpoint {
  std::uint64_t seed = 0;
  int round = 0;
  std::vector<LayeredParams> broadcast;
  LayeredParams global_model;
};
Checkpoint read_checkpoint(const std::string &path);

}  // namespace flsim

#endif  // FLSIM_ORCHESTRATOR_HPP_

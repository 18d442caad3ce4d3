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

#include "flsim/orchestrator.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "flsim/error.hpp"
#include "flsim/parallel.hpp"
#include "flsim/rng.hpp"

namespace flsim {

DatasetKind parse_dataset_kind(const std::string &s) {
  if (s == "toy") return DatasetKind::kToy;
  if (s == "blobs") return DatasetKind::kBlobs;
  if (s == "idx") return DatasetKind::kIdx;
  throw ConfigError("dataset.kind: expected toy, blobs or idx, got \"" + s + "\"");
}

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kToy: return "toy";
    case DatasetKind::kBlobs: return "blobs";
    case DatasetKind::kIdx: return "idx";
  }
  return "?";
}

std::size_t RunConfig::clients_per_round() const {
  const double m = std::ceil(participation_fraction * static_cast<double>(num_clients) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(m), 1, num_clients);
}

void RunConfig::validate() const {
  if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (!(participation_fraction > 0.0 && participation_fraction <= 1.0)) {
    throw ConfigError("participation_fraction must be in (0, 1]");
  }
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  for (std::size_t i = 0; i < model.hidden_dims.size(); ++i) {
    if (model.hidden_dims[i] == 0) {
      throw ConfigError("model.hidden_dims[" + std::to_string(i) + "] must be >= 1");
    }
  }
  strategy.validate(static_cast<int>(model.num_layers()));
  if (strategy.kind == StrategyKind::kFedLag && clients_per_round() < 2) {
    throw ConfigError(
        "participation_fraction: fedlag needs at least 2 clients per round, config yields " +
        std::to_string(clients_per_round()));
  }
  if (probe_lemma1 && strategy.kind != StrategyKind::kFedLag) {
    throw ConfigError("probe_lemma1 requires strategy.kind = fedlag");
  }
  const auto &d = dataset;
  switch (d.kind) {
    case DatasetKind::kToy:
      if (d.n_per_class < 1) throw ConfigError("dataset.n_per_class must be >= 1");
      if (!(d.noise_fraction >= 0.0 && d.noise_fraction < 0.5)) {
        throw ConfigError("dataset.noise_fraction must be in [0, 0.5)");
      }
      if (model.input_dim != 0 && model.input_dim != 2) {
        throw ConfigError("model.input_dim must be 2 for the toy dataset");
      }
      if (model.output_dim != 0 && model.output_dim != 2) {
        throw ConfigError("model.output_dim must be 2 for the toy dataset");
      }
      break;
    case DatasetKind::kBlobs:
      if (d.num_classes < 2) throw ConfigError("dataset.num_classes must be >= 2");
      if (d.dim < 1) throw ConfigError("dataset.dim must be >= 1");
      if (d.n_per_class < 1) throw ConfigError("dataset.n_per_class must be >= 1");
      if (!(d.spread > 0.0)) throw ConfigError("dataset.spread must be > 0");
      if (model.input_dim != 0 && model.input_dim != d.dim) {
        throw ConfigError("model.input_dim must equal dataset.dim");
      }
      if (model.output_dim != 0 && model.output_dim != d.num_classes) {
        throw ConfigError("model.output_dim must equal dataset.num_classes");
      }
      [[fallthrough]];
    case DatasetKind::kIdx:
      if (d.kind == DatasetKind::kIdx && (d.images.empty() || d.labels.empty())) {
        throw ConfigError("dataset.images and dataset.labels are required for idx");
      }
      if (!(d.alpha > 0.0)) throw ConfigError("dataset.alpha must be > 0");
      if (num_clients < 2) throw ConfigError("num_clients must be >= 2 for Dirichlet partitioning");
      if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) {
        throw ConfigError("dataset.test_fraction must be in (0, 1)");
      }
      break;
  }
}

std::vector<int> sample_clients(std::size_t num_clients, double fraction, int round,
                                std::uint64_t seed) {
  RunConfig tmp;
  tmp.num_clients = num_clients;
  tmp.participation_fraction = fraction;
  const std::size_t m = tmp.clients_per_round();
  std::vector<int> ids(num_clients);
  for (std::size_t i = 0; i < num_clients; ++i) ids[i] = static_cast<int>(i);
  if (m < num_clients) {
    KeyedRng rng(seed, {0x5A, static_cast<std::uint64_t>(round)});
    for (std::size_t i = 0; i < m; ++i) {
      std::swap(ids[i], ids[i + rng.below(num_clients - i)]);
    }
    ids.resize(m);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

SimState init_state(const RunConfig &config) {
  SimState st;
  const auto &d = config.dataset;
  std::size_t input_dim = 0, num_classes = 0;
  switch (d.kind) {
    case DatasetKind::kToy: {
      input_dim = 2;
      num_classes = 2;
      if (d.iid) {
        st.clients = make_toy_iid(config.num_clients, d.n_per_class, d.noise_fraction, config.seed);
      } else {
        for (std::size_t u = 0; u < config.num_clients; ++u) {
          ToySpec ts;
          ts.domain_id = static_cast<int>(u % kToyDomains);
          ts.n_per_class = d.n_per_class;
          ts.noise_fraction = d.noise_fraction;
          ts.seed = KeyedRng(config.seed, {0x7A, u / kToyDomains}).key();
          auto cd = make_toy_domain(ts);
          cd.client_id = static_cast<int>(u);
          st.clients.push_back(std::move(cd));
        }
      }
      break;
    }
    case DatasetKind::kBlobs:
    case DatasetKind::kIdx: {
      const LabeledPool pool = d.kind == DatasetKind::kBlobs
                                   ? make_blobs(d.num_classes, d.dim, d.n_per_class, d.spread,
                                                config.seed)
                                   : load_idx(d.images, d.labels);
      input_dim = pool.samples.inputs.cols;
      num_classes = pool.num_classes;
      DirichletSpec ds;
      ds.alpha = d.alpha;
      ds.num_clients = config.num_clients;
      ds.seed = config.seed;
      ds.with_replacement = d.with_replacement;
      st.clients = partition_dirichlet(pool, ds, d.test_fraction);
      break;
    }
  }
  st.spec = config.model;
  if (st.spec.input_dim == 0) st.spec.input_dim = input_dim;
  if (st.spec.output_dim == 0) st.spec.output_dim = num_classes;
  if (st.spec.input_dim != input_dim) throw ConfigError("model.input_dim does not match the data");
  if (st.spec.output_dim < num_classes) {
    throw ConfigError("model.output_dim is smaller than the number of classes");
  }
  std::vector<Batch> tests;
  for (const auto &c : st.clients) tests.push_back(c.test);
  st.pooled_test = concat(tests);
  st.global_model = init_model(st.spec, config.seed);
  st.broadcast.assign(config.num_clients, st.global_model);
  return st;
}

double lemma1_prediction(const std::vector<Trajectory> &traj, std::size_t u,
                         const std::vector<LayerId> &personalized, double lr) {
  double sum = 0.0;
  const double U = static_cast<double>(traj.size());
  for (std::size_t v = 0; v < traj.size(); ++v) {
    for (LayerId l : personalized) {
      auto hu = traj[u].delta.values(l);
      auto hv = traj[v].delta.values(l);
      double nu = 0.0, nv = 0.0;
      for (double x : hu) nu += x * x;
      for (double x : hv) nv += x * x;
      nu = std::sqrt(nu);
      nv = std::sqrt(nv);
      sum += nu * (nu - layer_cosine(hu, hv) * nv);
    }
  }
  return -lr * sum / U;
}

LemmaProbeRecord probe_lemma1(const SimState &state, const RunConfig &config, int round,
                              const ModelMap &received, const std::vector<Trajectory> &traj,
                              const BroadcastSet &split) {
  if (config.strategy.kind != StrategyKind::kFedLag || !config.strategy.needs_report(round)) {
    throw ConfigError("probe_lemma1: fedlag is not active in round " + std::to_string(round));
  }
  LemmaProbeRecord rec;
  rec.round = round;
  const double U = static_cast<double>(traj.size());
  std::size_t u = 0;
  for (const auto &[id, model] : received) {
    const auto &train = state.clients[id].train;
    const double lag = forward_loss(state.spec, split.per_client.at(id), train);
    const double vfl = forward_loss(state.spec, split.global_model, train);
    const double observed = lag - vfl;
    const double predicted = lemma1_prediction(traj, u, split.personalized, config.lr);
    auto sign = [](double x) { return (x > 0) - (x < 0); };
    rec.clients.push_back(id);
    rec.observed.push_back(observed);
    rec.predicted.push_back(predicted);
    rec.agree.push_back(sign(observed) == sign(predicted));
    rec.lemma2_predicted += predicted / U;
    rec.lemma2_observed += observed / U;
    ++u;
  }
  return rec;
}

RoundOutput run_round(SimState &state, const RunConfig &config, const ExecOptions &exec) {
  const auto t0 = std::chrono::steady_clock::now();
  const int round = state.round;
  const auto participants =
      sample_clients(config.num_clients, config.participation_fraction, round, config.seed);

  std::vector<LayeredParams> trained(participants.size());
  parallel_for(participants.size(), exec.workers, [&](std::size_t i) {
    const int id = participants[i];
    TrainOptions opt;
    opt.epochs = config.local_epochs;
    opt.lr = config.lr;
    opt.batch_size = config.batch_size;
    opt.seed = KeyedRng(config.seed, {0xC1, static_cast<std::uint64_t>(id),
                                      static_cast<std::uint64_t>(round)})
                   .key();
    trained[i] = local_train(state.spec, state.broadcast[id], state.clients[id], opt);
  });

  ModelMap received;
  std::vector<Trajectory> traj;
  ClientWeights weights;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const int id = participants[i];
    traj.push_back(compute_trajectory(state.broadcast[id], trained[i], id, round));
    weights[id] = static_cast<double>(state.clients[id].train.size());
    received.emplace(id, std::move(trained[i]));
  }

  RoundOutput out;
  const auto &strat = config.strategy;
  if (traj.size() >= 2) {
    const bool fedlag = strat.kind == StrategyKind::kFedLag;
    out.report = run_gda(traj, fedlag ? strat.xi : 0.0, fedlag ? strat.k : 0, round,
                         config.keep_cosines);
  }
  BroadcastSet next = strategy_step(strat, round, received, out.report ? &*out.report : nullptr,
                                    config.weighted_aggregation ? &weights : nullptr);
  if (out.report) out.report->selected = next.personalized;
  if (config.probe_lemma1 && strat.needs_report(round)) {
    out.probe = probe_lemma1(state, config, round, received, traj, next);
  }

  RoundRecord &rec = out.record;
  rec.round = round;
  rec.participants = participants;
  rec.selected = next.personalized;
  if (out.report) rec.gc_scores = out.report->gc_scores;

  const bool evaluate_now = (round + 1) % config.eval_every == 0 || round + 1 == config.rounds;
  if (evaluate_now) {
    std::vector<EvalResult> evals(participants.size());
    parallel_for(participants.size(), exec.workers, [&](std::size_t i) {
      const int id = participants[i];
      evals[i] = evaluate(state.spec, next.per_client.at(id), state.clients[id]);
    });
    const double n = static_cast<double>(evals.size());
    for (const auto &e : evals) {
      rec.mean_acc += e.accuracy;
      rec.mean_loss += e.loss;
    }
    rec.mean_acc /= n;
    rec.mean_loss /= n;
    double var = 0.0;
    for (const auto &e : evals) var += (e.accuracy - rec.mean_acc) * (e.accuracy - rec.mean_acc);
    rec.std_acc = std::sqrt(var / n);
    const auto g = evaluate_batch(state.spec, next.global_model, state.pooled_test);
    rec.global_loss = g.loss;
    rec.global_acc = g.accuracy;
    rec.evaluated = true;
  }

  for (auto &[id, model] : next.per_client) state.broadcast[id] = std::move(model);
  state.global_model = std::move(next.global_model);
  state.round = round + 1;
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

RunResult run_experiment(const RunConfig &config, const ExecOptions &exec) {
  config.validate();
  RunResult res;
  res.final_state = init_state(config);
  for (int r = 0; r < config.rounds; ++r) {
    RoundOutput out;
    try {
      out = run_round(res.final_state, config, exec);
    } catch (const ConfigError &e) {
      throw ConfigError("round " + std::to_string(r) + ": " + e.what());
    } catch (const std::exception &e) {
      throw RuntimeError("round " + std::to_string(r) + ": " + e.what());
    }
    res.records.push_back(std::move(out.record));
    if (out.report) res.reports.push_back(std::move(*out.report));
    if (out.probe) res.probes.push_back(std::move(*out.probe));
  }
  return res;
}

namespace {

constexpr char kCheckpointMagic[6] = {'F', 'L', 'S', 'I', 'M', '1'};

void put_u64(std::ostream &os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char *>(b), 8);
}

std::uint64_t get_u64(std::istream &is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char *>(b), 8)) {
    throw FormatError(FormatError::Kind::kTruncated, "checkpoint truncated");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

void put_params(std::ostream &os, const LayeredParams &p) {
  put_u64(os, p.num_layers());
  for (const auto &s : p.layers()) {
    const char t = s.trainable ? 1 : 0;
    os.write(&t, 1);
    put_u64(os, s.shape.size());
    for (auto d : s.shape) put_u64(os, d);
    put_u64(os, s.values.size());
    for (double v : s.values) put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
}

LayeredParams get_params(std::istream &is) {
  constexpr std::uint64_t kSane = 1ULL << 32;
  const auto layers = get_u64(is);
  if (layers > kSane) throw FormatError(FormatError::Kind::kTruncated, "checkpoint corrupt");
  std::vector<LayerSlot> slots(layers);
  for (std::uint64_t l = 0; l < layers; ++l) {
    char t = 0;
    if (!is.read(&t, 1)) throw FormatError(FormatError::Kind::kTruncated, "checkpoint truncated");
    slots[l].layer_id = static_cast<LayerId>(l);
    slots[l].trainable = t != 0;
    const auto rank = get_u64(is);
    if (rank > 8) throw FormatError(FormatError::Kind::kTruncated, "checkpoint corrupt");
    for (std::uint64_t i = 0; i < rank; ++i) slots[l].shape.push_back(get_u64(is));
    const auto count = get_u64(is);
    if (count > kSane) throw FormatError(FormatError::Kind::kTruncated, "checkpoint corrupt");
    slots[l].values.resize(count);
    for (auto &v : slots[l].values) v = std::bit_cast<double>(get_u64(is));
  }
  return LayeredParams(std::move(slots));
}

}  // namespace

void write_checkpoint(const std::string &path, const SimState &state, std::uint64_t seed) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(FormatError::Kind::kIo, "cannot write checkpoint " + path);
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u64(os, seed);
  put_u64(os, static_cast<std::uint64_t>(state.round));
  put_u64(os, state.broadcast.size());
  for (const auto &p : state.broadcast) put_params(os, p);
  put_params(os, state.global_model);
  if (!os) throw FormatError(FormatError::Kind::kIo, "failed writing checkpoint " + path);
}

Checkpoint read_checkpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatError::Kind::kIo, "cannot open checkpoint " + path);
  char magic[6];
  if (!is.read(magic, 6)) throw FormatError(FormatError::Kind::kTruncated, "checkpoint truncated");
  if (std::memcmp(magic, kCheckpointMagic, 5) != 0) {
    throw FormatError(FormatError::Kind::kWrongMagic, "not a flsim checkpoint: " + path);
  }
  if (magic[5] != kCheckpointMagic[5]) {
    throw FormatError(FormatError::Kind::kVersion, "unsupported checkpoint version");
  }
  Checkpoint ck;
  ck.seed = get_u64(is);
  ck.round = static_cast<int>(get_u64(is));
  const auto n = get_u64(is);
  if (n > (1U << 24)) throw FormatError(FormatError::Kind::kTruncated, "checkpoint corrupt");
  for (std::uint64_t i = 0; i < n; ++i) ck.broadcast.push_back(get_params(is));
  ck.global_model = get_params(is);
  return ck;
}

}  // namespace flsim

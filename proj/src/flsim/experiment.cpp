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

#include "flsim/experiment.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "flsim/error.hpp"

#ifndef FLSIM_VERSION
#define FLSIM_VERSION "0.0.0"
#endif
#ifndef FLSIM_GIT_REV
#define FLSIM_GIT_REV "unknown"
#endif

namespace flsim {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported.
class ObjectReader {
 public:
  ObjectReader(const json &obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const char *key) const { return obj_.contains(key); }

  const json *find(const char *key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void integer(const char *key, long long &out, long long min) {
    if (const json *v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
      out = v->get<long long>();
      if (out < min) throw ConfigError(field(key) + " must be >= " + std::to_string(min));
    }
  }
  template <class T>
  void integer_as(const char *key, T &out, long long min) {
    long long v = static_cast<long long>(out);
    integer(key, v, min);
    out = static_cast<T>(v);
  }
  void number(const char *key, double &out) {
    if (const json *v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void boolean(const char *key, bool &out) {
    if (const json *v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const char *key, std::string &out) {
    if (const json *v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  std::string required_string(const char *key) {
    if (!has(key)) throw ConfigError(field(key) + " is required");
    std::string s;
    string(key, s);
    return s;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key().c_str()) + ": unknown key");
    }
  }

  std::string field(const char *key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json &obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path &p, const std::string &content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + p.string());
  out << content;
  if (!out) throw RuntimeError("failed writing " + p.string());
}

std::string join_ids(const std::vector<LayerId> &ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

}  // namespace

Experiment parse_experiment(const json &doc) {
  Experiment e;
  RunConfig &rc = e.run;
  ObjectReader top(doc, "");
  long long seed = 0;
  top.integer("seed", seed, 0);
  rc.seed = static_cast<std::uint64_t>(seed);
  top.integer_as("num_clients", rc.num_clients, 1);
  top.number("participation_fraction", rc.participation_fraction);
  top.integer_as("rounds", rc.rounds, 1);
  top.integer_as("local_epochs", rc.local_epochs, 1);
  top.number("lr", rc.lr);
  top.integer_as("batch_size", rc.batch_size, 1);
  top.integer_as("eval_every", rc.eval_every, 1);
  top.boolean("probe_lemma1", rc.probe_lemma1);
  top.boolean("weighted_aggregation", rc.weighted_aggregation);

  if (const json *m = top.find("model")) {
    ObjectReader mr(*m, "model");
    mr.integer_as("input_dim", rc.model.input_dim, 0);
    mr.integer_as("output_dim", rc.model.output_dim, 0);
    if (const json *h = mr.find("hidden_dims")) {
      if (!h->is_array()) throw ConfigError("model.hidden_dims: expected an array of integers");
      rc.model.hidden_dims.clear();
      for (std::size_t i = 0; i < h->size(); ++i) {
        const json &v = (*h)[i];
        if (!v.is_number_integer() || v.get<long long>() < 1) {
          throw ConfigError("model.hidden_dims[" + std::to_string(i) + "] must be an integer >= 1");
        }
        rc.model.hidden_dims.push_back(v.get<std::size_t>());
      }
    }
    std::string act = to_string(rc.model.activation);
    mr.string("activation", act);
    rc.model.activation = parse_activation(act);
    mr.finish();
  }

  const json *d = top.find("dataset");
  if (!d) throw ConfigError("dataset is required");
  {
    ObjectReader dr(*d, "dataset");
    auto &ds = rc.dataset;
    ds.kind = parse_dataset_kind(dr.required_string("kind"));
    switch (ds.kind) {
      case DatasetKind::kToy:
        dr.integer_as("n_per_class", ds.n_per_class, 1);
        dr.number("noise_fraction", ds.noise_fraction);
        dr.boolean("iid", ds.iid);
        break;
      case DatasetKind::kBlobs:
        dr.integer_as("num_classes", ds.num_classes, 2);
        dr.integer_as("dim", ds.dim, 1);
        dr.integer_as("n_per_class", ds.n_per_class, 1);
        dr.number("spread", ds.spread);
        [[fallthrough]];
      case DatasetKind::kIdx:
        if (ds.kind == DatasetKind::kIdx) {
          ds.images = dr.required_string("images");
          ds.labels = dr.required_string("labels");
        }
        dr.number("alpha", ds.alpha);
        dr.boolean("with_replacement", ds.with_replacement);
        dr.number("test_fraction", ds.test_fraction);
        break;
    }
    dr.finish();
  }

  const json *s = top.find("strategy");
  if (!s) throw ConfigError("strategy is required");
  {
    ObjectReader sr(*s, "strategy");
    auto &st = rc.strategy;
    st.kind = parse_strategy_kind(sr.required_string("kind"));
    if (st.kind == StrategyKind::kFedLag) {
      sr.number("xi", st.xi);
      sr.integer_as("k", st.k, 0);
      sr.integer_as("warmup_rounds", st.warmup_rounds, 0);
    } else if (st.kind == StrategyKind::kFixed) {
      std::string pos = to_string(st.position);
      sr.string("position", pos);
      st.position = parse_position(pos);
      sr.integer_as("K", st.K, 1);
    }
    sr.finish();
  }

  if (const json *o = top.find("output")) {
    ObjectReader orr(*o, "output");
    orr.string("dir", e.output.dir);
    orr.boolean("write_gc_trace", e.output.write_gc_trace);
    orr.boolean("write_cosines", e.output.write_cosines);
    orr.boolean("checkpoint", e.output.checkpoint);
    orr.boolean("timing", e.output.timing);
    orr.finish();
  }
  top.finish();
  rc.keep_cosines = e.output.write_gc_trace && e.output.write_cosines;
  rc.validate();
  return e;
}

Experiment load_experiment(const std::string &path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &err) {
    throw ConfigError(path + ": invalid JSON: " + err.what());
  }
  return parse_experiment(doc);
}

json to_json(const Experiment &e) {
  const RunConfig &rc = e.run;
  json model = {{"input_dim", rc.model.input_dim},
                {"hidden_dims", rc.model.hidden_dims},
                {"output_dim", rc.model.output_dim},
                {"activation", to_string(rc.model.activation)}};
  const auto &ds = rc.dataset;
  json dataset = {{"kind", to_string(ds.kind)}};
  switch (ds.kind) {
    case DatasetKind::kToy:
      dataset["n_per_class"] = ds.n_per_class;
      dataset["noise_fraction"] = ds.noise_fraction;
      dataset["iid"] = ds.iid;
      break;
    case DatasetKind::kBlobs:
      dataset["num_classes"] = ds.num_classes;
      dataset["dim"] = ds.dim;
      dataset["n_per_class"] = ds.n_per_class;
      dataset["spread"] = ds.spread;
      [[fallthrough]];
    case DatasetKind::kIdx:
      if (ds.kind == DatasetKind::kIdx) {
        dataset["images"] = ds.images;
        dataset["labels"] = ds.labels;
      }
      dataset["alpha"] = ds.alpha;
      dataset["with_replacement"] = ds.with_replacement;
      dataset["test_fraction"] = ds.test_fraction;
      break;
  }
  const auto &st = rc.strategy;
  json strategy = {{"kind", to_string(st.kind)}};
  if (st.kind == StrategyKind::kFedLag) {
    strategy["xi"] = st.xi;
    strategy["k"] = st.k;
    strategy["warmup_rounds"] = st.warmup_rounds;
  } else if (st.kind == StrategyKind::kFixed) {
    strategy["position"] = to_string(st.position);
    strategy["K"] = st.K;
  }
  return {{"seed", rc.seed},
          {"num_clients", rc.num_clients},
          {"participation_fraction", rc.participation_fraction},
          {"rounds", rc.rounds},
          {"local_epochs", rc.local_epochs},
          {"lr", rc.lr},
          {"batch_size", rc.batch_size},
          {"eval_every", rc.eval_every},
          {"probe_lemma1", rc.probe_lemma1},
          {"weighted_aggregation", rc.weighted_aggregation},
          {"model", model},
          {"dataset", dataset},
          {"strategy", strategy},
          {"output",
           {{"dir", e.output.dir},
            {"write_gc_trace", e.output.write_gc_trace},
            {"write_cosines", e.output.write_cosines},
            {"checkpoint", e.output.checkpoint},
            {"timing", e.output.timing}}}};
}

void apply_override(json &doc, const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects KEY=VALUE, got \"" + assignment + "\"");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json *node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("--set: malformed key \"" + key + "\"");
    if (!node->is_object()) throw ConfigError("--set: \"" + key + "\" descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(const RunResult &result, bool timing) {
  std::string out = "round,mean_acc,std_acc,mean_loss,global_loss,selected_layers,wall_ms\n";
  for (const auto &r : result.records) {
    const double nan = std::nan("");
    out += std::to_string(r.round);
    out += ',' + format_double(r.evaluated ? r.mean_acc : nan);
    out += ',' + format_double(r.evaluated ? r.std_acc : nan);
    out += ',' + format_double(r.evaluated ? r.mean_loss : nan);
    out += ',' + format_double(r.evaluated ? r.global_loss : nan);
    out += ',' + join_ids(r.selected);
    if (timing) {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, r.wall_ms, std::chars_format::fixed, 3);
      out += ',' + std::string(buf, res.ptr);
    } else {
      out += ",0";
    }
    out += '\n';
  }
  return out;
}

json gc_trace_json(const RunResult &result, bool with_cosines) {
  json arr = json::array();
  for (const auto &rep : result.reports) arr.push_back(to_json(rep, with_cosines));
  return arr;
}

double probe_agreement(const std::vector<LemmaProbeRecord> &probes) {
  std::size_t total = 0, agree = 0;
  for (const auto &p : probes) {
    for (bool a : p.agree) {
      ++total;
      agree += a ? 1 : 0;
    }
  }
  return total == 0 ? std::nan("") : static_cast<double>(agree) / static_cast<double>(total);
}

json summary_json(const Experiment &e, const RunResult &result) {
  json final_round = nullptr;
  for (auto it = result.records.rbegin(); it != result.records.rend(); ++it) {
    if (!it->evaluated) continue;
    final_round = {{"round", it->round},
                   {"mean_acc", it->mean_acc},
                   {"std_acc", it->std_acc},
                   {"mean_loss", it->mean_loss},
                   {"global_loss", it->global_loss},
                   {"global_acc", it->global_acc},
                   {"selected_layers", it->selected}};
    break;
  }
  json j = {{"final", final_round},
            {"rounds", result.records.size()},
            {"config", to_json(e)},
            {"build", build_stamp()}};
  if (!result.probes.empty()) {
    j["lemma1_agreement"] = probe_agreement(result.probes);
    j["lemma1_probe_rounds"] = result.probes.size();
  }
  return j;
}

std::string probe_csv(const RunResult &result) {
  std::string out = "round,client,observed,predicted,agree\n";
  for (const auto &p : result.probes) {
    for (std::size_t i = 0; i < p.clients.size(); ++i) {
      out += std::to_string(p.round) + ',' + std::to_string(p.clients[i]) + ',' +
             format_double(p.observed[i]) + ',' + format_double(p.predicted[i]) + ',' +
             (p.agree[i] ? "1" : "0") + '\n';
    }
  }
  return out;
}

void write_outputs(const std::string &dir, const Experiment &e, const RunResult &result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeError("cannot create output directory " + dir + ": " + ec.message());
  const fs::path base(dir);
  write_file(base / "metrics.csv", metrics_csv(result, e.output.timing));
  if (e.output.write_gc_trace) {
    write_file(base / "gc_trace.json",
               gc_trace_json(result, e.output.write_cosines).dump(1) + "\n");
  }
  if (!result.probes.empty()) write_file(base / "probe.csv", probe_csv(result));
  write_file(base / "summary.json", summary_json(e, result).dump(2) + "\n");
  if (e.output.checkpoint) {
    write_checkpoint((base / "checkpoint.bin").string(), result.final_state, e.run.seed);
  }
}

std::string format_pd(double reference, double value) {
  const double pd = std::round((reference - value) * 100.0) / 100.0;
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, pd == 0.0 ? 0.0 : pd,
                                 std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

SweepAxis parse_sweep_axis(const std::string &s) {
  if (s == "k") return SweepAxis::kK;
  if (s == "xi") return SweepAxis::kXi;
  if (s == "position") return SweepAxis::kPosition;
  throw ConfigError("sweep axis must be k, xi or position, got \"" + s + "\"");
}

std::vector<SweepRow> plan_sweep(const json &base, SweepAxis axis,
                                 const std::vector<std::string> &values) {
  const Experiment base_exp = parse_experiment(base);
  if (base_exp.run.strategy.kind != StrategyKind::kFedLag) {
    throw ConfigError("sweep: base config must use strategy.kind = fedlag");
  }
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<SweepRow> rows;
  std::set<std::string> labels;
  for (const auto &v : values) {
    SweepRow row;
    row.config = base;
    switch (axis) {
      case SweepAxis::kK: {
        long long k = 0;
        const auto r = std::from_chars(v.data(), v.data() + v.size(), k);
        if (r.ec != std::errc() || r.ptr != v.data() + v.size() || k < 0) {
          throw ConfigError("sweep: k value \"" + v + "\" is not an integer >= 0");
        }
        row.config["strategy"]["k"] = k;
        row.label = "k_" + v;
        break;
      }
      case SweepAxis::kXi: {
        const json parsed = json::parse(v, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_number()) {
          throw ConfigError("sweep: xi value \"" + v + "\" is not a number");
        }
        check_xi(parsed.get<double>());
        row.config["strategy"]["xi"] = parsed.get<double>();
        row.label = "xi_" + v;
        break;
      }
      case SweepAxis::kPosition: {
        const auto colon = v.find(':');
        const std::string pos = v.substr(0, colon);
        long long K = 2;
        if (colon != std::string::npos) {
          const std::string ks = v.substr(colon + 1);
          const auto r = std::from_chars(ks.data(), ks.data() + ks.size(), K);
          if (r.ec != std::errc() || r.ptr != ks.data() + ks.size() || K < 1) {
            throw ConfigError("sweep: position value \"" + v + "\" has an invalid K");
          }
        }
        row.config["strategy"] = {{"kind", "fixed"}, {"position", to_string(parse_position(pos))},
                                  {"K", K}};
        row.label = pos + "_" + std::to_string(K);
        break;
      }
    }
    if (!labels.insert(row.label).second) throw ConfigError("sweep: duplicate value \"" + v + "\"");
    parse_experiment(row.config);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const json &base, SweepAxis axis,
                                const std::vector<std::string> &values, const std::string &out_dir,
                                const ExecOptions &exec) {
  auto planned = plan_sweep(base, axis, values);
  SweepRow ref;
  ref.label = "fedlag";
  ref.config = base;
  std::vector<SweepRow> rows;
  rows.push_back(std::move(ref));
  for (auto &r : planned) rows.push_back(std::move(r));

  namespace fs = std::filesystem;
  for (auto &row : rows) {
    Experiment e = parse_experiment(row.config);
    const RunResult res = run_experiment(e.run, exec);
    write_outputs((fs::path(out_dir) / row.label).string(), e, res);
    for (auto it = res.records.rbegin(); it != res.records.rend(); ++it) {
      if (!it->evaluated) continue;
      row.final_mean_acc = it->mean_acc;
      row.final_std_acc = it->std_acc;
      row.final_global_loss = it->global_loss;
      break;
    }
  }
  const double ref_acc = rows.front().final_mean_acc * 100.0;
  std::string csv = "label,mean_acc,std_acc,global_loss,pd\n";
  for (const auto &row : rows) {
    csv += row.label + ',' + format_double(row.final_mean_acc) + ',' +
           format_double(row.final_std_acc) + ',' + format_double(row.final_global_loss) + ',' +
           format_pd(ref_acc, row.final_mean_acc * 100.0) + '\n';
  }
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "sweep.csv", csv);
  return rows;
}

std::string build_stamp() { return std::string("flsim ") + FLSIM_VERSION + " (" + FLSIM_GIT_REV + ")"; }

}  // namespace flsim

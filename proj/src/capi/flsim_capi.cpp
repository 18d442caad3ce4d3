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

#include "flsim/flsim.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "flsim/error.hpp"
#include "flsim/experiment.hpp"
#include "flsim/gda.hpp"

struct flsim_config {
  nlohmann::json doc;
};

struct flsim_result {
  flsim::Experiment experiment;
  flsim::RunResult result;
};

namespace {

thread_local std::string g_last_error;

flsim_status fail(flsim_status code, const std::string &msg) {
  g_last_error = msg;
  return code;
}

// Maps exceptions escaping the core onto status codes.
template <class Fn>
flsim_status guarded(Fn &&fn) {
  try {
    fn();
    return FLSIM_OK;
  } catch (const flsim::ConfigError &e) {
    return fail(FLSIM_ERR_CONFIG, e.what());
  } catch (const flsim::FormatError &e) {
    return fail(FLSIM_ERR_FORMAT, e.what());
  } catch (const flsim::RuntimeError &e) {
    return fail(FLSIM_ERR_RUNTIME, e.what());
  } catch (const std::bad_alloc &) {
    return fail(FLSIM_ERR_RUNTIME, "out of memory");
  } catch (const std::exception &e) {
    return fail(FLSIM_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(FLSIM_ERR_RUNTIME, "unknown error");
  }
}

char *dup_string(const std::string &s) {
  char *p = static_cast<char *>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

flsim_status copy_ints(const std::vector<int> &v, int *buf, size_t cap, size_t *count) {
  if (!count) return fail(FLSIM_ERR_INVALID_ARGUMENT, "count pointer is null");
  *count = v.size();
  if (buf) {
    for (size_t i = 0; i < v.size() && i < cap; ++i) buf[i] = v[i];
  }
  return FLSIM_OK;
}

}  // namespace

extern "C" {

const char *flsim_version(void) {
  static const std::string stamp = flsim::build_stamp();
  return stamp.c_str();
}

const char *flsim_last_error(void) { return g_last_error.c_str(); }

void flsim_string_free(char *s) { std::free(s); }

flsim_status flsim_config_load(const char *path, flsim_config **out) {
  if (!path || !out) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  std::ifstream in(path, std::ios::binary);
  if (!in) return fail(FLSIM_ERR_CONFIG, std::string("cannot read config file: ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto doc = nlohmann::json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded()) return fail(FLSIM_ERR_CONFIG, std::string(path) + ": invalid JSON");
  if (!doc.is_object()) return fail(FLSIM_ERR_CONFIG, std::string(path) + ": expected an object");
  *out = new (std::nothrow) flsim_config{std::move(doc)};
  return *out ? FLSIM_OK : fail(FLSIM_ERR_RUNTIME, "out of memory");
}

flsim_status flsim_config_parse(const char *json_text, flsim_config **out) {
  if (!json_text || !out) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  auto doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) return fail(FLSIM_ERR_CONFIG, "invalid JSON");
  if (!doc.is_object()) return fail(FLSIM_ERR_CONFIG, "config: expected an object");
  *out = new (std::nothrow) flsim_config{std::move(doc)};
  return *out ? FLSIM_OK : fail(FLSIM_ERR_RUNTIME, "out of memory");
}

flsim_status flsim_config_set(flsim_config *cfg, const char *assignment) {
  if (!cfg || !assignment) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { flsim::apply_override(cfg->doc, assignment); });
}

flsim_status flsim_config_validate(const flsim_config *cfg) {
  if (!cfg) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null config");
  return guarded([&] { flsim::parse_experiment(cfg->doc); });
}

flsim_status flsim_config_to_json(const flsim_config *cfg, char **out_json) {
  if (!cfg || !out_json) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  *out_json = nullptr;
  return guarded([&] {
    *out_json = dup_string(flsim::to_json(flsim::parse_experiment(cfg->doc)).dump(2));
  });
}

void flsim_config_free(flsim_config *cfg) { delete cfg; }

flsim_status flsim_run(const flsim_config *cfg, unsigned workers, flsim_result **out) {
  if (!cfg || !out) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto res = std::make_unique<flsim_result>();
    res->experiment = flsim::parse_experiment(cfg->doc);
    res->result = flsim::run_experiment(res->experiment.run, flsim::ExecOptions{workers});
    *out = res.release();
  });
}

flsim_status flsim_result_write(const flsim_result *res, const char *dir) {
  if (!res) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null result");
  return guarded([&] {
    flsim::write_outputs(dir ? dir : res->experiment.output.dir, res->experiment, res->result);
  });
}

size_t flsim_result_num_rounds(const flsim_result *res) {
  return res ? res->result.records.size() : 0;
}

flsim_status flsim_result_round(const flsim_result *res, size_t index, flsim_round_metrics *out) {
  if (!res || !out) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  if (index >= res->result.records.size()) {
    return fail(FLSIM_ERR_INVALID_ARGUMENT, "round index out of range");
  }
  const auto &r = res->result.records[index];
  out->round = r.round;
  out->evaluated = r.evaluated ? 1 : 0;
  out->mean_acc = r.mean_acc;
  out->std_acc = r.std_acc;
  out->mean_loss = r.mean_loss;
  out->global_loss = r.global_loss;
  out->global_acc = r.global_acc;
  out->wall_ms = r.wall_ms;
  out->num_participants = r.participants.size();
  out->num_selected = r.selected.size();
  return FLSIM_OK;
}

flsim_status flsim_result_selected_layers(const flsim_result *res, size_t index, int *buf,
                                          size_t cap, size_t *count) {
  if (!res) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null result");
  if (index >= res->result.records.size()) {
    return fail(FLSIM_ERR_INVALID_ARGUMENT, "round index out of range");
  }
  return copy_ints(res->result.records[index].selected, buf, cap, count);
}

flsim_status flsim_result_gc_scores(const flsim_result *res, size_t index, int *buf, size_t cap,
                                    size_t *count) {
  if (!res) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null result");
  if (index >= res->result.records.size()) {
    return fail(FLSIM_ERR_INVALID_ARGUMENT, "round index out of range");
  }
  return copy_ints(res->result.records[index].gc_scores, buf, cap, count);
}

flsim_status flsim_result_metrics_csv(const flsim_result *res, char **out_csv) {
  if (!res || !out_csv) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out_csv = dup_string(flsim::metrics_csv(res->result, res->experiment.output.timing));
  });
}

flsim_status flsim_result_gc_trace_json(const flsim_result *res, char **out_json) {
  if (!res || !out_json) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out_json = dup_string(
        flsim::gc_trace_json(res->result, res->experiment.output.write_cosines).dump(1));
  });
}

double flsim_result_probe_agreement(const flsim_result *res) {
  return res ? flsim::probe_agreement(res->result.probes) : std::nan("");
}

void flsim_result_free(flsim_result *res) { delete res; }

flsim_status flsim_sweep(const flsim_config *base, const char *axis, const char *const *values,
                         size_t num_values, const char *out_dir, unsigned workers) {
  if (!base || !axis || (!values && num_values)) {
    return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    std::vector<std::string> vals;
    for (size_t i = 0; i < num_values; ++i) {
      if (!values[i]) throw flsim::ConfigError("sweep: null value");
      vals.emplace_back(values[i]);
    }
    const std::string dir =
        out_dir ? std::string(out_dir) : flsim::parse_experiment(base->doc).output.dir;
    flsim::run_sweep(base->doc, flsim::parse_sweep_axis(axis), vals, dir,
                     flsim::ExecOptions{workers});
  });
}

double flsim_layer_cosine(const double *a, const double *b, size_t n) {
  if ((!a || !b) && n) return 0.0;
  return flsim::layer_cosine(std::span<const double>(a, n), std::span<const double>(b, n));
}

flsim_status flsim_gc_score(const double *const *trajectories, size_t num_clients, size_t n,
                            double xi, int *out_score) {
  if (!trajectories || !out_score) return fail(FLSIM_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    flsim::check_xi(xi);
    if (num_clients < 2) throw flsim::ConfigError("gc_score needs at least two clients");
    int count = 0;
    for (size_t u = 0; u < num_clients; ++u) {
      for (size_t v = u + 1; v < num_clients; ++v) {
        if (flsim::layer_cosine(std::span<const double>(trajectories[u], n),
                                std::span<const double>(trajectories[v], n)) < xi) {
          ++count;
        }
      }
    }
    *out_score = count;
  });
}

}  // extern "C"

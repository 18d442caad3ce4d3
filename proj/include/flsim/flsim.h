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

/*
 * C interface to the flsim federated-learning simulator.
 *
 * All functions returning flsim_status report failures through the status
 * code; a human-readable message for the most recent failure on the calling
 * thread is available from flsim_last_error(). Handles are opaque and owned
 * by the caller once returned; release them with the matching *_free.
 * Strings returned through char** out-parameters are heap allocated and must
 * be released with flsim_string_free.
 */

#ifndef FLSIM_FLSIM_H_
#define FLSIM_FLSIM_H_

#include <stddef.h>

#if defined(_WIN32)
#define FLSIM_API __declspec(dllexport)
#else
#define FLSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum flsim_status {
  FLSIM_OK = 0,
  FLSIM_ERR_INVALID_ARGUMENT = 1, /* null handle/pointer, bad index */
  FLSIM_ERR_CONFIG = 2,           /* schema or invariant violation */
  FLSIM_ERR_RUNTIME = 3,          /* failure while executing */
  FLSIM_ERR_FORMAT = 4            /* malformed binary input */
} flsim_status;

typedef struct flsim_config flsim_config;
typedef struct flsim_result flsim_result;

typedef struct flsim_round_metrics {
  int round;
  int evaluated; /* 0 when the round was skipped by eval_every */
  double mean_acc;
  double std_acc;
  double mean_loss;
  double global_loss;
  double global_acc;
  double wall_ms;
  size_t num_participants;
  size_t num_selected;
} flsim_round_metrics;

FLSIM_API const char *flsim_version(void);
FLSIM_API const char *flsim_last_error(void);
FLSIM_API void flsim_string_free(char *s);

/* Configuration documents. Loading checks JSON syntax only; the schema and
 * run invariants are checked by flsim_config_validate and again by
 * flsim_run, so a sequence of overrides may pass through invalid states. */
FLSIM_API flsim_status flsim_config_load(const char *path, flsim_config **out);
FLSIM_API flsim_status flsim_config_parse(const char *json_text, flsim_config **out);
/* "dotted.key=value"; value parsed as JSON, else taken as a string. */
FLSIM_API flsim_status flsim_config_set(flsim_config *cfg, const char *assignment);
FLSIM_API flsim_status flsim_config_validate(const flsim_config *cfg);
/* Normalized effective configuration with all defaults filled in. */
FLSIM_API flsim_status flsim_config_to_json(const flsim_config *cfg, char **out_json);
FLSIM_API void flsim_config_free(flsim_config *cfg);

/* workers = 0 uses all hardware threads. Results do not depend on it. */
FLSIM_API flsim_status flsim_run(const flsim_config *cfg, unsigned workers, flsim_result **out);
/* Writes metrics.csv, summary.json and the enabled optional files. A NULL
 * dir uses the configuration's output.dir. */
FLSIM_API flsim_status flsim_result_write(const flsim_result *res, const char *dir);
FLSIM_API size_t flsim_result_num_rounds(const flsim_result *res);
FLSIM_API flsim_status flsim_result_round(const flsim_result *res, size_t index,
                                          flsim_round_metrics *out);
/* Copies up to cap ids into buf; *count receives the full length. */
FLSIM_API flsim_status flsim_result_selected_layers(const flsim_result *res, size_t index,
                                                    int *buf, size_t cap, size_t *count);
FLSIM_API flsim_status flsim_result_gc_scores(const flsim_result *res, size_t index, int *buf,
                                              size_t cap, size_t *count);
FLSIM_API flsim_status flsim_result_metrics_csv(const flsim_result *res, char **out_csv);
FLSIM_API flsim_status flsim_result_gc_trace_json(const flsim_result *res, char **out_json);
/* Lemma-1 probe sign-agreement rate; NaN when the run had no probes. */
FLSIM_API double flsim_result_probe_agreement(const flsim_result *res);
FLSIM_API void flsim_result_free(flsim_result *res);

/* axis: "k", "xi" or "position". Every value is checked before any run
 * starts; a bad value returns FLSIM_ERR_CONFIG with nothing written. A NULL
 * out_dir uses the base configuration's output.dir. */
FLSIM_API flsim_status flsim_sweep(const flsim_config *base, const char *axis,
                                   const char *const *values, size_t num_values,
                                   const char *out_dir, unsigned workers);

/* Conflict primitives over caller-owned buffers. */
FLSIM_API double flsim_layer_cosine(const double *a, const double *b, size_t n);
/* trajectories[u] points at n doubles for client u. Counts pairs with
 * cosine strictly below xi; requires -1 < xi <= 0 and num_clients >= 2. */
FLSIM_API flsim_status flsim_gc_score(const double *const *trajectories, size_t num_clients,
                                      size_t n, double xi, int *out_score);

#ifdef __cplusplus
}
#endif

#endif /* FLSIM_FLSIM_H_ */

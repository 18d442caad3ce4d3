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

#ifndef FLSIM_EXPERIMENT_HPP_
#define FLSIM_EXPERIMENT_HPP_

#include <string>
#include <vector>

#include "flsim/orchestrator.hpp"
#include "json.hpp"

namespace flsim {

struct OutputConfig {
  std::string dir = "out";
  bool write_gc_trace = true;
  bool write_cosines = false;
  bool checkpoint = false;
  // When false the wall_ms column is written as 0 so reruns are
  // byte-identical.
  bool timing = false;
};

struct Experiment {
  RunConfig run;
  OutputConfig output;
};

// Strict: unknown keys and wrong types are rejected with the dotted path of
// the field. RunConfig invariants are checked as well.
Experiment parse_experiment(const nlohmann::json &doc);
Experiment load_experiment(const std::string &path);
nlohmann::json to_json(const Experiment &e);

// Applies "a.b.c=value". The value is parsed as JSON when possible and taken
// as a plain string otherwise. Intermediate objects are created on demand.
void apply_override(nlohmann::json &doc, const std::string &assignment);

// Locale-independent shortest round-trip formatting.
std::string format_double(double v);

std::string metrics_csv(const RunResult &result, bool timing);
nlohmann::json gc_trace_json(const RunResult &result, bool with_cosines);
nlohmann::json summary_json(const Experiment &e, const RunResult &result);
std::string probe_csv(const RunResult &result);

// Fraction of per-client probe comparisons whose signs agree; NaN when empty.
double probe_agreement(const std::vector<LemmaProbeRecord> &probes);

// Writes metrics.csv, summary.json and (when enabled) gc_trace.json,
// probe.csv and checkpoint.bin into `dir`, creating it.
void write_outputs(const std::string &dir, const Experiment &e, const RunResult &result);

// Performance drop against a reference accuracy, in the units given,
// rounded to two decimals and printed with exactly two.
std::string format_pd(double reference, double value);

enum class SweepAxis { kK, kXi, kPosition };
SweepAxis parse_sweep_axis(const std::string &s);

struct SweepRow {
  std::string label;  // also the sub-directory name
  nlohmann::json config;
  double final_mean_acc = 0.0;
  double final_std_acc = 0.0;
  double final_global_loss = 0.0;
};

// Builds one config per value. Position values are "first", "last:3", ...;
// K defaults to 2. Throws ConfigError before anything runs if a value is
// invalid or the base strategy is not fedlag.
std::vector<SweepRow> plan_sweep(const nlohmann::json &base, SweepAxis axis,
                                 const std::vector<std::string> &values);

// Runs the base config (row "fedlag") followed by every planned row into
// sub-directories of out_dir and writes out_dir/sweep.csv with PD relative
// to the base row.
std::vector<SweepRow> run_sweep(const nlohmann::json &base, SweepAxis axis,
                                const std::vector<std::string> &values, const std::string &out_dir,
                                const ExecOptions &exec);

std::string build_stamp();

}  // namespace flsim

#endif  // FLSIM_EXPERIMENT_HPP_

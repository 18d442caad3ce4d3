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

// flsim command-line front end. Talks to the simulator only through the C
// interface in flsim/flsim.h.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flsim/flsim.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int exit_code(flsim_status s) {
  switch (s) {
    case FLSIM_OK: return 0;
    case FLSIM_ERR_CONFIG:
    case FLSIM_ERR_INVALID_ARGUMENT: return kExitConfig;
    default: return kExitRuntime;
  }
}

int report(flsim_status s, const char *context) {
  std::fprintf(stderr, "flsim: %s: %s\n", context, flsim_last_error());
  return exit_code(s);
}

bool read_threads(unsigned *out) {
  const char *env = std::getenv("FLSIM_THREADS");
  *out = 0;
  if (!env || !*env) return true;
  char *end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0) {
    std::fprintf(stderr, "flsim: FLSIM_THREADS must be a non-negative integer, got \"%s\"\n", env);
    return false;
  }
  *out = static_cast<unsigned>(v);
  return true;
}

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool quiet = false;
};

// Loads the config and applies --set overrides and --out. Returns an exit
// code, or -1 on success.
int load(const Common &c, flsim_config **cfg) {
  flsim_status s = flsim_config_load(c.config.c_str(), cfg);
  if (s != FLSIM_OK) return report(s, "config");
  for (const auto &kv : c.sets) {
    s = flsim_config_set(*cfg, kv.c_str());
    if (s != FLSIM_OK) return report(s, "--set");
  }
  if (!c.out.empty()) {
    const std::string kv = "output.dir=\"" + c.out + "\"";
    s = flsim_config_set(*cfg, kv.c_str());
    if (s != FLSIM_OK) return report(s, "--out");
  }
  return -1;
}

int cmd_validate(const Common &c) {
  flsim_config *cfg = nullptr;
  if (int rc = load(c, &cfg); rc >= 0) {
    flsim_config_free(cfg);
    return rc;
  }
  char *text = nullptr;
  const flsim_status s = flsim_config_to_json(cfg, &text);
  flsim_config_free(cfg);
  if (s != FLSIM_OK) return report(s, "invalid config");
  if (!c.quiet) std::printf("%s\n", text);
  flsim_string_free(text);
  return 0;
}

int cmd_run(const Common &c, unsigned threads) {
  flsim_config *cfg = nullptr;
  if (int rc = load(c, &cfg); rc >= 0) {
    flsim_config_free(cfg);
    return rc;
  }
  flsim_status s = flsim_config_validate(cfg);
  if (s != FLSIM_OK) {
    flsim_config_free(cfg);
    return report(s, "invalid config");
  }
  flsim_result *res = nullptr;
  s = flsim_run(cfg, threads, &res);
  flsim_config_free(cfg);
  if (s != FLSIM_OK) return report(s, "run failed");
  s = flsim_result_write(res, nullptr);
  if (s != FLSIM_OK) {
    flsim_result_free(res);
    return report(s, "writing outputs");
  }
  if (!c.quiet) {
    const size_t n = flsim_result_num_rounds(res);
    for (size_t i = n; i-- > 0;) {
      flsim_round_metrics m;
      if (flsim_result_round(res, i, &m) == FLSIM_OK && m.evaluated) {
        std::printf("round %d: mean_acc=%.4f std_acc=%.4f global_loss=%.4f personalized=%zu\n",
                    m.round, m.mean_acc, m.std_acc, m.global_loss, m.num_selected);
        break;
      }
    }
  }
  flsim_result_free(res);
  return 0;
}

int cmd_sweep(const Common &c, const std::string &axis, const std::vector<std::string> &values,
              unsigned threads) {
  flsim_config *cfg = nullptr;
  if (int rc = load(c, &cfg); rc >= 0) {
    flsim_config_free(cfg);
    return rc;
  }
  flsim_status s = flsim_config_validate(cfg);
  if (s != FLSIM_OK) {
    flsim_config_free(cfg);
    return report(s, "invalid config");
  }
  std::vector<const char *> ptrs;
  for (const auto &v : values) ptrs.push_back(v.c_str());
  s = flsim_sweep(cfg, axis.c_str(), ptrs.data(), ptrs.size(), nullptr, threads);
  flsim_config_free(cfg);
  if (s != FLSIM_OK) return report(s, "sweep");
  if (!c.quiet) std::printf("sweep complete\n");
  return 0;
}

void add_common(CLI::App *sub, Common &c) {
  sub->add_option("--config", c.config, "Experiment JSON file")->required();
  sub->add_option("--set", c.sets, "Override KEY=VALUE (dotted path, repeatable)");
  sub->add_option("--out", c.out, "Output directory (overrides output.dir)");
  sub->add_flag("--quiet", c.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"flsim: federated learning simulator with layer-wise conflict analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", flsim_version());

  Common run_opts, sweep_opts, validate_opts;
  std::string axis;
  std::vector<std::string> values;

  auto *run = app.add_subcommand("run", "Run one experiment");
  add_common(run, run_opts);
  auto *sweep = app.add_subcommand("sweep", "Run one experiment per axis value");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", axis, "k, xi or position")->required();
  sweep->add_option("values", values, "Axis values (position: first|last|middle[:K])")
      ->required();
  auto *validate = app.add_subcommand("validate", "Check a config and print it normalized");
  add_common(validate, validate_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitConfig;
  }

  unsigned threads = 0;
  if (!read_threads(&threads)) return kExitConfig;
  if (*run) return cmd_run(run_opts, threads);
  if (*sweep) return cmd_sweep(sweep_opts, axis, values, threads);
  return cmd_validate(validate_opts);
}

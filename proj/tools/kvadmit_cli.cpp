/* Copyright 2026 The kvadmit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kvadmit/kvadmit.h"

namespace {

// Exit contract: 0 success, 2 bad config/request, 3 horizon abort.
int status_to_exit(kva_status s) {
  if (s == KVA_OK) return 0;
  if (s == KVA_ERR_HORIZON) return 3;
  return 2;
}

int finish(kva_status status, char* rendered) {
  if (rendered != nullptr) {
    std::fputs(rendered, stdout);
    kva_text_free(rendered);
  }
  if (status != KVA_OK)
    std::fprintf(stderr, "kvadmit: %s\n", kva_last_error());
  return status_to_exit(status);
}

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  long long seed = -1;
  unsigned jobs = 1;
};

void add_scenario_flags(CLI::App* cmd, Options& opt, bool with_jobs) {
  cmd->add_option("--config", opt.config, "scenario config file")
      ->required();
  cmd->add_option("--set", opt.sets,
                  "override a config key, e.g. --set policy=\"aimd\"");
  cmd->add_option("--out", opt.out,
                  "output root (default: the config's output_dir)");
  cmd->add_option("--seed", opt.seed, "override the scenario seed");
  if (with_jobs)
    cmd->add_option("--jobs", opt.jobs, "parallel runs (default 1)");
}

// Loads the config and applies overrides; returns nullptr after printing
// the error.
kva_scenario* open_scenario(const Options& opt) {
  kva_scenario* s = nullptr;
  if (kva_scenario_load(opt.config.c_str(), &s) != KVA_OK) return nullptr;
  for (const std::string& assignment : opt.sets) {
    if (kva_scenario_set(s, assignment.c_str()) != KVA_OK) {
      kva_scenario_free(s);
      return nullptr;
    }
  }
  if (opt.seed >= 0) {
    std::string assignment = "seed=" + std::to_string(opt.seed);
    if (kva_scenario_set(s, assignment.c_str()) != KVA_OK) {
      kva_scenario_free(s);
      return nullptr;
    }
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agentic KV-cache admission-control simulator"};
  app.set_version_flag("--version", kva_version());
  app.require_subcommand(1);

  Options run_opt, cmp_opt, sweep_opt;
  std::string report_dir;

  CLI::App* run = app.add_subcommand("run", "execute one simulation");
  add_scenario_flags(run, run_opt, false);
  CLI::App* cmp =
      app.add_subcommand("compare", "run every policy on one workload");
  add_scenario_flags(cmp, cmp_opt, true);
  CLI::App* sweep =
      app.add_subcommand("sweep", "run a value grid on one workload");
  add_scenario_flags(sweep, sweep_opt, true);
  CLI::App* report =
      app.add_subcommand("report", "re-render tables from stored summaries");
  report->add_option("--out", report_dir, "directory holding manifest.json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  char* rendered = nullptr;
  if (report->parsed()) {
    kva_status status = kva_cmd_report(report_dir.c_str(), &rendered);
    return finish(status, rendered);
  }

  const Options& opt = run->parsed() ? run_opt
                       : cmp->parsed() ? cmp_opt
                                       : sweep_opt;
  kva_scenario* s = open_scenario(opt);
  if (s == nullptr) {
    std::fprintf(stderr, "kvadmit: %s\n", kva_last_error());
    return 2;
  }
  const char* out_root = opt.out.empty() ? nullptr : opt.out.c_str();

  kva_status status;
  if (run->parsed()) {
    status = kva_cmd_run(s, out_root, &rendered);
  } else if (cmp->parsed()) {
    status = kva_cmd_compare(s, out_root, opt.jobs, &rendered);
  } else {
    status = kva_cmd_sweep(s, out_root, opt.jobs, &rendered);
  }
  kva_scenario_free(s);
  return finish(status, rendered);
}

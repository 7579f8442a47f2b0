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
#pragma once

#include <string>

#include "config.hpp"
#include "engine.hpp"

namespace kvadmit {

// A policy row resolved against the scenario defaults. The pseudo-policy
// "offload" runs uncontrolled admission with host-offload eviction.
struct ResolvedRun {
  std::string label;
  Policy policy;
  EngineParams engine;
};

ResolvedRun resolve_run(const ScenarioConfig& cfg,
                        const std::string& policy_text);

// Runs one policy on the scenario and writes trace.csv, summary.txt and
// phases.csv into `dir`. On a horizon abort the partial artifacts are
// written before the error propagates.
Summary execute_run(const ScenarioConfig& cfg, const std::string& policy_text,
                    const std::string& dir);

// Commands create a subdirectory of out_root named after the scenario,
// write per-run artifacts plus manifest.json there, and return the text
// they want printed. All of them propagate ConfigError for bad requests
// before anything is written.
std::string run_command(const ScenarioConfig& cfg,
                        const std::string& out_root);
std::string compare_command(const ScenarioConfig& cfg,
                            const std::string& out_root, unsigned jobs);
std::string sweep_command(const ScenarioConfig& cfg,
                          const std::string& out_root, unsigned jobs);

// Re-renders the table for a command directory written earlier (the
// directory holding manifest.json).
std::string report_command(const std::string& dir);

}  // namespace kvadmit

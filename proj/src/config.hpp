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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "controller.hpp"
#include "cost_model.hpp"
#include "engine.hpp"
#include "errors.hpp"
#include "workload.hpp"

namespace kvadmit {

struct CompareConfig {
  std::string baseline;
  // Additional rows; the baseline always runs. "offload" is accepted as a
  // pseudo-policy: uncontrolled admission with host offload eviction.
  std::vector<std::string> policies;
};

struct SweepConfig {
  std::string axis;  // fixed_cap | u_low | u_high
  std::vector<double> values;
};

// One scenario file, fully resolved. The schema is a TOML subset: top-level
// keys, single-level [sections], strings, numbers, booleans, one-line
// arrays, and one-line inline tables for distributions. Unknown keys are
// rejected. See FORMATS.md for the full key list.
struct ScenarioConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  std::string policy = "uncontrolled";
  std::string output_dir = "out";
  WorkloadConfig workload;
  EngineParams engine;
  ControllerConfig controller;
  CostParams cost = reference_cost_params();
  // Informational record of the offload break-even concurrency for the
  // calibration in [cost]; checked against the model by the test suite.
  std::optional<std::uint32_t> crossover_concurrency;
  std::optional<CompareConfig> compare;
  std::optional<SweepConfig> sweep;

  void validate() const;
};

ScenarioConfig parse_scenario(const std::string& text,
                              const std::string& origin);
ScenarioConfig load_scenario(const std::string& path);

// Applies one override of the form "section.key=value" or "key=value" for
// top-level keys. Values use the same syntax as the file, e.g.
// workload.gen_tokens={dist="uniform", min=72, max=104}. The caller
// re-validates once all overrides are in.
void apply_override(ScenarioConfig& cfg, const std::string& assignment);

// True if `text` names an admission policy a run can use: anything
// parse_policy accepts, plus "offload".
bool valid_policy_name(const std::string& text);

}  // namespace kvadmit


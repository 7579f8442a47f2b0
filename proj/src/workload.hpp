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
#include <string>
#include <vector>

#include "cache_tree.hpp"
#include "errors.hpp"

namespace kvadmit {

using AgentId = std::uint32_t;

// Portable seeded sampling: all randomness flows through splitmix64-seeded
// mt19937_64 with hand-rolled transforms, so streams are identical across
// standard libraries.
struct Distribution {
  enum class Kind : std::uint8_t { kConstant, kUniform, kLogNormal };
  Kind kind = Kind::kConstant;
  // Constant: a = value. Uniform: a = min, b = max.
  // LogNormal: a = mean, b = sigma of the underlying normal.
  double a = 0.0;
  double b = 0.0;

  void validate(const std::string& what) const;
  double sample(std::uint64_t& state) const;
  std::uint64_t sample_count(std::uint64_t& state) const;
};

std::uint64_t splitmix64(std::uint64_t& state);
double uniform01(std::uint64_t& state);

enum class AgentState : std::uint8_t {
  kPending,
  kAwaitingAdmission,
  kGenerating,
  kToolExecuting,
  kPaused,
  kFinished,
};

const char* agent_state_name(AgentState s);
bool lifecycle_edge(AgentState from, AgentState to);

// One pre-sampled ReAct step: generate `gen_tokens`, then optionally run a
// tool for `tool_latency` and append `obs_tokens` of observation.
struct StepPlan {
  std::uint64_t gen_tokens = 0;
  std::uint64_t obs_tokens = 0;
  double tool_latency = 0.0;
  bool has_tool = true;
};

struct AgentSpec {
  AgentId id = 0;
  std::uint64_t rng_seed = 0;
  std::vector<TokenId> prompt;
  std::vector<StepPlan> steps;
};

struct AgentStats {
  std::uint64_t generated_tokens = 0;
  std::uint64_t recompute_tokens = 0;
  std::uint64_t recompute_events = 0;
  std::uint64_t stall_events = 0;
  std::uint64_t pause_events = 0;
  double wait_time = 0.0;
};

struct AgentRecord {
  AgentSpec spec;
  AgentState state = AgentState::kPending;
  std::vector<TokenId> context;
  std::size_t step_index = 0;
  // Longest context prefix ever resident in the cache; recompute charges
  // are bounded by it. Reset only on completion.
  std::size_t high_water = 0;
  std::size_t pinned_len = 0;
  std::uint64_t token_counter = 0;
  double ready_since = 0.0;
  AgentStats stats;

  void set_state(AgentState next);
  // Appends `n` fresh tokens from this agent's private id range.
  void append_tokens(std::uint64_t n);
};

struct WorkloadConfig {
  std::uint32_t agents = 1;
  bool shared_prompt = true;
  std::uint64_t prompt_tokens = 0;
  std::uint32_t steps = 1;
  Distribution gen_tokens;
  Distribution obs_tokens;
  Distribution tool_latency;
  double tool_probability = 1.0;

  void validate() const;
};

struct Population {
  std::vector<AgentRecord> agents;
  // Length of the prompt prefix common to every agent; zero when prompts
  // are private. A finished agent releases its context beyond this point.
  std::uint64_t shared_prompt_tokens = 0;
  // FNV-1a over every sampled value, in sampling order. Two runs that must
  // share a workload assert equal hashes.
  std::uint64_t stream_hash = 0;
  // Peak aggregate context length if every agent ran to completion with
  // everything resident, in tokens. Used to size scenarios.
  std::uint64_t peak_aggregate_tokens = 0;
};

Population build_population(const WorkloadConfig& cfg, std::uint64_t seed);

struct NextAction {
  enum class Kind : std::uint8_t { kGenerate, kComplete };
  Kind kind = Kind::kComplete;
  std::uint64_t gen_tokens = 0;
};

// What the agent does next from a step boundary. Tool execution is decided
// after the generation completes via current step's has_tool/obs fields.
NextAction next_action(const AgentRecord& agent);

}  // namespace kvadmit

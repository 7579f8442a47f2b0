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
#include "workload.hpp"

#include <cmath>
#include <cstring>

namespace kvadmit {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

namespace {

// Box-Muller, cosine branch only, one normal per call.
double standard_normal(std::uint64_t& state) {
  double u1 = 1.0 - uniform01(state);
  double u2 = uniform01(state);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t fnv1a_mix(std::uint64_t hash, const void* data, std::size_t n) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a_double(std::uint64_t hash, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return fnv1a_mix(hash, &bits, sizeof(bits));
}

}  // namespace

void Distribution::validate(const std::string& what) const {
  switch (kind) {
    case Kind::kConstant:
      if (a < 0) throw ConfigError(what + ": constant value must be >= 0");
      break;
    case Kind::kUniform:
      if (a < 0 || b < a)
        throw ConfigError(what + ": uniform needs 0 <= min <= max");
      break;
    case Kind::kLogNormal:
      if (a <= 0) throw ConfigError(what + ": lognormal mean must be > 0");
      if (b < 0) throw ConfigError(what + ": lognormal sigma must be >= 0");
      break;
  }
}

double Distribution::sample(std::uint64_t& state) const {
  switch (kind) {
    case Kind::kConstant:
      return a;
    case Kind::kUniform:
      return a + (b - a) * uniform01(state);
    case Kind::kLogNormal: {
      // mu chosen so the distribution mean equals `a`.
      double sigma = b;
      double mu = std::log(a) - sigma * sigma / 2.0;
      return std::exp(mu + sigma * standard_normal(state));
    }
  }
  return 0.0;
}

std::uint64_t Distribution::sample_count(std::uint64_t& state) const {
  double v = sample(state);
  if (v < 0) v = 0;
  return static_cast<std::uint64_t>(std::llround(v));
}

const char* agent_state_name(AgentState s) {
  switch (s) {
    case AgentState::kPending: return "Pending";
    case AgentState::kAwaitingAdmission: return "AwaitingAdmission";
    case AgentState::kGenerating: return "Generating";
    case AgentState::kToolExecuting: return "ToolExecuting";
    case AgentState::kPaused: return "Paused";
    case AgentState::kFinished: return "Finished";
  }
  return "?";
}

bool lifecycle_edge(AgentState from, AgentState to) {
  using S = AgentState;
  switch (from) {
    case S::kPending:
      return to == S::kAwaitingAdmission;
    case S::kAwaitingAdmission:
      return to == S::kGenerating || to == S::kPaused;
    case S::kGenerating:
      return to == S::kToolExecuting || to == S::kFinished ||
             to == S::kAwaitingAdmission;
    case S::kToolExecuting:
      return to == S::kAwaitingAdmission;
    case S::kPaused:
      return to == S::kAwaitingAdmission;
    case S::kFinished:
      return false;
  }
  return false;
}

void AgentRecord::set_state(AgentState next) {
  if (!lifecycle_edge(state, next)) {
    throw InvariantViolation(std::string("illegal lifecycle transition ") +
                             agent_state_name(state) + " -> " +
                             agent_state_name(next));
  }
  state = next;
}

void AgentRecord::append_tokens(std::uint64_t n) {
  TokenId base = (static_cast<TokenId>(spec.id) + 1) << 32;
  for (std::uint64_t i = 0; i < n; ++i) context.push_back(base | token_counter++);
}

void WorkloadConfig::validate() const {
  if (steps < 1) throw ConfigError("workload.steps must be >= 1");
  gen_tokens.validate("workload.gen_tokens");
  obs_tokens.validate("workload.obs_tokens");
  tool_latency.validate("workload.tool_latency");
  if (tool_probability < 0 || tool_probability > 1)
    throw ConfigError("workload.tool_probability must be in [0,1]");
}

Population build_population(const WorkloadConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Population pop;
  pop.stream_hash = 0xcbf29ce484222325ULL;
  std::uint64_t shared_aggregate = 0;
  std::uint64_t private_aggregate = 0;
  for (AgentId id = 0; id < cfg.agents; ++id) {
    AgentRecord rec;
    rec.spec.id = id;
    std::uint64_t seed_state = seed;
    std::uint64_t mixed = splitmix64(seed_state) ^ (0x9e3779b97f4a7c15ULL * (id + 1));
    rec.spec.rng_seed = mixed;
    std::uint64_t rng = mixed;
    rec.spec.prompt.reserve(cfg.prompt_tokens);
    for (std::uint64_t t = 0; t < cfg.prompt_tokens; ++t) {
      TokenId tok = cfg.shared_prompt
                        ? t
                        : ((static_cast<TokenId>(id) + 1) << 32) | t;
      rec.spec.prompt.push_back(tok);
    }
    std::uint64_t final_ctx = cfg.prompt_tokens;
    for (std::uint32_t s = 0; s < cfg.steps; ++s) {
      StepPlan step;
      step.gen_tokens = cfg.gen_tokens.sample_count(rng);
      step.obs_tokens = cfg.obs_tokens.sample_count(rng);
      step.tool_latency = cfg.tool_latency.sample(rng);
      double roll = uniform01(rng);
      bool last = s + 1 == cfg.steps;
      step.has_tool = !last && roll < cfg.tool_probability;
      if (!step.has_tool) step.obs_tokens = 0;
      pop.stream_hash = fnv1a_double(pop.stream_hash, double(step.gen_tokens));
      pop.stream_hash = fnv1a_double(pop.stream_hash, double(step.obs_tokens));
      pop.stream_hash = fnv1a_double(pop.stream_hash, step.tool_latency);
      pop.stream_hash = fnv1a_double(pop.stream_hash, step.has_tool ? 1.0 : 0.0);
      final_ctx += step.gen_tokens + step.obs_tokens;
      rec.spec.steps.push_back(step);
    }
    // Start the private id counter beyond any private prompt ids.
    rec.token_counter = cfg.shared_prompt ? 0 : cfg.prompt_tokens;
    rec.context = rec.spec.prompt;
    if (cfg.shared_prompt) {
      if (shared_aggregate == 0) shared_aggregate = cfg.prompt_tokens;
      private_aggregate += final_ctx - cfg.prompt_tokens;
    } else {
      private_aggregate += final_ctx;
    }
    pop.agents.push_back(std::move(rec));
  }
  pop.shared_prompt_tokens = cfg.shared_prompt ? cfg.prompt_tokens : 0;
  pop.peak_aggregate_tokens = shared_aggregate + private_aggregate;
  return pop;
}

NextAction next_action(const AgentRecord& agent) {
  if (agent.state == AgentState::kFinished ||
      agent.state == AgentState::kPaused) {
    throw InvariantViolation(
        std::string("next_action on agent in state ") +
        agent_state_name(agent.state));
  }
  NextAction act;
  if (agent.step_index >= agent.spec.steps.size()) {
    act.kind = NextAction::Kind::kComplete;
    return act;
  }
  act.kind = NextAction::Kind::kGenerate;
  act.gen_tokens = agent.spec.steps[agent.step_index].gen_tokens;
  return act;
}

}  // namespace kvadmit

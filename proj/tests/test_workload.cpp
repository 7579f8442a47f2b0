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
#include <doctest.h>

#include <cmath>
#include <set>

#include "workload.hpp"

using namespace kvadmit;

namespace {

WorkloadConfig base_config() {
  WorkloadConfig c;
  c.agents = 4;
  c.shared_prompt = true;
  c.prompt_tokens = 32;
  c.steps = 5;
  c.gen_tokens = {Distribution::Kind::kUniform, 8, 16};
  c.obs_tokens = {Distribution::Kind::kConstant, 4, 0};
  c.tool_latency = {Distribution::Kind::kLogNormal, 0.2, 0.5};
  c.tool_probability = 0.7;
  return c;
}

}  // namespace

TEST_CASE("same seed reproduces the identical population") {
  Population a = build_population(base_config(), 42);
  Population b = build_population(base_config(), 42);
  REQUIRE(a.agents.size() == b.agents.size());
  CHECK(a.stream_hash == b.stream_hash);
  CHECK(a.peak_aggregate_tokens == b.peak_aggregate_tokens);
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    const AgentSpec& sa = a.agents[i].spec;
    const AgentSpec& sb = b.agents[i].spec;
    CHECK(sa.prompt == sb.prompt);
    REQUIRE(sa.steps.size() == sb.steps.size());
    for (std::size_t s = 0; s < sa.steps.size(); ++s) {
      CHECK(sa.steps[s].gen_tokens == sb.steps[s].gen_tokens);
      CHECK(sa.steps[s].obs_tokens == sb.steps[s].obs_tokens);
      CHECK(sa.steps[s].tool_latency == sb.steps[s].tool_latency);
      CHECK(sa.steps[s].has_tool == sb.steps[s].has_tool);
    }
  }
  Population c = build_population(base_config(), 43);
  CHECK(a.stream_hash != c.stream_hash);
}

TEST_CASE("agents draw from decorrelated streams") {
  Population p = build_population(base_config(), 7);
  bool any_difference = false;
  for (std::size_t i = 1; i < p.agents.size(); ++i)
    if (p.agents[i].spec.steps[0].gen_tokens !=
        p.agents[0].spec.steps[0].gen_tokens)
      any_difference = true;
  CHECK(any_difference);
}

TEST_CASE("shared prompts alias and private prompts do not") {
  WorkloadConfig cfg = base_config();
  Population shared = build_population(cfg, 1);
  CHECK(shared.shared_prompt_tokens == cfg.prompt_tokens);
  for (const AgentRecord& a : shared.agents)
    CHECK(a.spec.prompt == shared.agents[0].spec.prompt);

  cfg.shared_prompt = false;
  Population priv = build_population(cfg, 1);
  CHECK(priv.shared_prompt_tokens == 0);
  std::set<TokenId> seen;
  for (const AgentRecord& a : priv.agents)
    for (TokenId t : a.spec.prompt) CHECK(seen.insert(t).second);
}

TEST_CASE("appended tokens never collide across agents") {
  Population p = build_population(base_config(), 3);
  std::set<TokenId> seen;
  for (AgentRecord& a : p.agents) {
    a.append_tokens(50);
    for (std::size_t i = a.spec.prompt.size(); i < a.context.size(); ++i)
      CHECK(seen.insert(a.context[i]).second);
  }
}

TEST_CASE("the last step never calls a tool and toolless steps observe nothing") {
  WorkloadConfig cfg = base_config();
  cfg.tool_probability = 1.0;
  Population p = build_population(cfg, 11);
  for (const AgentRecord& a : p.agents) {
    CHECK_FALSE(a.spec.steps.back().has_tool);
    for (const StepPlan& s : a.spec.steps)
      if (!s.has_tool) CHECK(s.obs_tokens == 0);
  }
}

TEST_CASE("peak aggregate counts the shared prompt once") {
  WorkloadConfig cfg = base_config();
  cfg.agents = 3;
  cfg.steps = 2;
  cfg.gen_tokens = {Distribution::Kind::kConstant, 10, 0};
  cfg.obs_tokens = {Distribution::Kind::kConstant, 5, 0};
  cfg.tool_probability = 1.0;
  Population p = build_population(cfg, 5);
  // Per agent: 2 gen steps of 10 plus one mid-run observation of 5.
  CHECK(p.peak_aggregate_tokens == 32 + 3 * (2 * 10 + 5));
  cfg.shared_prompt = false;
  Population q = build_population(cfg, 5);
  CHECK(q.peak_aggregate_tokens == 3 * (32 + 2 * 10 + 5));
}

TEST_CASE("lognormal sampling hits the requested mean") {
  Distribution d{Distribution::Kind::kLogNormal, 8.0, 0.5};
  std::uint64_t rng = 99;
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += d.sample(rng);
  CHECK(sum / n == doctest::Approx(8.0).epsilon(0.02));
}

TEST_CASE("uniform counts stay inside the configured range") {
  Distribution d{Distribution::Kind::kUniform, 3, 9};
  std::uint64_t rng = 123;
  bool saw_low = false;
  bool saw_high = false;
  for (int i = 0; i < 5000; ++i) {
    std::uint64_t v = d.sample_count(rng);
    CHECK(v >= 3);
    CHECK(v <= 9);
    saw_low |= v == 3;
    saw_high |= v == 9;
  }
  CHECK(saw_low);
  CHECK(saw_high);
}

TEST_CASE("distribution validation rejects nonsense") {
  Distribution d{Distribution::Kind::kUniform, 9, 3};
  CHECK_THROWS_AS(d.validate("gen"), ConfigError);
  d = {Distribution::Kind::kLogNormal, -1.0, 0.5};
  CHECK_THROWS_AS(d.validate("gen"), ConfigError);
  d = {Distribution::Kind::kConstant, -2.0, 0};
  CHECK_THROWS_AS(d.validate("gen"), ConfigError);
}

TEST_CASE("lifecycle edges gate state changes") {
  CHECK(lifecycle_edge(AgentState::kPending, AgentState::kAwaitingAdmission));
  CHECK(lifecycle_edge(AgentState::kAwaitingAdmission, AgentState::kGenerating));
  CHECK(lifecycle_edge(AgentState::kAwaitingAdmission, AgentState::kPaused));
  CHECK(lifecycle_edge(AgentState::kGenerating, AgentState::kToolExecuting));
  CHECK(lifecycle_edge(AgentState::kGenerating, AgentState::kFinished));
  CHECK(lifecycle_edge(AgentState::kGenerating, AgentState::kAwaitingAdmission));
  CHECK(lifecycle_edge(AgentState::kToolExecuting, AgentState::kAwaitingAdmission));
  CHECK(lifecycle_edge(AgentState::kPaused, AgentState::kAwaitingAdmission));
  CHECK_FALSE(lifecycle_edge(AgentState::kPending, AgentState::kGenerating));
  CHECK_FALSE(lifecycle_edge(AgentState::kPaused, AgentState::kGenerating));
  CHECK_FALSE(lifecycle_edge(AgentState::kFinished, AgentState::kAwaitingAdmission));

  AgentRecord rec;
  rec.set_state(AgentState::kAwaitingAdmission);
  CHECK_THROWS_AS(rec.set_state(AgentState::kFinished), InvariantViolation);
}

TEST_CASE("next action completes after the final step") {
  Population p = build_population(base_config(), 2);
  AgentRecord& a = p.agents[0];
  CHECK(next_action(a).kind == NextAction::Kind::kGenerate);
  CHECK(next_action(a).gen_tokens == a.spec.steps[0].gen_tokens);
  a.step_index = a.spec.steps.size();
  CHECK(next_action(a).kind == NextAction::Kind::kComplete);
}

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
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace kvadmit {

using AgentId = std::uint32_t;

struct ControllerConfig {
  double alpha = 2.0;           // additive increase, agents per tick
  double beta = 0.5;            // multiplicative decrease factor
  double u_low = 0.2;           // usage below this grows the window
  double u_high = 0.5;          // usage above this (with poor hits) shrinks it
  double h_thresh = 0.2;        // hit rate below this counts as thrashing
  double w_min = 1.0;
  double w_max = 0.0;           // 0 = clamp to population size
  double initial_window = 0.0;  // 0 = start at w_min
  double control_interval = 0.25;  // simulated seconds between ticks
  double signal_smoothing = 0.0;   // EMA factor on raw signals, 0 = off

  void validate() const;
};

struct Signals {
  double usage = 0.0;
  double hit_rate = 0.0;
};

enum class PolicyKind : std::uint8_t {
  kUncontrolled,
  kFixedRequestCap,
  kFixedAgentCap,
  kCacheAwareAimd,
};

struct Policy {
  PolicyKind kind = PolicyKind::kUncontrolled;
  std::uint32_t cap = 1;  // fixed-cap policies
  ControllerConfig aimd;

  void validate() const;
};

struct AdmissionCommand {
  enum class Kind : std::uint8_t { kAdmit, kPause, kResume };
  Kind kind;
  AgentId agent;
};

// Window-based agent admission. The window is real-valued; floor() applies
// only when counting admission slots. Admission order is FIFO with paused
// agents resuming ahead of never-admitted ones. Pause victims are the most
// recently admitted agents that are at a step boundary; agents mid-flight
// are left alone and picked up at their next boundary.
class Controller {
 public:
  Controller(const Policy& policy, std::uint32_t total_agents);

  // Applies the window transition on current signals (AIMD policies only;
  // fixed policies hold). Returns the post-update window.
  double update_window(const Signals& raw);

  // One admission pass. `at_boundary` says whether an active agent can be
  // paused right now (it is between generations).
  std::vector<AdmissionCommand> admission_pass(
      const std::function<bool(AgentId)>& at_boundary);

  void add_pending(AgentId id);
  // Removes a finished agent from the active set.
  void on_agent_finished(AgentId id);
  // Request-granularity policies release the admission slot when a
  // generation completes; agent-granularity policies keep it.
  void on_request_complete(AgentId id);
  // After a tool call: request-granularity agents re-queue like new
  // arrivals, agent-granularity agents stay admitted.
  void on_tool_return(AgentId id);

  double window() const { return window_; }
  // Window value for reporting: the effective concurrency limit.
  double display_window() const;
  std::size_t admission_limit() const;
  const std::vector<AgentId>& active() const { return active_; }
  const std::deque<AgentId>& pending() const { return pending_; }
  const std::deque<AgentId>& paused() const { return paused_; }
  std::uint64_t tick_count() const { return tick_count_; }
  const Policy& policy() const { return policy_; }
  bool agent_gated() const;

  // Throws InvariantViolation if active/pending/paused overlap or the
  // window left its clamp range.
  void check_invariants() const;

 private:
  bool in_active(AgentId id) const;

  Policy policy_;
  std::uint32_t total_agents_;
  double window_ = 1.0;
  double smoothed_usage_ = 0.0;
  double smoothed_hit_ = 0.0;
  bool have_smoothed_ = false;
  std::vector<AgentId> active_;
  std::deque<AgentId> pending_;
  std::deque<AgentId> paused_;
  std::uint64_t tick_count_ = 0;
};

Policy parse_policy(const std::string& text, const ControllerConfig& aimd);
std::string policy_name(const Policy& policy);

}  // namespace kvadmit

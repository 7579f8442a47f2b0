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
#include "controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace kvadmit {

void ControllerConfig::validate() const {
  // Equal thresholds are allowed: the transition rule stays well defined
  // (grow below, shrink above, hold at the shared value), and sensitivity
  // sweeps probe that boundary.
  if (!(u_low >= 0 && u_low <= u_high && u_high <= 1))
    throw ConfigError("controller thresholds need 0 <= u_low <= u_high <= 1");
  if (!(beta > 0 && beta < 1))
    throw ConfigError("controller.beta must be in (0,1)");
  if (!(alpha > 0)) throw ConfigError("controller.alpha must be > 0");
  if (!(h_thresh >= 0 && h_thresh <= 1))
    throw ConfigError("controller.h_thresh must be in [0,1]");
  if (!(w_min >= 1)) throw ConfigError("controller.w_min must be >= 1");
  if (w_max != 0 && w_max < w_min)
    throw ConfigError("controller.w_max must be >= w_min");
  if (initial_window != 0 &&
      (initial_window < w_min || (w_max != 0 && initial_window > w_max)))
    throw ConfigError("controller.initial_window outside [w_min, w_max]");
  if (!(control_interval > 0))
    throw ConfigError("controller.control_interval must be > 0");
  if (!(signal_smoothing >= 0 && signal_smoothing < 1))
    throw ConfigError("controller.signal_smoothing must be in [0,1)");
}

void Policy::validate() const {
  if ((kind == PolicyKind::kFixedRequestCap ||
       kind == PolicyKind::kFixedAgentCap) &&
      cap < 1)
    throw ConfigError("fixed cap policies need cap >= 1");
  if (kind == PolicyKind::kCacheAwareAimd) aimd.validate();
}

Controller::Controller(const Policy& policy, std::uint32_t total_agents)
    : policy_(policy), total_agents_(total_agents) {
  policy_.validate();
  if (policy_.kind == PolicyKind::kCacheAwareAimd) {
    ControllerConfig& cfg = policy_.aimd;
    if (cfg.w_max == 0)
      cfg.w_max = std::max(cfg.w_min, static_cast<double>(total_agents));
    if (cfg.initial_window == 0) cfg.initial_window = cfg.w_min;
    window_ = cfg.initial_window;
  }
}

double Controller::update_window(const Signals& raw) {
  ++tick_count_;
  if (policy_.kind != PolicyKind::kCacheAwareAimd) return display_window();
  const ControllerConfig& cfg = policy_.aimd;
  Signals s = raw;
  if (cfg.signal_smoothing > 0) {
    if (have_smoothed_) {
      s.usage = cfg.signal_smoothing * smoothed_usage_ +
                (1 - cfg.signal_smoothing) * raw.usage;
      s.hit_rate = cfg.signal_smoothing * smoothed_hit_ +
                   (1 - cfg.signal_smoothing) * raw.hit_rate;
    }
    smoothed_usage_ = s.usage;
    smoothed_hit_ = s.hit_rate;
    have_smoothed_ = true;
  }
  double w = window_;
  if (s.usage < cfg.u_low) {
    w = w + cfg.alpha;
  } else if (s.usage > cfg.u_high && s.hit_rate < cfg.h_thresh) {
    w = w * cfg.beta;
  }
  window_ = std::clamp(w, cfg.w_min, cfg.w_max);
  return window_;
}

std::size_t Controller::admission_limit() const {
  switch (policy_.kind) {
    case PolicyKind::kUncontrolled:
      return std::numeric_limits<std::size_t>::max();
    case PolicyKind::kFixedRequestCap:
    case PolicyKind::kFixedAgentCap:
      return policy_.cap;
    case PolicyKind::kCacheAwareAimd:
      return static_cast<std::size_t>(std::floor(window_));
  }
  return 0;
}

double Controller::display_window() const {
  switch (policy_.kind) {
    case PolicyKind::kUncontrolled:
      return static_cast<double>(total_agents_);
    case PolicyKind::kFixedRequestCap:
    case PolicyKind::kFixedAgentCap:
      return static_cast<double>(policy_.cap);
    case PolicyKind::kCacheAwareAimd:
      return window_;
  }
  return 0;
}

bool Controller::agent_gated() const {
  return policy_.kind == PolicyKind::kFixedAgentCap ||
         policy_.kind == PolicyKind::kCacheAwareAimd;
}

std::vector<AdmissionCommand> Controller::admission_pass(
    const std::function<bool(AgentId)>& at_boundary) {
  std::vector<AdmissionCommand> cmds;
  std::size_t limit = admission_limit();
  if (agent_gated()) {
    while (active_.size() > limit) {
      auto victim = active_.end();
      for (auto it = active_.rbegin(); it != active_.rend(); ++it) {
        if (at_boundary(*it)) {
          victim = std::next(it).base();
          break;
        }
      }
      if (victim == active_.end()) break;
      AgentId id = *victim;
      active_.erase(victim);
      paused_.push_back(id);
      cmds.push_back({AdmissionCommand::Kind::kPause, id});
    }
  }
  while (active_.size() < limit) {
    if (agent_gated() && !paused_.empty()) {
      AgentId id = paused_.front();
      paused_.pop_front();
      active_.push_back(id);
      cmds.push_back({AdmissionCommand::Kind::kResume, id});
    } else if (!pending_.empty()) {
      AgentId id = pending_.front();
      pending_.pop_front();
      active_.push_back(id);
      cmds.push_back({AdmissionCommand::Kind::kAdmit, id});
    } else {
      break;
    }
  }
  return cmds;
}

void Controller::add_pending(AgentId id) { pending_.push_back(id); }

bool Controller::in_active(AgentId id) const {
  return std::find(active_.begin(), active_.end(), id) != active_.end();
}

void Controller::on_agent_finished(AgentId id) {
  auto it = std::find(active_.begin(), active_.end(), id);
  if (it == active_.end())
    throw UnknownAgent("finished agent " + std::to_string(id) +
                       " is not active");
  active_.erase(it);
}

void Controller::on_request_complete(AgentId id) {
  if (policy_.kind != PolicyKind::kFixedRequestCap) return;
  auto it = std::find(active_.begin(), active_.end(), id);
  if (it == active_.end())
    throw UnknownAgent("request completion for agent " + std::to_string(id) +
                       " which is not active");
  active_.erase(it);
}

void Controller::on_tool_return(AgentId id) {
  if (policy_.kind == PolicyKind::kFixedRequestCap) {
    add_pending(id);
    return;
  }
  if (!in_active(id))
    throw UnknownAgent("tool return for agent " + std::to_string(id) +
                       " which is not active");
}

void Controller::check_invariants() const {
  std::set<AgentId> seen;
  for (AgentId id : active_)
    if (!seen.insert(id).second)
      throw InvariantViolation("agent appears twice across controller sets");
  for (AgentId id : pending_)
    if (!seen.insert(id).second)
      throw InvariantViolation("agent appears twice across controller sets");
  for (AgentId id : paused_)
    if (!seen.insert(id).second)
      throw InvariantViolation("agent appears twice across controller sets");
  if (policy_.kind == PolicyKind::kCacheAwareAimd) {
    if (window_ < policy_.aimd.w_min - 1e-12 ||
        window_ > policy_.aimd.w_max + 1e-12)
      throw InvariantViolation("window escaped its clamp range");
  }
}

Policy parse_policy(const std::string& text, const ControllerConfig& aimd) {
  Policy p;
  p.aimd = aimd;
  auto colon = text.find(':');
  std::string head = colon == std::string::npos ? text : text.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto need_cap = [&]() -> std::uint32_t {
    if (arg.empty())
      throw ConfigError("policy '" + head + "' needs a cap, e.g. " + head +
                        ":8");
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(arg, &pos);
    } catch (const std::exception&) {
      throw ConfigError("bad cap in policy '" + text + "'");
    }
    if (pos != arg.size() || v < 1)
      throw ConfigError("bad cap in policy '" + text + "'");
    return static_cast<std::uint32_t>(v);
  };
  if (head == "uncontrolled") {
    p.kind = PolicyKind::kUncontrolled;
  } else if (head == "request_cap") {
    p.kind = PolicyKind::kFixedRequestCap;
    p.cap = need_cap();
  } else if (head == "agent_cap") {
    p.kind = PolicyKind::kFixedAgentCap;
    p.cap = need_cap();
  } else if (head == "aimd") {
    p.kind = PolicyKind::kCacheAwareAimd;
  } else {
    throw ConfigError("unknown policy '" + text + "'");
  }
  if (!arg.empty() && p.kind != PolicyKind::kFixedRequestCap &&
      p.kind != PolicyKind::kFixedAgentCap)
    throw ConfigError("policy '" + head + "' takes no argument");
  return p;
}

std::string policy_name(const Policy& policy) {
  switch (policy.kind) {
    case PolicyKind::kUncontrolled:
      return "uncontrolled";
    case PolicyKind::kFixedRequestCap:
      return "request_cap:" + std::to_string(policy.cap);
    case PolicyKind::kFixedAgentCap:
      return "agent_cap:" + std::to_string(policy.cap);
    case PolicyKind::kCacheAwareAimd:
      return "aimd";
  }
  return "?";
}

}  // namespace kvadmit

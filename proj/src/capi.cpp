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
#include "kvadmit/kvadmit.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <utility>

#include "config.hpp"
#include "controller.hpp"
#include "experiment.hpp"

struct kva_scenario {
  kvadmit::ScenarioConfig cfg;
};

struct kva_controller {
  kvadmit::Controller impl;
  uint32_t total_agents;
};

namespace {

thread_local std::string t_last_error = "no error";

kva_status fail(kva_status code, const std::string& what) {
  t_last_error = what;
  return code;
}

// Runs `f`, translating exceptions to status codes.
template <typename F>
kva_status guarded(F&& f) {
  try {
    f();
    return KVA_OK;
  } catch (const kvadmit::HorizonError& e) {
    return fail(KVA_ERR_HORIZON, e.what());
  } catch (const kvadmit::MissingBaseline& e) {
    return fail(KVA_ERR_MISSING_BASELINE, e.what());
  } catch (const kvadmit::ConfigError& e) {
    return fail(KVA_ERR_CONFIG, e.what());
  } catch (const kvadmit::IoError& e) {
    return fail(KVA_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(KVA_ERR_STATE, "out of memory");
  } catch (const std::exception& e) {
    return fail(KVA_ERR_STATE, e.what());
  }
}

kva_status require(bool ok, const char* what) {
  return ok ? KVA_OK : fail(KVA_ERR_CONFIG, what);
}

char* dup_text(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void deliver(char** rendered, const std::string& text) {
  if (rendered != nullptr) *rendered = dup_text(text);
}

kvadmit::ControllerConfig to_internal(const kva_controller_config* cfg) {
  kvadmit::ControllerConfig out;
  if (cfg == nullptr) return out;
  out.alpha = cfg->alpha;
  out.beta = cfg->beta;
  out.u_low = cfg->u_low;
  out.u_high = cfg->u_high;
  out.h_thresh = cfg->h_thresh;
  out.w_min = cfg->w_min;
  out.w_max = cfg->w_max;
  out.initial_window = cfg->initial_window;
  out.signal_smoothing = cfg->signal_smoothing;
  return out;
}

}  // namespace

extern "C" {

const char* kva_version(void) { return "1.0.0"; }

const char* kva_last_error(void) { return t_last_error.c_str(); }

void kva_text_free(char* text) { std::free(text); }

kva_status kva_scenario_load(const char* path, kva_scenario** out) {
  if (kva_status s = require(path && out, "null argument")) return s;
  return guarded([&] {
    auto* handle = new kva_scenario{kvadmit::load_scenario(path)};
    *out = handle;
  });
}

kva_status kva_scenario_parse(const char* text, const char* origin,
                              kva_scenario** out) {
  if (kva_status s = require(text && out, "null argument")) return s;
  return guarded([&] {
    auto* handle = new kva_scenario{
        kvadmit::parse_scenario(text, origin ? origin : "<memory>")};
    *out = handle;
  });
}

kva_status kva_scenario_set(kva_scenario* s, const char* assignment) {
  if (kva_status st = require(s && assignment, "null argument")) return st;
  return guarded([&] { kvadmit::apply_override(s->cfg, assignment); });
}

kva_status kva_scenario_validate(const kva_scenario* s) {
  if (kva_status st = require(s != nullptr, "null scenario")) return st;
  return guarded([&] { s->cfg.validate(); });
}

void kva_scenario_free(kva_scenario* s) { delete s; }

kva_status kva_cmd_run(const kva_scenario* s, const char* out_root,
                       char** rendered) {
  if (kva_status st = require(s != nullptr, "null scenario")) return st;
  return guarded([&] {
    s->cfg.validate();
    std::string root = out_root ? out_root : s->cfg.output_dir;
    deliver(rendered, kvadmit::run_command(s->cfg, root));
  });
}

kva_status kva_cmd_compare(const kva_scenario* s, const char* out_root,
                           unsigned jobs, char** rendered) {
  if (kva_status st = require(s != nullptr, "null scenario")) return st;
  return guarded([&] {
    s->cfg.validate();
    std::string root = out_root ? out_root : s->cfg.output_dir;
    deliver(rendered, kvadmit::compare_command(s->cfg, root, jobs));
  });
}

kva_status kva_cmd_sweep(const kva_scenario* s, const char* out_root,
                         unsigned jobs, char** rendered) {
  if (kva_status st = require(s != nullptr, "null scenario")) return st;
  return guarded([&] {
    s->cfg.validate();
    std::string root = out_root ? out_root : s->cfg.output_dir;
    deliver(rendered, kvadmit::sweep_command(s->cfg, root, jobs));
  });
}

kva_status kva_cmd_report(const char* dir, char** rendered) {
  if (kva_status st = require(dir != nullptr, "null directory")) return st;
  return guarded([&] { deliver(rendered, kvadmit::report_command(dir)); });
}

void kva_controller_config_init(kva_controller_config* cfg) {
  if (cfg == nullptr) return;
  kvadmit::ControllerConfig d;
  cfg->alpha = d.alpha;
  cfg->beta = d.beta;
  cfg->u_low = d.u_low;
  cfg->u_high = d.u_high;
  cfg->h_thresh = d.h_thresh;
  cfg->w_min = d.w_min;
  cfg->w_max = d.w_max;
  cfg->initial_window = d.initial_window;
  cfg->signal_smoothing = d.signal_smoothing;
}

kva_status kva_controller_create(const char* policy,
                                 const kva_controller_config* cfg,
                                 uint32_t total_agents,
                                 kva_controller** out) {
  if (kva_status s = require(policy && out, "null argument")) return s;
  return guarded([&] {
    kvadmit::Policy p = kvadmit::parse_policy(policy, to_internal(cfg));
    *out = new kva_controller{kvadmit::Controller(p, total_agents),
                              total_agents};
  });
}

void kva_controller_free(kva_controller* c) { delete c; }

kva_status kva_controller_update_window(kva_controller* c, double usage,
                                        double hit_rate, double* window_out) {
  if (kva_status s = require(c != nullptr, "null controller")) return s;
  if (kva_status s = require(std::isfinite(usage) && std::isfinite(hit_rate),
                             "signals must be finite"))
    return s;
  return guarded([&] {
    double w = c->impl.update_window({usage, hit_rate});
    if (window_out != nullptr) *window_out = w;
  });
}

kva_status kva_controller_admission_pass(kva_controller* c,
                                         const uint8_t* at_boundary,
                                         size_t n_agents, kva_command* commands,
                                         size_t cap, size_t* n_out) {
  if (kva_status s = require(c != nullptr, "null controller")) return s;
  if (kva_status s = require(n_agents == c->total_agents,
                             "n_agents must equal total_agents"))
    return s;
  if (kva_status s =
          require(at_boundary != nullptr || n_agents == 0, "null at_boundary"))
    return s;
  if (kva_status s = require(commands != nullptr || cap == 0, "null commands"))
    return s;
  if (kva_status s = require(cap >= n_agents,
                             "command buffer smaller than total_agents"))
    return s;
  return guarded([&] {
    auto cmds = c->impl.admission_pass([&](kvadmit::AgentId id) {
      return at_boundary[id] != 0;
    });
    if (cmds.size() > cap)
      throw kvadmit::InvariantViolation("admission pass emitted " +
                                        std::to_string(cmds.size()) +
                                        " commands");
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      switch (cmds[i].kind) {
        case kvadmit::AdmissionCommand::Kind::kAdmit:
          commands[i].kind = KVA_CMD_ADMIT;
          break;
        case kvadmit::AdmissionCommand::Kind::kPause:
          commands[i].kind = KVA_CMD_PAUSE;
          break;
        case kvadmit::AdmissionCommand::Kind::kResume:
          commands[i].kind = KVA_CMD_RESUME;
          break;
      }
      commands[i].agent = cmds[i].agent;
    }
    if (n_out != nullptr) *n_out = cmds.size();
  });
}

kva_status kva_controller_add_pending(kva_controller* c, uint32_t agent) {
  if (kva_status s = require(c != nullptr, "null controller")) return s;
  if (kva_status s = require(agent < c->total_agents, "agent id out of range"))
    return s;
  return guarded([&] { c->impl.add_pending(agent); });
}

kva_status kva_controller_on_agent_finished(kva_controller* c,
                                            uint32_t agent) {
  if (kva_status s = require(c != nullptr, "null controller")) return s;
  return guarded([&] { c->impl.on_agent_finished(agent); });
}

kva_status kva_controller_on_request_complete(kva_controller* c,
                                              uint32_t agent) {
  if (kva_status s = require(c != nullptr, "null controller")) return s;
  return guarded([&] { c->impl.on_request_complete(agent); });
}

kva_status kva_controller_on_tool_return(kva_controller* c, uint32_t agent) {
  if (kva_status s = require(c != nullptr, "null controller")) return s;
  return guarded([&] { c->impl.on_tool_return(agent); });
}

kva_status kva_controller_window(const kva_controller* c, double* out) {
  if (kva_status s = require(c && out, "null argument")) return s;
  return guarded([&] { *out = c->impl.display_window(); });
}

kva_status kva_controller_counts(const kva_controller* c, size_t* active,
                                 size_t* pending, size_t* paused) {
  if (kva_status s = require(c != nullptr, "null controller")) return s;
  if (active != nullptr) *active = c->impl.active().size();
  if (pending != nullptr) *pending = c->impl.pending().size();
  if (paused != nullptr) *paused = c->impl.paused().size();
  return KVA_OK;
}

}  // extern "C"

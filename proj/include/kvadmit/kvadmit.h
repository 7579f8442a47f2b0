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
#ifndef KVADMIT_KVADMIT_H_
#define KVADMIT_KVADMIT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define KVA_API __declspec(dllexport)
#else
#define KVA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status; 0 is success. On failure,
 * kva_last_error() describes what went wrong in the calling thread. */
typedef enum kva_status {
  KVA_OK = 0,
  KVA_ERR_CONFIG = 1,           /* bad configuration, argument, or request */
  KVA_ERR_IO = 2,               /* filesystem failure */
  KVA_ERR_HORIZON = 3,          /* simulation exceeded its horizon guard */
  KVA_ERR_STATE = 4,            /* invariant violation or API misuse */
  KVA_ERR_MISSING_BASELINE = 5  /* report/compare lacks a baseline run */
} kva_status;

KVA_API const char* kva_version(void);

/* Message for the most recent failure in this thread; never NULL. */
KVA_API const char* kva_last_error(void);

/* Frees strings returned through char** out-parameters. */
KVA_API void kva_text_free(char* text);

/* ---------------------------------------------------------------------
 * Scenario API: load a config, override keys, run experiment commands.
 * Artifacts (trace.csv, summary.txt, phases.csv, manifest.json) land in
 * per-run subdirectories of the output root.
 * ------------------------------------------------------------------- */

typedef struct kva_scenario kva_scenario;

KVA_API kva_status kva_scenario_load(const char* path, kva_scenario** out);
KVA_API kva_status kva_scenario_parse(const char* text, const char* origin,
                                      kva_scenario** out);
/* One "key=value" or "section.key=value" override, file syntax. */
KVA_API kva_status kva_scenario_set(kva_scenario* s, const char* assignment);
KVA_API kva_status kva_scenario_validate(const kva_scenario* s);
KVA_API void kva_scenario_free(kva_scenario* s);

/* Commands return the text a CLI should print via *rendered (caller frees
 * with kva_text_free; may pass NULL to discard). out_root NULL uses the
 * scenario's output_dir. On KVA_ERR_HORIZON the partial trace is still
 * written. jobs is the number of parallel runs (0 means 1). */
KVA_API kva_status kva_cmd_run(const kva_scenario* s, const char* out_root,
                               char** rendered);
KVA_API kva_status kva_cmd_compare(const kva_scenario* s,
                                   const char* out_root, unsigned jobs,
                                   char** rendered);
KVA_API kva_status kva_cmd_sweep(const kva_scenario* s, const char* out_root,
                                 unsigned jobs, char** rendered);
/* Re-renders the table for a command directory holding manifest.json. */
KVA_API kva_status kva_cmd_report(const char* dir, char** rendered);

/* ---------------------------------------------------------------------
 * Standalone admission controller, usable without the simulator.
 * Agents are dense ids 0..total_agents-1. The handle is a passive state
 * machine: calls must be externally serialized per handle.
 * ------------------------------------------------------------------- */

typedef struct kva_controller kva_controller;

typedef struct kva_controller_config {
  double alpha;            /* additive window increase per tick */
  double beta;             /* multiplicative decrease factor in (0,1) */
  double u_low;            /* grow while usage is below this */
  double u_high;           /* shrink above this when hits are poor */
  double h_thresh;         /* hit rate below this counts as thrashing */
  double w_min;            /* window floor, >= 1 */
  double w_max;            /* window ceiling; 0 clamps at total_agents */
  double initial_window;   /* 0 starts at w_min */
  double signal_smoothing; /* EMA factor on raw signals, 0 = off */
} kva_controller_config;

/* Fills the documented defaults (alpha 2, beta 0.5, thresholds
 * 0.2/0.5/0.2, w_min 1). */
KVA_API void kva_controller_config_init(kva_controller_config* cfg);

/* policy: "uncontrolled", "request_cap:N", "agent_cap:N", or "aimd".
 * cfg may be NULL for defaults (it only steers the "aimd" policy). */
KVA_API kva_status kva_controller_create(const char* policy,
                                         const kva_controller_config* cfg,
                                         uint32_t total_agents,
                                         kva_controller** out);
KVA_API void kva_controller_free(kva_controller* c);

/* Applies the window transition for one control tick on raw signals and
 * returns the post-update window via *window_out (may be NULL). */
KVA_API kva_status kva_controller_update_window(kva_controller* c,
                                                double usage, double hit_rate,
                                                double* window_out);

enum {
  KVA_CMD_ADMIT = 0,
  KVA_CMD_PAUSE = 1,
  KVA_CMD_RESUME = 2
};

typedef struct kva_command {
  uint8_t kind; /* KVA_CMD_* */
  uint32_t agent;
} kva_command;

/* One admission pass. at_boundary[i] != 0 marks agent i as pausable right
 * now; n_agents must equal total_agents. Commands are written to
 * commands[0..cap); *n_out receives the count. A pass emits at most one
 * command per agent, so cap = total_agents always suffices; a smaller cap
 * fails with KVA_ERR_CONFIG before any state changes. */
KVA_API kva_status kva_controller_admission_pass(kva_controller* c,
                                                 const uint8_t* at_boundary,
                                                 size_t n_agents,
                                                 kva_command* commands,
                                                 size_t cap, size_t* n_out);

/* Queues a never-admitted (or re-queued) agent. */
KVA_API kva_status kva_controller_add_pending(kva_controller* c,
                                              uint32_t agent);
/* Releases a finished agent's admission. */
KVA_API kva_status kva_controller_on_agent_finished(kva_controller* c,
                                                    uint32_t agent);
/* Request-granularity policies release the slot after each generation. */
KVA_API kva_status kva_controller_on_request_complete(kva_controller* c,
                                                      uint32_t agent);
/* Tells the controller an admitted agent returned from a tool call. */
KVA_API kva_status kva_controller_on_tool_return(kva_controller* c,
                                                 uint32_t agent);

/* Effective concurrency limit for reporting. */
KVA_API kva_status kva_controller_window(const kva_controller* c,
                                         double* out);
/* Current set sizes; any out-pointer may be NULL. */
KVA_API kva_status kva_controller_counts(const kva_controller* c,
                                         size_t* active, size_t* pending,
                                         size_t* paused);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* KVADMIT_KVADMIT_H_ */

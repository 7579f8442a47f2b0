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
#include <vector>

#include "cache_tree.hpp"
#include "controller.hpp"
#include "cost_model.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "workload.hpp"

namespace kvadmit {

struct EngineParams {
  std::size_t capacity = 0;   // device pool, in pages
  std::size_t page_size = 1;  // tokens per page
  EvictionMode eviction = EvictionMode::kDiscard;
  // Hit-window carryover between control ticks: 0 starts each tick fresh,
  // values in (0,1) keep an exponentially decayed share of the old window.
  double hit_window_decay = 0.0;
  double horizon = 1e6;  // simulated seconds; exceeding it aborts the run
  PhaseParams phase_params;
  bool paranoid = false;  // revalidate all invariants after every event

  void validate() const;
};

// Raw hit-window counters sampled at one control tick, kept alongside the
// trace so phase hit rates can be aggregated as ratio-of-sums.
struct TickHits {
  double matched = 0.0;
  double requested = 0.0;
};

struct SimulationResult {
  std::vector<TraceRecord> trace;
  std::vector<TickHits> tick_hits;
  std::vector<PhaseLabel> phases;
  Ledger ledger;
  double makespan = 0.0;
  double device_busy = 0.0;
  double link_busy = 0.0;
  std::uint64_t decoded_tokens = 0;
  std::uint64_t recompute_tokens = 0;
  std::uint64_t recompute_events = 0;
  std::uint64_t stall_events = 0;
  std::uint64_t offloaded_tokens = 0;
  std::uint64_t reloaded_tokens = 0;
  std::uint64_t discarded_tokens = 0;
  double total_wait_time = 0.0;
  std::uint64_t ticks = 0;
  std::uint64_t workload_hash = 0;
  std::vector<AgentStats> agent_stats;
};

// Runs the batch loop to completion. Deterministic: identical populations,
// policies, and parameters produce identical results. Throws HorizonError
// if simulated time passes params.horizon; when that happens and
// partial_on_abort is non-null, it receives everything simulated so far.
SimulationResult run_simulation(Population population, const Policy& policy,
                                const CostParams& cost,
                                const EngineParams& params,
                                SimulationResult* partial_on_abort = nullptr);

Summary summarize(const SimulationResult& r, const std::string& name,
                  const Policy& policy, std::uint64_t seed,
                  std::uint32_t agents);

}  // namespace kvadmit

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
#include <map>
#include <string>
#include <vector>

#include "errors.hpp"

namespace kvadmit {

// One row per control tick. Field order matches the exported CSV columns.
struct TraceRecord {
  double time = 0.0;
  double usage = 0.0;
  double hit_rate = 0.0;
  double window = 0.0;
  std::uint64_t active = 0;
  std::uint64_t pending = 0;
  std::uint64_t decoded_cum = 0;
  std::uint64_t recompute_cum = 0;
  std::uint64_t transfers = 0;

  bool operator==(const TraceRecord&) const = default;
};

inline constexpr const char* kTraceHeader =
    "time,usage,hit_rate,window,active,pending,decoded_cum,recompute_cum,"
    "transfers";

enum class Phase : std::uint8_t { kWarmup, kMiddle, kCooldown };

const char* phase_name(Phase p);

struct PhaseLabel {
  Phase phase = Phase::kWarmup;
  double start = 0.0;
  double end = 0.0;
};

struct PhaseParams {
  double sat_threshold = 0.8;
  double hit_threshold = 0.5;
  int hysteresis = 3;

  void validate() const;
};

// Warmup runs until the first tick that is both saturated and cache-cold;
// the middle phase then persists until `hysteresis` consecutive ticks
// violate that condition; cooldown is the remainder. A run that never
// enters the middle phase is a single warmup phase.
std::vector<PhaseLabel> classify_phases(const std::vector<TraceRecord>& trace,
                                        double makespan,
                                        const PhaseParams& params);

// Busy-time ledger. The simulated hardware has two resources, the compute
// device and the transfer link; each category belongs to exactly one.
// tool_wait is agent-side waiting that overlaps device time and idle time,
// so it is reported but excluded from the conservation identity:
//   prefill_fresh + prefill_recompute + decode + device_idle == makespan
//   transfer + link_idle == makespan
struct Ledger {
  double prefill_fresh = 0.0;
  double prefill_recompute = 0.0;
  double decode = 0.0;
  double transfer = 0.0;
  double tool_wait = 0.0;
};

struct Summary {
  std::string name;
  std::string policy;
  std::uint64_t seed = 0;
  std::uint64_t agents = 0;
  double makespan = 0.0;
  double throughput = 0.0;
  std::uint64_t decoded_tokens = 0;
  std::uint64_t recompute_tokens = 0;
  std::uint64_t recompute_events = 0;
  std::uint64_t stall_events = 0;
  double recompute_fraction = 0.0;
  double mean_hit_rate = 0.0;
  double mean_usage = 0.0;
  Ledger ledger;
  double device_busy = 0.0;
  double device_idle = 0.0;
  double link_busy = 0.0;
  double link_idle = 0.0;
  std::uint64_t offloaded_tokens = 0;
  std::uint64_t reloaded_tokens = 0;
  std::uint64_t discarded_tokens = 0;
  double total_wait_time = 0.0;
  double warmup_duration = 0.0;
  double middle_duration = 0.0;
  double cooldown_duration = 0.0;
  double middle_fraction = 0.0;
  double warmup_hit_rate = 1.0;
  double middle_hit_rate = 1.0;
  double cooldown_hit_rate = 1.0;
  double middle_usage_mean = 0.0;
  std::uint64_t ticks = 0;
  std::uint64_t workload_hash = 0;
};

std::string format_g6(double v);

void export_trace(const std::vector<TraceRecord>& trace,
                  const std::string& path);
std::vector<TraceRecord> import_trace(const std::string& path);

void export_summary(const Summary& s, const std::string& path);
std::map<std::string, std::string> import_summary(const std::string& path);
// Rebuilds a Summary from imported key/value pairs; missing or malformed
// fields raise IoError. Inverse of export_summary up to float formatting.
Summary parse_summary(const std::map<std::string, std::string>& kv);

void export_phases(const std::vector<PhaseLabel>& phases,
                   const std::string& path);

// Table-1-style comparison: one row per run, speedup measured against the
// named baseline's makespan.
std::string render_comparison(
    const std::vector<std::pair<std::string, Summary>>& runs,
    const std::string& baseline_name);

// Sweep table: one row per grid value plus the adaptive reference row.
std::string render_sweep(
    const std::string& axis,
    const std::vector<std::pair<std::string, Summary>>& runs);

}  // namespace kvadmit

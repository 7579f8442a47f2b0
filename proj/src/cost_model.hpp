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

#include <cstddef>

#include "errors.hpp"

namespace kvadmit {

// Timing coefficients, loaded from a defaults file and overridable per
// scenario. Prefill carries a quadratic term so recomputing a long evicted
// prefix costs far more than the decode steps that produced it.
struct CostParams {
  double prefill_linear = 0.0;       // seconds per new token
  double prefill_quadratic = 0.0;    // seconds per (new token x context token)
  double decode_base = 0.0;          // seconds per emitted token
  double decode_context = 0.0;       // seconds per (emitted token x context token)
  double bytes_per_token = 1.0;      // cache bytes per token
  double pcie_bandwidth = 1.0;       // bytes per second, shared across transfers
  double transfer_sync_overhead = 0.0;  // seconds per transfer

  void validate() const;
};

// prefill_linear*new + prefill_quadratic*new*context. context_len counts
// the full context including the new tokens.
double prefill_time(const CostParams& p, std::size_t new_tokens,
                    std::size_t context_len);

// Sum over emitted tokens of decode_base + decode_context*(context at that
// token); the context grows by one per emitted token starting from
// context_len.
double decode_time(const CostParams& p, std::size_t decode_len,
                   std::size_t context_len);

// transfer_sync_overhead + bytes*concurrent/pcie_bandwidth: bandwidth is
// fair-shared, so each of `concurrent` simultaneous transfers sees 1/c of
// the link.
double transfer_time(const CostParams& p, double bytes,
                     std::size_t concurrent_transfers);

// Reference calibration: a 7B-class model serving on one accelerator with
// a 16-bit KV cache (6.67 GB at 4096 tokens) behind a 25 GB/s host link.
// Offloading a full 4096-token context stops paying off at 4 concurrent
// transfers, where the fair-shared transfer outlasts recomputation.
CostParams reference_cost_params();

}  // namespace kvadmit

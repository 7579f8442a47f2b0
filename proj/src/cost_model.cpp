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
#include "cost_model.hpp"

namespace kvadmit {

void CostParams::validate() const {
  if (prefill_linear < 0 || prefill_quadratic < 0 || decode_base < 0 ||
      decode_context < 0 || bytes_per_token < 0 ||
      transfer_sync_overhead < 0) {
    throw ConfigError("cost parameters must be non-negative");
  }
  if (pcie_bandwidth <= 0) throw ConfigError("pcie_bandwidth must be > 0");
}

double prefill_time(const CostParams& p, std::size_t new_tokens,
                    std::size_t context_len) {
  double n = static_cast<double>(new_tokens);
  double c = static_cast<double>(context_len);
  return p.prefill_linear * n + p.prefill_quadratic * n * c;
}

double decode_time(const CostParams& p, std::size_t decode_len,
                   std::size_t context_len) {
  double n = static_cast<double>(decode_len);
  double c = static_cast<double>(context_len);
  // sum_{j=0}^{n-1} (c + j) = n*c + n*(n-1)/2
  return p.decode_base * n + p.decode_context * (n * c + n * (n - 1.0) / 2.0);
}

double transfer_time(const CostParams& p, double bytes,
                     std::size_t concurrent_transfers) {
  return p.transfer_sync_overhead +
         bytes * static_cast<double>(concurrent_transfers) / p.pcie_bandwidth;
}

CostParams reference_cost_params() {
  CostParams p;
  p.prefill_linear = 5e-5;
  p.prefill_quadratic = 5e-8;
  p.decode_base = 2e-3;
  p.decode_context = 2e-8;
  p.bytes_per_token = 6.67e9 / 4096.0;
  p.pcie_bandwidth = 25e9;
  p.transfer_sync_overhead = 0.05;
  return p;
}

}  // namespace kvadmit

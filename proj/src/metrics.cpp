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
#include "metrics.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kvadmit {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kWarmup: return "warmup";
    case Phase::kMiddle: return "middle";
    case Phase::kCooldown: return "cooldown";
  }
  return "?";
}

void PhaseParams::validate() const {
  if (!(sat_threshold > 0 && sat_threshold <= 1))
    throw ConfigError("phases.sat_threshold must be in (0,1]");
  if (!(hit_threshold >= 0 && hit_threshold <= 1))
    throw ConfigError("phases.hit_threshold must be in [0,1]");
  if (hysteresis < 1) throw ConfigError("phases.hysteresis must be >= 1");
}

std::vector<PhaseLabel> classify_phases(const std::vector<TraceRecord>& trace,
                                        double makespan,
                                        const PhaseParams& params) {
  params.validate();
  std::vector<PhaseLabel> out;
  if (makespan <= 0) return out;
  auto in_middle = [&](const TraceRecord& r) {
    return r.usage >= params.sat_threshold && r.hit_rate < params.hit_threshold;
  };
  std::size_t enter = trace.size();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (in_middle(trace[i])) {
      enter = i;
      break;
    }
  }
  if (enter == trace.size()) {
    out.push_back({Phase::kWarmup, 0.0, makespan});
    return out;
  }
  double middle_start = trace[enter].time;
  double middle_end = makespan;
  int violations = 0;
  for (std::size_t i = enter + 1; i < trace.size(); ++i) {
    if (in_middle(trace[i])) {
      violations = 0;
      continue;
    }
    ++violations;
    if (violations >= params.hysteresis) {
      middle_end = trace[i + 1 - static_cast<std::size_t>(params.hysteresis)].time;
      break;
    }
  }
  if (middle_start > 0)
    out.push_back({Phase::kWarmup, 0.0, middle_start});
  out.push_back({Phase::kMiddle, middle_start, middle_end});
  if (middle_end < makespan)
    out.push_back({Phase::kCooldown, middle_end, makespan});
  return out;
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void export_trace(const std::vector<TraceRecord>& trace,
                  const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open trace file for writing: " + path);
  os << kTraceHeader << '\n';
  for (const TraceRecord& r : trace) {
    os << format_g6(r.time) << ',' << format_g6(r.usage) << ','
       << format_g6(r.hit_rate) << ',' << format_g6(r.window) << ','
       << r.active << ',' << r.pending << ',' << r.decoded_cum << ','
       << r.recompute_cum << ',' << r.transfers << '\n';
  }
  if (!os) throw IoError("failed writing trace file: " + path);
}

std::vector<TraceRecord> import_trace(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError("trace file is empty: " + path);
  if (line != kTraceHeader)
    throw IoError("unexpected trace header in " + path + ": " + line);
  std::vector<TraceRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    TraceRecord r;
    char c = 0;
    if (!(ls >> r.time >> c >> r.usage >> c >> r.hit_rate >> c >> r.window >>
          c >> r.active >> c >> r.pending >> c >> r.decoded_cum >> c >>
          r.recompute_cum >> c >> r.transfers))
      throw IoError("bad trace row in " + path + ": " + line);
    out.push_back(r);
  }
  return out;
}

namespace {

void put(std::ostream& os, const std::string& key, const std::string& value) {
  os << key << " = " << value << '\n';
}

void put_u(std::ostream& os, const std::string& key, std::uint64_t v) {
  put(os, key, std::to_string(v));
}

void put_d(std::ostream& os, const std::string& key, double v) {
  put(os, key, format_g6(v));
}

}  // namespace

void export_summary(const Summary& s, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open summary file for writing: " + path);
  put(os, "name", s.name);
  put(os, "policy", s.policy);
  put_u(os, "seed", s.seed);
  put_u(os, "agents", s.agents);
  put_d(os, "makespan", s.makespan);
  put_d(os, "throughput", s.throughput);
  put_u(os, "decoded_tokens", s.decoded_tokens);
  put_u(os, "recompute_tokens", s.recompute_tokens);
  put_u(os, "recompute_events", s.recompute_events);
  put_u(os, "stall_events", s.stall_events);
  put_d(os, "recompute_fraction", s.recompute_fraction);
  put_d(os, "mean_hit_rate", s.mean_hit_rate);
  put_d(os, "mean_usage", s.mean_usage);
  put_d(os, "prefill_fresh_time", s.ledger.prefill_fresh);
  put_d(os, "prefill_recompute_time", s.ledger.prefill_recompute);
  put_d(os, "decode_time", s.ledger.decode);
  put_d(os, "transfer_time", s.ledger.transfer);
  put_d(os, "tool_wait_time", s.ledger.tool_wait);
  put_d(os, "device_busy", s.device_busy);
  put_d(os, "device_idle", s.device_idle);
  put_d(os, "link_busy", s.link_busy);
  put_d(os, "link_idle", s.link_idle);
  put_u(os, "offloaded_tokens", s.offloaded_tokens);
  put_u(os, "reloaded_tokens", s.reloaded_tokens);
  put_u(os, "discarded_tokens", s.discarded_tokens);
  put_d(os, "total_wait_time", s.total_wait_time);
  put_d(os, "warmup_duration", s.warmup_duration);
  put_d(os, "middle_duration", s.middle_duration);
  put_d(os, "cooldown_duration", s.cooldown_duration);
  put_d(os, "middle_fraction", s.middle_fraction);
  put_d(os, "warmup_hit_rate", s.warmup_hit_rate);
  put_d(os, "middle_hit_rate", s.middle_hit_rate);
  put_d(os, "cooldown_hit_rate", s.cooldown_hit_rate);
  put_d(os, "middle_usage_mean", s.middle_usage_mean);
  put_u(os, "ticks", s.ticks);
  char hex[32];
  std::snprintf(hex, sizeof(hex), "0x%016" PRIx64, s.workload_hash);
  put(os, "workload_hash", hex);
  if (!os) throw IoError("failed writing summary file: " + path);
}

std::map<std::string, std::string> import_summary(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open summary file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto eq = line.find(" = ");
    if (eq == std::string::npos)
      throw IoError("bad summary line in " + path + ": " + line);
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

Summary parse_summary(const std::map<std::string, std::string>& kv) {
  auto raw = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw IoError(std::string("summary is missing field '") + key + "'");
    return it->second;
  };
  auto num = [&](const char* key) {
    const std::string& v = raw(key);
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size())
      throw IoError(std::string("summary field '") + key + "' is not a number");
    return d;
  };
  auto uns = [&](const char* key) {
    return static_cast<std::uint64_t>(num(key));
  };
  Summary s;
  s.name = raw("name");
  s.policy = raw("policy");
  s.seed = uns("seed");
  s.agents = uns("agents");
  s.makespan = num("makespan");
  s.throughput = num("throughput");
  s.decoded_tokens = uns("decoded_tokens");
  s.recompute_tokens = uns("recompute_tokens");
  s.recompute_events = uns("recompute_events");
  s.stall_events = uns("stall_events");
  s.recompute_fraction = num("recompute_fraction");
  s.mean_hit_rate = num("mean_hit_rate");
  s.mean_usage = num("mean_usage");
  s.ledger.prefill_fresh = num("prefill_fresh_time");
  s.ledger.prefill_recompute = num("prefill_recompute_time");
  s.ledger.decode = num("decode_time");
  s.ledger.transfer = num("transfer_time");
  s.ledger.tool_wait = num("tool_wait_time");
  s.device_busy = num("device_busy");
  s.device_idle = num("device_idle");
  s.link_busy = num("link_busy");
  s.link_idle = num("link_idle");
  s.offloaded_tokens = uns("offloaded_tokens");
  s.reloaded_tokens = uns("reloaded_tokens");
  s.discarded_tokens = uns("discarded_tokens");
  s.total_wait_time = num("total_wait_time");
  s.warmup_duration = num("warmup_duration");
  s.middle_duration = num("middle_duration");
  s.cooldown_duration = num("cooldown_duration");
  s.middle_fraction = num("middle_fraction");
  s.warmup_hit_rate = num("warmup_hit_rate");
  s.middle_hit_rate = num("middle_hit_rate");
  s.cooldown_hit_rate = num("cooldown_hit_rate");
  s.middle_usage_mean = num("middle_usage_mean");
  s.ticks = uns("ticks");
  const std::string& hash = raw("workload_hash");
  if (hash.size() < 3 || hash.compare(0, 2, "0x") != 0)
    throw IoError("summary workload_hash is not hexadecimal");
  s.workload_hash = std::stoull(hash.substr(2), nullptr, 16);
  return s;
}

void export_phases(const std::vector<PhaseLabel>& phases,
                   const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open phases file for writing: " + path);
  os << "phase,start,end\n";
  for (const PhaseLabel& p : phases) {
    os << phase_name(p.phase) << ',' << format_g6(p.start) << ','
       << format_g6(p.end) << '\n';
  }
  if (!os) throw IoError("failed writing phases file: " + path);
}

namespace {

std::string pad(const std::string& s, std::size_t width) {
  if (s.size() >= width) return s;
  return s + std::string(width - s.size(), ' ');
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i)
      widths[i] = std::max(widths[i], row[i].size());
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) line += "  ";
      line += pad(rows[r][i], widths[i]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    os << line << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < widths.size(); ++i)
        total += widths[i] + (i ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace

std::string render_comparison(
    const std::vector<std::pair<std::string, Summary>>& runs,
    const std::string& baseline_name) {
  const Summary* baseline = nullptr;
  for (const auto& [name, s] : runs) {
    if (name == baseline_name) {
      baseline = &s;
      break;
    }
  }
  if (baseline == nullptr)
    throw MissingBaseline("baseline run '" + baseline_name +
                          "' not present in comparison");
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"policy", "makespan_s", "speedup", "mean_hit", "recompute_frac",
                  "middle_frac"});
  for (const auto& [name, s] : runs) {
    double speedup = s.makespan > 0 ? baseline->makespan / s.makespan : 0.0;
    char sp[32];
    std::snprintf(sp, sizeof(sp), "%.2fx", speedup);
    rows.push_back({name, format_g6(s.makespan), sp, format_g6(s.mean_hit_rate),
                    format_g6(s.recompute_fraction),
                    format_g6(s.middle_fraction)});
  }
  return render_table(rows);
}

std::string render_sweep(
    const std::string& axis,
    const std::vector<std::pair<std::string, Summary>>& runs) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({axis, "makespan_s", "mean_hit", "recompute_frac",
                  "middle_frac"});
  for (const auto& [name, s] : runs) {
    rows.push_back({name, format_g6(s.makespan), format_g6(s.mean_hit_rate),
                    format_g6(s.recompute_fraction),
                    format_g6(s.middle_fraction)});
  }
  return render_table(rows);
}

}  // namespace kvadmit

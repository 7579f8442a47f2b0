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

#include <cstdio>
#include <filesystem>
#include <string>

#include "metrics.hpp"

using namespace kvadmit;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TraceRecord row(double t, double usage, double hit) {
  TraceRecord r;
  r.time = t;
  r.usage = usage;
  r.hit_rate = hit;
  r.window = 4.0;
  r.active = 4;
  r.pending = 2;
  r.decoded_cum = 100;
  r.recompute_cum = 10;
  r.transfers = 1;
  return r;
}

}  // namespace

TEST_CASE("phase classification finds the saturated cache-cold middle") {
  std::vector<TraceRecord> trace = {
      row(1, 0.2, 1.0),  row(2, 0.6, 0.9),  row(3, 0.85, 0.4),
      row(4, 0.95, 0.2), row(5, 0.99, 0.3), row(6, 0.9, 0.7),
      row(7, 0.85, 0.45), row(8, 0.7, 0.8), row(9, 0.5, 0.9),
      row(10, 0.2, 0.95),
  };
  auto phases = classify_phases(trace, 11.0, PhaseParams{});
  REQUIRE(phases.size() == 3);
  CHECK(phases[0].phase == Phase::kWarmup);
  CHECK(phases[0].start == 0.0);
  CHECK(phases[0].end == 3.0);
  CHECK(phases[1].phase == Phase::kMiddle);
  CHECK(phases[1].start == 3.0);
  // t=6 breaks the streak but t=7 re-enters; exit needs 3 in a row (8,9,10).
  CHECK(phases[1].end == 8.0);
  CHECK(phases[2].phase == Phase::kCooldown);
  CHECK(phases[2].start == 8.0);
  CHECK(phases[2].end == 11.0);
}

TEST_CASE("a run that never saturates is all warmup") {
  std::vector<TraceRecord> trace = {row(1, 0.3, 0.9), row(2, 0.5, 0.8)};
  auto phases = classify_phases(trace, 3.0, PhaseParams{});
  REQUIRE(phases.size() == 1);
  CHECK(phases[0].phase == Phase::kWarmup);
  CHECK(phases[0].end == 3.0);
}

TEST_CASE("a run that thrashes to the end has no cooldown") {
  std::vector<TraceRecord> trace = {row(1, 0.9, 0.1), row(2, 0.9, 0.1)};
  auto phases = classify_phases(trace, 2.5, PhaseParams{});
  REQUIRE(phases.size() == 2);
  CHECK(phases[0].phase == Phase::kWarmup);
  CHECK(phases[1].phase == Phase::kMiddle);
  CHECK(phases[1].start == 1.0);
  CHECK(phases[1].end == 2.5);
}

TEST_CASE("saturation at the first tick leaves only the pre-tick warmup") {
  std::vector<TraceRecord> trace = {row(0.25, 0.9, 0.1), row(0.5, 0.9, 0.2)};
  auto phases = classify_phases(trace, 1.0, PhaseParams{});
  REQUIRE(phases.size() == 2);
  CHECK(phases[0].phase == Phase::kWarmup);
  CHECK(phases[0].end == 0.25);
  CHECK(phases[1].phase == Phase::kMiddle);
  CHECK(phases[1].start == 0.25);
  CHECK(phases[1].end == 1.0);
}

TEST_CASE("hysteresis ignores blips shorter than the threshold") {
  PhaseParams params;
  params.hysteresis = 2;
  std::vector<TraceRecord> trace = {
      row(1, 0.9, 0.1), row(2, 0.5, 0.9), row(3, 0.9, 0.1),
      row(4, 0.5, 0.9), row(5, 0.4, 0.9),
  };
  auto phases = classify_phases(trace, 6.0, params);
  REQUIRE(phases.size() == 3);
  CHECK(phases[1].phase == Phase::kMiddle);
  CHECK(phases[1].start == 1.0);
  CHECK(phases[1].end == 4.0);
  CHECK(phases[2].phase == Phase::kCooldown);
}

TEST_CASE("phase boundaries use the conjunction of both signals") {
  // Saturated but cache-warm ticks never open the middle phase.
  std::vector<TraceRecord> trace = {row(1, 0.95, 0.9), row(2, 0.99, 0.95)};
  auto phases = classify_phases(trace, 3.0, PhaseParams{});
  REQUIRE(phases.size() == 1);
  CHECK(phases[0].phase == Phase::kWarmup);
  // Cache-cold but unsaturated ticks do not either.
  trace = {row(1, 0.3, 0.1), row(2, 0.4, 0.2)};
  phases = classify_phases(trace, 3.0, PhaseParams{});
  REQUIRE(phases.size() == 1);
  CHECK(phases[0].phase == Phase::kWarmup);
}

TEST_CASE("an empty run classifies to nothing") {
  CHECK(classify_phases({}, 0.0, PhaseParams{}).empty());
}

TEST_CASE("trace files round trip exactly") {
  std::vector<TraceRecord> trace;
  for (int i = 1; i <= 40; ++i)
    trace.push_back(row(i * 0.25, (i % 10) / 10.0, (i % 7) / 7.0));
  trace[5].decoded_cum = 123456789;
  trace[6].window = 2.71828;
  std::string path = temp_path("kvadmit_trace_roundtrip.csv");
  export_trace(trace, path);
  auto back = import_trace(path);
  REQUIRE(back.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(back[i].time == doctest::Approx(trace[i].time).epsilon(1e-6));
    CHECK(back[i].active == trace[i].active);
    CHECK(back[i].decoded_cum == trace[i].decoded_cum);
    CHECK(back[i].transfers == trace[i].transfers);
  }
  // A re-export of the imported trace is byte-identical.
  std::string path2 = temp_path("kvadmit_trace_roundtrip2.csv");
  export_trace(back, path2);
  auto again = import_trace(path2);
  REQUIRE(again.size() == back.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(again[i] == back[i]);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("trace import rejects malformed files") {
  std::string path = temp_path("kvadmit_trace_bad.csv");
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("wrong,header\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(import_trace(path), IoError);
  CHECK_THROWS_AS(import_trace(temp_path("kvadmit_missing.csv")), IoError);
  std::remove(path.c_str());
}

TEST_CASE("summaries export key-value lines and read back") {
  Summary s;
  s.name = "smoke";
  s.policy = "aimd";
  s.seed = 42;
  s.agents = 3;
  s.makespan = 12.5;
  s.throughput = 480.0;
  s.decoded_tokens = 6000;
  s.recompute_tokens = 0;
  s.mean_hit_rate = 0.875;
  s.ledger.prefill_fresh = 2.5;
  s.workload_hash = 0xdeadbeefcafe1234ULL;
  std::string path = temp_path("kvadmit_summary.txt");
  export_summary(s, path);
  auto kv = import_summary(path);
  CHECK(kv.at("name") == "smoke");
  CHECK(kv.at("policy") == "aimd");
  CHECK(kv.at("seed") == "42");
  CHECK(kv.at("makespan") == "12.5");
  CHECK(kv.at("mean_hit_rate") == "0.875");
  CHECK(kv.at("prefill_fresh_time") == "2.5");
  CHECK(kv.at("workload_hash") == "0xdeadbeefcafe1234");
  CHECK(kv.count("middle_fraction") == 1);
  CHECK(kv.count("tool_wait_time") == 1);
  std::remove(path.c_str());
}

TEST_CASE("comparison tables report speedup against the named baseline") {
  Summary base;
  base.makespan = 100.0;
  base.mean_hit_rate = 0.3;
  Summary fast;
  fast.makespan = 40.0;
  fast.mean_hit_rate = 0.8;
  std::vector<std::pair<std::string, Summary>> runs = {
      {"uncontrolled", base}, {"aimd", fast}};
  std::string table = render_comparison(runs, "uncontrolled");
  CHECK(table.find("uncontrolled") != std::string::npos);
  CHECK(table.find("1.00x") != std::string::npos);
  CHECK(table.find("2.50x") != std::string::npos);
  CHECK(table.find("makespan_s") != std::string::npos);
  CHECK_THROWS_AS(render_comparison(runs, "nope"), MissingBaseline);
}

TEST_CASE("sweep tables carry one row per grid value") {
  Summary a;
  a.makespan = 10;
  Summary b;
  b.makespan = 20;
  std::vector<std::pair<std::string, Summary>> runs = {{"4", a}, {"8", b}};
  std::string table = render_sweep("capacity", runs);
  CHECK(table.find("capacity") != std::string::npos);
  CHECK(table.find("\n4") != std::string::npos);
  CHECK(table.find("\n8") != std::string::npos);
}

TEST_CASE("compact float formatting uses six significant digits") {
  CHECK(format_g6(0.25) == "0.25");
  CHECK(format_g6(1.0436608) == "1.04366");
  CHECK(format_g6(0.0) == "0");
  CHECK(format_g6(1e-9) == "1e-09");
  CHECK(format_g6(123456789.0) == "1.23457e+08");
}

TEST_CASE("phase parameter validation") {
  PhaseParams p;
  p.sat_threshold = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = PhaseParams{};
  p.hysteresis = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_NOTHROW(PhaseParams{}.validate());
}

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
#include "experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "metrics.hpp"

using namespace kvadmit;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "missing file: ", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Fresh scratch directory per test, removed on destruction.
struct Scratch {
  fs::path root;
  explicit Scratch(const char* tag) {
    static int counter = 0;
    root = fs::temp_directory_path() /
           ("kvadmit-exp-" + std::to_string(::getpid()) + "-" + tag + "-" +
            std::to_string(counter++));
    fs::remove_all(root);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string str() const { return root.string(); }
};

const char* kSmallScenario = R"(
name = "tiny"
seed = 11
policy = "uncontrolled"

[workload]
agents = 4
shared_prompt = true
prompt_tokens = 8
steps = 3
gen_tokens = 8
obs_tokens = 4
tool_latency = 0.02
tool_probability = 1.0

[cache]
capacity = 512
page_size = 1

[cost]
prefill_linear = 1e-4
prefill_quadratic = 1e-7
decode_base = 1e-3
decode_context = 1e-8
bytes_per_token = 1e6
pcie_bandwidth = 1e9
transfer_sync_overhead = 0.01

[controller]
control_interval = 0.05
)";

ScenarioConfig small_scenario() {
  ScenarioConfig cfg = parse_scenario(kSmallScenario, "test.toml");
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_CASE("run_command writes the full artifact set") {
  Scratch tmp("run");
  ScenarioConfig cfg = small_scenario();
  std::string text = run_command(cfg, tmp.str());

  CHECK(text.find("makespan") != std::string::npos);
  std::string dir = tmp.str() + "/tiny";
  CHECK(fs::exists(dir + "/trace.csv"));
  CHECK(fs::exists(dir + "/phases.csv"));
  CHECK(fs::exists(dir + "/manifest.json"));

  Summary s = parse_summary(import_summary(dir + "/summary.txt"));
  CHECK(s.name == "tiny");
  CHECK(s.policy == "uncontrolled");
  CHECK(s.seed == 11);
  CHECK(s.agents == 4);
  CHECK(s.makespan > 0.0);
  CHECK(s.decoded_tokens == 4 * 3 * 8);

  // report on a run directory reproduces the stored summary verbatim.
  CHECK(report_command(dir) == read_file(dir + "/summary.txt"));
}

TEST_CASE("identical run invocations produce byte-identical artifacts") {
  Scratch tmp("det");
  ScenarioConfig cfg = small_scenario();
  run_command(cfg, tmp.str() + "/a");
  run_command(cfg, tmp.str() + "/b");
  CHECK(read_file(tmp.str() + "/a/tiny/trace.csv") ==
        read_file(tmp.str() + "/b/tiny/trace.csv"));
  CHECK(read_file(tmp.str() + "/a/tiny/summary.txt") ==
        read_file(tmp.str() + "/b/tiny/summary.txt"));
  CHECK(read_file(tmp.str() + "/a/tiny/manifest.json") ==
        read_file(tmp.str() + "/b/tiny/manifest.json"));
}

TEST_CASE("compare runs every row on one replayed workload") {
  Scratch tmp("cmp");
  ScenarioConfig cfg = small_scenario();
  apply_override(cfg, "compare.baseline=\"uncontrolled\"");
  apply_override(cfg,
                 "compare.policies=[\"uncontrolled\", \"agent_cap:2\", \"offload\"]");
  cfg.validate();

  std::string table = compare_command(cfg, tmp.str(), 2);
  std::string dir = tmp.str() + "/tiny-compare";
  CHECK(fs::exists(dir + "/01-uncontrolled/summary.txt"));
  CHECK(fs::exists(dir + "/02-uncontrolled/summary.txt"));
  CHECK(fs::exists(dir + "/03-agent_cap_2/summary.txt"));
  CHECK(fs::exists(dir + "/04-offload/summary.txt"));

  // The duplicated baseline policy replays to the same makespan.
  CHECK(table.find("1.00x") != std::string::npos);

  Summary a = parse_summary(import_summary(dir + "/01-uncontrolled/summary.txt"));
  Summary b = parse_summary(import_summary(dir + "/02-uncontrolled/summary.txt"));
  CHECK(a.makespan == b.makespan);
  CHECK(a.workload_hash == b.workload_hash);

  Summary off = parse_summary(import_summary(dir + "/04-offload/summary.txt"));
  CHECK(off.policy == "offload");
  CHECK(off.workload_hash == a.workload_hash);

  // report re-renders the identical table from disk.
  CHECK(report_command(dir) == table);
  CHECK(read_file(dir + "/table.txt") == table);
}

TEST_CASE("compare without a compare section fails before writing") {
  Scratch tmp("cmp-bad");
  ScenarioConfig cfg = small_scenario();
  CHECK_THROWS_AS(compare_command(cfg, tmp.str(), 1), ConfigError);
  CHECK_FALSE(fs::exists(tmp.root));
}

TEST_CASE("fixed_cap sweep adds the adaptive reference row") {
  Scratch tmp("sweep");
  ScenarioConfig cfg = small_scenario();
  apply_override(cfg, "sweep.axis=\"fixed_cap\"");
  apply_override(cfg, "sweep.values=[1, 2, 4]");
  cfg.validate();

  std::string table = sweep_command(cfg, tmp.str(), 3);
  std::string dir = tmp.str() + "/tiny-sweep-fixed_cap";
  CHECK(fs::exists(dir + "/cap_1/summary.txt"));
  CHECK(fs::exists(dir + "/cap_2/summary.txt"));
  CHECK(fs::exists(dir + "/cap_4/summary.txt"));
  CHECK(fs::exists(dir + "/aimd/summary.txt"));
  CHECK(table.find("cap=1") != std::string::npos);
  CHECK(table.find("aimd") != std::string::npos);
  CHECK(report_command(dir) == table);

  Summary cap1 = parse_summary(import_summary(dir + "/cap_1/summary.txt"));
  Summary cap4 = parse_summary(import_summary(dir + "/cap_4/summary.txt"));
  CHECK(cap1.policy == "agent_cap:1");
  // With ample cache, more concurrency can only help this workload.
  CHECK(cap4.makespan <= cap1.makespan);
}

TEST_CASE("threshold sweeps adjust the controller per row") {
  Scratch tmp("sweep-u");
  ScenarioConfig cfg = small_scenario();
  apply_override(cfg, "sweep.axis=\"u_low\"");
  apply_override(cfg, "sweep.values=[0.1, 0.5]");
  cfg.validate();

  sweep_command(cfg, tmp.str(), 1);
  std::string dir = tmp.str() + "/tiny-sweep-u_low";
  CHECK(fs::exists(dir + "/u_low_0.1/summary.txt"));
  CHECK(fs::exists(dir + "/u_low_0.5/summary.txt"));
  Summary s = parse_summary(import_summary(dir + "/u_low_0.1/summary.txt"));
  CHECK(s.policy == "aimd");
}

TEST_CASE("horizon aborts preserve the partial trace") {
  Scratch tmp("abort");
  ScenarioConfig cfg = small_scenario();
  // A single agent's full context cannot fit: the run can never finish.
  apply_override(cfg, "cache.capacity=16");
  apply_override(cfg, "horizon=5.0");
  cfg.validate();

  CHECK_THROWS_AS(run_command(cfg, tmp.str()), HorizonError);
  std::string dir = tmp.str() + "/tiny";
  CHECK(fs::exists(dir + "/trace.csv"));
  CHECK(fs::exists(dir + "/summary.txt"));
  CHECK(read_file(dir + "/manifest.json").find("run-aborted") !=
        std::string::npos);
}

TEST_CASE("offload rows run uncontrolled admission with host offload") {
  ScenarioConfig cfg = small_scenario();
  ResolvedRun rr = resolve_run(cfg, "offload");
  CHECK(rr.policy.kind == PolicyKind::kUncontrolled);
  CHECK(rr.engine.eviction == EvictionMode::kOffload);
  ResolvedRun plain = resolve_run(cfg, "agent_cap:3");
  CHECK(plain.policy.kind == PolicyKind::kFixedAgentCap);
  CHECK(plain.policy.cap == 3);
  CHECK(plain.engine.eviction == EvictionMode::kDiscard);
}

TEST_CASE("summary export and parse round-trip byte-identically") {
  Scratch tmp("round");
  fs::create_directories(tmp.root);
  ScenarioConfig cfg = small_scenario();
  Summary s1 = execute_run(cfg, "aimd", tmp.str());
  std::string first = read_file(tmp.str() + "/summary.txt");
  Summary s2 = parse_summary(import_summary(tmp.str() + "/summary.txt"));
  export_summary(s2, tmp.str() + "/summary2.txt");
  CHECK(read_file(tmp.str() + "/summary2.txt") == first);
  CHECK(s2.makespan == doctest::Approx(s1.makespan).epsilon(1e-9));
}

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

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "metrics.hpp"
#include "workload.hpp"

namespace kvadmit {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, h);
  return buf;
}

void make_dirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path);
}

std::string sanitize_label(const std::string& label) {
  std::string out;
  for (char c : label) out.push_back(c == ':' || c == '=' ? '_' : c);
  return out;
}

struct Row {
  std::string label;
  std::string policy_text;
  ScenarioConfig cfg;  // per-row overrides applied (sweep thresholds)
  std::string dir;     // absolute or out_root-relative artifact dir
  std::string rel;     // manifest-relative subdirectory name
  Summary summary;
};

// Runs every row, in parallel when jobs > 1. Rows are isolated: each owns
// its config, population, and artifact directory. The first failure (in
// row order) propagates after all workers stop.
void run_rows(std::vector<Row>& rows, unsigned jobs) {
  for (Row& row : rows) make_dirs(row.dir);
  std::size_t n = rows.size();
  unsigned workers = jobs < 1 ? 1 : jobs;
  if (workers > n) workers = static_cast<unsigned>(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        rows[i].summary =
            execute_run(rows[i].cfg, rows[i].policy_text, rows[i].dir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
  for (const Row& row : rows)
    if (row.summary.workload_hash != rows.front().summary.workload_hash)
      throw InvariantViolation("workload replay diverged: run " + row.label +
                               " consumed a different action stream");
}

void write_manifest(const std::string& dir, const std::string& command,
                    const ScenarioConfig& cfg, const std::string& extra_key,
                    const std::string& extra_value,
                    const std::vector<Row>& rows) {
  Json m;
  m["command"] = command;
  m["scenario"] = cfg.name;
  m["seed"] = cfg.seed;
  if (!extra_key.empty()) m[extra_key] = extra_value;
  m["rows"] = Json::array();
  for (const Row& row : rows) {
    Json r;
    r["label"] = row.label;
    r["policy"] = row.policy_text;
    r["dir"] = row.rel;
    r["workload_hash"] = hash_hex(row.summary.workload_hash);
    m["rows"].push_back(std::move(r));
  }
  write_text(dir + "/manifest.json", m.dump(2) + "\n");
}

std::vector<std::pair<std::string, Summary>> table_rows(
    const std::vector<Row>& rows) {
  std::vector<std::pair<std::string, Summary>> out;
  out.reserve(rows.size());
  for (const Row& row : rows) out.emplace_back(row.label, row.summary);
  return out;
}

std::string axis_assignment(const std::string& axis, double value) {
  return axis + "=" + format_g6(value);
}

}  // namespace

ResolvedRun resolve_run(const ScenarioConfig& cfg,
                        const std::string& policy_text) {
  ResolvedRun r;
  r.label = policy_text;
  r.engine = cfg.engine;
  if (policy_text == "offload") {
    r.policy = parse_policy("uncontrolled", cfg.controller);
    r.engine.eviction = EvictionMode::kOffload;
  } else {
    r.policy = parse_policy(policy_text, cfg.controller);
  }
  return r;
}

Summary execute_run(const ScenarioConfig& cfg, const std::string& policy_text,
                    const std::string& dir) {
  ResolvedRun rr = resolve_run(cfg, policy_text);
  Population pop = build_population(cfg.workload, cfg.seed);
  auto finalize = [&](const SimulationResult& result) {
    Summary s = summarize(result, cfg.name, rr.policy, cfg.seed,
                          cfg.workload.agents);
    s.policy = rr.label;
    export_trace(result.trace, dir + "/trace.csv");
    export_summary(s, dir + "/summary.txt");
    export_phases(result.phases, dir + "/phases.csv");
    return s;
  };
  SimulationResult partial;
  try {
    SimulationResult result =
        run_simulation(std::move(pop), rr.policy, cfg.cost, rr.engine,
                       &partial);
    return finalize(result);
  } catch (const HorizonError&) {
    finalize(partial);
    throw;
  }
}

std::string run_command(const ScenarioConfig& cfg,
                        const std::string& out_root) {
  std::vector<Row> rows(1);
  rows[0].label = cfg.policy;
  rows[0].policy_text = cfg.policy;
  rows[0].cfg = cfg;
  rows[0].rel = ".";
  rows[0].dir = out_root + "/" + cfg.name;
  std::string dir = rows[0].dir;
  try {
    run_rows(rows, 1);
  } catch (const HorizonError&) {
    // Partial artifacts are already on disk; the manifest marks the abort.
    write_manifest(dir, "run-aborted", cfg, "", "", {});
    throw;
  }
  write_manifest(dir, "run", cfg, "", "", rows);

  const Summary& s = rows[0].summary;
  std::string out;
  out += "run " + cfg.name + " policy=" + s.policy +
         " seed=" + std::to_string(cfg.seed) + "\n";
  out += "  makespan " + format_g6(s.makespan) + " s, throughput " +
         format_g6(s.throughput) + " tok/s\n";
  out += "  hit rate " + format_g6(s.mean_hit_rate) + ", recompute fraction " +
         format_g6(s.recompute_fraction) + ", middle fraction " +
         format_g6(s.middle_fraction) + "\n";
  out += "  artifacts in " + dir + "\n";
  return out;
}

std::string compare_command(const ScenarioConfig& cfg,
                            const std::string& out_root, unsigned jobs) {
  if (!cfg.compare)
    throw ConfigError("compare needs a [compare] section with a baseline");
  if (cfg.compare->policies.empty())
    throw ConfigError("compare.policies lists no policies");

  std::vector<std::string> texts;
  texts.push_back(cfg.compare->baseline);
  for (const std::string& p : cfg.compare->policies) texts.push_back(p);

  std::string dir = out_root + "/" + cfg.name + "-compare";
  std::vector<Row> rows(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    char prefix[32];
    std::snprintf(prefix, sizeof(prefix), "%02zu-", i + 1);
    rows[i].label = texts[i];
    rows[i].policy_text = texts[i];
    rows[i].cfg = cfg;
    rows[i].rel = prefix + sanitize_label(texts[i]);
    rows[i].dir = dir + "/" + rows[i].rel;
  }
  run_rows(rows, jobs);
  write_manifest(dir, "compare", cfg, "baseline", cfg.compare->baseline, rows);
  std::string table = render_comparison(table_rows(rows), rows[0].label);
  write_text(dir + "/table.txt", table);
  return table;
}

std::string sweep_command(const ScenarioConfig& cfg,
                          const std::string& out_root, unsigned jobs) {
  if (!cfg.sweep) throw ConfigError("sweep needs a [sweep] section");
  const SweepConfig& sw = *cfg.sweep;

  std::string dir = out_root + "/" + cfg.name + "-sweep-" + sw.axis;
  std::vector<Row> rows;
  rows.reserve(sw.values.size() + 1);
  for (double v : sw.values) {
    Row row;
    row.cfg = cfg;
    if (sw.axis == "fixed_cap") {
      row.label = axis_assignment("cap", v);
      row.policy_text =
          "agent_cap:" + std::to_string(static_cast<std::uint64_t>(v));
    } else {
      row.label = axis_assignment(sw.axis, v);
      row.policy_text = "aimd";
      if (sw.axis == "u_low") {
        row.cfg.controller.u_low = v;
      } else {
        row.cfg.controller.u_high = v;
      }
      row.cfg.controller.validate();
    }
    rows.push_back(std::move(row));
  }
  // Adaptive reference row at the configured thresholds.
  Row ref;
  ref.cfg = cfg;
  ref.label = "aimd";
  ref.policy_text = "aimd";
  rows.push_back(std::move(ref));

  for (Row& row : rows) {
    row.rel = sanitize_label(row.label);
    row.dir = dir + "/" + row.rel;
  }
  run_rows(rows, jobs);
  write_manifest(dir, "sweep", cfg, "axis", sw.axis, rows);
  std::string table = render_sweep(sw.axis, table_rows(rows));
  write_text(dir + "/table.txt", table);
  return table;
}

std::string report_command(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json", std::ios::binary);
  if (!in) throw IoError("no manifest.json in " + dir);
  Json m;
  try {
    in >> m;
  } catch (const std::exception& e) {
    throw IoError("bad manifest in " + dir + ": " + e.what());
  }
  std::string command = m.value("command", "");
  std::vector<std::pair<std::string, Summary>> rows;
  for (const Json& r : m.value("rows", Json::array())) {
    std::string label = r.value("label", "");
    std::string rel = r.value("dir", "");
    Summary s = parse_summary(import_summary(dir + "/" + rel + "/summary.txt"));
    rows.emplace_back(label, s);
  }
  if (command == "run") {
    if (rows.empty()) throw IoError("manifest lists no runs");
    std::ifstream sf(dir + "/" + m["rows"][0].value("dir", "") +
                     "/summary.txt");
    std::ostringstream buf;
    buf << sf.rdbuf();
    return buf.str();
  }
  if (command == "compare") {
    if (!m.contains("baseline"))
      throw MissingBaseline("compare manifest names no baseline");
    return render_comparison(rows, m["baseline"].get<std::string>());
  }
  if (command == "sweep") {
    return render_sweep(m.value("axis", "value"), rows);
  }
  throw IoError("manifest has unknown command '" + command + "'");
}

}  // namespace kvadmit

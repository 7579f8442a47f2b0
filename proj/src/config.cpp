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
#include "config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace kvadmit {
namespace {

struct TomlValue {
  enum class Kind : std::uint8_t {
    kString,
    kInt,
    kFloat,
    kBool,
    kArray,
    kTable
  };
  Kind kind = Kind::kString;
  std::string str;
  long long integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<TomlValue> array;
  std::vector<std::pair<std::string, TomlValue>> table;
};

const char* kind_name(TomlValue::Kind k) {
  switch (k) {
    case TomlValue::Kind::kString: return "string";
    case TomlValue::Kind::kInt: return "integer";
    case TomlValue::Kind::kFloat: return "float";
    case TomlValue::Kind::kBool: return "boolean";
    case TomlValue::Kind::kArray: return "array";
    case TomlValue::Kind::kTable: return "table";
  }
  return "value";
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

// Cursor over one value expression.
struct Scanner {
  const std::string& text;
  std::size_t pos = 0;
  const std::string& where;

  bool done() const { return pos >= text.size(); }
  char peek() const { return done() ? '\0' : text[pos]; }
  void skip_ws() {
    while (!done() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
};

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string scan_bare_key(Scanner& s) {
  s.skip_ws();
  std::size_t start = s.pos;
  while (!s.done() && is_bare_key_char(s.peek())) ++s.pos;
  if (s.pos == start) fail(s.where, "expected a key");
  return s.text.substr(start, s.pos - start);
}

TomlValue scan_value(Scanner& s);

TomlValue scan_string(Scanner& s) {
  TomlValue v;
  v.kind = TomlValue::Kind::kString;
  ++s.pos;  // opening quote
  while (!s.done() && s.peek() != '"') {
    char c = s.peek();
    if (c == '\\') {
      ++s.pos;
      char esc = s.peek();
      if (esc == '"' || esc == '\\') {
        v.str.push_back(esc);
        ++s.pos;
      } else {
        fail(s.where, "unsupported escape in string");
      }
    } else {
      v.str.push_back(c);
      ++s.pos;
    }
  }
  if (s.done()) fail(s.where, "unterminated string");
  ++s.pos;  // closing quote
  return v;
}

TomlValue scan_number(Scanner& s) {
  std::size_t start = s.pos;
  bool is_float = false;
  if (s.peek() == '+' || s.peek() == '-') ++s.pos;
  while (!s.done()) {
    char c = s.peek();
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ++s.pos;
    } else if (c == '.' || c == 'e' || c == 'E') {
      is_float = true;
      ++s.pos;
      if ((c == 'e' || c == 'E') && (s.peek() == '+' || s.peek() == '-'))
        ++s.pos;
    } else {
      break;
    }
  }
  std::string tok = s.text.substr(start, s.pos - start);
  TomlValue v;
  errno = 0;
  char* end = nullptr;
  if (is_float) {
    v.kind = TomlValue::Kind::kFloat;
    v.real = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || errno == ERANGE ||
        !std::isfinite(v.real))
      fail(s.where, "bad number '" + tok + "'");
  } else {
    v.kind = TomlValue::Kind::kInt;
    v.integer = std::strtoll(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size() || errno == ERANGE)
      fail(s.where, "bad integer '" + tok + "'");
    v.real = static_cast<double>(v.integer);
  }
  return v;
}

TomlValue scan_array(Scanner& s) {
  TomlValue v;
  v.kind = TomlValue::Kind::kArray;
  ++s.pos;  // '['
  s.skip_ws();
  while (!s.done() && s.peek() != ']') {
    v.array.push_back(scan_value(s));
    s.skip_ws();
    if (s.peek() == ',') {
      ++s.pos;
      s.skip_ws();
    } else if (!s.done() && s.peek() != ']') {
      fail(s.where, "expected ',' or ']' in array");
    }
  }
  if (s.done()) fail(s.where, "unterminated array");
  ++s.pos;  // ']'
  return v;
}

TomlValue scan_table(Scanner& s) {
  TomlValue v;
  v.kind = TomlValue::Kind::kTable;
  ++s.pos;  // '{'
  s.skip_ws();
  while (!s.done() && s.peek() != '}') {
    std::string key = scan_bare_key(s);
    s.skip_ws();
    if (s.peek() != '=') fail(s.where, "expected '=' in inline table");
    ++s.pos;
    s.skip_ws();
    v.table.emplace_back(key, scan_value(s));
    s.skip_ws();
    if (s.peek() == ',') {
      ++s.pos;
      s.skip_ws();
    } else if (!s.done() && s.peek() != '}') {
      fail(s.where, "expected ',' or '}' in inline table");
    }
  }
  if (s.done()) fail(s.where, "unterminated inline table");
  ++s.pos;  // '}'
  return v;
}

TomlValue scan_value(Scanner& s) {
  s.skip_ws();
  if (s.done()) fail(s.where, "missing value");
  char c = s.peek();
  if (c == '"') return scan_string(s);
  if (c == '[') return scan_array(s);
  if (c == '{') return scan_table(s);
  if (c == 't' || c == 'f') {
    TomlValue v;
    v.kind = TomlValue::Kind::kBool;
    if (s.text.compare(s.pos, 4, "true") == 0) {
      v.boolean = true;
      s.pos += 4;
    } else if (s.text.compare(s.pos, 5, "false") == 0) {
      v.boolean = false;
      s.pos += 5;
    } else {
      fail(s.where, "expected true or false");
    }
    return v;
  }
  if (c == '+' || c == '-' || std::isdigit(static_cast<unsigned char>(c)))
    return scan_number(s);
  fail(s.where, "cannot parse value");
}

// Strips a trailing comment, honoring quotes.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '\\' && in_string) {
      ++i;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Entries = std::vector<std::pair<std::string, TomlValue>>;

// section name -> ordered key/value pairs; "" is the top level.
std::map<std::string, Entries> parse_document(const std::string& text,
                                              const std::string& origin) {
  std::map<std::string, Entries> doc;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string where = origin + ":" + std::to_string(lineno);
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(where, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(where, "empty section name");
      for (char c : section)
        if (!is_bare_key_char(c)) fail(where, "bad section name");
      doc[section];
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(where, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    for (char c : key)
      if (!is_bare_key_char(c)) fail(where, "bad key '" + key + "'");
    if (key.empty()) fail(where, "missing key");
    std::string rest = line.substr(eq + 1);
    Scanner s{rest, 0, where};
    TomlValue v = scan_value(s);
    s.skip_ws();
    if (!s.done()) fail(where, "trailing characters after value");
    for (const auto& kv : doc[section])
      if (kv.first == key) fail(where, "duplicate key '" + key + "'");
    doc[section].emplace_back(key, std::move(v));
  }
  return doc;
}

std::string dotted(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

double as_double(const TomlValue& v, const std::string& path) {
  if (v.kind != TomlValue::Kind::kFloat && v.kind != TomlValue::Kind::kInt)
    fail(path, std::string("expected a number, got ") + kind_name(v.kind));
  return v.real;
}

std::uint64_t as_uint(const TomlValue& v, const std::string& path) {
  if (v.kind != TomlValue::Kind::kInt)
    fail(path, std::string("expected an integer, got ") + kind_name(v.kind));
  if (v.integer < 0) fail(path, "must not be negative");
  return static_cast<std::uint64_t>(v.integer);
}

bool as_bool(const TomlValue& v, const std::string& path) {
  if (v.kind != TomlValue::Kind::kBool)
    fail(path, std::string("expected a boolean, got ") + kind_name(v.kind));
  return v.boolean;
}

std::string as_string(const TomlValue& v, const std::string& path) {
  if (v.kind != TomlValue::Kind::kString)
    fail(path, std::string("expected a string, got ") + kind_name(v.kind));
  return v.str;
}

// A bare number is shorthand for a constant distribution.
Distribution as_distribution(const TomlValue& v, const std::string& path) {
  Distribution d;
  if (v.kind == TomlValue::Kind::kInt || v.kind == TomlValue::Kind::kFloat) {
    d.kind = Distribution::Kind::kConstant;
    d.a = v.real;
    return d;
  }
  if (v.kind != TomlValue::Kind::kTable)
    fail(path, "expected a number or {dist=...} table");
  std::string dist;
  std::map<std::string, double> args;
  for (const auto& [k, val] : v.table) {
    if (k == "dist") {
      dist = as_string(val, path + "." + k);
    } else if (k == "value" || k == "min" || k == "max" || k == "mean" ||
               k == "sigma") {
      if (args.count(k)) fail(path, "duplicate field '" + k + "'");
      args[k] = as_double(val, path + "." + k);
    } else {
      fail(path, "unknown distribution field '" + k + "'");
    }
  }
  auto need = [&](const char* field) {
    auto it = args.find(field);
    if (it == args.end())
      fail(path, dist + " distribution needs '" + field + "'");
    double value = it->second;
    args.erase(it);
    return value;
  };
  if (dist == "constant") {
    d.kind = Distribution::Kind::kConstant;
    d.a = need("value");
  } else if (dist == "uniform") {
    d.kind = Distribution::Kind::kUniform;
    d.a = need("min");
    d.b = need("max");
  } else if (dist == "lognormal") {
    d.kind = Distribution::Kind::kLogNormal;
    d.a = need("mean");
    d.b = need("sigma");
  } else if (dist.empty()) {
    fail(path, "distribution table needs dist=");
  } else {
    fail(path, "unknown distribution '" + dist + "'");
  }
  if (!args.empty())
    fail(path, "field '" + args.begin()->first + "' does not apply to " + dist);
  return d;
}

std::uint32_t as_uint32(const TomlValue& v, const std::string& path) {
  std::uint64_t x = as_uint(v, path);
  if (x > 0xffffffffull) fail(path, "value too large");
  return static_cast<std::uint32_t>(x);
}

void bind_top(ScenarioConfig& cfg, const std::string& key, const TomlValue& v,
              const std::string& path) {
  if (key == "name") {
    cfg.name = as_string(v, path);
  } else if (key == "seed") {
    cfg.seed = as_uint(v, path);
  } else if (key == "policy") {
    cfg.policy = as_string(v, path);
  } else if (key == "horizon") {
    cfg.engine.horizon = as_double(v, path);
  } else if (key == "output_dir") {
    cfg.output_dir = as_string(v, path);
  } else {
    fail(path, "unknown key");
  }
}

void bind_workload(WorkloadConfig& w, const std::string& key,
                   const TomlValue& v, const std::string& path) {
  if (key == "agents") {
    w.agents = as_uint32(v, path);
  } else if (key == "shared_prompt") {
    w.shared_prompt = as_bool(v, path);
  } else if (key == "prompt_tokens") {
    w.prompt_tokens = as_uint(v, path);
  } else if (key == "steps") {
    w.steps = as_uint32(v, path);
  } else if (key == "gen_tokens") {
    w.gen_tokens = as_distribution(v, path);
  } else if (key == "obs_tokens") {
    w.obs_tokens = as_distribution(v, path);
  } else if (key == "tool_latency") {
    w.tool_latency = as_distribution(v, path);
  } else if (key == "tool_probability") {
    w.tool_probability = as_double(v, path);
  } else {
    fail(path, "unknown key");
  }
}

void bind_cache(EngineParams& e, const std::string& key, const TomlValue& v,
                const std::string& path) {
  if (key == "capacity") {
    e.capacity = as_uint(v, path);
  } else if (key == "page_size") {
    e.page_size = as_uint(v, path);
  } else if (key == "eviction") {
    std::string mode = as_string(v, path);
    if (mode == "discard") {
      e.eviction = EvictionMode::kDiscard;
    } else if (mode == "offload") {
      e.eviction = EvictionMode::kOffload;
    } else {
      fail(path, "must be \"discard\" or \"offload\"");
    }
  } else if (key == "hit_window_decay") {
    e.hit_window_decay = as_double(v, path);
  } else {
    fail(path, "unknown key");
  }
}

void bind_controller(ControllerConfig& c, const std::string& key,
                     const TomlValue& v, const std::string& path) {
  if (key == "alpha") {
    c.alpha = as_double(v, path);
  } else if (key == "beta") {
    c.beta = as_double(v, path);
  } else if (key == "u_low") {
    c.u_low = as_double(v, path);
  } else if (key == "u_high") {
    c.u_high = as_double(v, path);
  } else if (key == "h_thresh") {
    c.h_thresh = as_double(v, path);
  } else if (key == "w_min") {
    c.w_min = as_double(v, path);
  } else if (key == "w_max") {
    c.w_max = as_double(v, path);
  } else if (key == "initial_window") {
    c.initial_window = as_double(v, path);
  } else if (key == "control_interval") {
    c.control_interval = as_double(v, path);
  } else if (key == "signal_smoothing") {
    c.signal_smoothing = as_double(v, path);
  } else {
    fail(path, "unknown key");
  }
}

void bind_cost(ScenarioConfig& cfg, const std::string& key, const TomlValue& v,
               const std::string& path) {
  CostParams& c = cfg.cost;
  if (key == "prefill_linear") {
    c.prefill_linear = as_double(v, path);
  } else if (key == "prefill_quadratic") {
    c.prefill_quadratic = as_double(v, path);
  } else if (key == "decode_base") {
    c.decode_base = as_double(v, path);
  } else if (key == "decode_context") {
    c.decode_context = as_double(v, path);
  } else if (key == "bytes_per_token") {
    c.bytes_per_token = as_double(v, path);
  } else if (key == "pcie_bandwidth") {
    c.pcie_bandwidth = as_double(v, path);
  } else if (key == "transfer_sync_overhead") {
    c.transfer_sync_overhead = as_double(v, path);
  } else if (key == "crossover_concurrency") {
    cfg.crossover_concurrency = as_uint32(v, path);
  } else {
    fail(path, "unknown key");
  }
}

void bind_phases(PhaseParams& p, const std::string& key, const TomlValue& v,
                 const std::string& path) {
  if (key == "sat_threshold") {
    p.sat_threshold = as_double(v, path);
  } else if (key == "hit_threshold") {
    p.hit_threshold = as_double(v, path);
  } else if (key == "hysteresis") {
    p.hysteresis = static_cast<int>(as_uint(v, path));
  } else {
    fail(path, "unknown key");
  }
}

void bind_compare(ScenarioConfig& cfg, const std::string& key,
                  const TomlValue& v, const std::string& path) {
  if (!cfg.compare) cfg.compare.emplace();
  if (key == "baseline") {
    cfg.compare->baseline = as_string(v, path);
  } else if (key == "policies") {
    if (v.kind != TomlValue::Kind::kArray) fail(path, "expected an array");
    cfg.compare->policies.clear();
    for (std::size_t i = 0; i < v.array.size(); ++i)
      cfg.compare->policies.push_back(
          as_string(v.array[i], path + "[" + std::to_string(i) + "]"));
  } else {
    fail(path, "unknown key");
  }
}

void bind_sweep(ScenarioConfig& cfg, const std::string& key,
                const TomlValue& v, const std::string& path) {
  if (!cfg.sweep) cfg.sweep.emplace();
  if (key == "axis") {
    cfg.sweep->axis = as_string(v, path);
  } else if (key == "values") {
    if (v.kind != TomlValue::Kind::kArray) fail(path, "expected an array");
    cfg.sweep->values.clear();
    for (std::size_t i = 0; i < v.array.size(); ++i)
      cfg.sweep->values.push_back(
          as_double(v.array[i], path + "[" + std::to_string(i) + "]"));
  } else {
    fail(path, "unknown key");
  }
}

void bind_entry(ScenarioConfig& cfg, const std::string& section,
                const std::string& key, const TomlValue& v) {
  std::string path = dotted(section, key);
  if (section.empty()) {
    bind_top(cfg, key, v, path);
  } else if (section == "workload") {
    bind_workload(cfg.workload, key, v, path);
  } else if (section == "cache") {
    bind_cache(cfg.engine, key, v, path);
  } else if (section == "controller") {
    bind_controller(cfg.controller, key, v, path);
  } else if (section == "cost") {
    bind_cost(cfg, key, v, path);
  } else if (section == "phases") {
    bind_phases(cfg.engine.phase_params, key, v, path);
  } else if (section == "compare") {
    bind_compare(cfg, key, v, path);
  } else if (section == "sweep") {
    bind_sweep(cfg, key, v, path);
  } else {
    fail(section, "unknown section");
  }
}

}  // namespace

bool valid_policy_name(const std::string& text) {
  if (text == "offload") return true;
  try {
    parse_policy(text, ControllerConfig{});
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

void ScenarioConfig::validate() const {
  if (name.empty()) throw ConfigError("name must not be empty");
  for (char c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      throw ConfigError("name may use only letters, digits, '_' and '-'");
  workload.validate();
  engine.validate();
  controller.validate();
  cost.validate();
  if (!valid_policy_name(policy))
    throw ConfigError("unknown policy '" + policy + "'");
  if (compare) {
    if (!valid_policy_name(compare->baseline))
      throw ConfigError("compare.baseline: unknown policy '" +
                        compare->baseline + "'");
    for (const std::string& p : compare->policies)
      if (!valid_policy_name(p))
        throw ConfigError("compare.policies: unknown policy '" + p + "'");
  }
  if (sweep) {
    if (sweep->axis != "fixed_cap" && sweep->axis != "u_low" &&
        sweep->axis != "u_high")
      throw ConfigError("sweep.axis must be fixed_cap, u_low or u_high");
    if (sweep->values.empty()) throw ConfigError("sweep.values is empty");
    for (double v : sweep->values) {
      if (sweep->axis == "fixed_cap") {
        if (!(v >= 1) || v != std::floor(v))
          throw ConfigError("sweep.values: fixed_cap needs positive integers");
      } else if (!(v >= 0 && v <= 1)) {
        throw ConfigError("sweep.values: thresholds live in [0,1]");
      }
    }
  }
}

ScenarioConfig parse_scenario(const std::string& text,
                              const std::string& origin) {
  ScenarioConfig cfg;
  auto doc = parse_document(text, origin);
  for (const auto& [section, entries] : doc)
    for (const auto& [key, value] : entries)
      bind_entry(cfg, section, key, value);
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ScenarioConfig cfg = parse_scenario(buf.str(), path);
  cfg.validate();
  return cfg;
}

void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
  std::string where = "--set " + assignment;
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) fail(where, "expected key=value");
  std::string path = trim(assignment.substr(0, eq));
  std::string rest = assignment.substr(eq + 1);
  std::string section, key;
  std::size_t dot = path.find('.');
  if (dot == std::string::npos) {
    key = path;
  } else {
    section = path.substr(0, dot);
    key = path.substr(dot + 1);
  }
  if (key.empty() || key.find('.') != std::string::npos)
    fail(where, "key must be 'key' or 'section.key'");
  Scanner s{rest, 0, where};
  TomlValue v = scan_value(s);
  s.skip_ws();
  if (!s.done()) fail(where, "trailing characters after value");
  bind_entry(cfg, section, key, v);
}

}  // namespace kvadmit

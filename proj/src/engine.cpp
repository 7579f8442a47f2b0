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
#include "engine.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

namespace kvadmit {

void EngineParams::validate() const {
  if (capacity == 0) throw ConfigError("cache.capacity must be positive");
  if (page_size == 0) throw ConfigError("cache.page_size must be positive");
  if (!(hit_window_decay >= 0 && hit_window_decay < 1))
    throw ConfigError("cache.hit_window_decay must be in [0,1)");
  if (!(horizon > 0)) throw ConfigError("horizon must be positive");
  phase_params.validate();
}

namespace {

enum class EventKind : std::uint8_t {
  kGenerationComplete,
  kToolComplete,
  kTransferComplete,
  kControlTick,
  kAdmissionCheck,
};

// Completions sort before the control tick at the same instant, and the
// admission check runs last so it sees the post-tick window. The ordinal
// breaks remaining ties by scheduling order.
int event_rank(EventKind k) {
  switch (k) {
    case EventKind::kControlTick: return 1;
    case EventKind::kAdmissionCheck: return 2;
    default: return 0;
  }
}

struct Event {
  double time = 0.0;
  int rank = 0;
  std::uint64_t ordinal = 0;
  EventKind kind = EventKind::kAdmissionCheck;
  AgentId agent = 0;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.rank != b.rank) return a.rank > b.rank;
    return a.ordinal > b.ordinal;
  }
};

// Per-agent bookkeeping for the step currently in flight.
struct InFlight {
  std::uint64_t gen = 0;
  std::uint64_t recompute = 0;
  std::uint64_t pending_obs = 0;
  double tool_latency = 0.0;
  bool has_tool = false;
};

class Engine {
 public:
  Engine(Population&& population, const Policy& policy, const CostParams& cost,
         const EngineParams& params)
      : params_(params),
        cost_(cost),
        cache_(params.capacity, params.page_size, params.eviction),
        controller_(policy, static_cast<std::uint32_t>(population.agents.size())),
        shared_len_(population.shared_prompt_tokens),
        agents_(std::move(population.agents)),
        inflight_(agents_.size()) {
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (agents_[i].spec.id != i)
        throw InvariantViolation("population agent ids are not dense");
      controller_.add_pending(agents_[i].spec.id);
    }
    result_.workload_hash = population.stream_hash;
  }

  SimulationResult run() {
    schedule(0.0, EventKind::kAdmissionCheck, 0);
    admission_queued_ = true;
    admission_queued_at_ = 0.0;
    schedule(tick_interval(), EventKind::kControlTick, 0);
    while (!queue_.empty()) {
      Event e = queue_.top();
      queue_.pop();
      bool housekeeping = e.kind == EventKind::kControlTick ||
                          e.kind == EventKind::kAdmissionCheck;
      if (housekeeping && finished_ == agents_.size()) {
        if (e.kind == EventKind::kAdmissionCheck) admission_queued_ = false;
        continue;
      }
      if (e.time > params_.horizon) {
        if (partial_out_ != nullptr) *partial_out_ = finish_result();
        throw HorizonError("simulated time " + format_g6(e.time) +
                           " exceeded horizon " + format_g6(params_.horizon) +
                           " with " +
                           std::to_string(agents_.size() - finished_) +
                           " agents unfinished");
      }
      clock_ = e.time;
      switch (e.kind) {
        case EventKind::kGenerationComplete: on_generation_complete(e.agent); break;
        case EventKind::kToolComplete: on_tool_complete(e.agent); break;
        case EventKind::kTransferComplete: on_transfer_complete(e.agent); break;
        case EventKind::kControlTick: on_control_tick(); break;
        case EventKind::kAdmissionCheck: on_admission_check(); break;
      }
      if (params_.paranoid) {
        cache_.check_invariants();
        controller_.check_invariants();
      }
    }
    if (finished_ != agents_.size())
      throw InvariantViolation("event queue drained with unfinished agents");
    return finish_result();
  }

 private:
  double tick_interval() const {
    return controller_.policy().aimd.control_interval;
  }

  void schedule(double time, EventKind kind, AgentId agent) {
    queue_.push({time, event_rank(kind), ordinal_++, kind, agent});
  }

  // At most one admission check is queued at a time; every completion and
  // tick requests one at its own timestamp.
  void schedule_admission() {
    if (admission_queued_ && admission_queued_at_ == clock_) return;
    admission_queued_ = true;
    admission_queued_at_ = clock_;
    schedule(clock_, EventKind::kAdmissionCheck, 0);
  }

  std::size_t transfers_in_flight() {
    while (!transfer_ends_.empty() && *transfer_ends_.begin() <= clock_)
      transfer_ends_.erase(transfer_ends_.begin());
    return transfer_ends_.size();
  }

  // Queues one link transfer behind any outstanding ones. Duration fair
  // shares the link across everything in flight at enqueue time.
  double enqueue_transfer(double bytes) {
    std::size_t depth = transfers_in_flight() + 1;
    double dur = transfer_time(cost_, bytes, depth);
    double start = std::max(clock_, pcie_busy_until_);
    double end = start + dur;
    pcie_busy_until_ = end;
    result_.ledger.transfer += dur;
    result_.link_busy += dur;
    transfer_ends_.insert(end);
    return end;
  }

  // Offload-mode evictions push their pages over the link in the
  // background; the writes occupy bandwidth but block nobody.
  void account_evictions(const EvictStats& ev) {
    if (ev.offloaded_tokens > 0)
      enqueue_transfer(static_cast<double>(ev.offloaded_tokens) *
                       cost_.bytes_per_token);
  }

  void on_generation_complete(AgentId id) {
    AgentRecord& a = agents_[id];
    InFlight& f = inflight_[id];
    makespan_ = std::max(makespan_, clock_);
    if (a.pinned_len > 0) {
      cache_.unpin(a.context, a.pinned_len);
      a.pinned_len = 0;
    }
    decoded_cum_ += f.gen;
    recompute_cum_ += f.recompute;
    a.stats.generated_tokens += f.gen;
    a.stats.recompute_tokens += f.recompute;
    if (f.recompute > 0) ++a.stats.recompute_events;
    ++a.step_index;
    bool request_gated =
        controller_.policy().kind == PolicyKind::kFixedRequestCap;
    if (next_action(a).kind == NextAction::Kind::kComplete) {
      a.set_state(AgentState::kFinished);
      cache_.discard_suffix(a.context, shared_len_);
      if (request_gated)
        controller_.on_request_complete(id);
      else
        controller_.on_agent_finished(id);
      ++finished_;
    } else if (f.has_tool) {
      a.set_state(AgentState::kToolExecuting);
      result_.ledger.tool_wait += f.tool_latency;
      if (request_gated) controller_.on_request_complete(id);
      schedule(clock_ + f.tool_latency, EventKind::kToolComplete, id);
    } else {
      a.set_state(AgentState::kAwaitingAdmission);
      a.ready_since = clock_;
      if (request_gated) {
        controller_.on_request_complete(id);
        controller_.add_pending(id);
      }
    }
    schedule_admission();
  }

  void on_tool_complete(AgentId id) {
    AgentRecord& a = agents_[id];
    InFlight& f = inflight_[id];
    makespan_ = std::max(makespan_, clock_);
    a.append_tokens(f.pending_obs);
    f.pending_obs = 0;
    f.has_tool = false;
    a.set_state(AgentState::kAwaitingAdmission);
    a.ready_since = clock_;
    controller_.on_tool_return(id);
    schedule_admission();
  }

  void on_transfer_complete(AgentId id) {
    AgentRecord& a = agents_[id];
    makespan_ = std::max(makespan_, clock_);
    a.set_state(AgentState::kAwaitingAdmission);
    a.ready_since = clock_;
    schedule_admission();
  }

  void on_control_tick() {
    double usage = cache_.usage();
    double matched = cache_.hit_window_matched();
    double requested = cache_.hit_window_requested();
    double hit = requested > 0 ? matched / requested : 1.0;
    controller_.update_window({usage, hit});
    TraceRecord row;
    row.time = clock_;
    row.usage = usage;
    row.hit_rate = hit;
    row.window = controller_.display_window();
    row.active = controller_.active().size();
    row.pending = controller_.pending().size() + controller_.paused().size();
    row.decoded_cum = decoded_cum_;
    row.recompute_cum = recompute_cum_;
    row.transfers = transfers_in_flight();
    result_.trace.push_back(row);
    result_.tick_hits.push_back({matched, requested});
    cache_.decay_hit_window(params_.hit_window_decay);
    schedule(clock_ + tick_interval(), EventKind::kControlTick, 0);
    schedule_admission();
  }

  void on_admission_check() {
    admission_queued_ = false;
    auto cmds = controller_.admission_pass([this](AgentId id) {
      return agents_[id].state == AgentState::kAwaitingAdmission;
    });
    for (const AdmissionCommand& cmd : cmds) {
      AgentRecord& a = agents_[cmd.agent];
      switch (cmd.kind) {
        case AdmissionCommand::Kind::kPause:
          a.set_state(AgentState::kPaused);
          ++a.stats.pause_events;
          break;
        case AdmissionCommand::Kind::kAdmit:
          // Requeued request-gated agents are already at the boundary.
          if (a.state == AgentState::kPending)
            a.set_state(AgentState::kAwaitingAdmission);
          break;
        case AdmissionCommand::Kind::kResume:
          a.set_state(AgentState::kAwaitingAdmission);
          break;
      }
    }
    dispatch_batch();
  }

  struct Member {
    AgentId id = 0;
    double time = 0.0;
    double fresh_t = 0.0;
    double rec_t = 0.0;
    double dec_t = 0.0;
  };

  // Forms one engine batch from every admitted agent sitting at a step
  // boundary. The batch occupies the device for its slowest member's time;
  // members that cannot get cache space stall at the boundary and are
  // retried at the next check.
  void dispatch_batch() {
    std::vector<AgentId> ready;
    for (AgentId id : controller_.active())
      if (agents_[id].state == AgentState::kAwaitingAdmission)
        ready.push_back(id);
    std::sort(ready.begin(), ready.end());
    std::vector<Member> batch;
    for (AgentId id : ready) {
      Member m;
      if (dispatch_member(id, &m)) batch.push_back(m);
    }
    if (batch.empty()) return;
    double wall = 0.0;
    double total = 0.0;
    for (const Member& m : batch) {
      wall = std::max(wall, m.time);
      total += m.time;
    }
    double start = std::max(clock_, gpu_busy_until_);
    gpu_busy_until_ = start + wall;
    result_.device_busy += wall;
    double share = total > 0 ? wall / total : 0.0;
    for (const Member& m : batch) {
      result_.ledger.prefill_fresh += share * m.fresh_t;
      result_.ledger.prefill_recompute += share * m.rec_t;
      result_.ledger.decode += share * m.dec_t;
      schedule(start + wall, EventKind::kGenerationComplete, m.id);
    }
  }

  // Runs one agent's step admission. Returns true if the agent joined the
  // compute batch, false if it started a reload transfer or stalled.
  bool dispatch_member(AgentId id, Member* m) {
    AgentRecord& a = agents_[id];
    MatchResult mr = cache_.match_prefix(a.context);
    cache_.pin(a.context, mr.matched);
    if (a.pinned_len > 0) cache_.unpin(a.context, a.pinned_len);
    a.pinned_len = mr.matched;
    if (cache_.mode() == EvictionMode::kOffload && mr.host_matched > 0) {
      EvictStats ev;
      std::size_t promoted =
          cache_.reload(a.context, mr.matched, mr.host_matched, &ev);
      account_evictions(ev);
      if (promoted > 0) {
        cache_.pin(a.context, mr.matched + promoted);
        cache_.unpin(a.context, mr.matched);
        a.pinned_len = mr.matched + promoted;
        result_.reloaded_tokens += promoted;
        double end = enqueue_transfer(static_cast<double>(promoted) *
                                      cost_.bytes_per_token);
        a.stats.wait_time += clock_ - a.ready_since;
        a.set_state(AgentState::kGenerating);
        schedule(end, EventKind::kTransferComplete, id);
        return false;
      }
    }
    const StepPlan& plan = a.spec.steps[a.step_index];
    std::size_t ctx_len = a.context.size();
    a.append_tokens(plan.gen_tokens);
    InsertOutcome out = cache_.insert(a.context);
    account_evictions(out.evictions);
    if (!out.ok) {
      a.context.resize(ctx_len);
      a.token_counter -= plan.gen_tokens;
      cache_.unpin(a.context, mr.matched);
      a.pinned_len = 0;
      ++a.stats.stall_events;
      return false;
    }
    std::size_t stored = a.context.size() - a.context.size() % cache_.page_size();
    cache_.pin(a.context, stored);
    cache_.unpin(a.context, mr.matched);
    a.pinned_len = stored;
    std::size_t missing = ctx_len - mr.matched;
    std::size_t rec = a.high_water > mr.matched ? a.high_water - mr.matched : 0;
    std::size_t fresh = missing - rec;
    a.high_water = stored;
    m->id = id;
    m->fresh_t = prefill_time(cost_, fresh, ctx_len);
    m->rec_t = prefill_time(cost_, rec, ctx_len);
    m->dec_t = decode_time(cost_, plan.gen_tokens, ctx_len);
    m->time = m->fresh_t + m->rec_t + m->dec_t;
    InFlight& f = inflight_[id];
    f.gen = plan.gen_tokens;
    f.recompute = rec;
    f.has_tool = plan.has_tool;
    f.pending_obs = plan.obs_tokens;
    f.tool_latency = plan.tool_latency;
    a.stats.wait_time += clock_ - a.ready_since;
    a.set_state(AgentState::kGenerating);
    return true;
  }

  SimulationResult finish_result() {
    SimulationResult& r = result_;
    r.makespan = std::max(makespan_, pcie_busy_until_);
    r.decoded_tokens = decoded_cum_;
    r.recompute_tokens = recompute_cum_;
    r.offloaded_tokens = cache_.total_offloaded_tokens();
    r.discarded_tokens = cache_.total_discarded_tokens();
    r.ticks = r.trace.size();
    r.agent_stats.reserve(agents_.size());
    for (const AgentRecord& a : agents_) {
      r.recompute_events += a.stats.recompute_events;
      r.stall_events += a.stats.stall_events;
      r.total_wait_time += a.stats.wait_time;
      r.agent_stats.push_back(a.stats);
    }
    r.phases = classify_phases(r.trace, r.makespan, params_.phase_params);
    return std::move(r);
  }

  EngineParams params_;
  CostParams cost_;
  CacheTree cache_;
  Controller controller_;
  std::size_t shared_len_;
  std::vector<AgentRecord> agents_;
  std::vector<InFlight> inflight_;

  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  std::uint64_t ordinal_ = 0;
  double clock_ = 0.0;
  double gpu_busy_until_ = 0.0;
  double pcie_busy_until_ = 0.0;
  std::multiset<double> transfer_ends_;
  bool admission_queued_ = false;
  double admission_queued_at_ = -1.0;
  std::size_t finished_ = 0;
  double makespan_ = 0.0;
  std::uint64_t decoded_cum_ = 0;
  std::uint64_t recompute_cum_ = 0;
  SimulationResult result_;

 public:
  // Receives whatever was simulated before a horizon abort.
  SimulationResult* partial_out_ = nullptr;
};

}  // namespace

SimulationResult run_simulation(Population population, const Policy& policy,
                                const CostParams& cost,
                                const EngineParams& params,
                                SimulationResult* partial_on_abort) {
  params.validate();
  policy.validate();
  cost.validate();
  Engine engine(std::move(population), policy, cost, params);
  engine.partial_out_ = partial_on_abort;
  return engine.run();
}

Summary summarize(const SimulationResult& r, const std::string& name,
                  const Policy& policy, std::uint64_t seed,
                  std::uint32_t agents) {
  Summary s;
  s.name = name;
  s.policy = policy_name(policy);
  s.seed = seed;
  s.agents = agents;
  s.makespan = r.makespan;
  s.throughput = r.makespan > 0
                     ? static_cast<double>(r.decoded_tokens) / r.makespan
                     : 0.0;
  s.decoded_tokens = r.decoded_tokens;
  s.recompute_tokens = r.recompute_tokens;
  s.recompute_events = r.recompute_events;
  s.stall_events = r.stall_events;
  double work = r.ledger.prefill_fresh + r.ledger.prefill_recompute +
                r.ledger.decode + r.ledger.transfer;
  s.recompute_fraction = work > 0 ? r.ledger.prefill_recompute / work : 0.0;
  double matched = 0.0;
  double requested = 0.0;
  double usage_sum = 0.0;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    matched += r.tick_hits[i].matched;
    requested += r.tick_hits[i].requested;
    usage_sum += r.trace[i].usage;
  }
  s.mean_hit_rate = requested > 0 ? matched / requested : 1.0;
  s.mean_usage = r.trace.empty() ? 0.0 : usage_sum / r.trace.size();
  s.ledger = r.ledger;
  s.device_busy = r.device_busy;
  s.device_idle = r.makespan - r.device_busy;
  s.link_busy = r.link_busy;
  s.link_idle = r.makespan - r.link_busy;
  s.offloaded_tokens = r.offloaded_tokens;
  s.reloaded_tokens = r.reloaded_tokens;
  s.discarded_tokens = r.discarded_tokens;
  s.total_wait_time = r.total_wait_time;
  for (const PhaseLabel& p : r.phases) {
    double span = p.end - p.start;
    double ph_matched = 0.0;
    double ph_requested = 0.0;
    double ph_usage = 0.0;
    std::size_t ph_ticks = 0;
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      double t = r.trace[i].time;
      bool inside = t >= p.start && (t < p.end || p.end == r.makespan);
      if (!inside) continue;
      ph_matched += r.tick_hits[i].matched;
      ph_requested += r.tick_hits[i].requested;
      ph_usage += r.trace[i].usage;
      ++ph_ticks;
    }
    double rate = ph_requested > 0 ? ph_matched / ph_requested : 1.0;
    switch (p.phase) {
      case Phase::kWarmup:
        s.warmup_duration += span;
        s.warmup_hit_rate = rate;
        break;
      case Phase::kMiddle:
        s.middle_duration += span;
        s.middle_hit_rate = rate;
        s.middle_usage_mean = ph_ticks > 0 ? ph_usage / ph_ticks : 0.0;
        break;
      case Phase::kCooldown:
        s.cooldown_duration += span;
        s.cooldown_hit_rate = rate;
        break;
    }
  }
  s.middle_fraction = r.makespan > 0 ? s.middle_duration / r.makespan : 0.0;
  s.ticks = r.ticks;
  s.workload_hash = r.workload_hash;
  return s;
}

}  // namespace kvadmit

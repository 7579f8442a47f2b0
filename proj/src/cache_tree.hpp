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
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "errors.hpp"

namespace kvadmit {

using TokenId = std::uint64_t;

enum class Tier : std::uint8_t { kDevice, kHost };

enum class EvictionMode : std::uint8_t { kDiscard, kOffload };

// Fixed pool of device KV slots. One slot holds one page of tokens.
struct SlotPool {
  std::size_t capacity = 0;
  std::size_t used = 0;
  std::size_t free_slots() const { return capacity - used; }
};

struct CacheNode {
  std::vector<TokenId> segment;
  // Keyed by the child's first page (full contents, not just the leading
  // token): sibling pages that share a first token but differ inside the
  // page are distinct cache entries. Nothing is shared below a page.
  std::map<std::vector<TokenId>, std::unique_ptr<CacheNode>> children;
  CacheNode* parent = nullptr;
  std::uint64_t last_access = 0;
  std::uint64_t ordinal = 0;
  std::size_t device_slots = 0;
  int pin_count = 0;
  // Direct children whose subtree holds at least one device slot.
  int children_with_device = 0;
  Tier tier = Tier::kDevice;

  bool subtree_has_device() const {
    return device_slots > 0 || children_with_device > 0;
  }
};

struct MatchResult {
  // Device-resident matched prefix, in tokens (page aligned).
  std::size_t matched = 0;
  // Contiguous host-resident continuation immediately after the device
  // prefix, in tokens. Zero unless offloading has happened.
  std::size_t host_matched = 0;
};

struct EvictStats {
  std::size_t reclaimed_slots = 0;
  std::size_t offloaded_tokens = 0;
  std::size_t discarded_tokens = 0;

  void add(const EvictStats& o) {
    reclaimed_slots += o.reclaimed_slots;
    offloaded_tokens += o.offloaded_tokens;
    discarded_tokens += o.discarded_tokens;
  }
};

struct InsertOutcome {
  bool ok = false;
  // Slots newly allocated for this sequence (fresh pages plus host reloads).
  std::size_t inserted_slots = 0;
  EvictStats evictions;
};

// Prefix tree over token sequences with LRU eviction at the deepest
// unpinned device-resident boundary. Node timestamps refresh along the
// full root path on every match or insert, so eviction order is exactly
// the order a flat per-token LRU would produce.
class CacheTree {
 public:
  CacheTree(std::size_t capacity_slots, std::size_t page_size = 1,
            EvictionMode mode = EvictionMode::kDiscard);

  // Longest cached prefix of `tokens`. Refreshes the matched device path,
  // splitting the boundary node if the match ends inside it. Accumulates
  // the hit window (device-matched vs requested tokens).
  MatchResult match_prefix(std::span<const TokenId> tokens);

  // Caches `tokens` (floored to whole pages), evicting as needed. Host
  // nodes along the path are promoted back to device and their slots are
  // counted in inserted_slots. Returns ok=false without caching anything
  // when eviction cannot free enough slots; evictions performed while
  // trying are still reported.
  InsertOutcome insert(std::span<const TokenId> tokens);

  // Frees at least `needed` slots if possible, deepest-LRU first. In
  // kOffload mode victims move to the host tier; in kDiscard they are
  // dropped. Partial reclaim is possible when everything left is pinned.
  EvictStats evict(std::size_t needed) { return evict(needed, mode_); }
  EvictStats evict(std::size_t needed, EvictionMode mode);

  // Promotes up to `max_tokens` host-resident tokens starting at offset
  // `from` (a device-path boundary) back to device, evicting others to
  // make room. Returns the number of tokens promoted.
  std::size_t reload(std::span<const TokenId> tokens, std::size_t from,
                     std::size_t max_tokens, EvictStats* evictions = nullptr);

  // Pin/unpin every node covering tokens [0, len). `len` must land on a
  // node boundary, which it does when taken from a preceding match or
  // insert of the same sequence. Pinned nodes are never evicted.
  void pin(std::span<const TokenId> tokens, std::size_t len);
  void unpin(std::span<const TokenId> tokens, std::size_t len);

  // Drops the entire subtree of `tokens` beyond offset `from`, device and
  // host alike. Used when a sequence's owner finishes and its private
  // suffix can never be matched again. `from` is rounded up to a page.
  void discard_suffix(std::span<const TokenId> tokens, std::size_t from);

  double usage() const;
  // Device-matched / requested tokens since the last reset; 1.0 when no
  // tokens were requested in the window.
  double hit_rate() const;
  void reset_hit_window();
  // Scales the window counters instead of zeroing them; factor 0 resets.
  void decay_hit_window(double factor);
  double hit_window_matched() const { return hit_matched_; }
  double hit_window_requested() const { return hit_requested_; }

  const SlotPool& pool() const { return pool_; }
  std::size_t page_size() const { return page_size_; }
  EvictionMode mode() const { return mode_; }
  std::uint64_t clock() const { return clock_; }
  std::uint64_t total_offloaded_tokens() const { return total_offloaded_; }
  std::uint64_t total_discarded_tokens() const { return total_discarded_; }

  // When set, evict appends the full root-path token sequence of every
  // evicted token (one vector per token). Test support.
  void set_victim_sink(std::vector<std::vector<TokenId>>* sink) {
    victim_sink_ = sink;
  }

  const CacheNode* root() const { return &root_; }

  // Walks every device-resident token as its full prefix sequence.
  void for_each_device_prefix(
      const std::function<void(const std::vector<TokenId>&)>& fn) const;

  void dump(std::ostream& os) const;

  // Recomputes all derived bookkeeping and throws InvariantViolation on
  // any mismatch. Used by fuzz tests.
  void check_invariants() const;

 private:
  std::size_t page_floor(std::size_t n) const { return n - n % page_size_; }
  std::size_t page_ceil(std::size_t n) const;
  std::vector<TokenId> child_key(const std::vector<TokenId>& segment) const;
  CacheNode* find_child(const CacheNode* node, std::span<const TokenId> tokens,
                        std::size_t pos) const;
  CacheNode* split_node(CacheNode* node, std::size_t offset);
  void propagate_gain(CacheNode* node);
  void propagate_loss(CacheNode* node);
  std::size_t count_missing_slots(std::span<const TokenId> tokens) const;
  bool is_frontier(const CacheNode* node) const;
  void collect_frontier(
      CacheNode* node,
      std::vector<std::pair<std::pair<std::uint64_t, std::uint64_t>,
                            CacheNode*>>& out);
  void record_victims(const CacheNode* victim);
  std::vector<TokenId> path_tokens(const CacheNode* node) const;

  SlotPool pool_;
  std::size_t page_size_;
  EvictionMode mode_;
  CacheNode root_;
  std::uint64_t clock_ = 0;
  std::uint64_t next_ordinal_ = 1;
  double hit_matched_ = 0;
  double hit_requested_ = 0;
  std::uint64_t total_offloaded_ = 0;
  std::uint64_t total_discarded_ = 0;
  std::vector<std::vector<TokenId>>* victim_sink_ = nullptr;
};

}  // namespace kvadmit

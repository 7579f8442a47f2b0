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
#include "cache_tree.hpp"

#include <algorithm>
#include <cassert>
#include <ostream>
#include <queue>
#include <sstream>

namespace kvadmit {

namespace {

std::size_t common_len(const std::vector<TokenId>& segment,
                       std::span<const TokenId> tokens) {
  std::size_t n = std::min(segment.size(), tokens.size());
  std::size_t k = 0;
  while (k < n && segment[k] == tokens[k]) ++k;
  return k;
}

}  // namespace

CacheTree::CacheTree(std::size_t capacity_slots, std::size_t page_size,
                     EvictionMode mode)
    : page_size_(page_size), mode_(mode) {
  if (capacity_slots == 0) throw std::invalid_argument("capacity must be > 0");
  if (page_size == 0) throw std::invalid_argument("page size must be > 0");
  pool_.capacity = capacity_slots;
}

std::size_t CacheTree::page_ceil(std::size_t n) const {
  std::size_t r = n % page_size_;
  return r == 0 ? n : n + (page_size_ - r);
}

std::vector<TokenId> CacheTree::child_key(
    const std::vector<TokenId>& segment) const {
  std::size_t n = std::min(page_size_, segment.size());
  return {segment.begin(), segment.begin() + static_cast<long>(n)};
}

CacheNode* CacheTree::find_child(const CacheNode* node,
                                 std::span<const TokenId> tokens,
                                 std::size_t pos) const {
  std::size_t rem = tokens.size() - pos;
  if (rem == 0) return nullptr;
  std::size_t n = std::min(page_size_, rem);
  std::vector<TokenId> key(tokens.begin() + static_cast<long>(pos),
                           tokens.begin() + static_cast<long>(pos + n));
  auto it = node->children.find(key);
  return it == node->children.end() ? nullptr : it->second.get();
}

CacheNode* CacheTree::split_node(CacheNode* node, std::size_t offset) {
  assert(offset > 0 && offset < node->segment.size());
  assert(offset % page_size_ == 0 || node->tier == Tier::kHost);
  auto suffix = std::make_unique<CacheNode>();
  CacheNode* s = suffix.get();
  s->segment.assign(node->segment.begin() + offset, node->segment.end());
  s->children = std::move(node->children);
  for (auto& [key, child] : s->children) child->parent = s;
  s->parent = node;
  s->last_access = node->last_access;
  s->ordinal = next_ordinal_++;
  s->tier = node->tier;
  s->pin_count = node->pin_count;
  s->children_with_device = node->children_with_device;
  if (node->tier == Tier::kDevice) {
    std::size_t prefix_slots = offset / page_size_;
    s->device_slots = node->device_slots - prefix_slots;
    node->device_slots = prefix_slots;
  }
  node->segment.resize(offset);
  node->children.clear();
  node->children_with_device = s->subtree_has_device() ? 1 : 0;
  node->children.emplace(child_key(s->segment), std::move(suffix));
  return s;
}

void CacheTree::propagate_gain(CacheNode* node) {
  CacheNode* p = node->parent;
  while (p != nullptr) {
    bool had = p->subtree_has_device();
    p->children_with_device += 1;
    if (had) break;
    p = p->parent;
  }
}

void CacheTree::propagate_loss(CacheNode* node) {
  CacheNode* p = node->parent;
  while (p != nullptr) {
    p->children_with_device -= 1;
    assert(p->children_with_device >= 0);
    if (p->subtree_has_device()) break;
    p = p->parent;
  }
}

MatchResult CacheTree::match_prefix(std::span<const TokenId> tokens) {
  const std::uint64_t now = ++clock_;
  MatchResult r;
  CacheNode* node = &root_;
  std::size_t pos = 0;
  bool host_phase = false;
  while (pos < tokens.size()) {
    CacheNode* child = find_child(node, tokens, pos);
    if (child == nullptr) break;
    if (child->tier == Tier::kHost) host_phase = true;
    std::size_t k = common_len(child->segment, tokens.subspan(pos));
    bool full = k == child->segment.size();
    std::size_t ka = full ? k : page_floor(k);
    if (ka == 0) break;
    if (!full) split_node(child, ka);
    if (host_phase) {
      r.host_matched += ka;
    } else {
      child->last_access = now;
      r.matched += ka;
    }
    pos += ka;
    node = child;
    if (!full) break;
  }
  hit_matched_ += static_cast<double>(r.matched);
  hit_requested_ += static_cast<double>(tokens.size());
  return r;
}

std::size_t CacheTree::count_missing_slots(
    std::span<const TokenId> tokens) const {
  const CacheNode* node = &root_;
  std::size_t pos = 0;
  std::size_t missing = 0;
  while (pos < tokens.size()) {
    const CacheNode* child = find_child(node, tokens, pos);
    if (child == nullptr) {
      missing += (tokens.size() - pos) / page_size_;
      return missing;
    }
    std::size_t k = common_len(child->segment, tokens.subspan(pos));
    bool full = k == child->segment.size();
    std::size_t ka = full ? k : page_floor(k);
    if (ka == 0) return missing;
    if (child->tier == Tier::kHost) missing += ka / page_size_;
    pos += ka;
    node = child;
    if (!full) {
      missing += (tokens.size() - pos) / page_size_;
      return missing;
    }
  }
  return missing;
}

InsertOutcome CacheTree::insert(std::span<const TokenId> tokens) {
  InsertOutcome out;
  const std::size_t n = page_floor(tokens.size());
  if (n == 0) {
    out.ok = true;
    return out;
  }
  auto head = tokens.first(n);
  // Eviction can strip unpinned parts of the path being inserted, which
  // grows the requirement, so re-count until it fits or nothing more can
  // be reclaimed.
  for (;;) {
    std::size_t need = count_missing_slots(head);
    if (need <= pool_.free_slots()) break;
    EvictStats ev = evict(need - pool_.free_slots());
    out.evictions.add(ev);
    if (ev.reclaimed_slots == 0) return out;
  }
  const std::uint64_t now = ++clock_;
  CacheNode* node = &root_;
  std::size_t pos = 0;
  while (pos < n) {
    CacheNode* child = find_child(node, head, pos);
    if (child == nullptr) {
      auto leaf = std::make_unique<CacheNode>();
      CacheNode* l = leaf.get();
      l->segment.assign(tokens.begin() + pos, tokens.begin() + n);
      l->parent = node;
      l->last_access = now;
      l->ordinal = next_ordinal_++;
      l->device_slots = (n - pos) / page_size_;
      pool_.used += l->device_slots;
      out.inserted_slots += l->device_slots;
      node->children.emplace(child_key(l->segment), std::move(leaf));
      propagate_gain(l);
      pos = n;
      break;
    }
    std::size_t k = common_len(child->segment, head.subspan(pos));
    bool full = k == child->segment.size();
    std::size_t ka = full ? k : page_floor(k);
    if (ka == 0) break;
    if (!full) split_node(child, ka);
    if (child->tier == Tier::kHost) {
      std::size_t pages = child->segment.size() / page_size_;
      child->tier = Tier::kDevice;
      child->device_slots = pages;
      pool_.used += pages;
      out.inserted_slots += pages;
      propagate_gain(child);
    }
    child->last_access = now;
    pos += ka;
    node = child;
  }
  assert(pool_.used <= pool_.capacity);
  out.ok = true;
  return out;
}

bool CacheTree::is_frontier(const CacheNode* node) const {
  return node != &root_ && node->tier == Tier::kDevice &&
         node->device_slots > 0 && node->pin_count == 0 &&
         node->children_with_device == 0;
}

void CacheTree::collect_frontier(
    CacheNode* node,
    std::vector<std::pair<std::pair<std::uint64_t, std::uint64_t>, CacheNode*>>&
        out) {
  for (auto& [key, child] : node->children) {
    CacheNode* c = child.get();
    if (!c->subtree_has_device()) continue;
    if (is_frontier(c)) {
      out.push_back({{c->last_access, c->ordinal}, c});
      continue;
    }
    collect_frontier(c, out);
  }
}

std::vector<TokenId> CacheTree::path_tokens(const CacheNode* node) const {
  std::vector<const CacheNode*> chain;
  for (const CacheNode* n = node; n != &root_; n = n->parent) chain.push_back(n);
  std::vector<TokenId> out;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it)
    out.insert(out.end(), (*it)->segment.begin(), (*it)->segment.end());
  return out;
}

void CacheTree::record_victims(const CacheNode* victim) {
  if (victim_sink_ == nullptr) return;
  std::vector<TokenId> full = path_tokens(victim);
  std::size_t base = full.size() - victim->segment.size();
  for (std::size_t i = victim->segment.size(); i > 0; --i) {
    victim_sink_->emplace_back(full.begin(),
                               full.begin() + static_cast<long>(base + i));
  }
}

EvictStats CacheTree::evict(std::size_t needed, EvictionMode mode) {
  EvictStats st;
  if (needed == 0) return st;
  using Entry = std::pair<std::pair<std::uint64_t, std::uint64_t>, CacheNode*>;
  std::vector<Entry> initial;
  collect_frontier(&root_, initial);
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap(
      std::greater<Entry>(), std::move(initial));
  while (st.reclaimed_slots < needed && !heap.empty()) {
    auto [stamp, node] = heap.top();
    heap.pop();
    if (!is_frontier(node) || node->last_access != stamp.first ||
        node->ordinal != stamp.second) {
      continue;
    }
    std::size_t take = std::min(node->device_slots, needed - st.reclaimed_slots);
    CacheNode* victim = node;
    if (take < node->device_slots) {
      std::size_t offset = node->segment.size() - take * page_size_;
      victim = split_node(node, offset);
    }
    record_victims(victim);
    pool_.used -= victim->device_slots;
    st.reclaimed_slots += victim->device_slots;
    CacheNode* parent = victim->parent;
    if (mode == EvictionMode::kOffload) {
      st.offloaded_tokens += victim->segment.size();
      total_offloaded_ += victim->segment.size();
      victim->device_slots = 0;
      victim->tier = Tier::kHost;
      propagate_loss(victim);
    } else {
      std::size_t dropped = 0;
      std::function<void(const CacheNode*)> count = [&](const CacheNode* c) {
        dropped += c->segment.size();
        for (const auto& [k, ch] : c->children) count(ch.get());
      };
      count(victim);
      st.discarded_tokens += dropped;
      total_discarded_ += dropped;
      propagate_loss(victim);
      parent->children.erase(child_key(victim->segment));
      victim = nullptr;
    }
    if (is_frontier(parent)) {
      heap.push({{parent->last_access, parent->ordinal}, parent});
    }
  }
  return st;
}

std::size_t CacheTree::reload(std::span<const TokenId> tokens, std::size_t from,
                              std::size_t max_tokens, EvictStats* evictions) {
  if (from >= tokens.size() || max_tokens == 0) return 0;
  CacheNode* node = &root_;
  std::size_t pos = 0;
  while (pos < from) {
    CacheNode* child = find_child(node, tokens, pos);
    if (child == nullptr)
      throw std::logic_error("reload offset is not on a cached path");
    if (child->segment.size() > from - pos)
      throw std::logic_error("reload offset is not a node boundary");
    pos += child->segment.size();
    node = child;
  }
  const std::uint64_t now = ++clock_;
  std::size_t promoted = 0;
  while (pos < tokens.size() && promoted < max_tokens) {
    CacheNode* child = find_child(node, tokens, pos);
    if (child == nullptr) break;
    if (child->tier == Tier::kDevice) break;
    std::size_t k = common_len(child->segment, tokens.subspan(pos));
    bool full = k == child->segment.size();
    std::size_t ka = full ? k : page_floor(k);
    std::size_t want = page_floor(max_tokens - promoted);
    if (ka > want) {
      ka = want;
      full = false;
    }
    if (ka == 0) break;
    if (ka < child->segment.size()) split_node(child, ka);
    std::size_t pages = ka / page_size_;
    if (pool_.free_slots() < pages) {
      EvictStats ev = evict(pages - pool_.free_slots());
      if (evictions != nullptr) evictions->add(ev);
      if (pool_.free_slots() < pages) break;
    }
    child->tier = Tier::kDevice;
    child->device_slots = pages;
    pool_.used += pages;
    child->last_access = now;
    propagate_gain(child);
    promoted += ka;
    pos += ka;
    node = child;
    if (!full) break;
  }
  return promoted;
}

void CacheTree::pin(std::span<const TokenId> tokens, std::size_t len) {
  if (len > tokens.size()) throw std::invalid_argument("pin length too long");
  CacheNode* node = &root_;
  std::size_t pos = 0;
  while (pos < len) {
    CacheNode* child = find_child(node, tokens, pos);
    if (child == nullptr)
      throw std::logic_error("pin path missing from tree");
    if (pos + child->segment.size() > len)
      throw std::invalid_argument("pin length not on a node boundary");
    child->pin_count += 1;
    pos += child->segment.size();
    node = child;
  }
}

void CacheTree::unpin(std::span<const TokenId> tokens, std::size_t len) {
  if (len > tokens.size()) throw std::invalid_argument("unpin length too long");
  CacheNode* node = &root_;
  std::size_t pos = 0;
  while (pos < len) {
    CacheNode* child = find_child(node, tokens, pos);
    if (child == nullptr)
      throw std::logic_error("unpin path missing from tree");
    if (pos + child->segment.size() > len)
      throw std::invalid_argument("unpin length not on a node boundary");
    if (child->pin_count == 0)
      throw UnpinUnderflow("unpin on a node with zero pin count");
    child->pin_count -= 1;
    pos += child->segment.size();
    node = child;
  }
}

void CacheTree::discard_suffix(std::span<const TokenId> tokens,
                               std::size_t from) {
  from = page_ceil(from);
  if (from >= tokens.size()) return;
  CacheNode* node = &root_;
  std::size_t pos = 0;
  while (pos < from) {
    CacheNode* child = find_child(node, tokens, pos);
    if (child == nullptr) return;
    std::size_t k = common_len(child->segment, tokens.subspan(pos));
    if (k < child->segment.size() && pos + k < from) return;
    if (child->segment.size() > from - pos) split_node(child, from - pos);
    pos += child->segment.size();
    node = child;
  }
  CacheNode* branch = find_child(node, tokens, from);
  if (branch == nullptr) return;
  std::size_t slots = 0;
  std::size_t toks = 0;
  int pins = 0;
  std::function<void(const CacheNode*)> scan = [&](const CacheNode* c) {
    slots += c->device_slots;
    toks += c->segment.size();
    pins += c->pin_count;
    for (const auto& [k, ch] : c->children) scan(ch.get());
  };
  scan(branch);
  if (pins > 0)
    throw InvariantViolation("discard_suffix would drop pinned nodes");
  if (branch->subtree_has_device()) propagate_loss(branch);
  pool_.used -= slots;
  total_discarded_ += toks;
  node->children.erase(child_key(branch->segment));
}

double CacheTree::usage() const {
  return static_cast<double>(pool_.used) / static_cast<double>(pool_.capacity);
}

double CacheTree::hit_rate() const {
  if (hit_requested_ == 0) return 1.0;
  return hit_matched_ / hit_requested_;
}

void CacheTree::reset_hit_window() {
  hit_matched_ = 0;
  hit_requested_ = 0;
}

void CacheTree::decay_hit_window(double factor) {
  hit_matched_ *= factor;
  hit_requested_ *= factor;
}

void CacheTree::for_each_device_prefix(
    const std::function<void(const std::vector<TokenId>&)>& fn) const {
  std::vector<TokenId> prefix;
  std::function<void(const CacheNode*)> walk = [&](const CacheNode* node) {
    for (const auto& [key, child] : node->children) {
      const CacheNode* c = child.get();
      if (c->tier != Tier::kDevice) continue;
      for (TokenId t : c->segment) {
        prefix.push_back(t);
        fn(prefix);
      }
      walk(c);
      prefix.resize(prefix.size() - c->segment.size());
    }
  };
  walk(&root_);
}

void CacheTree::dump(std::ostream& os) const {
  std::function<void(const CacheNode*, int)> walk = [&](const CacheNode* node,
                                                        int depth) {
    for (const auto& [key, child] : node->children) {
      const CacheNode* c = child.get();
      for (int i = 0; i < depth; ++i) os << "  ";
      os << (c->tier == Tier::kDevice ? "D" : "H") << " len="
         << c->segment.size() << " slots=" << c->device_slots
         << " pins=" << c->pin_count << " la=" << c->last_access << " ["
         << c->segment.front() << "..]" << '\n';
      walk(c, depth + 1);
    }
  };
  os << "pool " << pool_.used << "/" << pool_.capacity << '\n';
  walk(&root_, 0);
}

void CacheTree::check_invariants() const {
  std::size_t device_total = 0;
  std::function<void(const CacheNode*, bool)> walk = [&](const CacheNode* node,
                                                         bool host_above) {
    int with_device = 0;
    for (const auto& [key, child] : node->children) {
      const CacheNode* c = child.get();
      if (c->parent != node)
        throw InvariantViolation("parent pointer mismatch");
      if (c->segment.empty())
        throw InvariantViolation("non-root node with empty segment");
      if (key != child_key(c->segment))
        throw InvariantViolation("child key does not match segment head");
      if (c->pin_count < 0) throw InvariantViolation("negative pin count");
      if (c->last_access > clock_)
        throw InvariantViolation("node timestamp ahead of clock");
      if (c->tier == Tier::kDevice) {
        if (host_above)
          throw InvariantViolation("device node below a host node");
        if (c->segment.size() % page_size_ != 0)
          throw InvariantViolation("device segment not page aligned");
        if (c->device_slots != c->segment.size() / page_size_)
          throw InvariantViolation("device slot count mismatch");
        device_total += c->device_slots;
      } else if (c->device_slots != 0) {
        throw InvariantViolation("host node holding device slots");
      }
      if (c->subtree_has_device()) ++with_device;
      walk(c, host_above || c->tier == Tier::kHost);
    }
    if (node->children_with_device != with_device)
      throw InvariantViolation("children_with_device mismatch");
  };
  if (!root_.segment.empty()) throw InvariantViolation("root has a segment");
  if (root_.device_slots != 0) throw InvariantViolation("root holds slots");
  walk(&root_, false);
  if (device_total != pool_.used)
    throw InvariantViolation("slot pool does not match tree contents");
  if (pool_.used > pool_.capacity)
    throw InvariantViolation("pool used exceeds capacity");
}

}  // namespace kvadmit

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
#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "cache_tree.hpp"
#include "flat_cache_oracle.hpp"

using namespace kvadmit;
using kvadmit::testing::FlatLruCache;

namespace {

std::vector<TokenId> seq(std::initializer_list<TokenId> v) { return v; }

std::set<std::vector<TokenId>> device_set(const CacheTree& tree) {
  std::set<std::vector<TokenId>> out;
  tree.for_each_device_prefix(
      [&](const std::vector<TokenId>& p) { out.insert(p); });
  return out;
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

}  // namespace

TEST_CASE("match on empty tree returns zero") {
  CacheTree tree(16);
  auto r = tree.match_prefix(seq({1, 2, 3}));
  CHECK(r.matched == 0);
  CHECK(r.host_matched == 0);
}

TEST_CASE("match finds longest cached prefix") {
  CacheTree tree(16);
  auto ins = tree.insert(seq({1, 2, 3}));
  CHECK(ins.ok);
  CHECK(ins.inserted_slots == 3);
  CHECK(tree.pool().used == 3);
  auto r = tree.match_prefix(seq({1, 2, 3, 4}));
  CHECK(r.matched == 3);
}

TEST_CASE("insert splits at the divergence point") {
  CacheTree tree(16);
  tree.insert(seq({1, 2, 3}));
  auto ins = tree.insert(seq({1, 2, 9}));
  CHECK(ins.ok);
  CHECK(ins.inserted_slots == 1);
  CHECK(tree.pool().used == 4);
  CHECK(tree.match_prefix(seq({1, 2, 9})).matched == 3);
  CHECK(tree.match_prefix(seq({1, 2, 3})).matched == 3);
  tree.check_invariants();
}

TEST_CASE("shared prompt keeps pool usage below the no-sharing total") {
  CacheTree tree(4096);
  std::vector<TokenId> prompt;
  for (TokenId t = 0; t < 64; ++t) prompt.push_back(t);
  std::size_t total_lengths = 0;
  for (int agent = 0; agent < 8; ++agent) {
    std::vector<TokenId> ctx = prompt;
    for (int k = 0; k < 50; ++k)
      ctx.push_back((static_cast<TokenId>(agent + 1) << 32) | k);
    tree.match_prefix(ctx);
    REQUIRE(tree.insert(ctx).ok);
    total_lengths += ctx.size();
  }
  CHECK(tree.pool().used == 64 + 8 * 50);
  CHECK(tree.pool().used < total_lengths);
  tree.check_invariants();
}

TEST_CASE("evict removes the least recently used leaf first") {
  CacheTree tree(16);
  std::vector<std::vector<TokenId>> victims;
  tree.set_victim_sink(&victims);
  tree.insert(seq({1, 1}));
  tree.insert(seq({2, 2}));
  tree.match_prefix(seq({1, 1}));
  auto st = tree.evict(2);
  CHECK(st.reclaimed_slots == 2);
  REQUIRE(victims.size() == 2);
  CHECK(victims[0] == seq({2, 2}));
  CHECK(victims[1] == seq({2}));
  CHECK(tree.match_prefix(seq({1, 1})).matched == 2);
  CHECK(tree.match_prefix(seq({2, 2})).matched == 0);
}

TEST_CASE("pinned nodes survive eviction even when least recent") {
  CacheTree tree(16);
  tree.insert(seq({1, 1}));
  tree.insert(seq({2, 2}));
  tree.pin(seq({1, 1}), 2);
  auto st = tree.evict(16);
  CHECK(st.reclaimed_slots == 2);
  CHECK(tree.pool().used == 2);
  CHECK(tree.match_prefix(seq({1, 1})).matched == 2);
  tree.unpin(seq({1, 1}), 2);
  st = tree.evict(16);
  CHECK(st.reclaimed_slots == 2);
  CHECK(tree.pool().used == 0);
  tree.check_invariants();
}

TEST_CASE("interleaved pins on a shared prefix count per request") {
  CacheTree tree(32);
  tree.insert(seq({5, 6, 7, 8}));
  tree.insert(seq({5, 6, 9}));
  tree.insert(seq({5, 6, 7, 10}));
  tree.pin(seq({5, 6, 7, 8}), 4);
  tree.pin(seq({5, 6, 9}), 3);
  tree.pin(seq({5, 6, 7, 10}), 4);
  const CacheNode* shared = tree.root()->children.at(5).get();
  CHECK(shared->segment == seq({5, 6}));
  CHECK(shared->pin_count == 3);
  tree.unpin(seq({5, 6, 7, 8}), 4);
  tree.unpin(seq({5, 6, 9}), 3);
  tree.unpin(seq({5, 6, 7, 10}), 4);
  CHECK(shared->pin_count == 0);
  CHECK_THROWS_AS(tree.unpin(seq({5, 6, 9}), 3), UnpinUnderflow);
}

TEST_CASE("usage and hit rate definitions") {
  CacheTree tree(10);
  CHECK(tree.usage() == 0.0);
  CHECK(tree.hit_rate() == 1.0);
  tree.insert(seq({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  CHECK(tree.usage() == 1.0);
  tree.reset_hit_window();
  tree.match_prefix(seq({1, 2, 3, 4, 5, 6, 7, 8, 9, 99}));
  CHECK(tree.hit_rate() == doctest::Approx(0.9));
}

TEST_CASE("insert fails cleanly when pins block eviction") {
  CacheTree tree(4);
  tree.insert(seq({1, 2, 3, 4}));
  tree.pin(seq({1, 2, 3, 4}), 4);
  auto out = tree.insert(seq({9, 9, 9}));
  CHECK_FALSE(out.ok);
  CHECK(tree.pool().used == 4);
  CHECK(tree.match_prefix(seq({1, 2, 3, 4})).matched == 4);
  tree.unpin(seq({1, 2, 3, 4}), 4);
  out = tree.insert(seq({9, 9, 9}));
  CHECK(out.ok);
  tree.check_invariants();
}

TEST_CASE("offload moves victims to host and match stops at device boundary") {
  CacheTree tree(8, 1, EvictionMode::kOffload);
  tree.insert(seq({1, 2, 3, 4, 5, 6}));
  tree.match_prefix(seq({1, 2, 3, 4, 5, 6}));
  auto st = tree.evict(4);
  CHECK(st.reclaimed_slots == 4);
  CHECK(st.offloaded_tokens == 4);
  CHECK(tree.pool().used == 2);
  auto r = tree.match_prefix(seq({1, 2, 3, 4, 5, 6}));
  CHECK(r.matched == 2);
  CHECK(r.host_matched == 4);
  tree.check_invariants();
}

TEST_CASE("reload promotes host tokens back to device") {
  CacheTree tree(8, 1, EvictionMode::kOffload);
  std::vector<TokenId> s = {1, 2, 3, 4, 5, 6};
  tree.insert(s);
  tree.evict(4);
  auto r = tree.match_prefix(s);
  REQUIRE(r.matched == 2);
  std::size_t promoted = tree.reload(s, r.matched, r.host_matched);
  CHECK(promoted == 4);
  CHECK(tree.pool().used == 6);
  CHECK(tree.match_prefix(s).matched == 6);
  tree.check_invariants();
}

TEST_CASE("reload under pressure evicts other branches first") {
  CacheTree tree(8, 1, EvictionMode::kOffload);
  std::vector<TokenId> a = {1, 2, 3, 4, 5, 6};
  tree.insert(a);
  tree.evict(4);
  tree.insert(seq({7, 8, 9, 10, 11, 12}));
  CHECK(tree.pool().used == 8);
  auto r = tree.match_prefix(a);
  REQUIRE(r.matched == 2);
  EvictStats ev;
  std::size_t promoted = tree.reload(a, r.matched, r.host_matched, &ev);
  CHECK(promoted == 4);
  CHECK(ev.reclaimed_slots >= 4);
  CHECK(tree.match_prefix(a).matched == 6);
  tree.check_invariants();
}

TEST_CASE("insert promotes matched host prefix back to device") {
  CacheTree tree(12, 1, EvictionMode::kOffload);
  std::vector<TokenId> s = {1, 2, 3, 4, 5, 6};
  tree.insert(s);
  tree.evict(4);
  std::vector<TokenId> longer = s;
  longer.push_back(7);
  auto out = tree.insert(longer);
  CHECK(out.ok);
  CHECK(out.inserted_slots == 5);
  CHECK(tree.match_prefix(longer).matched == 7);
  tree.check_invariants();
}

TEST_CASE("discard_suffix drops a private branch and frees its slots") {
  CacheTree tree(64);
  std::vector<TokenId> shared = {1, 2, 3, 4};
  std::vector<TokenId> a = shared, b = shared;
  for (TokenId t = 100; t < 110; ++t) a.push_back(t);
  for (TokenId t = 200; t < 205; ++t) b.push_back(t);
  tree.insert(a);
  tree.insert(b);
  CHECK(tree.pool().used == 4 + 10 + 5);
  tree.discard_suffix(a, shared.size());
  CHECK(tree.pool().used == 4 + 5);
  CHECK(tree.match_prefix(a).matched == 4);
  CHECK(tree.match_prefix(b).matched == 9);
  tree.check_invariants();
}

TEST_CASE("discard_suffix refuses to drop pinned nodes") {
  CacheTree tree(16);
  std::vector<TokenId> s = {1, 2, 3, 4};
  tree.insert(s);
  tree.pin(s, 4);
  CHECK_THROWS_AS(tree.discard_suffix(s, 2), InvariantViolation);
  tree.unpin(s, 4);
  tree.discard_suffix(s, 2);
  CHECK(tree.pool().used == 2);
}

TEST_CASE("page granularity above one caches whole pages only") {
  CacheTree tree(8, 4);
  auto out = tree.insert(seq({1, 2, 3, 4, 5, 6}));
  CHECK(out.ok);
  CHECK(out.inserted_slots == 1);
  CHECK(tree.pool().used == 1);
  auto r = tree.match_prefix(seq({1, 2, 3, 4, 5, 6}));
  CHECK(r.matched == 4);
  tree.check_invariants();
}

TEST_CASE("page granularity splits on page boundaries") {
  CacheTree tree(8, 2);
  tree.insert(seq({1, 2, 3, 4}));
  auto r = tree.match_prefix(seq({1, 2, 3, 9}));
  CHECK(r.matched == 2);
  auto out = tree.insert(seq({1, 2, 9, 9}));
  CHECK(out.ok);
  CHECK(out.inserted_slots == 1);
  CHECK(tree.pool().used == 3);
  tree.check_invariants();
}

TEST_CASE("flat oracle equivalence on randomized operations") {
  std::mt19937_64 rng(0x5eed0001);
  for (int round = 0; round < 12; ++round) {
    std::size_t capacity = 8 + bounded(rng, 25);
    CacheTree tree(capacity);
    FlatLruCache oracle(capacity);
    std::vector<std::vector<TokenId>> victims_tree;
    tree.set_victim_sink(&victims_tree);

    std::vector<std::vector<TokenId>> pool;
    std::size_t nseq = 2 + bounded(rng, 7);
    for (std::size_t i = 0; i < nseq; ++i) {
      std::vector<TokenId> s;
      if (!pool.empty() && bounded(rng, 10) < 7) {
        const auto& base = pool[bounded(rng, pool.size())];
        std::size_t cut = 1 + bounded(rng, base.size());
        s.assign(base.begin(), base.begin() + static_cast<long>(cut));
      }
      std::size_t ext = 1 + bounded(rng, 8);
      for (std::size_t k = 0; k < ext; ++k) s.push_back(bounded(rng, 6));
      if (s.size() > 24) s.resize(24);
      pool.push_back(std::move(s));
    }

    for (int op = 0; op < 500; ++op) {
      std::size_t pick = bounded(rng, pool.size());
      std::vector<TokenId> s = pool[pick];
      std::size_t roll = bounded(rng, 10);
      victims_tree.clear();
      std::vector<std::vector<TokenId>> victims_oracle;
      if (roll < 4) {
        std::size_t cut = 1 + bounded(rng, s.size());
        std::vector<TokenId> probe(s.begin(),
                                   s.begin() + static_cast<long>(cut));
        if (bounded(rng, 4) == 0) probe.push_back(bounded(rng, 6));
        auto r = tree.match_prefix(probe);
        std::size_t k = oracle.match(probe);
        REQUIRE(r.matched == k);
        REQUIRE(r.host_matched == 0);
      } else if (roll < 8) {
        auto out = tree.insert(s);
        bool ok = oracle.insert(s, &victims_oracle);
        REQUIRE(out.ok == ok);
      } else {
        std::size_t needed = 1 + bounded(rng, 8);
        tree.evict(needed);
        oracle.evict(needed, &victims_oracle);
      }
      std::sort(victims_tree.begin(), victims_tree.end());
      std::sort(victims_oracle.begin(), victims_oracle.end());
      REQUIRE(victims_tree == victims_oracle);
      REQUIRE(tree.pool().used == oracle.size());
      REQUIRE(tree.hit_rate() ==
              doctest::Approx(oracle.hit_requested() == 0
                                  ? 1.0
                                  : double(oracle.hit_matched()) /
                                        double(oracle.hit_requested())));
      tree.check_invariants();
    }
    std::set<std::vector<TokenId>> tree_set = device_set(tree);
    std::set<std::vector<TokenId>> oracle_set;
    for (const auto& [key, stamp] : oracle.entries()) oracle_set.insert(key);
    REQUIRE(tree_set == oracle_set);
  }
}

TEST_CASE("sharing bound: device slots never exceed distinct prefix count") {
  std::mt19937_64 rng(0x5eed0002);
  CacheTree tree(64);
  std::set<std::vector<TokenId>> distinct;
  for (int op = 0; op < 200; ++op) {
    std::vector<TokenId> s;
    std::size_t len = 1 + bounded(rng, 12);
    for (std::size_t k = 0; k < len; ++k) s.push_back(bounded(rng, 4));
    if (tree.insert(s).ok) {
      std::vector<TokenId> p;
      for (TokenId t : s) {
        p.push_back(t);
        distinct.insert(p);
      }
    }
    CHECK(tree.pool().used <= distinct.size());
  }
}

TEST_CASE("tree dump renders one line per node") {
  CacheTree tree(16);
  tree.insert(seq({1, 2, 3}));
  tree.insert(seq({1, 2, 9}));
  std::ostringstream os;
  tree.dump(os);
  std::string text = os.str();
  CHECK(text.find("pool 4/16") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

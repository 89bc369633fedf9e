// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tiermem/errors.hpp"
#include "tiermem/oracle.hpp"
#include "tiermem/retrieval.hpp"

namespace tiermem {
namespace {

using testing::frame_of;
using testing::query_of;
using testing::token;

MemorySnapshot snapshot_of(TierSet tiers, std::size_t dim, GateState gate = {}) {
  TierConfig c;
  return MemorySnapshot(std::move(tiers), gate, c, dim, 100.0);
}

TEST(UpdateGate, Examples) {
  GateState g;
  g = update_gate(g, 0.06);
  EXPECT_DOUBLE_EQ(g.ema, 0.06);
  g = update_gate(g, 0.16);
  EXPECT_NEAR(g.ema, 0.07, 1e-12);
  EXPECT_EQ(g.observations, 2u);

  GateState c;
  for (int i = 0; i < 50; ++i) {
    c = update_gate(c, 0.25);
    EXPECT_DOUBLE_EQ(c.ema, 0.25);
  }
}

TEST(UpdateGate, StaysWithinObservedRange) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GateState g;
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    g = update_gate(g, x);
    ASSERT_GE(g.ema, lo - 1e-12);
    ASSERT_LE(g.ema, hi + 1e-12);
  }
}

TEST(GateCheck, IdenticalAnchorTokenPasses) {
  TierSet t;
  t.short_tier.push_back(frame_of(0, {token({1, 0}, 0.0, 0, 0)}));
  GateState g;
  g = update_gate(g, 0.05);
  const auto snap = snapshot_of(t, 2, g);
  const auto d = gate_check(snap, g, query_of({{1, 0}}, 1.0, 0.1));
  EXPECT_TRUE(d.short_only);
  EXPECT_DOUBLE_EQ(d.affinity, 1.0);
  EXPECT_NEAR(d.threshold, 0.005, 1e-15);
}

TEST(GateCheck, ZeroRhoPassesNonNegativeAffinity) {
  TierSet t;
  t.short_tier.push_back(frame_of(0, {token({0, 1}, 0.0, 0, 0)}));
  const auto snap = snapshot_of(t, 2);
  const auto d = gate_check(snap, snap.gate(), query_of({{1, 0}}, 1.0, 0.0));
  EXPECT_EQ(d.threshold, 0.0);
  EXPECT_TRUE(d.short_only);
}

TEST(GateCheck, EmptyShortTierNeverPasses) {
  TierSet t;
  t.mid_tier.push_back(frame_of(0, {token({1, 0}, 0.0, 0, 0)}));
  const auto snap = snapshot_of(t, 2);
  EXPECT_FALSE(gate_check(snap, snap.gate(), query_of({{1, 0}}, 1.0, 0.0)).short_only);
}

TEST(GateCheck, GlobalMaxPooling) {
  TierSet t;
  t.short_tier.push_back(frame_of(0, {token({1, 0}, 0.0, 0, 0), token({0, 1}, 0.0, 0, 1)}));
  TierConfig c;
  c.gate_pooling = GatePooling::global_max;
  const MemorySnapshot snap(t, GateState{}, c, 2, 1.0);
  EXPECT_DOUBLE_EQ(gate_check(snap, snap.gate(), query_of({{1, 0}}, 1.0, 1.0)).affinity, 1.0);
  const auto mean = snapshot_of(t, 2);
  EXPECT_DOUBLE_EQ(gate_check(mean, mean.gate(), query_of({{1, 0}}, 1.0, 1.0)).affinity, 0.5);
}

TEST(GateCheck, MonotoneInRho) {
  std::mt19937_64 rng(8);
  TierSet t;
  std::vector<TokenRecord> toks;
  for (std::uint32_t i = 0; i < 6; ++i) toks.push_back(token(testing::random_vector(rng, 5), 0, 0, i));
  t.short_tier.push_back(frame_of(0, toks));
  GateState g = update_gate({}, 0.3);
  const auto snap = snapshot_of(t, 5, g);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = testing::random_vector(rng, 5);
    bool was_false = false;
    for (double rho = 0.0; rho <= 4.0; rho += 0.05) {
      const bool pass = gate_check(snap, g, query_of({q}, 0, rho)).short_only;
      if (was_false) ASSERT_FALSE(pass);
      was_false = was_false || !pass;
    }
  }
}

TEST(ScoreCandidates, Examples) {
  TierSet t;
  t.long_tier.push_back(frame_of(0, {token({1, 0}, 0, 0, 0)}));
  t.mid_tier.push_back(frame_of(1, {token({0, 1}, 0, 1, 0)}));
  t.mid_tier.push_back(frame_of(2, {token({1, 0}, 0, 2, 0), token({0, 1}, 0, 2, 1)}));
  t.short_tier.push_back(frame_of(3, {token({1, 0}, 0, 3, 0)}));
  const auto s = score_candidates(snapshot_of(t, 2), query_of({{1, 0}}, 0, 2.0));
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s.at(0), 1.0);
  EXPECT_DOUBLE_EQ(s.at(1), 0.0);
  EXPECT_DOUBLE_EQ(s.at(2), 0.5);
  EXPECT_EQ(s.count(3), 0u);
}

TEST(AdaptiveSelect, Examples) {
  EXPECT_EQ(adaptive_select({{1, 0.9}, {2, 0.1}, {3, 0.1}, {4, 0.1}}, 4, 0.5),
            (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(adaptive_select({{1, 0.4}, {2, 0.4}, {3, 0.4}, {4, 0.4}}, 2, 0.5),
            (std::vector<std::uint64_t>{3, 4}));
  EXPECT_TRUE(adaptive_select({}, 3, 0.5).empty());
}

TEST(AdaptiveSelect, ClampedAndTemporallyOrdered) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    FrameScores s;
    const int n = 1 + trial % 30;
    for (int i = 0; i < n; ++i) s[static_cast<std::uint64_t>(i * 3)] = u(rng);
    const std::size_t k = 1 + trial % 7;
    const auto r = adaptive_select(s, k, 0.5);
    ASSERT_GE(r.size(), 1u);
    ASSERT_LE(r.size(), k);
    ASSERT_TRUE(std::is_sorted(r.begin(), r.end()));
    // Every selected frame outranks every unselected one.
    double worst_in = 2.0;
    for (auto f : r) worst_in = std::min(worst_in, s.at(f));
    for (const auto& [f, v] : s) {
      if (std::find(r.begin(), r.end(), f) == r.end()) ASSERT_LE(v, worst_in);
    }
  }
}

TEST(RankTopK, TiesFavorRecent) {
  EXPECT_EQ(rank_top_k({{1, 0.5}, {2, 0.5}, {3, 0.9}}, 2), (std::vector<std::uint64_t>{3, 2}));
}

TierSet planted_tiers() {
  TierSet t;
  t.long_tier.push_back(frame_of(0, {token({0, 0, 1}, 0, 0, 0)}));
  t.long_tier.push_back(frame_of(1, {token({1, 0, 0}, 0, 1, 0)}));
  t.mid_tier.push_back(frame_of(2, {token({0.1f, 0, 1}, 0, 2, 0)}));
  t.short_tier.push_back(frame_of(3, {token({0, 1, 0}, 0, 3, 0)}));
  t.short_tier.push_back(frame_of(4, {token({0, 1, 0.1f}, 0, 4, 0)}));
  return t;
}

TEST(Retrieve, ShortTierQueryGates) {
  GateState g = update_gate({}, 0.1);
  const auto snap = snapshot_of(planted_tiers(), 3, g);
  const auto before = score_candidates_calls();
  const auto r = retrieve(snap, g, query_of({{0, 1, 0}}, 5, 0.1));
  EXPECT_TRUE(r.gated_short_only);
  EXPECT_TRUE(r.retrieved_frames.empty());
  EXPECT_EQ(r.anchor_frames, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(score_candidates_calls(), before);
}

TEST(Retrieve, DistantQueryFindsLongFrame) {
  GateState g = update_gate({}, 0.1);
  const auto snap = snapshot_of(planted_tiers(), 3, g);
  const auto q = query_of({{1, 0, 0}}, 5, 2.0);
  const auto r = retrieve(snap, g, q);
  EXPECT_FALSE(r.gated_short_only);
  EXPECT_NE(std::find(r.retrieved_frames.begin(), r.retrieved_frames.end(), 1u),
            r.retrieved_frames.end());
  EXPECT_EQ(r.anchor_frames, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(retrieve(snap, g, q), r);
}

TEST(Retrieve, GateModes) {
  GateState g = update_gate({}, 0.1);
  const auto snap = snapshot_of(planted_tiers(), 3, g);
  const auto q = query_of({{0, 1, 0}}, 5, 0.1);
  const auto never = retrieve(snap, g, q, {GateMode::never, Exec::serial});
  EXPECT_FALSE(never.gated_short_only);
  EXPECT_FALSE(never.retrieved_frames.empty());
  EXPECT_EQ(never.frame_scores.size(), 3u);
  const auto always = retrieve(snap, g, query_of({{1, 0, 0}}, 5, 2.0), {GateMode::always, Exec::serial});
  EXPECT_TRUE(always.gated_short_only);
  EXPECT_TRUE(always.retrieved_frames.empty());
}

TEST(Retrieve, ScaleInvariantSelection) {
  std::mt19937_64 rng(12);
  TierSet t;
  for (std::uint64_t f = 0; f < 12; ++f) {
    std::vector<TokenRecord> toks;
    for (std::uint32_t i = 0; i < 5; ++i) toks.push_back(token(testing::random_vector(rng, 8), 0, f, i));
    (f < 8 ? t.long_tier : f < 10 ? t.mid_tier : t.short_tier).push_back(frame_of(f, toks));
  }
  const auto snap = snapshot_of(t, 8);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = testing::random_vector(rng, 8);
    auto scaled = v;
    for (auto& x : scaled) x *= 7.5f;
    const auto a = retrieve(snap, snap.gate(), query_of({v}, 0, 5.0), {GateMode::never});
    const auto b = retrieve(snap, snap.gate(), query_of({scaled}, 0, 5.0), {GateMode::never});
    EXPECT_EQ(a.retrieved_frames, b.retrieved_frames);
    EXPECT_LE(a.retrieved_frames.size(), 5u);
    EXPECT_GE(a.retrieved_frames.size(), 1u);
  }
}

TEST(Retrieve, ConcurrentReadersMatchSerial) {
  std::mt19937_64 rng(21);
  TierConfig c;
  c.short_cap_frames = 2;
  c.mid_cap_frames = 4;
  c.token_budget = 200;
  c.tokens_per_frame_max = 16;
  TieredMemory mem(c, testing::axis_bank(8), 8);
  for (int f = 0; f < 30; ++f) mem.ingest_frame(f, testing::random_frame(rng, 16, 8));
  const auto snap = mem.freeze();
  std::vector<QuerySpec> queries;
  for (int i = 0; i < 16; ++i) queries.push_back(query_of({testing::random_vector(rng, 8)}, 30, 2.0));
  std::vector<RetrievalResult> expected;
  for (const auto& q : queries) expected.push_back(retrieve(snap, snap.gate(), q));

  std::vector<RetrievalResult> got(queries.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    threads.emplace_back([&, i] { got[i] = retrieve(snap, snap.gate(), queries[i], {GateMode::ema, Exec::parallel}); });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(got, expected);
}

// With nothing ever compressed, engine ranking equals the brute-force ranking.
TEST(Retrieve, UncompressedRankingMatchesOracle) {
  std::mt19937_64 rng(31);
  const std::size_t d = 12;
  TierConfig c;
  c.short_cap_frames = 2;
  c.keep_fraction = 1.0;
  c.mid_cap_frames = 1000;
  c.token_budget = 100000;
  c.tokens_per_frame_max = 16;
  for (int trial = 0; trial < 20; ++trial) {
    TieredMemory mem(c, testing::axis_bank(d), d);
    std::vector<TraceFrame> frames;
    for (std::uint64_t f = 0; f < 20; ++f) {
      TraceFrame fr{f, double(f), testing::random_frame(rng, 1 + rng() % 16, d)};
      mem.ingest_frame(fr.timestamp, fr.tokens);
      frames.push_back(fr);
    }
    const auto snap = mem.freeze();
    const auto q = query_of({testing::random_vector(rng, d), testing::random_vector(rng, d)}, 19, 2.0, 5);
    const auto engine = rank_top_k(score_candidates(snap, q), 5);
    const auto oracle = oracle_rank(frames, q, snap.short_tier().size()).top(5);
    EXPECT_EQ(engine, oracle);
  }
}

TEST(QuerySpec, JsonParsing) {
  std::istringstream in(
      R"({"id":"a","arrival_time":3.5,"tokens":[[3,4]],"rho":0.1,"top_k":2,"lambda":0.25,"ground_truth_frames":[7]})"
      "\n\n"
      R"({"id":"b","arrival_time":1,"tokens":[[1,0],[0,2]]})"
      "\n");
  const auto qs = parse_queries(in, 2);
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0].id, "a");
  EXPECT_FLOAT_EQ(qs[0].tokens[0].values()[0], 0.6f);
  EXPECT_EQ(qs[0].top_k, 2u);
  EXPECT_EQ(qs[0].dispersion_lambda, 0.25);
  EXPECT_EQ(qs[0].ground_truth_frames, (std::vector<std::uint64_t>{7}));
  EXPECT_EQ(qs[1].rho, 2.0);
  EXPECT_EQ(qs[1].top_k, 5u);
  EXPECT_FALSE(qs[1].ground_truth_frames.has_value());

  const auto again = QuerySpec::from_json(qs[0].to_json(), 2);
  EXPECT_EQ(again.tokens, qs[0].tokens);
  EXPECT_EQ(again.ground_truth_frames, qs[0].ground_truth_frames);
}

TEST(QuerySpec, Validation) {
  auto parse = [](const char* line, std::size_t dim) {
    std::istringstream in(line);
    return parse_queries(in, dim);
  };
  EXPECT_THROW(parse(R"({"id":"a","arrival_time":0,"tokens":[]})", 2), EmptyInputError);
  EXPECT_THROW(parse(R"({"id":"a","arrival_time":0,"tokens":[[1,0,0]]})", 2), DimensionError);
  EXPECT_THROW(parse(R"({"id":"a","arrival_time":0,"tokens":[[1,0]],"top_k":0})", 2), ValidationError);
  EXPECT_THROW(parse(R"({"id":"a","arrival_time":0,"tokens":[[1,0]],"rho":-1})", 2), ValidationError);
  EXPECT_THROW(parse("not json", 2), ValidationError);
}

}  // namespace
}  // namespace tiermem

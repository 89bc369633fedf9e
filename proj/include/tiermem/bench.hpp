// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Harness drivers behind the CLI: ingest runs, pseudo-streaming query replay
// under ablation variants, the brute-force oracle, growth sweeps and score
// histograms. Reports are JSON lines or CSV; wall-clock numbers live only
// under "timings" keys so everything else is reproducible byte for byte.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tiermem/oracle.hpp"
#include "tiermem/retrieval.hpp"
#include "tiermem/synth.hpp"
#include "tiermem/tiers.hpp"
#include "tiermem/traceio.hpp"

namespace tiermem {

enum class PriorMode { bank, random_vectors, single_probe };
enum class StageMode { full, stage1_only, stage2_only };

struct Variant {
  GateMode gate = GateMode::ema;
  PriorMode prior = PriorMode::bank;
  StageMode stage = StageMode::full;

  // "gate=<ema|never|always>,prior=<bank|random|single>,stage=<full|s1|s2>";
  // omitted keys keep defaults. Throws UnknownVariant.
  static Variant parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const Variant&, const Variant&) = default;
};

// Pull-based frame stream; returns nullopt at the end.
using FrameSource = std::function<std::optional<TraceFrame>()>;
FrameSource frames_from(std::span<const TraceFrame> frames);
FrameSource frames_from(TraceReader& reader);

// Configuration of the memory the variant actually runs with.
TierConfig effective_config(const TierConfig& config, StageMode stage);
ProbeBank effective_bank(const ProbeBank& bank, PriorMode prior, std::uint64_t seed);

// Drops the "timings" key from every JSON line, for reproducibility checks.
std::string strip_timings(std::string_view jsonl);

struct RunContext {
  TierConfig config;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;
  nlohmann::json source;  // how the frames were produced (path or synth spec)
};

struct IngestRunReport {
  nlohmann::json header;
  std::vector<IngestReport> frames;
  std::size_t final_tokens = 0;
  std::size_t peak_tokens = 0;       // largest transient count during any ingest
  std::size_t peak_committed = 0;    // largest count after any completed ingest
  TierCounts short_tier, mid_tier, long_tier;
  double ingest_seconds = 0.0;

  [[nodiscard]] std::string to_jsonl() const;
};

IngestRunReport run_ingest(const FrameSource& source, const RunContext& ctx, const ProbeBank& bank);

struct QueryOutcome {
  std::string id;
  double arrival_time = 0.0;
  double freeze_time = 0.0;
  RetrievalResult result;  // frame indices are trace frame indices
  std::vector<std::uint64_t> memory_frames;  // anchors plus retrieved, temporal order
  std::optional<double> recall;
  std::vector<std::uint64_t> oracle_top_k;
  std::optional<double> oracle_overlap;
  std::optional<double> rank_correlation;
  bool causal = true;
  double retrieve_seconds = 0.0;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct ReplayReport {
  nlohmann::json header;
  std::vector<QueryOutcome> queries;  // in input order
  std::optional<double> mean_recall;
  bool all_causal = true;
  double total_seconds = 0.0;

  [[nodiscard]] std::string to_jsonl() const;
};

// Pseudo-streaming replay: for each query (by arrival time) ingest every frame
// up to its arrival, freeze, retrieve under the variant, compare, release.
ReplayReport run_query_replay(const FrameSource& source, std::span<const QuerySpec> queries,
                              const RunContext& ctx, const ProbeBank& bank, const Variant& variant);

struct OracleReport {
  std::vector<OracleRanking> rankings;
  std::vector<std::size_t> top_k;

  [[nodiscard]] std::string to_jsonl() const;
};

OracleReport run_oracle(std::span<const TraceFrame> frames, std::span<const QuerySpec> queries);

struct GrowthRow {
  std::size_t length = 0;
  std::size_t final_tokens = 0;
  std::size_t peak_tokens = 0;
};

// Limits a spec to its first `length` frames, stretching the last segment if
// the spec is shorter than that and dropping events past the end.
StreamSpec resize_spec(const StreamSpec& spec, std::size_t length);

// Throws ValidationError if lengths are not ascending.
std::vector<GrowthRow> run_growth_sweep(std::span<const std::size_t> lengths,
                                        const StreamSpec& base, const RunContext& ctx,
                                        const ProbeBank& bank);
std::string growth_csv(std::span<const GrowthRow> rows);

struct Histogram {
  std::vector<double> edges;  // bins + 1 edges
  std::vector<std::size_t> counts;

  [[nodiscard]] std::string to_csv() const;
};

// Equal-width bins over [min, max]; a single bin when all values coincide.
Histogram make_histogram(std::span<const double> values, std::size_t bins);

struct ScoreHistograms {
  Histogram frame_level;
  Histogram token_level;
  std::uint64_t designated_frame = 0;
  double token_mean = 0.0;
  double token_median = 0.0;
  std::size_t frames = 0;

  [[nodiscard]] bool right_skewed() const { return token_mean > token_median; }
  [[nodiscard]] nlohmann::json summary() const;
};

// Frame-level pooled scores for every frame and token-level scores of one
// frame (default: the highest pooled score, earliest on ties).
ScoreHistograms emit_score_histograms(const FrameSource& source, const RunContext& ctx,
                                      const ProbeBank& bank,
                                      std::optional<std::uint64_t> designated_frame,
                                      std::size_t bins);

}  // namespace tiermem

// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Query-time retrieval over a frozen memory snapshot: recency gate against the
// short tier, late-interaction scoring of mid and long frames, and a
// dispersion-adaptive cut of the ranking. Everything here is read-only.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tiermem/gate.hpp"
#include "tiermem/kernels.hpp"
#include "tiermem/tiers.hpp"
#include "tiermem/vecspace.hpp"

namespace tiermem {

struct QuerySpec {
  std::string id;
  std::vector<Embedding> tokens;
  double arrival_time = 0.0;
  double rho = 2.0;
  std::size_t top_k = 5;
  double dispersion_lambda = 0.5;
  std::optional<std::vector<std::uint64_t>> ground_truth_frames;

  // Throws ValidationError subclasses on malformed fields.
  void validate(std::size_t dim) const;
  // Tokens are normalized on parse.
  static QuerySpec from_json(const nlohmann::json& doc, std::size_t dim);
  [[nodiscard]] nlohmann::json to_json() const;
};

// One JSON document per non-blank line.
std::vector<QuerySpec> parse_queries(std::istream& in, std::size_t dim);
std::vector<QuerySpec> load_queries(const std::filesystem::path& path, std::size_t dim);

struct GateDecision {
  bool short_only = false;
  double affinity = 0.0;
  double threshold = 0.0;
};

// affinity = pooled late interaction of all short-tier tokens against the
// query (or the single best pair under GatePooling::global_max);
// threshold = rho * max(ema, floor). An empty short tier never passes.
GateDecision gate_check(const MemorySnapshot& snapshot, const GateState& gate,
                        const QuerySpec& query, Exec exec = Exec::serial);

// Late-interaction score of every mid and long frame, keyed by frame index.
using FrameScores = std::map<std::uint64_t, double>;
FrameScores score_candidates(const MemorySnapshot& snapshot, const QuerySpec& query,
                             Exec exec = Exec::serial);

// Number of score_candidates calls in this process (instrumentation).
std::uint64_t score_candidates_calls();

// Frames by descending score, ties to the more recent frame, first k kept.
std::vector<std::uint64_t> rank_top_k(const FrameScores& scores, std::size_t k);

// Frames scoring at least mean + lambda * sd, clamped to [1, k]; the top k
// when the scores have no spread. Returned in temporal order.
std::vector<std::uint64_t> adaptive_select(const FrameScores& scores, std::size_t k, double lambda);

enum class GateMode { ema, never, always };

struct RetrievalResult {
  bool gated_short_only = false;
  std::vector<std::uint64_t> anchor_frames;
  std::vector<std::uint64_t> retrieved_frames;
  FrameScores frame_scores;
  double gate_affinity = 0.0;
  double gate_threshold = 0.0;

  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
  [[nodiscard]] nlohmann::json to_json() const;
};

struct RetrieveOptions {
  GateMode gate = GateMode::ema;
  Exec exec = Exec::serial;
};

// Gate, then score and select when the gate routes past the short tier. The
// short-tier frames are always reported as anchors.
RetrievalResult retrieve(const MemorySnapshot& snapshot, const GateState& gate,
                         const QuerySpec& query, const RetrieveOptions& options = {});

}  // namespace tiermem

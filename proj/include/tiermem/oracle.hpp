// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force late-interaction ranking over uncompressed frames. Written
// against raw trace data in double precision and shares no scoring or ranking
// code with the engine, so it can serve as an independent cross-check.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tiermem/retrieval.hpp"
#include "tiermem/traceio.hpp"

namespace tiermem {

struct OracleRanking {
  std::string query_id;
  // (frame_index, score) for every eligible frame, in stream order.
  std::vector<std::pair<std::uint64_t, double>> scores;
  // Eligible frames by descending score, ties to the more recent frame.
  std::vector<std::uint64_t> ranked;

  [[nodiscard]] std::vector<std::uint64_t> top(std::size_t k) const;
  [[nodiscard]] nlohmann::json to_json(std::size_t k) const;
};

// Scores every frame with timestamp <= query.arrival_time, skipping the
// `exclude_latest` most recent of those (the anchor window).
OracleRanking oracle_rank(std::span<const TraceFrame> frames, const QuerySpec& query,
                          std::size_t exclude_latest = 0);

}  // namespace tiermem

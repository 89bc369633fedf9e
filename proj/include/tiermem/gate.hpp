// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "json.hpp"

namespace tiermem {

// Running statistic the recency gate compares query affinity against. It is
// fed the pooled probe score of every ingested frame, so it never sees a query.
struct GateState {
  double ema = 0.0;
  double decay = 0.9;
  double floor = 1e-6;
  std::uint64_t observations = 0;

  friend bool operator==(const GateState&, const GateState&) = default;
};

// First observation initializes the average; later ones blend with weight 1 - decay.
[[nodiscard]] GateState update_gate(GateState gate, double frame_pooled_score);

nlohmann::json to_json(const GateState& gate);

}  // namespace tiermem

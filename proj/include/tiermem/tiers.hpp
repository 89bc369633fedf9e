// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Query-agnostic streaming memory: a full-fidelity short FIFO, a mid tier fed
// by temporal pruning, a long tier fed by spatial selection, and a global token
// budget enforced by evicting the least salient long-tier tokens.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tiermem/gate.hpp"
#include "tiermem/kernels.hpp"
#include "tiermem/vecspace.hpp"

namespace tiermem {

// One token as it arrives from the encoder: unnormalized values plus its cell.
struct RawToken {
  std::vector<float> values;
  std::uint16_t row = 0;
  std::uint16_t col = 0;

  friend bool operator==(const RawToken&, const RawToken&) = default;
};

struct TokenRecord {
  Embedding embedding;
  double score = 0.0;  // max_sim against the probe bank, computed once at ingest
  std::uint64_t frame_index = 0;
  std::uint32_t token_index = 0;  // position within the frame at ingest
  std::uint16_t row = 0;
  std::uint16_t col = 0;

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

struct FrameEntry {
  std::uint64_t frame_index = 0;
  double timestamp = 0.0;
  std::vector<TokenRecord> tokens;
  bool scene_boundary = false;
  double pooled_score = 0.0;
  // Spatial extent at ingest (max row/col + 1), so selection on a pruned frame
  // still maps cells against the original grid.
  std::uint32_t grid_rows = 0;
  std::uint32_t grid_cols = 0;

  void refresh_pooled_score();
  void refresh_extent();
  [[nodiscard]] RowSet rows(std::size_t dim) const;

  friend bool operator==(const FrameEntry&, const FrameEntry&) = default;
};

enum class GatePooling { mean_of_max, global_max };

struct TierConfig {
  std::size_t short_cap_frames = 4;
  std::size_t mid_cap_frames = 16;
  std::size_t token_budget = 2048;
  double keep_fraction = 0.5;
  double semantic_weight = 1.0;
  double scene_threshold = 0.8;
  std::size_t grid_size = 4;
  std::size_t long_quota_per_frame = 16;
  std::size_t tokens_per_frame_max = 512;
  double gate_decay = 0.9;
  double gate_floor = 1e-6;
  GatePooling gate_pooling = GatePooling::mean_of_max;

  // Throws ConfigError on a field out of range or when the short tier alone
  // could exceed the token budget.
  void validate() const;

  // Unspecified fields keep their defaults; unknown fields are rejected.
  static TierConfig from_json(const nlohmann::json& doc);
  static TierConfig load(const std::filesystem::path& path);
  [[nodiscard]] nlohmann::json to_json() const;

  friend bool operator==(const TierConfig&, const TierConfig&) = default;
};

enum class Tier { short_term, mid_term, long_term };
const char* tier_name(Tier tier);

struct TierSet {
  std::deque<FrameEntry> short_tier;
  std::deque<FrameEntry> mid_tier;
  std::deque<FrameEntry> long_tier;

  [[nodiscard]] std::size_t token_count() const;

  friend bool operator==(const TierSet&, const TierSet&) = default;
};

struct EvictedToken {
  std::uint64_t frame_index = 0;
  std::uint32_t token_index = 0;
  double score = 0.0;
  Tier tier = Tier::long_term;
};

struct EvictionReport {
  std::vector<EvictedToken> evicted;
  std::size_t frames_removed = 0;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct TierCounts {
  std::size_t frames = 0;
  std::size_t tokens = 0;
};

struct IngestReport {
  std::uint64_t frame_index = 0;
  double timestamp = 0.0;
  std::size_t tokens_in = 0;
  bool scene_boundary = false;
  double pooled_score = 0.0;
  TierCounts short_tier;
  TierCounts mid_tier;
  TierCounts long_tier;
  std::size_t total_tokens = 0;
  std::size_t peak_tokens = 0;  // transient count right after the frame is appended
  std::optional<std::uint64_t> demoted_to_mid;
  std::size_t pruned_tokens = 0;
  std::optional<std::uint64_t> demoted_to_long;
  std::size_t deselected_tokens = 0;
  EvictionReport forgetting;

  [[nodiscard]] nlohmann::json to_json() const;
};

// Frame-level mean max-cosine against prev below the scene threshold. True
// when there is no previous frame.
bool is_scene_boundary(const FrameEntry& frame, const FrameEntry* prev, const TierConfig& config,
                       Exec exec = Exec::serial);

// Short -> mid demotion. Scene-boundary frames pass through untouched. Otherwise
// token i gets redundancy r_i against the reference token in the same cell
// and keep-score (1 - r_i) + semantic_weight * s_i; the top
// ceil(keep_fraction * n) survive, ties going to the lower token index.
FrameEntry temporal_semantic_prune(const FrameEntry& frame, const FrameEntry* reference,
                                   const TierConfig& config);

// Mid -> long demotion. One winner per occupied grid cell first, then global
// fill by score, capped at long_quota_per_frame tokens.
FrameEntry spatial_semantic_select(const FrameEntry& frame, const TierConfig& config);

// Evicts the lowest-score long-tier tokens until the set fits the budget,
// falling back to the mid tier once long is empty. The short tier is never
// touched; throws BudgetUnsatisfiable if it alone is over budget.
EvictionReport selective_forget(TierSet& tiers, std::size_t budget);

// Immutable view of the tiers at freeze time. Cheap to copy and safe to read
// from any number of threads.
class MemorySnapshot {
 public:
  MemorySnapshot(TierSet tiers, GateState gate, TierConfig config, std::size_t dim,
                 double freeze_time);

  [[nodiscard]] const std::deque<FrameEntry>& short_tier() const { return data_->tiers.short_tier; }
  [[nodiscard]] const std::deque<FrameEntry>& mid_tier() const { return data_->tiers.mid_tier; }
  [[nodiscard]] const std::deque<FrameEntry>& long_tier() const { return data_->tiers.long_tier; }
  [[nodiscard]] const TierSet& tiers() const { return data_->tiers; }
  [[nodiscard]] const GateState& gate() const { return data_->gate; }
  [[nodiscard]] const TierConfig& config() const { return data_->config; }
  [[nodiscard]] std::size_t dim() const { return data_->dim; }
  [[nodiscard]] double freeze_time() const { return data_->freeze_time; }
  [[nodiscard]] std::size_t total_tokens() const { return data_->tiers.token_count(); }

  friend bool operator==(const MemorySnapshot& a, const MemorySnapshot& b) {
    return a.data_->tiers == b.data_->tiers && a.data_->gate == b.data_->gate &&
           a.data_->config == b.data_->config && a.data_->dim == b.data_->dim &&
           a.data_->freeze_time == b.data_->freeze_time;
  }

 private:
  struct Data {
    TierSet tiers;
    GateState gate;
    TierConfig config;
    std::size_t dim;
    double freeze_time;
  };
  std::shared_ptr<const Data> data_;
};

// Single-writer streaming memory. Stage-one operations take no query input;
// the probe bank is the only semantic signal.
class TieredMemory {
 public:
  // Throws ConfigError on an invalid config, DimensionError when the bank
  // dimension differs from the session dimension.
  TieredMemory(TierConfig config, ProbeBank bank, std::size_t dim, Exec exec = Exec::parallel);

  // Throws FrozenMemory, NonMonotoneTimestamp, EmptyFrame, FrameTooLarge or
  // DimensionError; on any error the memory is left unchanged.
  IngestReport ingest_frame(double timestamp, std::span<const RawToken> raw_tokens);

  // Rejects ingest until release(). freeze_time defaults to the last ingested
  // timestamp (0 for an empty memory) and may not precede it.
  MemorySnapshot freeze(std::optional<double> freeze_time = std::nullopt);
  void release() { frozen_ = false; }
  [[nodiscard]] bool frozen() const { return frozen_; }

  [[nodiscard]] const TierSet& tiers() const { return tiers_; }
  [[nodiscard]] const GateState& gate() const { return gate_; }
  [[nodiscard]] const TierConfig& config() const { return config_; }
  [[nodiscard]] const ProbeBank& bank() const { return bank_; }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t total_tokens() const { return total_tokens_; }
  [[nodiscard]] std::uint64_t frames_ingested() const { return next_index_; }

 private:
  TierConfig config_;
  ProbeBank bank_;
  std::size_t dim_;
  Exec exec_;
  TierSet tiers_;
  GateState gate_;
  std::size_t total_tokens_ = 0;
  std::uint64_t next_index_ = 0;
  std::optional<double> last_timestamp_;
  bool frozen_ = false;
};

}  // namespace tiermem

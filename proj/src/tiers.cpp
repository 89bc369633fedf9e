// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiermem/tiers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "tiermem/errors.hpp"

namespace tiermem {

namespace {

// ceil(p * n) clamped to [1, n]; the epsilon keeps 0.3 * 10 at 3.
std::size_t keep_count(double fraction, std::size_t n) {
  const double raw = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  const auto k = static_cast<std::size_t>(std::max(1.0, raw));
  return std::min(k, n);
}

std::uint32_t cell_key(std::uint16_t row, std::uint16_t col) {
  return (static_cast<std::uint32_t>(row) << 16) | col;
}

template <typename T>
T json_field(const nlohmann::json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

}  // namespace

void FrameEntry::refresh_pooled_score() {
  double sum = 0.0;
  for (const auto& t : tokens) sum += t.score;
  pooled_score = tokens.empty() ? 0.0 : sum / static_cast<double>(tokens.size());
}

void FrameEntry::refresh_extent() {
  grid_rows = 0;
  grid_cols = 0;
  for (const auto& t : tokens) {
    grid_rows = std::max<std::uint32_t>(grid_rows, t.row + 1u);
    grid_cols = std::max<std::uint32_t>(grid_cols, t.col + 1u);
  }
}

RowSet FrameEntry::rows(std::size_t dim) const {
  RowSet out(dim);
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push(t.embedding.data());
  return out;
}

void TierConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (short_cap_frames == 0) fail("short_cap_frames must be positive");
  if (mid_cap_frames == 0) fail("mid_cap_frames must be positive");
  if (token_budget == 0) fail("token_budget must be positive");
  if (grid_size == 0) fail("grid_size must be positive");
  if (long_quota_per_frame == 0) fail("long_quota_per_frame must be positive");
  if (tokens_per_frame_max == 0) fail("tokens_per_frame_max must be positive");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) fail("keep_fraction must be in (0, 1]");
  if (!(semantic_weight >= 0.0) || !std::isfinite(semantic_weight)) {
    fail("semantic_weight must be finite and >= 0");
  }
  if (!(scene_threshold > -1.0 && scene_threshold < 1.0)) fail("scene_threshold must be in (-1, 1)");
  if (!(gate_decay > 0.0 && gate_decay < 1.0)) fail("gate_decay must be in (0, 1)");
  if (!(gate_floor > 0.0) || !std::isfinite(gate_floor)) fail("gate_floor must be positive");
  // Overflow-safe form of short_cap_frames * tokens_per_frame_max <= token_budget.
  if (short_cap_frames > token_budget / tokens_per_frame_max) {
    fail("short_cap_frames * tokens_per_frame_max exceeds token_budget");
  }
}

TierConfig TierConfig::from_json(const nlohmann::json& doc) {
  static const char* const kKnown[] = {
      "short_cap_frames", "mid_cap_frames",       "token_budget",         "keep_fraction",
      "semantic_weight",  "scene_threshold",      "grid_size",            "long_quota_per_frame",
      "tokens_per_frame_max", "gate_decay",       "gate_floor",           "gate_pooling"};
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ConfigError("config: unknown field '" + key + "'");
    }
  }
  TierConfig c;
  try {
    c.short_cap_frames = json_field(doc, "short_cap_frames", c.short_cap_frames);
    c.mid_cap_frames = json_field(doc, "mid_cap_frames", c.mid_cap_frames);
    c.token_budget = json_field(doc, "token_budget", c.token_budget);
    c.keep_fraction = json_field(doc, "keep_fraction", c.keep_fraction);
    c.semantic_weight = json_field(doc, "semantic_weight", c.semantic_weight);
    c.scene_threshold = json_field(doc, "scene_threshold", c.scene_threshold);
    c.grid_size = json_field(doc, "grid_size", c.grid_size);
    c.long_quota_per_frame = json_field(doc, "long_quota_per_frame", c.long_quota_per_frame);
    c.tokens_per_frame_max = json_field(doc, "tokens_per_frame_max", c.tokens_per_frame_max);
    c.gate_decay = json_field(doc, "gate_decay", c.gate_decay);
    c.gate_floor = json_field(doc, "gate_floor", c.gate_floor);
    const auto pooling = json_field<std::string>(doc, "gate_pooling", "mean_of_max");
    if (pooling == "mean_of_max") {
      c.gate_pooling = GatePooling::mean_of_max;
    } else if (pooling == "global_max") {
      c.gate_pooling = GatePooling::global_max;
    } else {
      throw ConfigError("config: gate_pooling must be mean_of_max or global_max");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

TierConfig TierConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json TierConfig::to_json() const {
  return {
      {"short_cap_frames", short_cap_frames},
      {"mid_cap_frames", mid_cap_frames},
      {"token_budget", token_budget},
      {"keep_fraction", keep_fraction},
      {"semantic_weight", semantic_weight},
      {"scene_threshold", scene_threshold},
      {"grid_size", grid_size},
      {"long_quota_per_frame", long_quota_per_frame},
      {"tokens_per_frame_max", tokens_per_frame_max},
      {"gate_decay", gate_decay},
      {"gate_floor", gate_floor},
      {"gate_pooling", gate_pooling == GatePooling::mean_of_max ? "mean_of_max" : "global_max"},
  };
}

const char* tier_name(Tier tier) {
  switch (tier) {
    case Tier::short_term: return "short";
    case Tier::mid_term: return "mid";
    case Tier::long_term: return "long";
  }
  return "?";
}

std::size_t TierSet::token_count() const {
  std::size_t n = 0;
  for (const auto* tier : {&short_tier, &mid_tier, &long_tier}) {
    for (const auto& f : *tier) n += f.tokens.size();
  }
  return n;
}

nlohmann::json EvictionReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : evicted) {
    list.push_back({e.frame_index, e.token_index, e.score, tier_name(e.tier)});
  }
  return {{"evicted", std::move(list)}, {"frames_removed", frames_removed}};
}

nlohmann::json IngestReport::to_json() const {
  auto counts = [](const TierCounts& c) {
    return nlohmann::json{{"frames", c.frames}, {"tokens", c.tokens}};
  };
  auto opt = [](const std::optional<std::uint64_t>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {
      {"frame_index", frame_index},
      {"timestamp", timestamp},
      {"tokens_in", tokens_in},
      {"scene_boundary", scene_boundary},
      {"pooled_score", pooled_score},
      {"short", counts(short_tier)},
      {"mid", counts(mid_tier)},
      {"long", counts(long_tier)},
      {"total_tokens", total_tokens},
      {"peak_tokens", peak_tokens},
      {"demoted_to_mid", opt(demoted_to_mid)},
      {"pruned_tokens", pruned_tokens},
      {"demoted_to_long", opt(demoted_to_long)},
      {"deselected_tokens", deselected_tokens},
      {"forgetting", forgetting.to_json()},
  };
}

bool is_scene_boundary(const FrameEntry& frame, const FrameEntry* prev, const TierConfig& config,
                       Exec exec) {
  if (prev == nullptr || prev->tokens.empty() || frame.tokens.empty()) return true;
  const std::size_t dim = frame.tokens.front().embedding.dim();
  const double similarity = mean_max_dot(frame.rows(dim), prev->rows(dim), exec);
  return similarity < config.scene_threshold;
}

FrameEntry temporal_semantic_prune(const FrameEntry& frame, const FrameEntry* reference,
                                   const TierConfig& config) {
  if (frame.tokens.empty()) throw EmptyFrame("temporal_semantic_prune: frame has no tokens");
  if (frame.scene_boundary) return frame;

  std::unordered_map<std::uint32_t, const TokenRecord*> aligned;
  if (reference != nullptr) {
    aligned.reserve(reference->tokens.size());
    for (const auto& t : reference->tokens) aligned.try_emplace(cell_key(t.row, t.col), &t);
  }

  const std::size_t n = frame.tokens.size();
  std::vector<double> keep_score(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = frame.tokens[i];
    double redundancy = 0.0;
    if (auto it = aligned.find(cell_key(t.row, t.col)); it != aligned.end()) {
      redundancy = cosine(t.embedding, it->second->embedding);
    }
    keep_score[i] = (1.0 - redundancy) + config.semantic_weight * t.score;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = keep_count(config.keep_fraction, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (keep_score[a] != keep_score[b]) return keep_score[a] > keep_score[b];
                      return a < b;
                    });
  order.resize(keep);
  std::sort(order.begin(), order.end());

  FrameEntry out = frame;
  out.tokens.clear();
  out.tokens.reserve(keep);
  for (std::size_t i : order) out.tokens.push_back(frame.tokens[i]);
  out.refresh_pooled_score();
  return out;
}

FrameEntry spatial_semantic_select(const FrameEntry& frame, const TierConfig& config) {
  if (frame.tokens.empty()) throw EmptyFrame("spatial_semantic_select: frame has no tokens");

  std::uint32_t rows = frame.grid_rows;
  std::uint32_t cols = frame.grid_cols;
  if (rows == 0 || cols == 0) {
    FrameEntry probe = frame;
    probe.refresh_extent();
    rows = probe.grid_rows;
    cols = probe.grid_cols;
  }
  const auto grid = static_cast<std::uint64_t>(config.grid_size);
  auto cell_of = [&](const TokenRecord& t) {
    const std::uint64_t r = std::min<std::uint64_t>(grid - 1, t.row * grid / rows);
    const std::uint64_t c = std::min<std::uint64_t>(grid - 1, t.col * grid / cols);
    return r * grid + c;
  };

  const std::size_t n = frame.tokens.size();
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = frame.tokens[a].score;
    const double sb = frame.tokens[b].score;
    if (sa != sb) return sa > sb;
    return a < b;
  };

  std::unordered_map<std::uint64_t, std::size_t> winner;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = winner.try_emplace(cell_of(frame.tokens[i]), i);
    if (!inserted && better(i, it->second)) it->second = i;
  }

  std::vector<std::size_t> cell_winners;
  cell_winners.reserve(winner.size());
  for (const auto& [_, i] : winner) cell_winners.push_back(i);
  std::sort(cell_winners.begin(), cell_winners.end(), better);

  const std::size_t quota = config.long_quota_per_frame;
  std::vector<bool> chosen(n, false);
  std::size_t taken = 0;
  for (std::size_t i : cell_winners) {
    if (taken == quota) break;
    chosen[i] = true;
    ++taken;
  }
  if (taken < quota) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (!chosen[i]) rest.push_back(i);
    }
    std::sort(rest.begin(), rest.end(), better);
    for (std::size_t i : rest) {
      if (taken == quota) break;
      chosen[i] = true;
      ++taken;
    }
  }

  FrameEntry out = frame;
  out.tokens.clear();
  out.tokens.reserve(taken);
  for (std::size_t i = 0; i < n; ++i) {
    if (chosen[i]) out.tokens.push_back(frame.tokens[i]);
  }
  out.grid_rows = rows;
  out.grid_cols = cols;
  out.refresh_pooled_score();
  return out;
}

namespace {

struct Candidate {
  double score;
  std::uint64_t frame_index;
  std::uint32_t token_index;
  std::size_t frame_pos;
  std::size_t token_pos;
};

// Evicts up to `want` tokens from one tier in (score, frame, token) order and
// drops frames left empty. Returns how many were evicted.
std::size_t evict_from(std::deque<FrameEntry>& tier, Tier which, std::size_t want,
                       EvictionReport& report) {
  if (want == 0 || tier.empty()) return 0;
  std::vector<Candidate> pool;
  for (std::size_t f = 0; f < tier.size(); ++f) {
    const auto& frame = tier[f];
    for (std::size_t t = 0; t < frame.tokens.size(); ++t) {
      const auto& tok = frame.tokens[t];
      pool.push_back({tok.score, frame.frame_index, tok.token_index, f, t});
    }
  }
  const std::size_t take = std::min(want, pool.size());
  auto before = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.frame_index != b.frame_index) return a.frame_index < b.frame_index;
    return a.token_index < b.token_index;
  };
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                    before);

  std::vector<std::vector<bool>> drop(tier.size());
  for (std::size_t f = 0; f < tier.size(); ++f) drop[f].assign(tier[f].tokens.size(), false);
  for (std::size_t k = 0; k < take; ++k) {
    const auto& c = pool[k];
    drop[c.frame_pos][c.token_pos] = true;
    report.evicted.push_back({c.frame_index, c.token_index, c.score, which});
  }

  std::deque<FrameEntry> kept;
  for (std::size_t f = 0; f < tier.size(); ++f) {
    auto& frame = tier[f];
    std::vector<TokenRecord> survivors;
    survivors.reserve(frame.tokens.size());
    for (std::size_t t = 0; t < frame.tokens.size(); ++t) {
      if (!drop[f][t]) survivors.push_back(std::move(frame.tokens[t]));
    }
    if (survivors.empty()) {
      ++report.frames_removed;
      continue;
    }
    const bool changed = survivors.size() != frame.tokens.size();
    frame.tokens = std::move(survivors);
    if (changed) frame.refresh_pooled_score();
    kept.push_back(std::move(frame));
  }
  tier = std::move(kept);
  return take;
}

}  // namespace

EvictionReport selective_forget(TierSet& tiers, std::size_t budget) {
  EvictionReport report;
  const std::size_t total = tiers.token_count();
  if (total <= budget) return report;
  std::size_t excess = total - budget;
  excess -= evict_from(tiers.long_tier, Tier::long_term, excess, report);
  excess -= evict_from(tiers.mid_tier, Tier::mid_term, excess, report);
  if (excess > 0) {
    throw BudgetUnsatisfiable("selective_forget: short tier alone exceeds the token budget");
  }
  return report;
}

MemorySnapshot::MemorySnapshot(TierSet tiers, GateState gate, TierConfig config, std::size_t dim,
                               double freeze_time)
    : data_(std::make_shared<const Data>(
          Data{std::move(tiers), gate, std::move(config), dim, freeze_time})) {}

TieredMemory::TieredMemory(TierConfig config, ProbeBank bank, std::size_t dim, Exec exec)
    : config_(std::move(config)), bank_(std::move(bank)), dim_(dim), exec_(exec) {
  config_.validate();
  if (bank_.dim() != dim_) {
    throw DimensionError("probe bank dimension " + std::to_string(bank_.dim()) +
                         " does not match session dimension " + std::to_string(dim_));
  }
  gate_.decay = config_.gate_decay;
  gate_.floor = config_.gate_floor;
}

IngestReport TieredMemory::ingest_frame(double timestamp, std::span<const RawToken> raw_tokens) {
  if (frozen_) throw FrozenMemory("ingest_frame: memory is frozen until the snapshot is released");
  if (!std::isfinite(timestamp) || (last_timestamp_ && !(timestamp > *last_timestamp_))) {
    throw NonMonotoneTimestamp("ingest_frame: timestamp must be finite and strictly increasing");
  }
  if (raw_tokens.empty()) throw EmptyFrame("ingest_frame: frame has no tokens");
  if (raw_tokens.size() > config_.tokens_per_frame_max) {
    throw FrameTooLarge("ingest_frame: " + std::to_string(raw_tokens.size()) +
                        " tokens exceeds tokens_per_frame_max " +
                        std::to_string(config_.tokens_per_frame_max));
  }

  FrameEntry frame;
  frame.frame_index = next_index_;
  frame.timestamp = timestamp;
  frame.tokens.reserve(raw_tokens.size());
  for (std::size_t i = 0; i < raw_tokens.size(); ++i) {
    TokenRecord rec;
    rec.embedding = normalize(raw_tokens[i].values, dim_);
    rec.frame_index = frame.frame_index;
    rec.token_index = static_cast<std::uint32_t>(i);
    rec.row = raw_tokens[i].row;
    rec.col = raw_tokens[i].col;
    frame.tokens.push_back(std::move(rec));
  }
  {
    std::vector<double> scores(frame.tokens.size());
    max_sim_batch(frame.rows(dim_), bank_, scores, exec_);
    for (std::size_t i = 0; i < scores.size(); ++i) frame.tokens[i].score = scores[i];
  }
  frame.refresh_pooled_score();
  frame.refresh_extent();
  frame.scene_boundary = is_scene_boundary(
      frame, tiers_.short_tier.empty() ? nullptr : &tiers_.short_tier.back(), config_, exec_);

  IngestReport report;
  report.frame_index = frame.frame_index;
  report.timestamp = timestamp;
  report.tokens_in = frame.tokens.size();
  report.scene_boundary = frame.scene_boundary;
  report.pooled_score = frame.pooled_score;

  const double pooled = frame.pooled_score;
  total_tokens_ += frame.tokens.size();
  report.peak_tokens = total_tokens_;
  tiers_.short_tier.push_back(std::move(frame));

  if (tiers_.short_tier.size() > config_.short_cap_frames) {
    FrameEntry oldest = std::move(tiers_.short_tier.front());
    tiers_.short_tier.pop_front();
    FrameEntry pruned = temporal_semantic_prune(oldest, &tiers_.short_tier.back(), config_);
    report.demoted_to_mid = oldest.frame_index;
    report.pruned_tokens = oldest.tokens.size() - pruned.tokens.size();
    total_tokens_ -= report.pruned_tokens;
    tiers_.mid_tier.push_back(std::move(pruned));
  }
  if (tiers_.mid_tier.size() > config_.mid_cap_frames) {
    FrameEntry oldest = std::move(tiers_.mid_tier.front());
    tiers_.mid_tier.pop_front();
    FrameEntry selected = spatial_semantic_select(oldest, config_);
    report.demoted_to_long = oldest.frame_index;
    report.deselected_tokens = oldest.tokens.size() - selected.tokens.size();
    total_tokens_ -= report.deselected_tokens;
    tiers_.long_tier.push_back(std::move(selected));
  }
  report.forgetting = selective_forget(tiers_, config_.token_budget);
  total_tokens_ -= report.forgetting.evicted.size();

  gate_ = update_gate(gate_, pooled);
  last_timestamp_ = timestamp;
  ++next_index_;

  auto counts = [](const std::deque<FrameEntry>& tier) {
    TierCounts c;
    c.frames = tier.size();
    for (const auto& f : tier) c.tokens += f.tokens.size();
    return c;
  };
  report.short_tier = counts(tiers_.short_tier);
  report.mid_tier = counts(tiers_.mid_tier);
  report.long_tier = counts(tiers_.long_tier);
  report.total_tokens = total_tokens_;
  return report;
}

MemorySnapshot TieredMemory::freeze(std::optional<double> freeze_time) {
  const double last = last_timestamp_.value_or(0.0);
  const double at = freeze_time.value_or(last);
  if (last_timestamp_ && at < last) {
    throw NonMonotoneTimestamp("freeze: freeze time precedes the last ingested frame");
  }
  frozen_ = true;
  return MemorySnapshot(tiers_, gate_, config_, dim_, at);
}

}  // namespace tiermem

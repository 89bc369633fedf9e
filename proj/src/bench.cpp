// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiermem/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tiermem/errors.hpp"

namespace tiermem {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json bank_json(const ProbeBank& bank) {
  return {{"size", bank.size()},
          {"labels", std::vector<std::string>(bank.labels().begin(), bank.labels().end())}};
}

nlohmann::json counts_json(const TierCounts& c) {
  return {{"frames", c.frames}, {"tokens", c.tokens}};
}

TierCounts count_tier(const std::deque<FrameEntry>& tier) {
  TierCounts c;
  c.frames = tier.size();
  for (const auto& f : tier) c.tokens += f.tokens.size();
  return c;
}

// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean_rank = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || a.size() != b.size()) return std::nullopt;
  const auto ra = ranks_of(a);
  const auto rb = ranks_of(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

}  // namespace

Variant Variant::parse(std::string_view text) {
  Variant v;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw UnknownVariant("variant: expected key=value, got '" + std::string(item) + "'");
    }
    const auto key = item.substr(0, eq);
    const auto val = item.substr(eq + 1);
    auto bad = [&] {
      return UnknownVariant("variant: unknown " + std::string(key) + " '" + std::string(val) + "'");
    };
    if (key == "gate") {
      if (val == "ema") v.gate = GateMode::ema;
      else if (val == "never") v.gate = GateMode::never;
      else if (val == "always") v.gate = GateMode::always;
      else throw bad();
    } else if (key == "prior") {
      if (val == "bank") v.prior = PriorMode::bank;
      else if (val == "random") v.prior = PriorMode::random_vectors;
      else if (val == "single") v.prior = PriorMode::single_probe;
      else throw bad();
    } else if (key == "stage") {
      if (val == "full") v.stage = StageMode::full;
      else if (val == "s1") v.stage = StageMode::stage1_only;
      else if (val == "s2") v.stage = StageMode::stage2_only;
      else throw bad();
    } else {
      throw UnknownVariant("variant: unknown key '" + std::string(key) + "'");
    }
  }
  return v;
}

std::string Variant::to_string() const {
  static constexpr const char* kGate[] = {"ema", "never", "always"};
  static constexpr const char* kPrior[] = {"bank", "random", "single"};
  static constexpr const char* kStage[] = {"full", "s1", "s2"};
  return std::string("gate=") + kGate[static_cast<int>(gate)] +
         ",prior=" + kPrior[static_cast<int>(prior)] + ",stage=" + kStage[static_cast<int>(stage)];
}

FrameSource frames_from(std::span<const TraceFrame> frames) {
  return [frames, i = std::size_t{0}]() mutable -> std::optional<TraceFrame> {
    if (i >= frames.size()) return std::nullopt;
    return frames[i++];
  };
}

FrameSource frames_from(TraceReader& reader) {
  return [&reader]() { return reader.next(); };
}

TierConfig effective_config(const TierConfig& config, StageMode stage) {
  TierConfig c = config;
  if (stage == StageMode::stage2_only) {
    // Raw FIFO of every frame: no pruning, no spill to long, no budget.
    c.keep_fraction = 1.0;
    c.mid_cap_frames = std::numeric_limits<std::size_t>::max() / 4;
    c.token_budget = std::numeric_limits<std::size_t>::max() / 4;
  }
  return c;
}

ProbeBank effective_bank(const ProbeBank& bank, PriorMode prior, std::uint64_t seed) {
  switch (prior) {
    case PriorMode::bank: return bank;
    case PriorMode::random_vectors: return random_probe_bank(bank.size(), bank.dim(), seed);
    case PriorMode::single_probe: return bank.first_only();
  }
  return bank;
}

std::string strip_timings(std::string_view jsonl) {
  std::istringstream in{std::string(jsonl)};
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto doc = nlohmann::json::parse(line);
    if (doc.is_object()) doc.erase("timings");
    out += doc.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// ingest

std::string IngestRunReport::to_jsonl() const {
  std::string out = header.dump() + "\n";
  for (const auto& f : frames) {
    auto line = f.to_json();
    line["type"] = "frame";
    out += line.dump() + "\n";
  }
  nlohmann::json summary = {{"type", "summary"},
                            {"frames", frames.size()},
                            {"final_tokens", final_tokens},
                            {"peak_tokens", peak_tokens},
                            {"peak_committed", peak_committed},
                            {"short", counts_json(short_tier)},
                            {"mid", counts_json(mid_tier)},
                            {"long", counts_json(long_tier)},
                            {"timings", {{"ingest_seconds", ingest_seconds}}}};
  out += summary.dump() + "\n";
  return out;
}

IngestRunReport run_ingest(const FrameSource& source, const RunContext& ctx, const ProbeBank& bank) {
  IngestRunReport report;
  report.header = {{"type", "ingest"},
                   {"config", ctx.config.to_json()},
                   {"dim", ctx.dim},
                   {"seed", ctx.seed},
                   {"bank", bank_json(bank)},
                   {"source", ctx.source}};
  TieredMemory mem(ctx.config, bank, ctx.dim, ctx.exec);
  const auto start = Clock::now();
  while (auto frame = source()) {
    auto r = mem.ingest_frame(frame->timestamp, frame->tokens);
    report.peak_tokens = std::max(report.peak_tokens, r.peak_tokens);
    report.peak_committed = std::max(report.peak_committed, r.total_tokens);
    report.frames.push_back(std::move(r));
  }
  report.ingest_seconds = seconds_since(start);
  report.final_tokens = mem.total_tokens();
  report.short_tier = count_tier(mem.tiers().short_tier);
  report.mid_tier = count_tier(mem.tiers().mid_tier);
  report.long_tier = count_tier(mem.tiers().long_tier);
  return report;
}

// ---------------------------------------------------------------------------
// replay

nlohmann::json QueryOutcome::to_json() const {
  return {{"type", "query"},
          {"id", id},
          {"arrival_time", arrival_time},
          {"freeze_time", freeze_time},
          {"result", result.to_json()},
          {"memory_frames", memory_frames},
          {"recall", opt_json(recall)},
          {"oracle_top_k", oracle_top_k},
          {"oracle_overlap", opt_json(oracle_overlap)},
          {"rank_correlation", opt_json(rank_correlation)},
          {"causal", causal},
          {"timings", {{"retrieve_seconds", retrieve_seconds}}}};
}

std::string ReplayReport::to_jsonl() const {
  std::string out = header.dump() + "\n";
  for (const auto& q : queries) out += q.to_json().dump() + "\n";
  nlohmann::json summary = {{"type", "summary"},
                            {"queries", queries.size()},
                            {"mean_recall", opt_json(mean_recall)},
                            {"all_causal", all_causal},
                            {"timings", {{"total_seconds", total_seconds}}}};
  out += summary.dump() + "\n";
  return out;
}

ReplayReport run_query_replay(const FrameSource& source, std::span<const QuerySpec> queries,
                              const RunContext& ctx, const ProbeBank& bank, const Variant& variant) {
  const auto start = Clock::now();
  const TierConfig config = effective_config(ctx.config, variant.stage);
  const ProbeBank prior = effective_bank(bank, variant.prior, ctx.seed);

  ReplayReport report;
  report.header = {{"type", "replay"},
                   {"variant", variant.to_string()},
                   {"config", config.to_json()},
                   {"dim", ctx.dim},
                   {"seed", ctx.seed},
                   {"bank", bank_json(prior)},
                   {"source", ctx.source}};

  for (const auto& q : queries) q.validate(ctx.dim);
  std::vector<std::size_t> order(queries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return queries[a].arrival_time < queries[b].arrival_time;
  });

  TieredMemory mem(config, prior, ctx.dim, ctx.exec);
  std::vector<TraceFrame> seen;
  std::optional<TraceFrame> pending = source();
  report.queries.resize(queries.size());

  for (std::size_t qi : order) {
    const QuerySpec& query = queries[qi];
    while (pending && pending->timestamp <= query.arrival_time) {
      mem.ingest_frame(pending->timestamp, pending->tokens);
      seen.push_back(std::move(*pending));
      pending = source();
    }
    const auto t0 = Clock::now();
    const MemorySnapshot snap = mem.freeze(query.arrival_time);
    RetrievalResult raw;
    if (variant.stage == StageMode::stage1_only) {
      for (const auto& f : snap.short_tier()) raw.anchor_frames.push_back(f.frame_index);
      for (const auto* tier : {&snap.long_tier(), &snap.mid_tier()}) {
        for (const auto& f : *tier) raw.retrieved_frames.push_back(f.frame_index);
      }
    } else {
      raw = retrieve(snap, snap.gate(), query, {variant.gate, ctx.exec});
    }
    mem.release();

    auto trace_index = [&](std::uint64_t ordinal) { return seen.at(ordinal).frame_index; };
    QueryOutcome out;
    out.id = query.id;
    out.arrival_time = query.arrival_time;
    out.freeze_time = snap.freeze_time();
    out.result.gated_short_only = raw.gated_short_only;
    out.result.gate_affinity = raw.gate_affinity;
    out.result.gate_threshold = raw.gate_threshold;
    for (auto f : raw.anchor_frames) {
      out.result.anchor_frames.push_back(trace_index(f));
      out.causal = out.causal && seen.at(f).timestamp <= snap.freeze_time();
    }
    for (auto f : raw.retrieved_frames) {
      out.result.retrieved_frames.push_back(trace_index(f));
      out.causal = out.causal && seen.at(f).timestamp <= snap.freeze_time();
    }
    for (const auto& [f, s] : raw.frame_scores) out.result.frame_scores.emplace(trace_index(f), s);
    out.memory_frames = out.result.anchor_frames;
    out.memory_frames.insert(out.memory_frames.end(), out.result.retrieved_frames.begin(),
                             out.result.retrieved_frames.end());
    std::sort(out.memory_frames.begin(), out.memory_frames.end());

    if (query.ground_truth_frames && !query.ground_truth_frames->empty()) {
      std::size_t hit = 0;
      for (auto g : *query.ground_truth_frames) {
        if (std::binary_search(out.memory_frames.begin(), out.memory_frames.end(), g)) ++hit;
      }
      out.recall = static_cast<double>(hit) / static_cast<double>(query.ground_truth_frames->size());
    }

    const auto oracle = oracle_rank(seen, query, snap.short_tier().size());
    out.oracle_top_k = oracle.top(query.top_k);
    if (!out.oracle_top_k.empty()) {
      std::size_t hit = 0;
      for (auto f : out.oracle_top_k) {
        if (std::find(out.result.retrieved_frames.begin(), out.result.retrieved_frames.end(), f) !=
            out.result.retrieved_frames.end()) {
          ++hit;
        }
      }
      out.oracle_overlap = static_cast<double>(hit) / static_cast<double>(out.oracle_top_k.size());
    }
    if (!out.result.frame_scores.empty()) {
      std::vector<double> engine, truth;
      for (const auto& [f, s] : oracle.scores) {
        if (auto it = out.result.frame_scores.find(f); it != out.result.frame_scores.end()) {
          engine.push_back(it->second);
          truth.push_back(s);
        }
      }
      out.rank_correlation = spearman(engine, truth);
    }
    out.retrieve_seconds = seconds_since(t0);
    report.all_causal = report.all_causal && out.causal;
    report.queries[qi] = std::move(out);
  }

  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& q : report.queries) {
    if (q.recall) {
      sum += *q.recall;
      ++n;
    }
  }
  if (n > 0) report.mean_recall = sum / static_cast<double>(n);
  report.total_seconds = seconds_since(start);
  return report;
}

// ---------------------------------------------------------------------------
// oracle

std::string OracleReport::to_jsonl() const {
  std::string out;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    auto line = rankings[i].to_json(top_k[i]);
    line["type"] = "oracle";
    out += line.dump() + "\n";
  }
  return out;
}

OracleReport run_oracle(std::span<const TraceFrame> frames, std::span<const QuerySpec> queries) {
  OracleReport report;
  for (const auto& q : queries) {
    report.rankings.push_back(oracle_rank(frames, q));
    report.top_k.push_back(q.top_k);
  }
  return report;
}

// ---------------------------------------------------------------------------
// growth sweep

StreamSpec resize_spec(const StreamSpec& spec, std::size_t length) {
  if (length == 0) throw SpecError("resize_spec: length must be positive");
  StreamSpec out = spec;
  out.frames = length;
  out.segments.clear();
  for (const auto& s : spec.segments) {
    if (s.start_frame >= length) break;
    out.segments.push_back({s.start_frame, std::min<std::uint64_t>(s.end_frame, length),
                            s.direction_seed});
  }
  if (!out.segments.empty()) out.segments.back().end_frame = length;
  out.events.clear();
  for (const auto& e : spec.events) {
    if (e.frame_index < length) out.events.push_back(e);
  }
  return out;
}

std::vector<GrowthRow> run_growth_sweep(std::span<const std::size_t> lengths,
                                        const StreamSpec& base, const RunContext& ctx,
                                        const ProbeBank& bank) {
  if (!std::is_sorted(lengths.begin(), lengths.end())) {
    throw ValidationError("sweep: lengths must be ascending");
  }
  std::vector<GrowthRow> rows;
  for (std::size_t len : lengths) {
    const auto frames = generate_stream(resize_spec(base, len));
    RunContext run = ctx;
    run.dim = base.dim;
    const auto r = run_ingest(frames_from(frames), run, bank);
    rows.push_back({len, r.final_tokens, r.peak_tokens});
  }
  return rows;
}

std::string growth_csv(std::span<const GrowthRow> rows) {
  std::string out = "length,final_tokens,peak_tokens\n";
  for (const auto& r : rows) {
    out += std::to_string(r.length) + "," + std::to_string(r.final_tokens) + "," +
           std::to_string(r.peak_tokens) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// histograms

Histogram make_histogram(std::span<const double> values, std::size_t bins) {
  Histogram h;
  if (values.empty()) return h;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo) || bins <= 1) {
    h.edges = {lo, hi};
    h.counts = {values.size()};
    return h;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

std::string Histogram::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out << edges[i] << ',' << edges[i + 1] << ',' << counts[i] << '\n';
  }
  return out.str();
}

nlohmann::json ScoreHistograms::summary() const {
  return {{"frames", frames},
          {"designated_frame", designated_frame},
          {"frame_bins", frame_level.counts.size()},
          {"token_bins", token_level.counts.size()},
          {"token_mean", token_mean},
          {"token_median", token_median},
          {"token_right_skewed", right_skewed()}};
}

ScoreHistograms emit_score_histograms(const FrameSource& source, const RunContext& ctx,
                                      const ProbeBank& bank,
                                      std::optional<std::uint64_t> designated_frame,
                                      std::size_t bins) {
  TieredMemory mem(ctx.config, bank, ctx.dim, ctx.exec);
  std::vector<double> pooled;
  std::vector<double> token_scores;
  std::optional<std::uint64_t> chosen;
  double best = -std::numeric_limits<double>::infinity();
  while (auto frame = source()) {
    const auto r = mem.ingest_frame(frame->timestamp, frame->tokens);
    pooled.push_back(r.pooled_score);
    const bool take = designated_frame ? frame->frame_index == *designated_frame
                                       : r.pooled_score > best;
    if (take) {
      best = r.pooled_score;
      chosen = frame->frame_index;
      token_scores.clear();
      for (const auto& t : mem.tiers().short_tier.back().tokens) token_scores.push_back(t.score);
    }
  }
  if (designated_frame && !chosen) {
    throw ValidationError("hist: designated frame " + std::to_string(*designated_frame) +
                          " not in stream");
  }

  ScoreHistograms out;
  out.frames = pooled.size();
  out.frame_level = make_histogram(pooled, bins);
  out.token_level = make_histogram(token_scores, bins);
  out.designated_frame = chosen.value_or(0);
  if (!token_scores.empty()) {
    out.token_mean = std::accumulate(token_scores.begin(), token_scores.end(), 0.0) /
                     static_cast<double>(token_scores.size());
    auto sorted = token_scores;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    out.token_median = sorted.size() % 2 == 1 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  }
  return out;
}

}  // namespace tiermem

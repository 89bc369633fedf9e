// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiermem/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tiermem/errors.hpp"

namespace tiermem {

GateState update_gate(GateState gate, double frame_pooled_score) {
  if (gate.observations == 0) {
    gate.ema = frame_pooled_score;
  } else {
    gate.ema = gate.decay * gate.ema + (1.0 - gate.decay) * frame_pooled_score;
  }
  ++gate.observations;
  return gate;
}

nlohmann::json to_json(const GateState& gate) {
  return {{"ema", gate.ema},
          {"decay", gate.decay},
          {"floor", gate.floor},
          {"observations", gate.observations}};
}

void QuerySpec::validate(std::size_t dim) const {
  if (tokens.empty()) throw EmptyInputError("query " + id + ": no tokens");
  for (const auto& t : tokens) {
    if (t.dim() != dim) throw DimensionError("query " + id + ": token dimension mismatch");
  }
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ValidationError("query " + id + ": rho must be >= 0");
  if (top_k == 0) throw ValidationError("query " + id + ": top_k must be positive");
  if (!std::isfinite(dispersion_lambda) || !std::isfinite(arrival_time)) {
    throw ValidationError("query " + id + ": non-finite field");
  }
}

QuerySpec QuerySpec::from_json(const nlohmann::json& doc, std::size_t dim) {
  QuerySpec q;
  try {
    q.id = doc.at("id").get<std::string>();
    q.arrival_time = doc.at("arrival_time").get<double>();
    if (doc.contains("rho")) q.rho = doc.at("rho").get<double>();
    if (doc.contains("top_k")) {
      const auto k = doc.at("top_k").get<long long>();
      if (k <= 0) throw ValidationError("query " + q.id + ": top_k must be positive");
      q.top_k = static_cast<std::size_t>(k);
    }
    if (doc.contains("lambda")) q.dispersion_lambda = doc.at("lambda").get<double>();
    for (const auto& raw : doc.at("tokens")) {
      q.tokens.push_back(normalize(raw.get<std::vector<float>>(), dim));
    }
    if (doc.contains("ground_truth_frames") && !doc.at("ground_truth_frames").is_null()) {
      q.ground_truth_frames = doc.at("ground_truth_frames").get<std::vector<std::uint64_t>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("query: ") + e.what());
  }
  q.validate(dim);
  return q;
}

nlohmann::json QuerySpec::to_json() const {
  nlohmann::json toks = nlohmann::json::array();
  for (const auto& t : tokens) {
    toks.push_back(std::vector<float>(t.values().begin(), t.values().end()));
  }
  nlohmann::json doc = {{"id", id},     {"arrival_time", arrival_time}, {"rho", rho},
                        {"top_k", top_k}, {"lambda", dispersion_lambda}, {"tokens", std::move(toks)}};
  if (ground_truth_frames) doc["ground_truth_frames"] = *ground_truth_frames;
  return doc;
}

std::vector<QuerySpec> parse_queries(std::istream& in, std::size_t dim) {
  std::vector<QuerySpec> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("queries line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(QuerySpec::from_json(doc, dim));
  }
  return out;
}

std::vector<QuerySpec> load_queries(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open queries " + path.string());
  return parse_queries(in, dim);
}

namespace {

RowSet query_rows(const QuerySpec& query, std::size_t dim) { return rows_of(query.tokens, dim); }

std::atomic<std::uint64_t> g_score_calls{0};

}  // namespace

GateDecision gate_check(const MemorySnapshot& snapshot, const GateState& gate,
                        const QuerySpec& query, Exec exec) {
  query.validate(snapshot.dim());
  GateDecision d;
  d.threshold = query.rho * std::max(gate.ema, gate.floor);
  RowSet anchor(snapshot.dim());
  for (const auto& f : snapshot.short_tier()) {
    for (const auto& t : f.tokens) anchor.push(t.embedding.data());
  }
  if (anchor.empty()) return d;
  const RowSet q = query_rows(query, snapshot.dim());
  d.affinity = snapshot.config().gate_pooling == GatePooling::global_max
                   ? global_max_dot(anchor, q, exec)
                   : mean_max_dot(anchor, q, exec);
  d.short_only = d.affinity >= d.threshold;
  return d;
}

FrameScores score_candidates(const MemorySnapshot& snapshot, const QuerySpec& query, Exec exec) {
  g_score_calls.fetch_add(1, std::memory_order_relaxed);
  query.validate(snapshot.dim());
  const std::size_t dim = snapshot.dim();
  std::vector<RowSet> groups;
  std::vector<std::uint64_t> ids;
  for (const auto* tier : {&snapshot.long_tier(), &snapshot.mid_tier()}) {
    for (const auto& f : *tier) {
      groups.push_back(f.rows(dim));
      ids.push_back(f.frame_index);
    }
  }
  std::vector<double> scores(groups.size());
  group_mean_max_dot(groups, query_rows(query, dim), scores, exec);
  FrameScores out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], scores[i]);
  return out;
}

std::uint64_t score_candidates_calls() { return g_score_calls.load(std::memory_order_relaxed); }

std::vector<std::uint64_t> rank_top_k(const FrameScores& scores, std::size_t k) {
  std::vector<std::pair<std::uint64_t, double>> ranked(scores.begin(), scores.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first > b.first;
  });
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

std::vector<std::uint64_t> adaptive_select(const FrameScores& scores, std::size_t k,
                                           double lambda) {
  if (scores.empty() || k == 0) return {};
  double sum = 0.0;
  for (const auto& [_, s] : scores) sum += s;
  const double n = static_cast<double>(scores.size());
  const double mean = sum / n;
  double sq = 0.0;
  for (const auto& [_, s] : scores) sq += (s - mean) * (s - mean);
  const double sd = std::sqrt(sq / n);

  std::size_t keep = k;
  if (sd >= 1e-9) {
    const double threshold = mean + lambda * sd;
    std::size_t above = 0;
    for (const auto& [_, s] : scores) {
      if (s >= threshold) ++above;
    }
    keep = std::clamp<std::size_t>(above, 1, k);
  }
  auto out = rank_top_k(scores, keep);
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json RetrievalResult::to_json() const {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& [f, s] : frame_scores) scores.push_back({f, s});
  return {{"gated_short_only", gated_short_only},
          {"anchor_frames", anchor_frames},
          {"retrieved_frames", retrieved_frames},
          {"frame_scores", std::move(scores)},
          {"gate_affinity", gate_affinity},
          {"gate_threshold", gate_threshold}};
}

RetrievalResult retrieve(const MemorySnapshot& snapshot, const GateState& gate,
                         const QuerySpec& query, const RetrieveOptions& options) {
  RetrievalResult r;
  for (const auto& f : snapshot.short_tier()) r.anchor_frames.push_back(f.frame_index);

  const GateDecision d = gate_check(snapshot, gate, query, options.exec);
  r.gate_affinity = d.affinity;
  r.gate_threshold = d.threshold;
  switch (options.gate) {
    case GateMode::ema: r.gated_short_only = d.short_only; break;
    case GateMode::never: r.gated_short_only = false; break;
    case GateMode::always: r.gated_short_only = true; break;
  }
  if (r.gated_short_only) return r;

  r.frame_scores = score_candidates(snapshot, query, options.exec);
  r.retrieved_frames = adaptive_select(r.frame_scores, query.top_k, query.dispersion_lambda);
  return r;
}

}  // namespace tiermem

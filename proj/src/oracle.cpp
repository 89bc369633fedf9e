// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiermem/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace tiermem {

namespace {

std::vector<double> unit_double(std::span<const float> v) {
  std::vector<double> out(v.begin(), v.end());
  double sq = 0.0;
  for (double x : out) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm < 1e-12) {
    std::fill(out.begin(), out.end(), 0.0);
  } else {
    for (double& x : out) x /= norm;
  }
  return out;
}

double inner(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<std::uint64_t> OracleRanking::top(std::size_t k) const {
  return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size()))};
}

nlohmann::json OracleRanking::to_json(std::size_t k) const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& [f, v] : scores) s.push_back({f, v});
  return {{"id", query_id}, {"top_k", top(k)}, {"scores", std::move(s)}};
}

OracleRanking oracle_rank(std::span<const TraceFrame> frames, const QuerySpec& query,
                          std::size_t exclude_latest) {
  OracleRanking out;
  out.query_id = query.id;

  std::vector<std::vector<double>> q;
  for (const auto& t : query.tokens) q.push_back(unit_double(t.values()));

  std::size_t visible = 0;
  while (visible < frames.size() && frames[visible].timestamp <= query.arrival_time) ++visible;
  const std::size_t eligible = visible > exclude_latest ? visible - exclude_latest : 0;

  for (std::size_t f = 0; f < eligible; ++f) {
    const auto& frame = frames[f];
    if (frame.tokens.empty()) continue;
    double total = 0.0;
    for (const auto& tok : frame.tokens) {
      const auto g = unit_double(tok.values);
      double best = -2.0;
      for (const auto& qj : q) best = std::max(best, inner(g, qj));
      total += best;
    }
    out.scores.emplace_back(frame.frame_index, total / static_cast<double>(frame.tokens.size()));
  }

  auto order = out.scores;
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second > b.second) return true;
    if (a.second < b.second) return false;
    return a.first > b.first;
  });
  for (const auto& [f, _] : order) out.ranked.push_back(f);
  return out;
}

}  // namespace tiermem

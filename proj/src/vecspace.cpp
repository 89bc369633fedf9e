// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiermem/vecspace.hpp"

#include <cmath>
#include <fstream>

#include "tiermem/errors.hpp"

namespace tiermem {

namespace {

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) +
                         " does not match " + std::to_string(want));
  }
}

}  // namespace

Embedding normalize(std::span<const float> raw, std::size_t dim) {
  require_dim(raw.size(), dim, "normalize");
  double sq = 0.0;
  for (float x : raw) sq += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(sq);
  if (!(norm >= kZeroNormEpsilon)) {
    return Embedding(std::vector<float>(dim, 0.f), true);
  }
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    out[i] = static_cast<float>(static_cast<double>(raw[i]) / norm);
  }
  return Embedding(std::move(out), false);
}

double cosine(const Embedding& a, const Embedding& b) {
  require_dim(a.dim(), b.dim(), "cosine");
  if (a.is_zero() || b.is_zero()) return 0.0;
  return static_cast<double>(dot(a.data(), b.data(), a.dim()));
}

RowSet rows_of(std::span<const Embedding> embeddings, std::size_t dim) {
  RowSet rows(dim);
  rows.reserve(embeddings.size());
  for (const auto& e : embeddings) {
    require_dim(e.dim(), dim, "rows_of");
    rows.push(e.data());
  }
  return rows;
}

double late_interaction(std::span<const Embedding> frame_tokens,
                        std::span<const Embedding> query_tokens) {
  if (frame_tokens.empty() || query_tokens.empty()) {
    throw EmptyInputError("late_interaction: frame and query token lists must be non-empty");
  }
  const std::size_t dim = query_tokens.front().dim();
  return mean_max_dot(rows_of(frame_tokens, dim), rows_of(query_tokens, dim), Exec::serial);
}

ProbeBank::ProbeBank(const std::vector<std::vector<float>>& vectors,
                     std::vector<std::string> labels, std::size_t dim)
    : labels_(std::move(labels)), dim_(dim) {
  if (dim == 0) throw ConfigError("probe bank: dimension must be positive");
  if (vectors.empty()) throw ConfigError("probe bank: at least one probe is required");
  if (labels_.empty()) {
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      labels_.emplace_back(default_labels()[i % default_labels().size()]);
    }
  }
  if (labels_.size() != vectors.size()) {
    throw ConfigError("probe bank: label count does not match probe count");
  }
  probes_.reserve(vectors.size());
  for (const auto& v : vectors) {
    auto e = normalize(v, dim);
    if (e.is_zero()) throw ConfigError("probe bank: probe vector has zero norm");
    probes_.push_back(std::move(e));
  }
}

ProbeBank ProbeBank::from_json(const nlohmann::json& doc) {
  try {
    const auto dim = doc.at("dim").get<std::size_t>();
    std::vector<std::vector<float>> vectors;
    std::vector<std::string> labels;
    bool any_label = false;
    for (const auto& p : doc.at("probes")) {
      vectors.push_back(p.at("vector").get<std::vector<float>>());
      if (p.contains("label")) {
        labels.push_back(p.at("label").get<std::string>());
        any_label = true;
      } else {
        labels.emplace_back(default_labels()[labels.size() % default_labels().size()]);
      }
    }
    if (!any_label) labels.clear();
    return ProbeBank(vectors, std::move(labels), dim);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("probe bank: ") + e.what());
  }
}

ProbeBank ProbeBank::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open probe bank " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("probe bank " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json ProbeBank::to_json() const {
  nlohmann::json probes = nlohmann::json::array();
  for (std::size_t i = 0; i < probes_.size(); ++i) {
    auto v = probes_[i].values();
    probes.push_back({{"label", labels_[i]}, {"vector", std::vector<float>(v.begin(), v.end())}});
  }
  return {{"dim", dim_}, {"probes", std::move(probes)}};
}

ProbeBank ProbeBank::first_only() const {
  auto v = probes_.front().values();
  return ProbeBank({std::vector<float>(v.begin(), v.end())}, {labels_.front()}, dim_);
}

const std::array<std::string_view, 5>& ProbeBank::default_labels() {
  static constexpr std::array<std::string_view, 5> kLabels = {
      "What objects are visible in the scene?",
      "How many items or people can be seen?",
      "What actions or events are happening?",
      "What has changed in the scene?",
      "Describe the spatial arrangement of objects.",
  };
  return kLabels;
}

double max_sim(const Embedding& v, const ProbeBank& bank) {
  require_dim(v.dim(), bank.dim(), "max_sim");
  double best = -1.0;
  bool first = true;
  for (const auto& q : bank.probes()) {
    const double c = cosine(v, q);
    if (first || c > best) best = c;
    first = false;
  }
  return best;
}

void max_sim_batch(const RowSet& rows, const ProbeBank& bank, std::span<double> out, Exec exec) {
  require_dim(rows.dim(), bank.dim(), "max_sim_batch");
  max_dot(rows, bank.rows(), out, exec);
}

}  // namespace tiermem

// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Unit-vector primitives and the two scoring formulas used across the engine:
// the query-agnostic salience prior (max cosine against a probe bank) and
// late-interaction frame relevance (mean over frame tokens of the max cosine
// against the query tokens).

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tiermem/kernels.hpp"

namespace tiermem {

// A unit-normalized embedding, or the all-zero sentinel for degenerate input.
// Only normalize() creates non-empty values, so cosine reduces to a dot product.
class Embedding {
 public:
  Embedding() = default;

  [[nodiscard]] std::size_t dim() const { return values_.size(); }
  [[nodiscard]] std::span<const float> values() const { return values_; }
  [[nodiscard]] const float* data() const { return values_.data(); }
  [[nodiscard]] bool is_zero() const { return zero_; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  Embedding(std::vector<float> values, bool zero) : values_(std::move(values)), zero_(zero) {}
  friend Embedding normalize(std::span<const float> raw, std::size_t dim);

  std::vector<float> values_;
  bool zero_ = true;
};

// Vectors with a norm below this map to the zero sentinel.
inline constexpr double kZeroNormEpsilon = 1e-12;

// raw / ||raw||. Throws DimensionError when raw.size() != dim.
Embedding normalize(std::span<const float> raw, std::size_t dim);

// Dot product of two unit embeddings; 0 if either is the zero sentinel.
double cosine(const Embedding& a, const Embedding& b);

RowSet rows_of(std::span<const Embedding> embeddings, std::size_t dim);

// Mean over frame tokens of the max cosine against query tokens.
// Throws EmptyInputError on an empty side, DimensionError on shape mismatch.
double late_interaction(std::span<const Embedding> frame_tokens,
                        std::span<const Embedding> query_tokens);

// Fixed pseudo-question bank. Probe vectors come from an embedding file; the
// labels are metadata only. Immutable after construction.
class ProbeBank {
 public:
  // Normalizes every vector. Labels may be empty, in which case the default
  // label set is cycled. Throws ConfigError on an empty bank, a zero-norm
  // probe, or a label count mismatch; DimensionError on a wrong vector length.
  ProbeBank(const std::vector<std::vector<float>>& vectors, std::vector<std::string> labels,
            std::size_t dim);

  static ProbeBank from_json(const nlohmann::json& doc);
  static ProbeBank load(const std::filesystem::path& path);
  [[nodiscard]] nlohmann::json to_json() const;

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return probes_.size(); }
  [[nodiscard]] std::span<const Embedding> probes() const { return probes_; }
  [[nodiscard]] std::span<const std::string> labels() const { return labels_; }
  [[nodiscard]] RowSet rows() const { return rows_of(probes_, dim_); }

  // A bank holding only the first probe (single-prompt ablation).
  [[nodiscard]] ProbeBank first_only() const;

  static const std::array<std::string_view, 5>& default_labels();

 private:
  std::vector<Embedding> probes_;
  std::vector<std::string> labels_;
  std::size_t dim_;
};

// max over probes of cosine(v, q). Throws DimensionError on mismatch.
double max_sim(const Embedding& v, const ProbeBank& bank);

// max_sim for a batch of embeddings at once; out.size() == rows.size().
void max_sim_batch(const RowSet& rows, const ProbeBank& bank, std::span<double> out, Exec exec);

}  // namespace tiermem

// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Similarity kernels shared by ingest scoring and retrieval.
//
// Every kernel exists twice: a serial reference and an OpenMP version. The
// parallel versions split work only across independent output elements and
// reuse the exact per-element arithmetic of the serial path, so both produce
// bit-identical results. Reductions that combine output elements (means) are
// always done serially in index order.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tiermem {

enum class Exec { serial, parallel };

// Non-owning list of rows that all have the same length.
class RowSet {
 public:
  explicit RowSet(std::size_t dim) : dim_(dim) {}

  void reserve(std::size_t n) { rows_.reserve(n); }
  void push(const float* row) { rows_.push_back(row); }

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return rows_.size(); }
  [[nodiscard]] bool empty() const { return rows_.empty(); }
  const float* operator[](std::size_t i) const { return rows_[i]; }

 private:
  std::vector<const float*> rows_;
  std::size_t dim_;
};

// Fixed-order dot product: eight interleaved float lanes folded pairwise,
// then the scalar tail. The order never depends on alignment or threads.
float dot(const float* a, const float* b, std::size_t n);

// out[i] = max_j dot(lhs[i], rhs[j]). rhs must be non-empty.
void max_dot_serial(const RowSet& lhs, const RowSet& rhs, std::span<double> out);
void max_dot_parallel(const RowSet& lhs, const RowSet& rhs, std::span<double> out);
void max_dot(const RowSet& lhs, const RowSet& rhs, std::span<double> out, Exec exec);

// Mean over lhs rows of their max dot against rhs (late interaction).
double mean_max_dot(const RowSet& lhs, const RowSet& rhs, Exec exec);

// Largest dot over every (lhs, rhs) pair.
double global_max_dot(const RowSet& lhs, const RowSet& rhs, Exec exec);

// out[g] = mean_max_dot(groups[g], rhs), one group per candidate frame.
// The parallel version distributes whole groups across threads.
void group_mean_max_dot_serial(std::span<const RowSet> groups, const RowSet& rhs,
                               std::span<double> out);
void group_mean_max_dot_parallel(std::span<const RowSet> groups, const RowSet& rhs,
                                 std::span<double> out);
void group_mean_max_dot(std::span<const RowSet> groups, const RowSet& rhs,
                        std::span<double> out, Exec exec);

}  // namespace tiermem

// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiermem/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <limits>

namespace tiermem {

float dot(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f, 0.f};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  float tail = 0.f;
  for (; i < n; ++i) tail += a[i] * b[i];
  const float lo = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  const float hi = (acc[4] + acc[5]) + (acc[6] + acc[7]);
  return (lo + hi) + tail;
}

namespace {

double row_max(const float* row, const RowSet& rhs) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < rhs.size(); ++j) {
    best = std::max(best, static_cast<double>(dot(row, rhs[j], rhs.dim())));
  }
  return best;
}

double ordered_mean(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

void max_dot_serial(const RowSet& lhs, const RowSet& rhs, std::span<double> out) {
  assert(out.size() == lhs.size() && !rhs.empty());
  for (std::size_t i = 0; i < lhs.size(); ++i) out[i] = row_max(lhs[i], rhs);
}

void max_dot_parallel(const RowSet& lhs, const RowSet& rhs, std::span<double> out) {
  assert(out.size() == lhs.size() && !rhs.empty());
  const auto n = static_cast<std::ptrdiff_t>(lhs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = row_max(lhs[static_cast<std::size_t>(i)], rhs);
  }
}

void max_dot(const RowSet& lhs, const RowSet& rhs, std::span<double> out, Exec exec) {
  if (exec == Exec::parallel) {
    max_dot_parallel(lhs, rhs, out);
  } else {
    max_dot_serial(lhs, rhs, out);
  }
}

double mean_max_dot(const RowSet& lhs, const RowSet& rhs, Exec exec) {
  std::vector<double> maxima(lhs.size());
  max_dot(lhs, rhs, maxima, exec);
  return ordered_mean(maxima);
}

double global_max_dot(const RowSet& lhs, const RowSet& rhs, Exec exec) {
  std::vector<double> maxima(lhs.size());
  max_dot(lhs, rhs, maxima, exec);
  return *std::max_element(maxima.begin(), maxima.end());
}

void group_mean_max_dot_serial(std::span<const RowSet> groups, const RowSet& rhs,
                               std::span<double> out) {
  assert(out.size() == groups.size());
  std::vector<double> maxima;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    maxima.resize(groups[g].size());
    max_dot_serial(groups[g], rhs, maxima);
    out[g] = ordered_mean(maxima);
  }
}

void group_mean_max_dot_parallel(std::span<const RowSet> groups, const RowSet& rhs,
                                 std::span<double> out) {
  assert(out.size() == groups.size());
  const auto n = static_cast<std::ptrdiff_t>(groups.size());
#pragma omp parallel
  {
    std::vector<double> maxima;
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t g = 0; g < n; ++g) {
      const auto& group = groups[static_cast<std::size_t>(g)];
      maxima.resize(group.size());
      max_dot_serial(group, rhs, maxima);
      out[static_cast<std::size_t>(g)] = ordered_mean(maxima);
    }
  }
}

void group_mean_max_dot(std::span<const RowSet> groups, const RowSet& rhs,
                        std::span<double> out, Exec exec) {
  if (exec == Exec::parallel) {
    group_mean_max_dot_parallel(groups, rhs, out);
  } else {
    group_mean_max_dot_serial(groups, rhs, out);
  }
}

}  // namespace tiermem

// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include <gtest/gtest.h>
#include <omp.h>

#include "tiermem/kernels.hpp"

namespace tiermem {
namespace {

struct Block {
  std::vector<float> data;
  std::size_t dim;
  std::size_t rows;

  RowSet view() const {
    RowSet r(dim);
    for (std::size_t i = 0; i < rows; ++i) r.push(data.data() + i * dim);
    return r;
  }
};

Block random_block(std::mt19937_64& rng, std::size_t rows, std::size_t dim) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Block b{std::vector<float>(rows * dim), dim, rows};
  for (auto& x : b.data) x = u(rng);
  return b;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

TEST(Dot, AgreesWithDoubleReference) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {1u, 2u, 7u, 8u, 9u, 16u, 31u, 128u, 1000u}) {
    const auto a = random_block(rng, 1, n);
    const auto b = random_block(rng, 1, n);
    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) ref += double(a.data[i]) * b.data[i];
    EXPECT_NEAR(dot(a.data.data(), b.data.data(), n), ref, 1e-5 * std::sqrt(double(n)));
  }
  EXPECT_EQ(dot(nullptr, nullptr, 0), 0.0f);
}

class KernelEquivalence : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { omp_set_num_threads(4); }
};

TEST_P(KernelEquivalence, SerialAndParallelBitIdentical) {
  std::mt19937_64 rng(GetParam());
  const std::size_t dim = 1 + rng() % 130;
  const auto lhs = random_block(rng, 1 + rng() % 300, dim);
  const auto rhs = random_block(rng, 1 + rng() % 9, dim);

  std::vector<double> s(lhs.rows), p(lhs.rows);
  max_dot_serial(lhs.view(), rhs.view(), s);
  max_dot_parallel(lhs.view(), rhs.view(), p);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_TRUE(same_bits(s[i], p[i]));

  EXPECT_TRUE(same_bits(mean_max_dot(lhs.view(), rhs.view(), Exec::serial),
                        mean_max_dot(lhs.view(), rhs.view(), Exec::parallel)));
  EXPECT_TRUE(same_bits(global_max_dot(lhs.view(), rhs.view(), Exec::serial),
                        global_max_dot(lhs.view(), rhs.view(), Exec::parallel)));

  std::vector<Block> blocks;
  for (int g = 0; g < 17; ++g) blocks.push_back(random_block(rng, 1 + rng() % 40, dim));
  std::vector<RowSet> groups;
  for (const auto& b : blocks) groups.push_back(b.view());
  std::vector<double> gs(groups.size()), gp(groups.size());
  group_mean_max_dot_serial(groups, rhs.view(), gs);
  group_mean_max_dot_parallel(groups, rhs.view(), gp);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    EXPECT_TRUE(same_bits(gs[g], gp[g]));
    EXPECT_TRUE(same_bits(gs[g], mean_max_dot(groups[g], rhs.view(), Exec::serial)));
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, KernelEquivalence, ::testing::Range(0, 25));

TEST(MaxDot, PicksLargest) {
  const float a[] = {1, 0};
  const float b1[] = {0, 1};
  const float b2[] = {0.5f, 0.5f};
  RowSet lhs(2), rhs(2);
  lhs.push(a);
  rhs.push(b1);
  rhs.push(b2);
  std::vector<double> out(1);
  max_dot(lhs, rhs, out, Exec::serial);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(global_max_dot(lhs, rhs, Exec::serial), 0.5);
}

}  // namespace
}  // namespace tiermem

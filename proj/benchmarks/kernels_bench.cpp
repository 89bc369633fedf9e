// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Serial vs OpenMP kernels on ingest- and retrieval-shaped workloads.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "tiermem/kernels.hpp"
#include "tiermem/synth.hpp"
#include "tiermem/tiers.hpp"

namespace {

using namespace tiermem;

struct Rows {
  std::vector<float> data;
  RowSet view;
  Rows(std::size_t n, std::size_t dim, std::uint64_t seed) : data(n * dim), view(dim) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g;
    for (auto& x : data) x = g(rng);
    for (std::size_t i = 0; i < n; ++i) view.push(data.data() + i * dim);
  }
};

Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Exec::serial : Exec::parallel;
}

// One frame of tokens against the probe bank.
void BM_ProbeScores(benchmark::State& state) {
  const Rows tokens(512, 128, 1);
  const Rows probes(5, 128, 2);
  std::vector<double> out(512);
  for (auto _ : state) {
    max_dot(tokens.view, probes.view, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_ProbeScores)->Arg(0)->Arg(1);

// Late-interaction scoring of 124 candidate frames.
void BM_CandidateScores(benchmark::State& state) {
  std::vector<Rows> frames;
  for (int f = 0; f < 124; ++f) frames.emplace_back(16, 128, 10 + f);
  std::vector<RowSet> groups;
  for (const auto& f : frames) groups.push_back(f.view);
  const Rows query(4, 128, 3);
  std::vector<double> out(groups.size());
  for (auto _ : state) {
    group_mean_max_dot(groups, query.view, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_CandidateScores)->Arg(0)->Arg(1);

// Full ingest of a 32-frame, 512-token stream.
void BM_Ingest(benchmark::State& state) {
  StreamSpec spec;
  spec.dim = 128;
  spec.frames = 32;
  spec.tokens_per_frame = 512;
  spec.noise_sigma = 0.3;
  spec.events = {{4, 1, 1.0}};
  const auto frames = generate_stream(spec);
  const auto bank = aligned_probe_bank(spec);
  for (auto _ : state) {
    TieredMemory mem(TierConfig{}, bank, spec.dim, exec_of(state));
    for (const auto& f : frames) mem.ingest_frame(f.timestamp, f.tokens);
    benchmark::DoNotOptimize(mem.total_tokens());
  }
}
BENCHMARK(BM_Ingest)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

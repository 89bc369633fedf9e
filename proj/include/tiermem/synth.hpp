// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic synthetic embedding streams. Each segment has a base
// direction; tokens are that direction plus isotropic gaussian noise,
// renormalized. Planted events blend an event direction into a contiguous
// block of tokens of one frame, giving known retrieval targets.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tiermem/retrieval.hpp"
#include "tiermem/traceio.hpp"
#include "tiermem/vecspace.hpp"

namespace tiermem {

struct Segment {
  std::uint64_t start_frame = 0;  // inclusive
  std::uint64_t end_frame = 0;    // exclusive
  std::uint64_t direction_seed = 0;
};

struct PlantedEvent {
  std::uint64_t frame_index = 0;
  std::uint64_t event_seed = 0;
  double strength = 1.0;
};

struct StreamSpec {
  std::size_t dim = 64;
  std::size_t frames = 128;
  std::size_t tokens_per_frame = 64;
  std::vector<Segment> segments;  // empty: one segment seeded from rng_seed
  std::vector<PlantedEvent> events;
  // Noise vectors have per-component sd noise_sigma / sqrt(dim), so sigma is
  // the expected noise norm relative to the unit base direction.
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;
  std::size_t event_block_tokens = 0;  // 0: max(1, tokens_per_frame / 8)
  double frame_interval = 1.0;

  // Throws SpecError.
  void validate() const;
  [[nodiscard]] std::size_t block_size() const;
  [[nodiscard]] std::vector<Segment> resolved_segments() const;
  [[nodiscard]] double timestamp_of(std::uint64_t frame) const {
    return static_cast<double>(frame) * frame_interval;
  }

  static StreamSpec from_json(const nlohmann::json& doc);
  static StreamSpec load(const std::filesystem::path& path);
  [[nodiscard]] nlohmann::json to_json() const;
};

// Unit gaussian direction drawn from seed; salt separates seed namespaces.
std::vector<float> direction_from_seed(std::uint64_t seed, std::uint64_t salt, std::size_t dim);
std::vector<float> segment_direction(std::uint64_t seed, std::size_t dim);
std::vector<float> event_direction(std::uint64_t seed, std::size_t dim);

// Row-major placement over the smallest square grid holding the frame.
std::pair<std::uint16_t, std::uint16_t> grid_position(std::size_t token, std::size_t tokens_per_frame);

struct EventBlock {
  std::uint64_t frame_index = 0;
  std::size_t first_token = 0;
  std::size_t count = 0;

  [[nodiscard]] bool contains(std::uint64_t frame, std::size_t token) const {
    return frame == frame_index && token >= first_token && token < first_token + count;
  }
};

// Throws NoSuchEvent.
EventBlock event_block(const StreamSpec& spec, std::size_t event_ordinal);

// Throws SpecError on an invalid spec.
std::vector<TraceFrame> generate_stream(const StreamSpec& spec);

struct EventQueryOptions {
  std::string id;  // empty: "event-<ordinal>"
  double rho = 2.0;
  std::size_t top_k = 5;
  double dispersion_lambda = 0.5;
  std::optional<double> arrival_time;  // default: timestamp of the last frame
  std::size_t tokens = 1;
};

// Query tokens are the event direction plus gaussian jitter (same scaling as
// noise_sigma); ground truth is the event frame. Throws NoSuchEvent.
QuerySpec query_for_event(const StreamSpec& spec, std::size_t event_ordinal, double jitter,
                          std::uint64_t rng_seed, const EventQueryOptions& options = {});

// One probe per distinct event direction, labelled with the default labels.
// A spec without events gets a single probe on the first segment direction.
ProbeBank aligned_probe_bank(const StreamSpec& spec);

// count unit gaussian probes (random-vector prior).
ProbeBank random_probe_bank(std::size_t count, std::size_t dim, std::uint64_t seed);

}  // namespace tiermem

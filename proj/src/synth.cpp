// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiermem/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "tiermem/errors.hpp"

namespace tiermem {

namespace {

constexpr std::uint64_t kSegmentSalt = 0x5e9d'a11c'e5e9'0001ull;
constexpr std::uint64_t kEventSalt = 0xe7e1'7b10'c4a5'0002ull;
constexpr std::uint64_t kBlockSalt = 0xb10c'5eed'0000'0003ull;
constexpr std::uint64_t kProbeSalt = 0x9a0b'e5ee'd000'0004ull;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Vectors already unit length in double precision are only rounded, so a
// full-strength noiseless event token equals its direction exactly.
std::vector<float> unit_from(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::abs(sq - 1.0) < 1e-12 ? 1.0 : std::sqrt(sq);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

std::vector<double> unit_direction(std::uint64_t seed, std::uint64_t salt, std::size_t dim) {
  std::mt19937_64 rng(splitmix64(seed ^ salt));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  while (!(sq > 1e-12)) {
    sq = 0.0;
    for (auto& x : v) {
      x = gauss(rng);
      sq += x * x;
    }
  }
  const double norm = std::sqrt(sq);
  for (auto& x : v) x /= norm;
  return v;
}

std::vector<float> to_float(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

template <typename T>
T field(const nlohmann::json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

}  // namespace

std::vector<float> direction_from_seed(std::uint64_t seed, std::uint64_t salt, std::size_t dim) {
  return to_float(unit_direction(seed, salt, dim));
}

std::vector<float> segment_direction(std::uint64_t seed, std::size_t dim) {
  return direction_from_seed(seed, kSegmentSalt, dim);
}

std::vector<float> event_direction(std::uint64_t seed, std::size_t dim) {
  return direction_from_seed(seed, kEventSalt, dim);
}

std::pair<std::uint16_t, std::uint16_t> grid_position(std::size_t token,
                                                      std::size_t tokens_per_frame) {
  auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(tokens_per_frame))));
  while (side * side < tokens_per_frame) ++side;
  side = std::max<std::size_t>(side, 1);
  return {static_cast<std::uint16_t>(token / side), static_cast<std::uint16_t>(token % side)};
}

void StreamSpec::validate() const {
  if (dim == 0) throw SpecError("stream spec: dim must be positive");
  if (frames == 0) throw SpecError("stream spec: frames must be positive");
  if (tokens_per_frame == 0) throw SpecError("stream spec: tokens_per_frame must be positive");
  if (tokens_per_frame > 65536ull * 65536ull) throw SpecError("stream spec: frame too large");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw SpecError("stream spec: noise_sigma must be finite and >= 0");
  }
  if (!(frame_interval > 0.0) || !std::isfinite(frame_interval)) {
    throw SpecError("stream spec: frame_interval must be positive");
  }
  if (event_block_tokens > tokens_per_frame) {
    throw SpecError("stream spec: event_block_tokens exceeds tokens_per_frame");
  }
  std::uint64_t expect = 0;
  for (const auto& s : segments) {
    if (s.start_frame != expect || s.end_frame <= s.start_frame) {
      throw SpecError("stream spec: segments must partition [0, frames) in order");
    }
    expect = s.end_frame;
  }
  if (!segments.empty() && expect != frames) {
    throw SpecError("stream spec: segments must partition [0, frames) in order");
  }
  for (const auto& e : events) {
    if (e.frame_index >= frames) throw SpecError("stream spec: event frame out of range");
    if (!(e.strength > 0.0 && e.strength <= 1.0)) {
      throw SpecError("stream spec: event strength must be in (0, 1]");
    }
  }
}

std::size_t StreamSpec::block_size() const {
  if (event_block_tokens != 0) return event_block_tokens;
  return std::max<std::size_t>(1, tokens_per_frame / 8);
}

std::vector<Segment> StreamSpec::resolved_segments() const {
  if (!segments.empty()) return segments;
  return {Segment{0, frames, splitmix64(rng_seed)}};
}

StreamSpec StreamSpec::from_json(const nlohmann::json& doc) {
  StreamSpec s;
  try {
    s.dim = field(doc, "dim", s.dim);
    s.frames = field(doc, "frames", s.frames);
    s.tokens_per_frame = field(doc, "tokens_per_frame", s.tokens_per_frame);
    s.noise_sigma = field(doc, "noise_sigma", s.noise_sigma);
    s.rng_seed = field(doc, "rng_seed", s.rng_seed);
    s.event_block_tokens = field(doc, "event_block_tokens", s.event_block_tokens);
    s.frame_interval = field(doc, "frame_interval", s.frame_interval);
    if (doc.contains("segments")) {
      for (const auto& seg : doc.at("segments")) {
        s.segments.push_back({seg.at("start_frame").get<std::uint64_t>(),
                              seg.at("end_frame").get<std::uint64_t>(),
                              seg.at("direction_seed").get<std::uint64_t>()});
      }
    }
    if (doc.contains("events")) {
      for (const auto& ev : doc.at("events")) {
        s.events.push_back({ev.at("frame_index").get<std::uint64_t>(),
                            ev.at("event_seed").get<std::uint64_t>(),
                            field(ev, "strength", 1.0)});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("stream spec: ") + e.what());
  }
  s.validate();
  return s;
}

StreamSpec StreamSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stream spec " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("stream spec " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json StreamSpec::to_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : segments) {
    segs.push_back({{"start_frame", s.start_frame},
                    {"end_frame", s.end_frame},
                    {"direction_seed", s.direction_seed}});
  }
  nlohmann::json evs = nlohmann::json::array();
  for (const auto& e : events) {
    evs.push_back({{"frame_index", e.frame_index},
                   {"event_seed", e.event_seed},
                   {"strength", e.strength}});
  }
  return {{"dim", dim},
          {"frames", frames},
          {"tokens_per_frame", tokens_per_frame},
          {"segments", std::move(segs)},
          {"events", std::move(evs)},
          {"noise_sigma", noise_sigma},
          {"rng_seed", rng_seed},
          {"event_block_tokens", event_block_tokens},
          {"frame_interval", frame_interval}};
}

EventBlock event_block(const StreamSpec& spec, std::size_t event_ordinal) {
  if (event_ordinal >= spec.events.size()) {
    throw NoSuchEvent("event ordinal " + std::to_string(event_ordinal) + " out of range");
  }
  const auto& ev = spec.events[event_ordinal];
  const std::size_t count = spec.block_size();
  const std::size_t slots = spec.tokens_per_frame - count + 1;
  const std::size_t first = splitmix64(ev.event_seed ^ kBlockSalt) % slots;
  return {ev.frame_index, first, count};
}

std::vector<TraceFrame> generate_stream(const StreamSpec& spec) {
  spec.validate();
  const std::size_t dim = spec.dim;
  const double sd = spec.noise_sigma / std::sqrt(static_cast<double>(dim));

  std::vector<std::vector<double>> bases;
  std::vector<std::size_t> segment_of(spec.frames);
  const auto segs = spec.resolved_segments();
  for (std::size_t s = 0; s < segs.size(); ++s) {
    bases.push_back(unit_direction(segs[s].direction_seed, kSegmentSalt, dim));
    for (auto f = segs[s].start_frame; f < segs[s].end_frame; ++f) segment_of[f] = s;
  }

  struct Blend {
    EventBlock block;
    std::vector<double> direction;
    double strength;
  };
  std::vector<Blend> blends;
  for (std::size_t e = 0; e < spec.events.size(); ++e) {
    blends.push_back({event_block(spec, e),
                      unit_direction(spec.events[e].event_seed, kEventSalt, dim),
                      spec.events[e].strength});
  }

  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<TraceFrame> frames(spec.frames);
  std::vector<double> v(dim);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    auto& frame = frames[f];
    frame.frame_index = f;
    frame.timestamp = spec.timestamp_of(f);
    frame.tokens.resize(spec.tokens_per_frame);
    const auto& base = bases[segment_of[f]];
    for (std::size_t t = 0; t < spec.tokens_per_frame; ++t) {
      for (std::size_t d = 0; d < dim; ++d) v[d] = base[d];
      for (const auto& b : blends) {
        if (!b.block.contains(f, t)) continue;
        for (std::size_t d = 0; d < dim; ++d) {
          v[d] = (1.0 - b.strength) * v[d] + b.strength * b.direction[d];
        }
      }
      if (sd > 0.0) {
        for (std::size_t d = 0; d < dim; ++d) v[d] += sd * gauss(rng);
      }
      auto& tok = frame.tokens[t];
      const auto [row, col] = grid_position(t, spec.tokens_per_frame);
      tok.row = row;
      tok.col = col;
      tok.values = unit_from(v);
    }
  }
  return frames;
}

QuerySpec query_for_event(const StreamSpec& spec, std::size_t event_ordinal, double jitter,
                          std::uint64_t rng_seed, const EventQueryOptions& options) {
  if (event_ordinal >= spec.events.size()) {
    throw NoSuchEvent("event ordinal " + std::to_string(event_ordinal) + " out of range");
  }
  if (!(jitter >= 0.0)) throw SpecError("query_for_event: jitter must be >= 0");
  const auto& ev = spec.events[event_ordinal];
  const auto dir = unit_direction(ev.event_seed, kEventSalt, spec.dim);
  const double sd = jitter / std::sqrt(static_cast<double>(spec.dim));

  QuerySpec q;
  q.id = options.id.empty() ? "event-" + std::to_string(event_ordinal) : options.id;
  q.arrival_time = options.arrival_time.value_or(spec.timestamp_of(spec.frames - 1));
  q.rho = options.rho;
  q.top_k = options.top_k;
  q.dispersion_lambda = options.dispersion_lambda;
  q.ground_truth_frames = std::vector<std::uint64_t>{ev.frame_index};

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(spec.dim);
  for (std::size_t k = 0; k < std::max<std::size_t>(1, options.tokens); ++k) {
    for (std::size_t d = 0; d < spec.dim; ++d) v[d] = dir[d] + (sd > 0.0 ? sd * gauss(rng) : 0.0);
    q.tokens.push_back(normalize(unit_from(v), spec.dim));
  }
  return q;
}

ProbeBank aligned_probe_bank(const StreamSpec& spec) {
  std::vector<std::uint64_t> seeds;
  for (const auto& e : spec.events) {
    if (std::find(seeds.begin(), seeds.end(), e.event_seed) == seeds.end()) {
      seeds.push_back(e.event_seed);
    }
  }
  std::vector<std::vector<float>> vectors;
  for (auto s : seeds) vectors.push_back(event_direction(s, spec.dim));
  if (vectors.empty()) {
    vectors.push_back(segment_direction(spec.resolved_segments().front().direction_seed, spec.dim));
  }
  return ProbeBank(vectors, {}, spec.dim);
}

ProbeBank random_probe_bank(std::size_t count, std::size_t dim, std::uint64_t seed) {
  std::vector<std::vector<float>> vectors;
  for (std::size_t i = 0; i < count; ++i) {
    vectors.push_back(direction_from_seed(splitmix64(seed + i), kProbeSalt, dim));
  }
  return ProbeBank(vectors, {}, dim);
}

}  // namespace tiermem

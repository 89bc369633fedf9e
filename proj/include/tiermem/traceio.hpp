// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// Binary embedding-trace format. All fields little-endian:
//
//   header : "SVMT" | version u32 = 1 | dim u32 | frame_count u64
//   frame  : frame_index u64 | timestamp f64 | token_count u32
//   token  : spatial_row u16 | spatial_col u16 | dim x f32
//
// frame_count = 0 means the frames run to end of stream.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tiermem/tiers.hpp"

namespace tiermem {

inline constexpr std::array<char, 4> kTraceMagic = {'S', 'V', 'M', 'T'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::size_t kTraceHeaderBytes = 20;

struct TraceHeader {
  std::uint32_t version = kTraceVersion;
  std::uint32_t dim = 0;
  std::uint64_t frame_count = 0;
};

struct TraceFrame {
  std::uint64_t frame_index = 0;
  double timestamp = 0.0;
  std::vector<RawToken> tokens;

  friend bool operator==(const TraceFrame&, const TraceFrame&) = default;
};

// Bytes one frame occupies on the wire.
constexpr std::size_t frame_record_bytes(std::size_t tokens, std::size_t dim) {
  return 8 + 8 + 4 + tokens * (2 + 2 + 4 * dim);
}

class TraceWriter {
 public:
  // Writes the header immediately. Throws IoError on a failed stream.
  TraceWriter(std::ostream& sink, std::uint32_t dim, std::uint64_t frame_count = 0);

  // Throws DimMismatch on a token of the wrong length, NonMonotoneTimestamp
  // when timestamps stop increasing, IoError on a failed stream.
  void write(const TraceFrame& frame);

  [[nodiscard]] std::uint64_t frames_written() const { return written_; }

 private:
  std::ostream& sink_;
  std::uint32_t dim_;
  std::uint64_t written_ = 0;
  std::optional<double> last_timestamp_;
  std::vector<unsigned char> buffer_;
};

void write_trace(std::ostream& sink, std::uint32_t dim, std::span<const TraceFrame> frames);
void write_trace_file(const std::filesystem::path& path, std::uint32_t dim,
                      std::span<const TraceFrame> frames);

// Pull-based reader: one frame in memory at a time.
class TraceReader {
 public:
  // Parses the header. Throws BadMagic, UnsupportedVersion, DimMismatch
  // (zero dim) or TruncatedRecord.
  explicit TraceReader(std::istream& source);

  [[nodiscard]] const TraceHeader& header() const { return header_; }
  [[nodiscard]] std::uint32_t dim() const { return header_.dim; }

  // Next frame, or nullopt at the end. Throws TruncatedRecord on a partial
  // record and NonMonotoneTimestamp when timestamps stop increasing.
  std::optional<TraceFrame> next();

 private:
  bool read_exact(void* dst, std::size_t n, bool eof_ok);

  std::istream& source_;
  TraceHeader header_;
  std::uint64_t read_ = 0;
  std::optional<double> last_timestamp_;
  std::vector<unsigned char> buffer_;
};

// Reads the whole stream; returns the header dim through dim_out.
std::vector<TraceFrame> read_trace(std::istream& source, std::uint32_t* dim_out = nullptr);
std::vector<TraceFrame> read_trace_file(const std::filesystem::path& path,
                                        std::uint32_t* dim_out = nullptr);

}  // namespace tiermem

// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "tiermem/errors.hpp"
#include "tiermem/synth.hpp"
#include "tiermem/traceio.hpp"

namespace tiermem {
namespace {

std::string encode(std::uint32_t dim, const std::vector<TraceFrame>& frames) {
  std::ostringstream out(std::ios::binary);
  write_trace(out, dim, frames);
  return out.str();
}

std::vector<TraceFrame> decode(const std::string& bytes, std::uint32_t* dim = nullptr) {
  std::istringstream in(bytes, std::ios::binary);
  return read_trace(in, dim);
}

const std::vector<TraceFrame> kOneToken = {{0, 0.0, {{{1.5f, -2.0f}, 3, 4}}}};

TEST(TraceLayout, ByteCounts) {
  EXPECT_EQ(kTraceHeaderBytes, 20u);
  EXPECT_EQ(encode(4, {}).size(), 20u);
  EXPECT_EQ(encode(2, kOneToken).size(), 52u);
  EXPECT_EQ(frame_record_bytes(1, 2), 32u);
  EXPECT_EQ(frame_record_bytes(0, 100), 20u);
}

TEST(TraceLayout, ExactBytes) {
  const std::string b = encode(2, kOneToken);
  const unsigned char expected[52] = {
      'S', 'V', 'M', 'T', 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0,  // header
      0, 0, 0, 0, 0, 0, 0, 0,                                              // frame_index
      0, 0, 0, 0, 0, 0, 0, 0,                                              // timestamp 0.0
      1, 0, 0, 0,                                                          // token count
      3, 0, 4, 0,                                                          // row, col
      0x00, 0x00, 0xC0, 0x3F,                                              // 1.5f
      0x00, 0x00, 0x00, 0xC0,                                              // -2.0f
  };
  ASSERT_EQ(b.size(), sizeof expected);
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(static_cast<unsigned char>(b[i]), expected[i]) << "byte " << i;
  }
}

TEST(TraceRoundTrip, SyntheticTraceIsCanonical) {
  StreamSpec spec;
  spec.dim = 16;
  spec.frames = 128;
  spec.tokens_per_frame = 10;
  spec.noise_sigma = 0.4;
  spec.events = {{50, 3, 0.7}};
  const auto frames = generate_stream(spec);
  const auto bytes = encode(16, frames);
  EXPECT_EQ(bytes.size(), 20 + 128 * frame_record_bytes(10, 16));
  std::uint32_t dim = 0;
  const auto back = decode(bytes, &dim);
  EXPECT_EQ(dim, 16u);
  EXPECT_EQ(back, frames);
  EXPECT_EQ(encode(16, back), bytes);
}

TEST(TraceRoundTrip, EmptyTrace) {
  std::uint32_t dim = 0;
  EXPECT_TRUE(decode(encode(7, {}), &dim).empty());
  EXPECT_EQ(dim, 7u);
}

TEST(TraceReader, StreamedWriteReadsToEof) {
  std::ostringstream out(std::ios::binary);
  {
    TraceWriter w(out, 2);
    w.write(kOneToken[0]);
    w.write({1, 0.5, {{{0.0f, 1.0f}, 0, 0}, {{1.0f, 0.0f}, 0, 1}}});
    EXPECT_EQ(w.frames_written(), 2u);
  }
  std::istringstream in(out.str(), std::ios::binary);
  TraceReader r(in);
  EXPECT_EQ(r.header().frame_count, 0u);
  ASSERT_TRUE(r.next().has_value());
  const auto second = r.next();
  ASSERT_TRUE(second.has_value());
  EXPECT_EQ(second->tokens.size(), 2u);
  EXPECT_FALSE(r.next().has_value());
}

TEST(TraceReader, CorruptMagic) {
  auto b = encode(2, kOneToken);
  b[0] = 'X';
  EXPECT_THROW(decode(b), BadMagic);
}

TEST(TraceReader, WrongVersion) {
  auto b = encode(2, kOneToken);
  b[4] = 2;
  EXPECT_THROW(decode(b), UnsupportedVersion);
}

TEST(TraceReader, ZeroDim) {
  auto b = encode(2, {});
  b[8] = 0;
  EXPECT_THROW(decode(b), DimMismatch);
}

TEST(TraceReader, TruncationAnywhereIsDetected) {
  const auto b = encode(2, kOneToken);
  for (std::size_t cut = 1; cut < b.size(); ++cut) {
    EXPECT_THROW(decode(b.substr(0, cut)), TruncatedRecord) << "cut at " << cut;
  }
}

TEST(TraceReader, FewerFramesThanDeclared) {
  auto b = encode(2, kOneToken);
  b[12] = 2;
  EXPECT_THROW(decode(b), TruncatedRecord);
}

TEST(TraceWriter, RejectsBadFrames) {
  std::ostringstream out(std::ios::binary);
  TraceWriter w(out, 2);
  w.write({0, 1.0, {{{1.0f, 0.0f}, 0, 0}}});
  EXPECT_THROW(w.write({1, 1.0, {{{1.0f, 0.0f}, 0, 0}}}), NonMonotoneTimestamp);
  EXPECT_THROW(w.write({1, 2.0, {{{1.0f}, 0, 0}}}), DimMismatch);
}

TEST(TraceErrors, FormatErrorsAreIoErrors) {
  auto b = encode(2, kOneToken);
  b[0] = 'X';
  EXPECT_THROW(decode(b), IoError);
  EXPECT_THROW(read_trace_file("/nonexistent/trace.svmt"), IoError);
}

}  // namespace
}  // namespace tiermem

// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiermem/traceio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "tiermem/errors.hpp"

namespace tiermem {

namespace {

template <typename U>
void put_le(std::vector<unsigned char>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xffu));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

void flush(std::ostream& sink, std::vector<unsigned char>& buf) {
  sink.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!sink) throw IoError("trace: write failed");
  buf.clear();
}

}  // namespace

TraceWriter::TraceWriter(std::ostream& sink, std::uint32_t dim, std::uint64_t frame_count)
    : sink_(sink), dim_(dim) {
  if (dim == 0) throw DimMismatch("trace: dimension must be positive");
  buffer_.insert(buffer_.end(), kTraceMagic.begin(), kTraceMagic.end());
  put_le<std::uint32_t>(buffer_, kTraceVersion);
  put_le<std::uint32_t>(buffer_, dim);
  put_le<std::uint64_t>(buffer_, frame_count);
  flush(sink_, buffer_);
}

void TraceWriter::write(const TraceFrame& frame) {
  if (!std::isfinite(frame.timestamp) ||
      (last_timestamp_ && !(frame.timestamp > *last_timestamp_))) {
    throw NonMonotoneTimestamp("trace: frame timestamps must be strictly increasing");
  }
  if (frame.tokens.size() > UINT32_MAX) throw TraceFormatError("trace: too many tokens in a frame");
  put_le<std::uint64_t>(buffer_, frame.frame_index);
  put_le<std::uint64_t>(buffer_, std::bit_cast<std::uint64_t>(frame.timestamp));
  put_le<std::uint32_t>(buffer_, static_cast<std::uint32_t>(frame.tokens.size()));
  for (const auto& t : frame.tokens) {
    if (t.values.size() != dim_) {
      buffer_.clear();
      throw DimMismatch("trace: token has " + std::to_string(t.values.size()) +
                        " values, header dim is " + std::to_string(dim_));
    }
    put_le<std::uint16_t>(buffer_, t.row);
    put_le<std::uint16_t>(buffer_, t.col);
    for (float x : t.values) put_le<std::uint32_t>(buffer_, std::bit_cast<std::uint32_t>(x));
  }
  flush(sink_, buffer_);
  last_timestamp_ = frame.timestamp;
  ++written_;
}

void write_trace(std::ostream& sink, std::uint32_t dim, std::span<const TraceFrame> frames) {
  TraceWriter writer(sink, dim, frames.size());
  for (const auto& f : frames) writer.write(f);
  sink.flush();
  if (!sink) throw IoError("trace: flush failed");
}

void write_trace_file(const std::filesystem::path& path, std::uint32_t dim,
                      std::span<const TraceFrame> frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_trace(out, dim, frames);
}

TraceReader::TraceReader(std::istream& source) : source_(source) {
  unsigned char raw[kTraceHeaderBytes];
  if (!read_exact(raw, kTraceHeaderBytes, false)) {
    throw TruncatedRecord("trace: stream ends inside the header");
  }
  if (std::memcmp(raw, kTraceMagic.data(), kTraceMagic.size()) != 0) {
    throw BadMagic("trace: bad magic, not an SVMT stream");
  }
  header_.version = get_le<std::uint32_t>(raw + 4);
  header_.dim = get_le<std::uint32_t>(raw + 8);
  header_.frame_count = get_le<std::uint64_t>(raw + 12);
  if (header_.version != kTraceVersion) {
    throw UnsupportedVersion("trace: unsupported version " + std::to_string(header_.version));
  }
  if (header_.dim == 0) throw DimMismatch("trace: header dimension is zero");
}

bool TraceReader::read_exact(void* dst, std::size_t n, bool eof_ok) {
  source_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(source_.gcount());
  if (got == n) return true;
  if (got == 0 && eof_ok && source_.eof()) return false;
  if (source_.bad()) throw IoError("trace: read failed");
  throw TruncatedRecord("trace: record cut short after frame " + std::to_string(read_));
}

std::optional<TraceFrame> TraceReader::next() {
  if (header_.frame_count != 0 && read_ == header_.frame_count) return std::nullopt;
  unsigned char head[20];
  if (!read_exact(head, sizeof head, header_.frame_count == 0)) return std::nullopt;

  TraceFrame frame;
  frame.frame_index = get_le<std::uint64_t>(head);
  frame.timestamp = std::bit_cast<double>(get_le<std::uint64_t>(head + 8));
  const auto count = get_le<std::uint32_t>(head + 16);
  if (!std::isfinite(frame.timestamp) ||
      (last_timestamp_ && !(frame.timestamp > *last_timestamp_))) {
    throw NonMonotoneTimestamp("trace: frame timestamps must be strictly increasing");
  }

  const std::size_t token_bytes = 4 + 4 * static_cast<std::size_t>(header_.dim);
  buffer_.resize(token_bytes);
  for (std::uint32_t i = 0; i < count; ++i) {
    read_exact(buffer_.data(), token_bytes, false);
    RawToken t;
    t.row = get_le<std::uint16_t>(buffer_.data());
    t.col = get_le<std::uint16_t>(buffer_.data() + 2);
    t.values.resize(header_.dim);
    for (std::uint32_t d = 0; d < header_.dim; ++d) {
      t.values[d] = std::bit_cast<float>(get_le<std::uint32_t>(buffer_.data() + 4 + 4 * d));
    }
    frame.tokens.push_back(std::move(t));
  }
  last_timestamp_ = frame.timestamp;
  ++read_;
  return frame;
}

std::vector<TraceFrame> read_trace(std::istream& source, std::uint32_t* dim_out) {
  TraceReader reader(source);
  if (dim_out != nullptr) *dim_out = reader.dim();
  std::vector<TraceFrame> frames;
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  return frames;
}

std::vector<TraceFrame> read_trace_file(const std::filesystem::path& path, std::uint32_t* dim_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace " + path.string());
  return read_trace(in, dim_out);
}

}  // namespace tiermem

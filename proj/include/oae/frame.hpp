#pragma once

#include <cstdint>
#include <optional>
#include <tuple>
#include <vector>

#include "oae/payload.hpp"
#include "oae/types.hpp"

namespace oae {

enum class FrameKind : std::uint8_t {
  Tentative = 1,
  Reflection = 2,
  CommitAck = 3,
  AbortNotify = 4,
  Hyperdata = 5,
  // Baseline-mode frames share the wire container but not the protocol.
  FitoData = 6,
  FitoAck = 7,
};

inline const char* to_token(FrameKind k) {
  switch (k) {
    case FrameKind::Tentative: return "tentative";
    case FrameKind::Reflection: return "reflection";
    case FrameKind::CommitAck: return "commit_ack";
    case FrameKind::AbortNotify: return "abort_notify";
    case FrameKind::Hyperdata: return "hyperdata";
    case FrameKind::FitoData: return "fito_data";
    default: return "fito_ack";
  }
}

/// Simultaneous-initiation tie break, carried in every tentative frame.
/// The lower (endpoint, counter) tuple keeps the initiative.
struct TieBreak {
  std::uint8_t endpoint = 0;  // per-link side index: 0 = A, 1 = B
  std::uint64_t counter = 0;  // emitter's local initiation counter

  friend bool operator==(const TieBreak&, const TieBreak&) = default;
  friend bool operator<(const TieBreak& a, const TieBreak& b) {
    return std::tie(a.endpoint, a.counter) < std::tie(b.endpoint, b.counter);
  }
};

/// Wire layout, fixed: kind(1) | txn(8) | tiebreak endpoint(1) + counter(8) |
/// schema-version(1) | length(2) | body. Integers little-endian.
struct Frame {
  FrameKind kind = FrameKind::Tentative;
  TxnId txn = 0;
  TieBreak tiebreak;
  SchemaVersion schema = kSchemaV1;
  std::vector<std::uint8_t> body;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr std::size_t kFrameHeaderSize = 21;

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + f.body.size());
  out.push_back(static_cast<std::uint8_t>(f.kind));
  detail::append_u64(out, f.txn);
  out.push_back(f.tiebreak.endpoint);
  detail::append_u64(out, f.tiebreak.counter);
  out.push_back(f.schema);
  out.push_back(static_cast<std::uint8_t>(f.body.size() & 0xFF));
  out.push_back(static_cast<std::uint8_t>((f.body.size() >> 8) & 0xFF));
  out.insert(out.end(), f.body.begin(), f.body.end());
  return out;
}

namespace detail {
inline std::uint64_t read_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}
inline std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}
}  // namespace detail

inline Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw ParseFault("frame shorter than header");
  Frame f;
  if (bytes[0] < 1 || bytes[0] > 7) throw ParseFault("unknown frame kind byte");
  f.kind = static_cast<FrameKind>(bytes[0]);
  f.txn = detail::read_u64(bytes, 1);
  f.tiebreak.endpoint = bytes[9];
  f.tiebreak.counter = detail::read_u64(bytes, 10);
  f.schema = bytes[18];
  const std::size_t len = bytes[19] | (static_cast<std::size_t>(bytes[20]) << 8);
  if (bytes.size() != kFrameHeaderSize + len) throw ParseFault("frame length field mismatch");
  f.body.assign(bytes.begin() + kFrameHeaderSize, bytes.end());
  return f;
}

/// Link-level integrity check over the encoded bytes. A payload bit flip in
/// transit leaves the emission-time checksum stale, which is how receivers
/// detect corruption.
inline std::uint64_t wire_checksum(const Frame& f) {
  auto bytes = encode_frame(f);
  return fnv1a64(bytes);
}

// Body codecs ---------------------------------------------------------------

inline std::vector<std::uint8_t> encode_fields(const std::vector<FieldWrite>& writes) {
  std::vector<std::uint8_t> out;
  out.reserve(writes.size() * 12);
  for (const auto& w : writes) {
    detail::append_u32(out, w.field);
    detail::append_u64(out, static_cast<std::uint64_t>(w.value));
  }
  return out;
}

inline std::vector<FieldWrite> decode_fields(std::span<const std::uint8_t> body) {
  if (body.size() % 12 != 0) throw ParseFault("field list body not a multiple of 12 bytes");
  std::vector<FieldWrite> out;
  out.reserve(body.size() / 12);
  for (std::size_t at = 0; at < body.size(); at += 12) {
    FieldWrite w;
    w.field = detail::read_u32(body, at);
    w.value = static_cast<FieldValue>(detail::read_u64(body, at + 4));
    out.push_back(w);
  }
  return out;
}

inline std::vector<std::uint8_t> encode_digest(std::uint64_t digest) {
  std::vector<std::uint8_t> out;
  detail::append_u64(out, digest);
  return out;
}

inline std::uint64_t decode_digest(std::span<const std::uint8_t> body) {
  if (body.size() != 8) throw ParseFault("digest body must be 8 bytes");
  return detail::read_u64(body, 0);
}

}  // namespace oae

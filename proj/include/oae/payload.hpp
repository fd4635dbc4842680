#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "oae/types.hpp"

namespace oae {

using FieldId = std::uint32_t;
using FieldValue = std::int64_t;
using SchemaVersion = std::uint8_t;

/// One staged write: the payload schema is a tagged field list, the smallest
/// shape that lets two endpoints interpret identical bytes differently when
/// their schema versions diverge.
struct FieldWrite {
  FieldId field = 0;
  FieldValue value = 0;

  friend bool operator==(const FieldWrite&, const FieldWrite&) = default;
};

inline constexpr SchemaVersion kSchemaV1 = 1;
inline constexpr SchemaVersion kSchemaV2 = 2;

/// Decodes a raw wire value under a schema version. Version 1 is the
/// identity; version 2 reads the same bits through a different value map,
/// so a v1 sender and a v2 receiver agree on every byte and on no meaning.
inline FieldValue interpret(FieldValue raw, SchemaVersion v) {
  if (v == kSchemaV2)
    return static_cast<FieldValue>(static_cast<std::uint64_t>(raw) ^ 0x5A5A5A5A5A5A5A5Aull);
  return raw;
}

inline std::vector<FieldWrite> interpret_writes(std::vector<FieldWrite> raw, SchemaVersion v) {
  for (auto& w : raw) w.value = interpret(w.value, v);
  std::sort(raw.begin(), raw.end(),
            [](const FieldWrite& x, const FieldWrite& y) { return x.field < y.field; });
  return raw;
}

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                             std::uint64_t h = 0xCBF29CE484222325ull) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001B3ull;
  }
  return h;
}

namespace detail {
inline void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
}  // namespace detail

/// Digest over the *interpreted* content: txn id, the schema version the
/// interpreter used, then each (field, decoded value) in field order.
/// Hashing the interpretation rather than the raw bits is what makes
/// schema divergence detectable as digest divergence.
inline std::uint64_t canonical_digest(TxnId txn, SchemaVersion v,
                                      const std::vector<FieldWrite>& interpreted) {
  std::vector<std::uint8_t> buf;
  buf.reserve(9 + interpreted.size() * 12);
  detail::append_u64(buf, txn);
  buf.push_back(v);
  auto sorted = interpreted;
  std::sort(sorted.begin(), sorted.end(),
            [](const FieldWrite& x, const FieldWrite& y) { return x.field < y.field; });
  for (const auto& w : sorted) {
    detail::append_u32(buf, w.field);
    detail::append_u64(buf, static_cast<std::uint64_t>(w.value));
  }
  return fnv1a64(buf);
}

/// Digest a sender intends, i.e. over its own interpretation of its writes.
inline std::uint64_t intent_digest(TxnId txn, SchemaVersion v, const std::vector<FieldWrite>& raw) {
  return canonical_digest(txn, v, interpret_writes(raw, v));
}

}  // namespace oae

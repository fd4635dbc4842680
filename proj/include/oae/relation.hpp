#pragma once

#include <cstdint>

#include "oae/types.hpp"

namespace oae {

/// The four-valued causal relation between two events. Unlike the classical
/// three-valued order, a pair may be genuinely unresolved (Indefinite) while
/// a round-trip is still circulating; it collapses to one of the other three
/// values when the round commits, or stays Indefinite if it never does.
enum class CausalRelation : std::uint8_t {
  Concurrent = 0b00,
  Before = 0b01,  // a precedes b
  After = 0b10,   // b precedes a
  Indefinite = 0b11,
};

/// Fixed 2-bit wire code for a CausalRelation.
struct RelationBits {
  std::uint8_t bits;  // only the low 2 bits are meaningful

  friend bool operator==(RelationBits a, RelationBits b) {
    return (a.bits & 0b11) == (b.bits & 0b11);
  }
};

// 01 = before, 10 = after, 00 = concurrent, 11 = indefinite.
constexpr RelationBits encode(CausalRelation r) {
  return RelationBits{static_cast<std::uint8_t>(r)};
}

constexpr CausalRelation decode(RelationBits b) {
  return static_cast<CausalRelation>(b.bits & 0b11);
}

/// Two-character bitstring as it appears in trace records.
inline const char* to_bitstring(RelationBits b) {
  switch (b.bits & 0b11) {
    case 0b00: return "00";
    case 0b01: return "01";
    case 0b10: return "10";
    default: return "11";
  }
}

inline const char* to_bitstring(CausalRelation r) { return to_bitstring(encode(r)); }

inline const char* to_token(CausalRelation r) {
  switch (r) {
    case CausalRelation::Concurrent: return "concurrent";
    case CausalRelation::Before: return "before";
    case CausalRelation::After: return "after";
    default: return "indefinite";
  }
}

inline RelationBits bits_from_string(const std::string& s) {
  if (s.size() != 2 || (s[0] != '0' && s[0] != '1') || (s[1] != '0' && s[1] != '1'))
    throw ParseFault("relation bitstring must be two binary digits, got '" + s + "'");
  return RelationBits{static_cast<std::uint8_t>(((s[0] - '0') << 1) | (s[1] - '0'))};
}

}  // namespace oae

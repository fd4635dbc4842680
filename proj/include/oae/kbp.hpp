#pragma once

#include <bit>
#include <cstdint>
#include <string>

#include "oae/types.hpp"

namespace oae {
namespace kbp {

/// The four ontic bit positions of a link. Two per direction: each side has
/// a proposal bit and a digest bit. An endpoint's knowable half is its own
/// proposal bit plus the peer digest bit most recently reflected to it.
enum OntBit : std::uint8_t {
  AProposal = 0,
  ADigest = 1,
  BProposal = 2,
  BDigest = 3,
};

/// The imagined full link state. Lives only in the simulator's omniscient
/// view; endpoint logic receives EpiRegister values and can never read this.
struct OntRegister {
  std::uint8_t bits = 0;  // low 4 bits

  bool get(OntBit p) const { return (bits >> p) & 1; }
  void set(OntBit p, bool v) {
    if (v)
      bits |= static_cast<std::uint8_t>(1u << p);
    else
      bits &= static_cast<std::uint8_t>(~(1u << p));
  }
  friend bool operator==(const OntRegister&, const OntRegister&) = default;
};

inline OntBit own_proposal_pos(Side s) { return s == Side::A ? AProposal : BProposal; }
inline OntBit reflected_digest_pos(Side s) { return s == Side::A ? BDigest : ADigest; }

inline std::uint8_t own_proposal_mask(Side s) {
  return static_cast<std::uint8_t>(1u << own_proposal_pos(s));
}
inline std::uint8_t reflected_digest_mask(Side s) {
  return static_cast<std::uint8_t>(1u << reflected_digest_pos(s));
}

/// What one endpoint knows: exactly two of the four ontic positions, with a
/// round tag on the reflected entry so stale knowledge cannot masquerade as
/// current.
struct EpiRegister {
  Side owner = Side::A;
  std::uint8_t known_mask = 0;    // 4-bit position mask, popcount must stay 2
  std::uint8_t known_values = 0;  // values at masked positions (4-bit aligned)
  std::uint64_t round = 0;        // round tag of the reflected entry

  bool value_at(std::uint8_t pos) const { return (known_values >> pos) & 1; }

  /// Packed 2-bit view (low bit = lower masked position) for trace records.
  std::uint8_t known_bits() const {
    std::uint8_t out = 0, idx = 0;
    for (std::uint8_t pos = 0; pos < 4; ++pos)
      if (known_mask & (1u << pos)) out |= static_cast<std::uint8_t>(value_at(pos) << idx++);
    return out;
  }
  friend bool operator==(const EpiRegister&, const EpiRegister&) = default;
};

/// A reflected fragment in flight: the positions it covers, their values
/// and the round they belong to.
struct EpiFragment {
  std::uint8_t mask = 0;
  std::uint8_t values = 0;
  std::uint64_t round = 0;
};

/// An endpoint may know exactly half the ontic state: two of four bits.
inline bool knowledge_balance_check(const EpiRegister& epi) {
  return std::popcount(static_cast<unsigned>(epi.known_mask & 0xF)) == 2;
}

/// Auditor-side projection of the ontic register onto one endpoint's
/// knowable half. Endpoint protocol logic never calls this.
inline EpiRegister epi_view(const OntRegister& ont, Side endpoint, std::uint64_t round = 0) {
  EpiRegister epi;
  epi.owner = endpoint;
  epi.known_mask = static_cast<std::uint8_t>(own_proposal_mask(endpoint) |
                                             reflected_digest_mask(endpoint));
  epi.known_values = static_cast<std::uint8_t>(ont.bits & epi.known_mask);
  epi.round = round;
  return epi;
}

/// Folds a freshly reflected fragment into an endpoint's register. Entries
/// from earlier rounds expire as part of the merge, so the register holds
/// exactly two positions before and after; a fragment overlapping live
/// entries is a duplicate reflection.
inline EpiRegister merge_reflection(EpiRegister local, const EpiFragment& fragment) {
  const std::uint8_t own = own_proposal_mask(local.owner);
  if (fragment.mask & own)
    throw ProtocolFault("reflection fragment covers the endpoint's own proposal position");
  std::uint8_t live = local.known_mask;
  if (local.round < fragment.round) {
    // Old reflected knowledge expires when the round advances.
    live &= static_cast<std::uint8_t>(~(local.known_mask & ~own));
  }
  if (fragment.mask & live) throw ProtocolFault("duplicate reflection: fragment overlaps live mask");
  local.known_mask = static_cast<std::uint8_t>(live | fragment.mask);
  local.known_values = static_cast<std::uint8_t>((local.known_values & live & ~fragment.mask) |
                                                 (fragment.values & fragment.mask) |
                                                 (local.known_values & own));
  local.round = fragment.round;
  if (!knowledge_balance_check(local))
    throw ProtocolFault("merge would break knowledge balance");
  return local;
}

/// Commit is permitted only when the two epistemic halves are complementary
/// and the round's digest bits agree: each side's view of the shared digest
/// must name the same value.
inline bool commit_eligible(const EpiRegister& a, const EpiRegister& b) {
  if ((a.known_mask & b.known_mask) != 0)
    throw ProtocolFault("epistemic masks overlap: registers do not partition the link state");
  if (((a.known_mask | b.known_mask) & 0xF) != 0xF) return false;
  if (a.round != b.round)
    throw StaleRoundFault("epistemic registers belong to different rounds (" +
                          std::to_string(a.round) + " vs " + std::to_string(b.round) + ")");
  const bool digest_seen_by_a = a.value_at(reflected_digest_pos(a.owner));
  const bool digest_seen_by_b = b.value_at(reflected_digest_pos(b.owner));
  return digest_seen_by_a == digest_seen_by_b;
}

inline std::string mask_string(std::uint8_t mask) {
  std::string s(4, '0');
  for (int i = 0; i < 4; ++i)
    if (mask & (1u << (3 - i))) s[static_cast<std::size_t>(i)] = '1';
  return s;
}

}  // namespace kbp
}  // namespace oae

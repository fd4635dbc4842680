#pragma once

#include <cstdint>
#include <limits>

#include "oae/types.hpp"

namespace oae {

/// Per-link logical clock: one initiation counter per endpoint plus the
/// count of rounds that completed their reflecting exchange. Constant size
/// per link regardless of system size; there is no cross-link merge.
struct TensorClock {
  std::uint64_t initiated_a = 0;   // transactions initiated by side A
  std::uint64_t initiated_b = 0;   // transactions initiated by side B
  std::uint64_t mutual_rounds = 0; // rounds that reached mutual knowledge

  friend bool operator==(const TensorClock&, const TensorClock&) = default;
};

inline TensorClock tensor_clock_init() { return TensorClock{}; }

namespace detail {
inline std::uint64_t checked_increment(std::uint64_t v, const char* what) {
  if (v == std::numeric_limits<std::uint64_t>::max())
    throw OverflowFault(std::string(what) + " counter overflow: scenario exceeded configured horizon");
  return v + 1;
}
}  // namespace detail

/// The initiating side's counter advances by exactly one.
inline TensorClock record_initiation(TensorClock tc, Side side) {
  if (side == Side::A)
    tc.initiated_a = detail::checked_increment(tc.initiated_a, "initiated_a");
  else
    tc.initiated_b = detail::checked_increment(tc.initiated_b, "initiated_b");
  return tc;
}

/// Caller contract: a reflecting exchange has just completed on the link.
inline TensorClock record_round_completion(TensorClock tc) {
  tc.mutual_rounds = detail::checked_increment(tc.mutual_rounds, "mutual_rounds");
  return tc;
}

/// Componentwise non-decreasing test, used by the monotonicity checks.
inline bool componentwise_le(const TensorClock& a, const TensorClock& b) {
  return a.initiated_a <= b.initiated_a && a.initiated_b <= b.initiated_b &&
         a.mutual_rounds <= b.mutual_rounds;
}

/// A round requires a prior initiation, so this holds in every reachable state.
inline bool rounds_bounded_by_initiations(const TensorClock& tc) {
  return tc.mutual_rounds <= tc.initiated_a + tc.initiated_b;
}

}  // namespace oae

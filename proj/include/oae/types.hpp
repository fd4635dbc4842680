#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oae {

using Tick = std::uint64_t;
using TxnId = std::uint64_t;
using LinkId = std::uint32_t;

// Actors are simulation-global participants; a link joins two of them.
// Side is the per-link role: side A's tie-break tuple compares lower.
using ActorId = std::uint32_t;

enum class Side : std::uint8_t { A = 0, B = 1 };

inline Side opposite(Side s) { return s == Side::A ? Side::B : Side::A; }

inline const char* to_token(Side s) { return s == Side::A ? "A" : "B"; }

/// Base class for API-misuse faults. In-simulation anomalies never throw;
/// they become trace records instead.
struct ProtocolFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Counter would wrap; the scenario exceeded its configured horizon.
struct OverflowFault : ProtocolFault {
  using ProtocolFault::ProtocolFault;
};

/// Reference to an unknown event, transaction or record.
struct LookupFault : ProtocolFault {
  using ProtocolFault::ProtocolFault;
};

/// Two epistemic registers from different rounds were compared.
struct StaleRoundFault : ProtocolFault {
  using ProtocolFault::ProtocolFault;
};

/// Malformed serialized input (trace, frame, scenario).
struct ParseFault : ProtocolFault {
  using ProtocolFault::ProtocolFault;
};

}  // namespace oae

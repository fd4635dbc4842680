#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oae/frame.hpp"
#include "oae/link_fsm.hpp"
#include "oae/payload.hpp"
#include "oae/store.hpp"
#include "oae/types.hpp"

namespace oae {

/// Lifecycle phase of a transaction. Indefinite until the link's orientation
/// for the round is settled, then resolving, then done. Monotone.
enum class TxnPhase : std::uint8_t { Indefinite, Resolution, Completed };

enum class TxnResult : std::uint8_t { None, Commit, Abort };

inline const char* to_token(TxnPhase p) {
  switch (p) {
    case TxnPhase::Indefinite: return "indefinite";
    case TxnPhase::Resolution: return "resolution";
    default: return "completed";
  }
}
inline const char* to_token(TxnResult r) {
  switch (r) {
    case TxnResult::None: return "none";
    case TxnResult::Commit: return "commit";
    default: return "abort";
  }
}

struct Transaction {
  TxnId id = 0;
  LinkId link = 0;
  ActorId initiator = 0;
  Side initiator_side = Side::A;
  std::vector<FieldWrite> writes;     // raw, as handed to initiate()
  SchemaVersion schema = kSchemaV1;   // initiator's version at initiate time
  std::uint64_t intent = 0;           // digest of the initiator's interpretation
  std::uint64_t attempt = 0;          // per-link round-attempt number
  TxnPhase phase = TxnPhase::Indefinite;
  TxnResult result = TxnResult::None;
  std::string abort_reason;
  // Which side holds the initiative for the round this transaction took part
  // in. Absent exactly while the phase is still indefinite; for a converted
  // transaction it names the winner.
  std::optional<Side> orientation;
  std::optional<TxnId> converted_into;
  std::optional<std::uint64_t> reflected_digest;  // receiver's interpretation
  Tick created_tick = 0;
  std::optional<Tick> concluded_tick;
};

class TransactionRegistry {
 public:
  Transaction& create(LinkId link, ActorId initiator, Side side, std::vector<FieldWrite> writes,
                      SchemaVersion schema, std::uint64_t attempt, Tick now) {
    TxnId id = next_id_++;
    Transaction t;
    t.id = id;
    t.link = link;
    t.initiator = initiator;
    t.initiator_side = side;
    t.writes = std::move(writes);
    t.schema = schema;
    t.intent = intent_digest(id, schema, t.writes);
    t.attempt = attempt;
    t.created_tick = now;
    auto [it, ok] = txns_.emplace(id, std::move(t));
    (void)ok;
    return it->second;
  }

  Transaction& get(TxnId id) {
    auto it = txns_.find(id);
    if (it == txns_.end()) throw LookupFault("unknown transaction " + std::to_string(id));
    return it->second;
  }
  const Transaction& get(TxnId id) const {
    auto it = txns_.find(id);
    if (it == txns_.end()) throw LookupFault("unknown transaction " + std::to_string(id));
    return it->second;
  }
  bool contains(TxnId id) const { return txns_.count(id) > 0; }

  /// Orientation settles: the round leaves its indefinite phase. Returns
  /// whether this call performed the resolution.
  bool resolve_if_indefinite(TxnId id, Side orientation) {
    Transaction& t = get(id);
    if (t.phase != TxnPhase::Indefinite) return false;
    t.phase = TxnPhase::Resolution;
    t.orientation = orientation;
    return true;
  }

  /// Tie-break loser: the initiation folds into the winner's round.
  void convert(TxnId loser, TxnId winner, Side winner_side, Tick now) {
    Transaction& t = get(loser);
    t.converted_into = winner;
    if (t.phase == TxnPhase::Indefinite) {
      t.phase = TxnPhase::Resolution;
      t.orientation = winner_side;
    }
    complete(loser, TxnResult::Abort, "tiebreak_converted", now);
  }

  /// Returns whether this call concluded the transaction; completing an
  /// already-completed transaction with the same result is a no-op, with a
  /// different result a fault.
  bool complete(TxnId id, TxnResult result, std::string reason, Tick now) {
    Transaction& t = get(id);
    if (t.phase == TxnPhase::Completed) {
      if (t.result != result)
        throw ProtocolFault("conflicting completion for transaction " + std::to_string(id));
      return false;
    }
    if (t.phase == TxnPhase::Indefinite) {
      // Completing without a contested resolution: the initiator held the
      // initiative throughout.
      t.orientation = t.initiator_side;
    }
    t.phase = TxnPhase::Completed;
    t.result = result;
    t.abort_reason = std::move(reason);
    t.concluded_tick = now;
    return true;
  }

  const std::map<TxnId, Transaction>& all() const { return txns_; }

 private:
  TxnId next_id_ = 1;
  std::map<TxnId, Transaction> txns_;
};

// Transaction-level operations. The engine drives these from its event loop;
// they are also directly testable.

/// Builds the tentative frame for a freshly created transaction and stages
/// the writes locally. The caller must already have stepped the FSM with an
/// Initiate event (which fails on a non-idle link).
inline Frame make_tentative_frame(const Transaction& txn, const TieBreak& tie) {
  Frame f;
  f.kind = FrameKind::Tentative;
  f.txn = txn.id;
  f.tiebreak = tie;
  f.schema = txn.schema;
  f.body = encode_fields(txn.writes);
  return f;
}

/// Receiver half of the reflecting phase: interpret the arrived payload
/// under the receiver's own schema and digest that interpretation. The
/// reflection carries the digest, never the raw payload.
inline Frame make_reflection_frame(const Frame& tentative, SchemaVersion receiver_schema) {
  auto raw = decode_fields(tentative.body);
  auto interpreted = interpret_writes(raw, receiver_schema);
  Frame f;
  f.kind = FrameKind::Reflection;
  f.txn = tentative.txn;
  f.tiebreak = tentative.tiebreak;
  f.schema = receiver_schema;
  f.body = encode_digest(canonical_digest(tentative.txn, receiver_schema, interpreted));
  return f;
}

enum class ValidationOutcome : std::uint8_t { Commit, Abort };

struct ValidationResult {
  ValidationOutcome outcome;
  std::string reason;          // populated for Abort
  std::uint64_t echoed = 0;    // digest carried by the reflection
  std::uint64_t expected = 0;  // initiator's own digest
};

/// The initiator's check that the receiver interpreted the content as
/// intended: commit only if the reflected digest equals the local one.
inline ValidationResult validate_reflection(const Transaction& txn, const Frame& reflection) {
  if (reflection.kind != FrameKind::Reflection)
    throw ProtocolFault("validate_reflection needs a reflection frame");
  if (reflection.txn != txn.id)
    throw LookupFault("reflection for unknown transaction " + std::to_string(reflection.txn));
  ValidationResult r;
  r.echoed = decode_digest(reflection.body);
  r.expected = txn.intent;
  if (r.echoed == r.expected) {
    r.outcome = ValidationOutcome::Commit;
  } else {
    r.outcome = ValidationOutcome::Abort;
    r.reason = "semantic_divergence";
  }
  return r;
}

/// Atomic visibility: every staged field of the transaction lands in the
/// committed map in the same step. Idempotent per transaction.
inline std::vector<FieldWrite> commit_visibility(VisibleStore& store, const Transaction& txn) {
  return store.apply_commit(txn.id);
}

/// Rollback: staging disappears, committed state is untouched.
inline void abort_rollback(VisibleStore& store, const Transaction& txn) {
  store.discard(txn.id);
}

}  // namespace oae

#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "oae/payload.hpp"
#include "oae/types.hpp"

namespace oae {

/// Committed state plus per-transaction staging. Observers read committed
/// entries only; the staging area is not reachable through the read API, so
/// a partially applied update cannot be observed by construction.
class VisibleStore {
 public:
  struct Cell {
    FieldValue value = 0;
    TxnId writer = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
  };

  void stage(TxnId txn, std::vector<FieldWrite> writes) {
    staged_[txn] = std::move(writes);
  }

  bool has_staged(TxnId txn) const { return staged_.count(txn) > 0; }

  /// All staged writes of the transaction become committed together;
  /// calling again for the same transaction is a no-op.
  std::vector<FieldWrite> apply_commit(TxnId txn) {
    if (applied_.count(txn)) return {};
    auto it = staged_.find(txn);
    if (it == staged_.end())
      throw ProtocolFault("commit of unknown or already-aborted transaction " +
                          std::to_string(txn));
    std::vector<FieldWrite> writes = std::move(it->second);
    staged_.erase(it);
    for (const auto& w : writes) committed_[w.field] = Cell{w.value, txn};
    applied_.insert(txn);
    return writes;
  }

  /// Discards staging; committed state is untouched. Idempotent, but
  /// rolling back an applied transaction is a fault: committed state must
  /// not be silently revoked.
  void discard(TxnId txn) {
    if (applied_.count(txn))
      throw ProtocolFault("rollback of committed transaction " + std::to_string(txn));
    staged_.erase(txn);
  }

  std::optional<FieldValue> read(FieldId field) const {
    auto it = committed_.find(field);
    if (it == committed_.end()) return std::nullopt;
    return it->second.value;
  }

  std::optional<Cell> read_cell(FieldId field) const {
    auto it = committed_.find(field);
    if (it == committed_.end()) return std::nullopt;
    return it->second;
  }

  /// Baseline-mode escape hatch: one field becomes visible immediately,
  /// bypassing staging. This is the modelled flaw, not a protocol path.
  void place_direct(TxnId txn, FieldWrite w) { committed_[w.field] = Cell{w.value, txn}; }

  bool applied(TxnId txn) const { return applied_.count(txn) > 0; }

 private:
  std::map<FieldId, Cell> committed_;
  std::map<TxnId, std::vector<FieldWrite>> staged_;
  std::set<TxnId> applied_;
};

}  // namespace oae

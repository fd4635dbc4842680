#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oae/payload.hpp"
#include "oae/relation.hpp"
#include "oae/trace.hpp"
#include "oae/types.hpp"

namespace oae {
namespace analysis {

// ---------------------------------------------------------------------------
// Trace indexing
// ---------------------------------------------------------------------------

struct TxnView {
  TxnId id = 0;
  LinkId link = 0;
  std::string initiator;
  std::vector<FieldWrite> intended;          // raw writes from the created record
  std::optional<std::uint64_t> intent;       // sender's interpretation digest
  std::optional<std::size_t> created_idx;
  std::optional<std::size_t> outcome_idx;
  std::string result;                        // commit | abort | completed | failstop
  Tick outcome_tick = 0;
  std::optional<TxnId> converted_winner;
  // endpoint -> indices of fsm moves to=committed
  std::map<std::string, std::vector<std::size_t>> committed_moves;
  // actor -> applied records (idx)
  std::map<std::string, std::vector<std::size_t>> applied;
  std::vector<std::size_t> validated_ok;     // indices of validated ok=1 records
  std::vector<std::size_t> validated_fail;
};

struct CopyView {
  std::uint64_t id = 0;
  TxnId txn = 0;
  std::optional<std::size_t> emit_idx;
  std::optional<std::size_t> deliver_idx;
  bool corrupted = false;
  std::string frame_kind;
};

struct AppliedField {
  std::size_t idx = 0;
  Tick tick = 0;
  TxnId txn = 0;
  FieldId field = 0;
  FieldValue value = 0;
  SchemaVersion sv = kSchemaV1;
};

/// Everything the checks need, computed in one pass over the records.
struct TraceIndex {
  const Trace* trace = nullptr;
  std::map<TxnId, TxnView> txns;
  std::map<std::uint64_t, CopyView> copies;
  // actor -> field -> applies in record order
  std::map<std::string, std::map<FieldId, std::vector<AppliedField>>> applies;
  std::vector<std::size_t> reads;  // observer read records
  Tick last_tick = 0;

  static std::vector<std::pair<FieldId, std::optional<FieldValue>>> parse_keys(
      const std::string& s) {
    std::vector<std::pair<FieldId, std::optional<FieldValue>>> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseFault("malformed key snapshot '" + s + "'");
      FieldId field = static_cast<FieldId>(std::stoul(tok.substr(0, colon)));
      std::string v = tok.substr(colon + 1);
      if (v == "~")
        out.emplace_back(field, std::nullopt);
      else
        out.emplace_back(field, std::stoll(v));
    }
    return out;
  }

  static std::vector<FieldWrite> parse_fields(const std::string& s) {
    std::vector<FieldWrite> out;
    if (s == "~") return out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseFault("malformed field list '" + s + "'");
      out.push_back(FieldWrite{static_cast<FieldId>(std::stoul(tok.substr(0, colon))),
                               std::stoll(tok.substr(colon + 1))});
    }
    return out;
  }
};

inline TraceIndex index_trace(const Trace& trace) {
  TraceIndex ix;
  ix.trace = &trace;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& r = trace.records[i];
    ix.last_tick = std::max(ix.last_tick, r.tick);
    auto& txn = ix.txns[r.txn];  // r.txn may be 0; harmless scratch entry
    switch (r.kind) {
      case RecordKind::Created:
        txn.id = r.txn;
        txn.link = r.link;
        txn.created_idx = i;
        txn.initiator = r.endpoint;
        if (auto f = r.get("fields")) txn.intended = TraceIndex::parse_fields(*f);
        break;
      case RecordKind::Intent:
        txn.intent = std::stoull(*r.get("digest"), nullptr, 16);
        break;
      case RecordKind::Outcome:
        txn.id = r.txn;
        txn.outcome_idx = i;
        txn.result = *r.get("result");
        txn.outcome_tick = r.tick;
        break;
      case RecordKind::Converted:
        txn.converted_winner = r.get_u64("winner");
        break;
      case RecordKind::Validated:
        if (r.get_u64("ok"))
          txn.validated_ok.push_back(i);
        else
          txn.validated_fail.push_back(i);
        break;
      case RecordKind::Move:
        if (*r.get("to") == "committed") txn.committed_moves[r.endpoint].push_back(i);
        break;
      case RecordKind::Applied: {
        txn.applied[*r.get("actor")].push_back(i);
        const SchemaVersion sv = static_cast<SchemaVersion>(r.get_u64("sv"));
        for (const auto& w : TraceIndex::parse_fields(*r.get("fields")))
          ix.applies[*r.get("actor")][w.field].push_back(
              AppliedField{i, r.tick, r.txn, w.field, w.value, sv});
        break;
      }
      case RecordKind::Read:
        ix.reads.push_back(i);
        break;
      case RecordKind::Emit: {
        auto& c = ix.copies[r.get_u64("copy")];
        c.id = r.get_u64("copy");
        c.txn = r.txn;
        c.emit_idx = i;
        c.frame_kind = *r.get("frame");
        break;
      }
      case RecordKind::Dup: {
        auto& c = ix.copies[r.get_u64("copy")];
        c.id = r.get_u64("copy");
        c.txn = r.txn;
        c.emit_idx = i;  // duplicate birth: ordered after the original's emit
        const auto& orig = ix.copies[r.get_u64("of")];
        c.corrupted = orig.corrupted;
        c.frame_kind = orig.frame_kind;
        break;
      }
      case RecordKind::Deliver:
        ix.copies[r.get_u64("copy")].deliver_idx = i;
        break;
      case RecordKind::Corrupt:
        ix.copies[r.get_u64("copy")].corrupted = true;
        break;
      default:
        break;
    }
  }
  ix.txns.erase(0);
  return ix;
}

// ---------------------------------------------------------------------------
// Invariant checking
// ---------------------------------------------------------------------------

struct Violation {
  Tick tick = 0;
  TxnId txn = 0;
  std::string invariant;
  std::vector<std::string> evidence;  // verbatim trace lines
};

struct ViolationReport {
  std::map<std::string, std::uint64_t> counts{{"A1", 0}, {"A2", 0}, {"A3", 0}, {"N1", 0},
                                              {"N2", 0}, {"N3", 0}, {"N4", 0}};
  std::vector<Violation> violations;
  std::uint64_t commits = 0;
  std::uint64_t aborts = 0;
  std::uint64_t completions = 0;  // baseline-mode completions
  std::uint64_t retries = 0;
  std::uint64_t failstops = 0;
  std::uint64_t kbp_balance_violations = 0;
  std::uint64_t kbp_commit_checks = 0;
  std::uint64_t kbp_ineligible_commits = 0;
  std::uint64_t kbp_records = 0;
  std::uint64_t max_commit_window = 0;
  bool conservation_ok = true;

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& [k, v] : counts) t += v;
    return t;
  }

  void merge(const ViolationReport& o) {
    for (const auto& [k, v] : o.counts) counts[k] += v;
    violations.insert(violations.end(), o.violations.begin(), o.violations.end());
    commits += o.commits;
    aborts += o.aborts;
    completions += o.completions;
    retries += o.retries;
    failstops += o.failstops;
    kbp_balance_violations += o.kbp_balance_violations;
    kbp_commit_checks += o.kbp_commit_checks;
    kbp_ineligible_commits += o.kbp_ineligible_commits;
    kbp_records += o.kbp_records;
    max_commit_window = std::max(max_commit_window, o.max_commit_window);
    conservation_ok = conservation_ok && o.conservation_ok;
  }
};

namespace detail {

inline void add_violation(ViolationReport& rep, const Trace& trace, const char* invariant,
                          Tick tick, TxnId txn, std::initializer_list<std::size_t> evidence) {
  Violation v;
  v.tick = tick;
  v.txn = txn;
  v.invariant = invariant;
  for (std::size_t idx : evidence)
    if (idx < trace.records.size()) v.evidence.push_back(trace.records[idx].line());
  rep.counts[invariant]++;
  rep.violations.push_back(std::move(v));
}

}  // namespace detail

/// Replays the trace and counts violations of the three atomicity invariants
/// and the four link invariants. Works identically on both modes' traces;
/// every counted violation carries verbatim evidence records.
inline ViolationReport check_invariants(const Trace& trace) {
  TraceIndex ix = index_trace(trace);
  ViolationReport rep;

  // Bookkeeping counts.
  std::map<std::uint64_t, int> copy_created, copy_terminated;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& r = trace.records[i];
    switch (r.kind) {
      case RecordKind::Emit:
      case RecordKind::Dup:
        copy_created[r.get_u64("copy")]++;
        break;
      case RecordKind::Deliver:
      case RecordKind::Drop:
      case RecordKind::Flush:
        copy_terminated[r.get_u64("copy")]++;
        break;
      case RecordKind::Retry:
        rep.retries++;
        break;
      case RecordKind::Balance: {
        rep.kbp_records++;
        if (!r.get_u64("balanced")) rep.kbp_balance_violations++;
        if (auto e = r.get("eligible"); e && r.endpoint == "B") {
          rep.kbp_commit_checks++;
          if (*e == "0") rep.kbp_ineligible_commits++;
        }
        break;
      }
      case RecordKind::Outcome: {
        const std::string result = *r.get("result");
        if (result == "commit") {
          rep.commits++;
          if (auto w = r.get("window"))
            rep.max_commit_window =
                std::max<std::uint64_t>(rep.max_commit_window, std::stoull(*w));
        } else if (result == "abort") {
          rep.aborts++;
        } else if (result == "completed") {
          rep.completions++;
        } else if (result == "failstop") {
          rep.failstops++;
        }
        break;
      }
      default:
        break;
    }
  }
  for (const auto& [copy, n] : copy_created)
    if (n != 1 || copy_terminated[copy] != 1) rep.conservation_ok = false;
  for (const auto& [copy, n] : copy_terminated)
    if (copy_created.find(copy) == copy_created.end()) rep.conservation_ok = false;

  // N2 / N4: inspect every transition into Committed, and every timeout.
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& r = trace.records[i];
    if (r.kind != RecordKind::Move) continue;
    const std::string to = *r.get("to");
    const std::string ev = *r.get("ev");
    if (to == "committed") {
      if (*r.get("from") != "reflecting" || ev != "commit_ack")
        detail::add_violation(rep, trace, "N2", r.tick, r.txn, {i});
      else {
        bool validated_before = false;
        auto it = ix.txns.find(r.txn);
        if (it != ix.txns.end())
          for (std::size_t v : it->second.validated_ok) validated_before |= v < i;
        if (!validated_before) detail::add_violation(rep, trace, "N2", r.tick, r.txn, {i});
      }
      if (ev == "timeout") detail::add_violation(rep, trace, "N4", r.tick, r.txn, {i});
    } else if (ev == "timeout" && to != "aborted") {
      detail::add_violation(rep, trace, "N4", r.tick, r.txn, {i});
    }
  }

  // Per-transaction checks.
  for (const auto& [id, txn] : ix.txns) {
    const bool committed = txn.result == "commit";
    const bool completed = txn.result == "completed";
    if (!committed && !completed) continue;

    // N1: commitment must be bilateral and exposure simultaneous.
    if (committed) {
      if (txn.committed_moves.size() < 2) {
        detail::add_violation(rep, trace, "N1", txn.outcome_tick, id,
                              {txn.outcome_idx.value_or(0)});
      }
      std::set<Tick> apply_ticks;
      std::size_t appliers = 0;
      for (const auto& [actor, idxs] : txn.applied) {
        ++appliers;
        for (std::size_t idx : idxs) apply_ticks.insert(trace.records[idx].tick);
      }
      if (appliers != 2 || apply_ticks.size() > 1)
        detail::add_violation(rep, trace, "N1", txn.outcome_tick, id,
                              {txn.outcome_idx.value_or(0)});
    } else if (completed) {
      // A baseline completion claims commitment with no bilateral state.
      if (txn.committed_moves.size() < 2)
        detail::add_violation(rep, trace, "N1", txn.outcome_tick, id,
                              {txn.outcome_idx.value_or(0)});
    }

    // A2: a protocol commit requires validated semantic agreement; the
    // baseline's completions are checked against the receiver's actual
    // interpretation below (delivery is not agreement).
    if (committed) {
      bool semantic_ok = false;
      for (std::size_t v : txn.validated_ok) {
        const TraceRecord& r = trace.records[v];
        auto want = r.get("want");
        if (want && *r.get("digest") == *want) semantic_ok = true;
      }
      if (!semantic_ok) {
        detail::add_violation(rep, trace, "A2", txn.outcome_tick, id,
                              {txn.outcome_idx.value_or(0)});
      } else if (txn.intent) {
        // Applied interpretations must equal the declared intent.
        for (const auto& [actor, idxs] : txn.applied)
          for (std::size_t idx : idxs)
            if (std::stoull(*trace.records[idx].get("digest"), nullptr, 16) != *txn.intent)
              detail::add_violation(rep, trace, "A2", trace.records[idx].tick, id, {idx});
      }
    }

    // For completions, also compare the receiver's final interpretation with
    // the sender's intent (delivery is not agreement).
    if (completed && txn.intent) {
      for (const auto& [actor, idxs] : txn.applied) {
        if (actor == txn.initiator) continue;
        std::map<FieldId, std::pair<FieldValue, SchemaVersion>> final_fields;
        for (std::size_t idx : idxs) {
          const TraceRecord& r = trace.records[idx];
          const auto sv = static_cast<SchemaVersion>(r.get_u64("sv"));
          for (const auto& w : TraceIndex::parse_fields(*r.get("fields")))
            final_fields[w.field] = {w.value, sv};
        }
        std::vector<FieldWrite> writes;
        SchemaVersion sv = kSchemaV1;
        for (const auto& [field, vs] : final_fields) {
          writes.push_back(FieldWrite{field, vs.first});
          sv = vs.second;
        }
        const std::uint64_t got = canonical_digest(id, sv, writes);
        if (got != *txn.intent || final_fields.size() != txn.intended.size())
          detail::add_violation(rep, trace, "A2", txn.outcome_tick, id,
                                {txn.outcome_idx.value_or(0)});
      }
    }

    // N3: no commit built on a corrupted copy.
    for (std::size_t v : txn.validated_ok) {
      const TraceRecord& r = trace.records[v];
      if (auto c = r.get("copy")) {
        auto it = ix.copies.find(std::stoull(*c));
        if (it != ix.copies.end() && it->second.corrupted)
          detail::add_violation(rep, trace, "N3", r.tick, id, {v});
      }
    }
    if (committed && txn.intent) {
      for (const auto& [actor, idxs] : txn.applied)
        for (std::size_t idx : idxs)
          if (std::stoull(*trace.records[idx].get("digest"), nullptr, 16) != *txn.intent)
            detail::add_violation(rep, trace, "N3", trace.records[idx].tick, id, {idx});
    }
  }

  // A1 / A3: replay observer reads against the applied history.
  for (std::size_t ridx : ix.reads) {
    const TraceRecord& r = trace.records[ridx];
    const auto snapshot = TraceIndex::parse_keys(*r.get("keys"));
    const auto actor_applies = ix.applies.find(r.endpoint);

    for (const auto& [field, value] : snapshot) {
      // Expected committed value: the latest apply before this read.
      std::optional<AppliedField> last;
      if (actor_applies != ix.applies.end()) {
        auto fit = actor_applies->second.find(field);
        if (fit != actor_applies->second.end())
          for (const auto& af : fit->second)
            if (af.idx < ridx) last = af;
      }
      const std::optional<FieldValue> expected =
          last ? std::optional<FieldValue>(last->value) : std::nullopt;
      if (expected != value) {
        detail::add_violation(rep, trace, "A1", r.tick, last ? last->txn : 0, {ridx});
        continue;
      }
      // Partial exposure: the read returned a transaction's write while other
      // fields of that same transaction are not yet applied here.
      if (last) {
        auto tit = ix.txns.find(last->txn);
        if (tit != ix.txns.end() && tit->second.intended.size() > 1) {
          for (const auto& w : tit->second.intended) {
            if (w.field == field) continue;
            bool applied_too = false;
            if (actor_applies != ix.applies.end()) {
              auto oit = actor_applies->second.find(w.field);
              if (oit != actor_applies->second.end())
                for (const auto& af : oit->second)
                  applied_too |= (af.txn == last->txn && af.idx < ridx);
            }
            if (!applied_too) {
              detail::add_violation(rep, trace, "A1", r.tick, last->txn, {ridx, last->idx});
              break;
            }
          }
        }
      }
    }

    // A3: mixed-era snapshots relative to any multi-field transaction.
    if (snapshot.size() < 2) continue;
    for (const auto& [id, txn] : ix.txns) {
      if (txn.intended.size() < 2) continue;
      auto applied_here = [&](FieldId field) -> std::optional<bool> {
        // nullopt: txn never applies this field at this actor (not part of
        // the era comparison); true/false: applied before/after the read.
        if (actor_applies == ix.applies.end()) return std::nullopt;
        auto fit = actor_applies->second.find(field);
        if (fit == actor_applies->second.end()) return std::nullopt;
        bool ever = false, before = false;
        for (const auto& af : fit->second) {
          if (af.txn != id) continue;
          ever = true;
          before |= af.idx < ridx;
        }
        if (!ever) return std::nullopt;
        return before;
      };
      int fresh = 0, stale = 0;
      for (const auto& [field, value] : snapshot) {
        bool intended = false;
        for (const auto& w : txn.intended) intended |= w.field == field;
        if (!intended) continue;
        auto st = applied_here(field);
        if (!st) {
          // The transaction will or did write this field here eventually?
          // If it never applies at this actor but applies others, the read
          // straddles an incomplete application.
          bool any_here = false;
          for (const auto& w : txn.intended) {
            auto other = applied_here(w.field);
            any_here |= other.has_value() && *other;
          }
          if (any_here) ++stale;
          continue;
        }
        (*st ? fresh : stale)++;
      }
      if (fresh > 0 && stale > 0)
        detail::add_violation(rep, trace, "A3", r.tick, id, {ridx});
    }
  }

  return rep;
}

// ---------------------------------------------------------------------------
// Four-valued relations over a trace
// ---------------------------------------------------------------------------

/// Reference to an event in the trace: the index of its record. Only records
/// on the wire, fsm and observer channels that carry an endpoint are events.
using EventRef = std::size_t;

namespace detail {

struct RelationContext {
  const Trace* trace;
  TraceIndex ix;
  std::vector<EventRef> universe;          // event records, ascending
  std::map<EventRef, std::size_t> pos;     // record idx -> dense index
  // Union-find over transactions for crossed-round groups.
  std::map<TxnId, TxnId> parent;

  TxnId find(TxnId x) {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) return x;
    return it->second = find(it->second);
  }
  void unite(TxnId a, TxnId b) {
    parent.emplace(a, a);
    parent.emplace(b, b);
    parent[find(a)] = find(b);
  }
};

inline bool is_event_record(const TraceRecord& r) {
  if (r.endpoint.empty()) return false;
  return r.channel == Channel::Wire || r.channel == Channel::Fsm ||
         r.channel == Channel::Observer;
}

inline RelationContext build_context(const Trace& trace) {
  RelationContext ctx;
  ctx.trace = &trace;
  ctx.ix = index_trace(trace);
  for (std::size_t i = 0; i < trace.records.size(); ++i)
    if (is_event_record(trace.records[i])) {
      ctx.pos[i] = ctx.universe.size();
      ctx.universe.push_back(i);
    }
  for (const auto& [id, txn] : ctx.ix.txns)
    if (txn.converted_winner) ctx.unite(id, *txn.converted_winner);
  return ctx;
}

struct ReachBits {
  std::size_t n = 0;
  std::vector<std::uint64_t> bits;  // n x ceil(n/64)
  std::size_t words = 0;

  void init(std::size_t count) {
    n = count;
    words = (count + 63) / 64;
    bits.assign(n * words, 0);
    for (std::size_t i = 0; i < n; ++i) set(i, i);
  }
  void set(std::size_t i, std::size_t j) { bits[i * words + j / 64] |= 1ull << (j % 64); }
  bool get(std::size_t i, std::size_t j) const {
    return bits[i * words + j / 64] >> (j % 64) & 1;
  }
  void merge_into(std::size_t i, std::size_t j) {  // reach[i] |= reach[j]
    for (std::size_t w = 0; w < words; ++w) bits[i * words + w] |= bits[j * words + w];
  }
};

/// One cutoff's worth of relation structure.
struct CutoffView {
  std::vector<EventRef> events;            // included events (tick <= cutoff)
  std::map<EventRef, std::size_t> dense;
  ReachBits definite;                      // program order + committed frames
  ReachBits influenced;                    // + every delivered frame
  std::set<TxnId> group_committed;         // group roots with a commit
  std::set<TxnId> group_open;              // group roots with live members
};

inline bool txn_has_commit_by(const TraceIndex& ix, TxnId id, Tick cutoff) {
  auto it = ix.txns.find(id);
  if (it == ix.txns.end()) return false;
  const auto& t = it->second;
  return (t.result == "commit" || t.result == "completed") && t.outcome_idx &&
         t.outcome_tick <= cutoff;
}

inline bool txn_completed_by(const TraceIndex& ix, TxnId id, Tick cutoff) {
  auto it = ix.txns.find(id);
  if (it == ix.txns.end()) return false;
  return it->second.outcome_idx && it->second.outcome_tick <= cutoff;
}

inline CutoffView build_cutoff(RelationContext& ctx, Tick cutoff) {
  const Trace& trace = *ctx.trace;
  CutoffView view;
  for (EventRef e : ctx.universe) {
    if (trace.records[e].tick > cutoff) break;
    view.dense[e] = view.events.size();
    view.events.push_back(e);
  }
  const std::size_t n = view.events.size();

  // Forward adjacency. Edges always point to later record indices, so the
  // reverse record order is a topological order.
  std::vector<std::vector<std::size_t>> def_adj(n), inf_adj(n);
  std::map<std::string, std::size_t> last_by_endpoint;
  for (std::size_t i = 0; i < n; ++i) {
    const TraceRecord& r = trace.records[view.events[i]];
    auto it = last_by_endpoint.find(r.endpoint);
    if (it != last_by_endpoint.end()) {
      def_adj[it->second].push_back(i);
      inf_adj[it->second].push_back(i);
    }
    last_by_endpoint[r.endpoint] = i;
  }
  for (const auto& [id, copy] : ctx.ix.copies) {
    if (copy.txn == 0 || !copy.emit_idx || !copy.deliver_idx) continue;
    auto eit = view.dense.find(*copy.emit_idx);
    auto dit = view.dense.find(*copy.deliver_idx);
    if (eit == view.dense.end() || dit == view.dense.end()) continue;
    inf_adj[eit->second].push_back(dit->second);
    if (txn_has_commit_by(ctx.ix, copy.txn, cutoff))
      def_adj[eit->second].push_back(dit->second);
  }

  view.definite.init(n);
  view.influenced.init(n);
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j : def_adj[i]) view.definite.merge_into(i, j);
    for (std::size_t j : inf_adj[i]) view.influenced.merge_into(i, j);
  }

  // Group status at this cutoff.
  std::map<TxnId, std::vector<TxnId>> groups;
  for (const auto& [id, txn] : ctx.ix.txns) groups[ctx.find(id)].push_back(id);
  for (const auto& [root, members] : groups) {
    bool commit = false, open = false;
    for (TxnId m : members) {
      commit |= txn_has_commit_by(ctx.ix, m, cutoff);
      open |= !txn_completed_by(ctx.ix, m, cutoff);
    }
    if (commit) view.group_committed.insert(root);
    if (open) view.group_open.insert(root);
  }
  return view;
}

inline CausalRelation classify(RelationContext& ctx, const CutoffView& view, EventRef a,
                               EventRef b) {
  const Trace& trace = *ctx.trace;
  const TraceRecord& ra = trace.records[a];
  const TraceRecord& rb = trace.records[b];
  if (ra.endpoint == rb.endpoint)
    return a < b ? CausalRelation::Before : CausalRelation::After;

  const std::size_t ia = view.dense.at(a);
  const std::size_t ib = view.dense.at(b);
  if (view.definite.get(ia, ib)) return CausalRelation::Before;
  if (view.definite.get(ib, ia)) return CausalRelation::After;
  // An unresolved (or abandoned) round-trip still links them: the order has
  // not come into existence, and without a commit it never will.
  if (view.influenced.get(ia, ib) || view.influenced.get(ib, ia))
    return CausalRelation::Indefinite;

  if (ra.txn != 0 && rb.txn != 0) {
    const TxnId ga = ctx.find(ra.txn);
    if (ga == ctx.find(rb.txn)) {
      if (view.group_committed.count(ga)) return CausalRelation::Concurrent;
      return CausalRelation::Indefinite;  // open or fully abandoned round
    }
  }
  if (ra.kind == RecordKind::Hyper && rb.kind == RecordKind::Hyper && ra.link == rb.link)
    return CausalRelation::Indefinite;  // sub-observational circulation
  return CausalRelation::Concurrent;
}

}  // namespace detail

/// Four-valued relation between two events, judged from what the trace shows
/// up to at_tick. Same-event queries are a fault (the relation is
/// irreflexive); unknown references are a lookup fault.
inline CausalRelation relate(const Trace& trace, EventRef a, EventRef b,
                             std::optional<Tick> at_tick = std::nullopt) {
  if (a == b) throw LookupFault("relation is irreflexive: same event queried");
  if (a >= trace.records.size() || b >= trace.records.size())
    throw LookupFault("event reference out of range");
  if (!detail::is_event_record(trace.records[a]) || !detail::is_event_record(trace.records[b]))
    throw LookupFault("record is not a protocol event");
  auto ctx = detail::build_context(trace);
  const Tick cutoff = at_tick.value_or(ctx.ix.last_tick);
  if (trace.records[a].tick > cutoff || trace.records[b].tick > cutoff)
    throw LookupFault("event not yet known at the requested tick");
  auto view = detail::build_cutoff(ctx, cutoff);
  return detail::classify(ctx, view, a, b);
}

struct RelationMatrix {
  std::vector<EventRef> events;
  std::vector<CausalRelation> cells;  // row-major, diagonal unused

  CausalRelation at(std::size_t i, std::size_t j) const {
    if (i == j) throw LookupFault("relation matrix excludes the diagonal");
    return cells[i * events.size() + j];
  }
};

/// Snapshot of the relation over every pair of events known by at_tick.
inline RelationMatrix relation_matrix(const Trace& trace, Tick at_tick) {
  auto ctx = detail::build_context(trace);
  auto view = detail::build_cutoff(ctx, at_tick);
  RelationMatrix m;
  m.events = view.events;
  const std::size_t n = m.events.size();
  m.cells.assign(n * n, CausalRelation::Concurrent);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      m.cells[i * n + j] = detail::classify(ctx, view, m.events[i], m.events[j]);
    }
  return m;
}

// ---------------------------------------------------------------------------
// DCO projection
// ---------------------------------------------------------------------------

/// Stable label for an event, independent of absolute tick or record index:
/// endpoint.channel.kind.sequence, where sequence counts earlier records of
/// the same shape at the same endpoint. Two traces that differ only in
/// indefinite-phase interleaving label their events identically.
inline std::string event_label(const Trace& trace, EventRef e) {
  const TraceRecord& r = trace.records[e];
  std::size_t seq = 0;
  for (std::size_t i = 0; i < e; ++i) {
    const TraceRecord& p = trace.records[i];
    if (p.endpoint == r.endpoint && p.channel == r.channel && p.kind == r.kind) ++seq;
  }
  std::ostringstream os;
  os << r.endpoint << '.' << to_token(r.channel) << '.' << to_token(r.kind) << '.' << seq;
  return os.str();
}

struct DcoProjection {
  struct Entry {
    std::string a, b;       // label-ordered: a < b
    CausalRelation rel;     // three-valued: never Indefinite
    bool lossy = false;     // source relation was Indefinite
  };
  std::vector<Entry> entries;
  std::vector<std::pair<std::string, std::string>> loss_set;

  std::string serialize() const {
    std::ostringstream os;
    os << "#oae-dco v1\n";
    for (const auto& e : entries)
      os << e.a << ' ' << e.b << ' ' << to_token(e.rel) << " bits=" << to_bitstring(e.rel)
         << " loss=" << (e.lossy ? 1 : 0) << '\n';
    os << "#loss_set " << loss_set.size() << '\n';
    for (const auto& [a, b] : loss_set) os << a << ' ' << b << '\n';
    return os.str();
  }
};

/// Collapse the four-valued structure into the classical three relations.
/// Pairs that never resolved (their rounds aborted, or the circulation never
/// produced an orientation) map to Concurrent and are listed in loss_set:
/// the projection forgets that their order was pending rather than absent.
inline DcoProjection dco_project(const Trace& trace) {
  auto ctx = detail::build_context(trace);
  const Tick cutoff = ctx.ix.last_tick;
  auto view = detail::build_cutoff(ctx, cutoff);
  DcoProjection out;
  const auto& events = view.events;
  std::vector<std::string> labels(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) labels[i] = event_label(trace, events[i]);

  for (std::size_t i = 0; i < events.size(); ++i) {
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      CausalRelation rel = detail::classify(ctx, view, events[i], events[j]);
      std::size_t a = i, b = j;
      if (labels[b] < labels[a]) {
        std::swap(a, b);
        if (rel == CausalRelation::Before)
          rel = CausalRelation::After;
        else if (rel == CausalRelation::After)
          rel = CausalRelation::Before;
      }
      DcoProjection::Entry e;
      e.a = labels[a];
      e.b = labels[b];
      if (rel == CausalRelation::Indefinite) {
        e.rel = CausalRelation::Concurrent;
        e.lossy = true;
        out.loss_set.emplace_back(e.a, e.b);
      } else {
        e.rel = rel;
      }
      out.entries.push_back(std::move(e));
    }
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const auto& x, const auto& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  std::sort(out.loss_set.begin(), out.loss_set.end());
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Machine-readable form: one key=value token pair per line.
inline std::string report_lines(const ViolationReport& rep) {
  std::ostringstream os;
  for (const auto& [k, v] : rep.counts) os << "violations." << k << "=" << v << '\n';
  os << "commits=" << rep.commits << "\naborts=" << rep.aborts << "\ncompletions="
     << rep.completions << "\nretries=" << rep.retries << "\nfailstops=" << rep.failstops
     << "\nkbp.balance_violations=" << rep.kbp_balance_violations << "\nkbp.records="
     << rep.kbp_records << "\nkbp.commit_checks=" << rep.kbp_commit_checks
     << "\nkbp.ineligible_commits=" << rep.kbp_ineligible_commits << "\nmax_commit_window="
     << rep.max_commit_window << "\nconservation_ok=" << (rep.conservation_ok ? 1 : 0) << '\n';
  return os.str();
}

inline std::string report_text(const ViolationReport& rep) {
  std::ostringstream os;
  os << "invariant violations\n";
  for (const auto& [k, v] : rep.counts) os << "  " << k << " " << v << '\n';
  os << "commits " << rep.commits << "\naborts " << rep.aborts << "\ncompletions "
     << rep.completions << "\nretries " << rep.retries << "\nfailstops " << rep.failstops
     << "\nkbp_balance_violations " << rep.kbp_balance_violations << "\nkbp_ineligible_commits "
     << rep.kbp_ineligible_commits << "\nmax_commit_window " << rep.max_commit_window
     << "\nconservation " << (rep.conservation_ok ? "ok" : "VIOLATED") << '\n';
  if (!rep.violations.empty()) {
    os << "evidence\n";
    std::size_t shown = 0;
    for (const auto& v : rep.violations) {
      os << "  [" << v.invariant << "] tick=" << v.tick << " txn=" << v.txn << '\n';
      for (const auto& line : v.evidence) os << "    | " << line << '\n';
      if (++shown == 20) {
        os << "  ... " << rep.violations.size() - shown << " more\n";
        break;
      }
    }
  }
  return os.str();
}

/// The side-by-side grid: reflective-commit semantics against the
/// forward-only baseline, same scenarios, same seeds.
inline std::string comparison_grid(const ViolationReport& oae_rep,
                                   const ViolationReport& fito_rep) {
  std::ostringstream os;
  auto row = [&](const std::string& name, std::uint64_t a, std::uint64_t b) {
    os << "  " << name;
    for (std::size_t i = name.size(); i < 30; ++i) os << ' ';
    std::string as = std::to_string(a), bs = std::to_string(b);
    for (std::size_t i = as.size(); i < 8; ++i) os << ' ';
    os << as << "  ";
    for (std::size_t i = bs.size(); i < 8; ++i) os << ' ';
    os << bs << '\n';
  };
  os << "  invariant                          oae      fito\n";
  row("A1 atomic updates", oae_rep.counts.at("A1"), fito_rep.counts.at("A1"));
  row("A2 atomic communication", oae_rep.counts.at("A2"), fito_rep.counts.at("A2"));
  row("A3 atomic visibility", oae_rep.counts.at("A3"), fito_rep.counts.at("A3"));
  row("N1 bilateral commit", oae_rep.counts.at("N1"), fito_rep.counts.at("N1"));
  row("N2 no inferred commitment", oae_rep.counts.at("N2"), fito_rep.counts.at("N2"));
  row("N3 fault containment", oae_rep.counts.at("N3"), fito_rep.counts.at("N3"));
  row("N4 timeout aborts", oae_rep.counts.at("N4"), fito_rep.counts.at("N4"));
  row("commits/completions", oae_rep.commits, fito_rep.completions);
  row("aborts", oae_rep.aborts, fito_rep.aborts);
  row("retries", oae_rep.retries, fito_rep.retries);
  row("failstops", oae_rep.failstops, fito_rep.failstops);
  row("kbp ineligible commits", oae_rep.kbp_ineligible_commits,
      fito_rep.kbp_ineligible_commits);
  os << "  notes: the baseline models placement-completion semantics "
        "(per-field visibility, transport acks, timeout-and-retry).\n"
        "  signal-ordered and cache-coherent interconnects are compared "
        "qualitatively in the README; only the placement baseline runs here.\n";
  return os.str();
}

}  // namespace analysis
}  // namespace oae

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oae/netsim.hpp"
#include "oae/types.hpp"

namespace oae {
namespace consensus {

/// Write-once decision cell. The only mutation is compare-and-swap from
/// empty, and only inside a committed link transaction: the commit sequence
/// number is the linearization point.
struct DecisionRegister {
  std::optional<std::int64_t> value;
  std::optional<TxnId> deciding_txn;
};

/// Proof that a register operation rides a committed, sequenced transaction.
struct CommitToken {
  TxnId txn = 0;
  std::uint64_t seq = 0;
};

struct CasResult {
  bool success = false;
  // The register's value at the linearization point: the new value on
  // success, the current one on failure (absent only if the register was
  // empty and the expectation was not).
  std::optional<std::int64_t> witnessed;
};

inline CasResult cas(DecisionRegister& reg, std::optional<std::int64_t> expected,
                     std::int64_t desired, const std::optional<CommitToken>& token) {
  if (!token)
    throw ProtocolFault("register operation issued outside a committed transaction");
  if (reg.value != expected) return CasResult{false, reg.value};
  if (reg.value.has_value() && *reg.value != desired)
    throw ProtocolFault("decision register is write-once");
  reg.value = desired;
  if (!reg.deciding_txn) reg.deciding_txn = token->txn;
  return CasResult{true, desired};
}

// Field ids used on the wire by the consensus layer.
inline constexpr FieldId kProposalField = 1;
inline constexpr FieldId kWitnessField = 2;

struct ConsensusScenario {
  std::size_t n = 2;
  std::vector<std::int64_t> proposals;  // one per process
  std::vector<Tick> start_ticks;        // the schedule: when each process moves
  std::set<std::size_t> crash_set;      // 0-based process indices that halt
  Tick crash_tick = 0;
  std::uint64_t seed = 1;
  Tick horizon = 400;
};

struct ConsensusResult {
  std::vector<std::optional<std::int64_t>> decided;  // per process
  std::vector<std::uint64_t> steps;                  // emissions per process
  std::uint64_t successful_cas = 0;
  bool agreement = true;
  bool validity = true;
  bool all_live_decided = true;
  std::optional<std::int64_t> decision;
  Trace trace;
};

/// Runs the register construction: every process proposes over its own link
/// to the register host, the host executes the CAS at the commit's sequence
/// number, and a host-initiated reply round carries the witnessed value
/// back. A process decides when its reply round commits. Processes never
/// wait on each other: links are independent and failed rounds abort to
/// quiescence, so a crash stalls nobody else.
inline ConsensusResult run_consensus(const ConsensusScenario& scn) {
  if (scn.n < 1) throw ProtocolFault("consensus needs at least one process");
  if (scn.proposals.size() != scn.n)
    throw ProtocolFault("one proposal per process is required");

  sim::SimConfig cfg;
  cfg.actors = {"R"};
  for (std::size_t i = 0; i < scn.n; ++i) cfg.actors.push_back("P" + std::to_string(i + 1));
  cfg.links.clear();
  for (std::size_t i = 0; i < scn.n; ++i) {
    sim::SimConfig::LinkDef def;
    def.a = 0;  // the host holds side A of every link
    def.b = static_cast<ActorId>(i + 1);
    def.params.one_way_delay = 2;
    def.params.seed = scn.seed;
    cfg.links.push_back(def);
  }
  cfg.horizon = scn.horizon;
  cfg.mode = SimMode::Oae;

  sim::Simulator sim(cfg);
  DecisionRegister reg;
  ConsensusResult result;
  result.decided.assign(scn.n, std::nullopt);

  sim.set_commit_hook([&](const Transaction& txn, std::uint64_t seq) {
    if (txn.initiator != 0) {
      // A proposal round committed: linearize the CAS at this sequence
      // number and send the witnessed value back on the same link.
      std::int64_t proposal = 0;
      for (const auto& w : txn.writes)
        if (w.field == kProposalField) proposal = w.value;
      CasResult r = cas(reg, std::nullopt, proposal, CommitToken{txn.id, seq});
      if (r.success) result.successful_cas++;
      const std::int64_t witnessed = *r.witnessed;  // expected empty: never absent
      TraceRecord record;
      record.tick = sim.now();
      record.link = txn.link;
      record.channel = Channel::Auditor;
      record.endpoint = "R";
      record.txn = txn.id;
      record.kind = RecordKind::Cas;
      record.set("seq", seq)
          .set("expected", std::string("~"))
          .set("new", proposal)
          .set("ok", std::uint64_t{r.success ? 1u : 0u})
          .set("witness", witnessed);
      sim.append_record(std::move(record));
      sim.schedule_initiate(txn.link, 0, {{kWitnessField, witnessed}}, sim.now() + 2);
    } else {
      // A reply round committed: the process on this link decides.
      for (const auto& w : txn.writes)
        if (w.field == kWitnessField) result.decided[txn.link] = w.value;
    }
  });

  for (std::size_t i = 0; i < scn.n; ++i) {
    const Tick start = i < scn.start_ticks.size() ? scn.start_ticks[i] : 1;
    if (scn.crash_set.count(i) && scn.crash_tick <= start) {
      sim.schedule_crash(static_cast<ActorId>(i + 1), scn.crash_tick);
      continue;  // halted before proposing
    }
    sim.schedule_initiate(static_cast<LinkId>(i), static_cast<ActorId>(i + 1),
                          {{kProposalField, scn.proposals[i]}}, start);
    if (scn.crash_set.count(i))
      sim.schedule_crash(static_cast<ActorId>(i + 1), scn.crash_tick);
  }

  sim.run();
  result.trace = sim.trace();

  result.steps.assign(scn.n, 0);
  for (const auto& r : result.trace.records)
    if (r.kind == RecordKind::Emit && !r.endpoint.empty() && r.endpoint[0] == 'P')
      result.steps[static_cast<std::size_t>(std::stoul(r.endpoint.substr(1)) - 1)]++;

  for (std::size_t i = 0; i < scn.n; ++i) {
    const bool crashed = scn.crash_set.count(i) > 0;
    if (result.decided[i]) {
      if (!result.decision) result.decision = result.decided[i];
      if (*result.decision != *result.decided[i]) result.agreement = false;
      bool proposed = false;
      for (auto p : scn.proposals) proposed |= p == *result.decided[i];
      if (!proposed) result.validity = false;
    } else if (!crashed) {
      result.all_live_decided = false;
    }
  }
  return result;
}

/// Exhaustive schedule enumeration for small process counts: every tuple of
/// start offsets in [0, width) runs once, covering every arrival order at
/// the register host including exact ties.
struct ExhaustiveOutcome {
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::uint64_t max_steps = 0;
  std::vector<std::string> complaints;
};

inline ExhaustiveOutcome exhaustive_consensus(std::size_t n, std::vector<std::int64_t> proposals,
                                              Tick width) {
  ExhaustiveOutcome out;
  std::vector<Tick> offsets(n, 0);
  while (true) {
    ConsensusScenario scn;
    scn.n = n;
    scn.proposals = proposals;
    scn.start_ticks.assign(offsets.begin(), offsets.end());
    for (auto& t : scn.start_ticks) t += 1;
    ConsensusResult r = run_consensus(scn);
    out.runs++;
    std::uint64_t run_max = 0;
    for (auto s : r.steps) run_max = std::max(run_max, s);
    out.max_steps = std::max(out.max_steps, run_max);
    if (!r.agreement || !r.validity || !r.all_live_decided) {
      out.failures++;
      std::string c = "offsets";
      for (auto t : scn.start_ticks) c += " " + std::to_string(t);
      out.complaints.push_back(c);
    }
    // next tuple
    std::size_t k = 0;
    while (k < n && ++offsets[k] == width) offsets[k++] = 0;
    if (k == n) break;
  }
  return out;
}

}  // namespace consensus
}  // namespace oae

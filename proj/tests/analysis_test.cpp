#include "oae/analysis.hpp"

#include <gtest/gtest.h>

#include "oae/netsim.hpp"

namespace {

using namespace oae;
using analysis::check_invariants;
using analysis::dco_project;
using analysis::relate;
using analysis::relation_matrix;
using analysis::ViolationReport;
using sim::Simulator;

Scenario single_commit_scenario() {
  Scenario scn;
  scn.horizon = 60;
  ScriptOp init;
  init.kind = ScriptOpKind::Initiate;
  init.tick = 5;
  init.actor = "A";
  init.writes = {{1, 10}, {2, 20}};
  scn.script.push_back(init);
  ScriptOp rd;
  rd.kind = ScriptOpKind::Read;
  rd.tick = 20;
  rd.actor = "B";
  rd.keys = {1, 2};
  scn.script.push_back(rd);
  return scn;
}

Scenario crossed_scenario() {
  Scenario scn;
  scn.horizon = 60;
  for (const char* actor : {"A", "B"}) {
    ScriptOp init;
    init.kind = ScriptOpKind::Initiate;
    init.tick = 5;
    init.actor = actor;
    init.writes = {{actor[0] == 'A' ? 1u : 2u, 7}};
    scn.script.push_back(init);
  }
  return scn;
}

Trace run_trace(const Scenario& scn, std::uint64_t seed = 1) {
  auto sim = Simulator::from_scenario(scn, seed);
  return sim.run();
}

std::string drop_line_containing(const std::string& text, const std::string& needle) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  bool dropped = false;
  while (std::getline(in, line)) {
    if (!dropped && line.find(needle) != std::string::npos) {
      dropped = true;
      continue;
    }
    out << line << '\n';
  }
  EXPECT_TRUE(dropped) << "no line contains: " << needle;
  return out.str();
}

std::string replace_in_trace(const std::string& text, const std::string& from,
                             const std::string& to) {
  std::string out = text;
  auto pos = out.find(from);
  EXPECT_NE(pos, std::string::npos) << "pattern not found: " << from;
  out.replace(pos, from.size(), to);
  return out;
}

// --- checker soundness ------------------------------------------------------

TEST(Checker, GoldenFaultFreeTraceIsClean) {
  ViolationReport rep = check_invariants(run_trace(single_commit_scenario()));
  EXPECT_EQ(rep.total(), 0u) << analysis::report_text(rep);
  EXPECT_EQ(rep.commits, 1u);
  EXPECT_TRUE(rep.conservation_ok);
  EXPECT_EQ(rep.kbp_balance_violations, 0u);
  EXPECT_EQ(rep.kbp_ineligible_commits, 0u);
}

TEST(Checker, FlagsUnilateralCommit) {
  const std::string text = run_trace(single_commit_scenario()).to_text();
  // Remove endpoint B's transition into Committed: the commit becomes
  // unilateral and must be flagged.
  const std::string mutant = drop_line_containing(text, "fsm B 1 move from=reflecting ev=commit_ack to=committed");
  ViolationReport rep = check_invariants(Trace::from_text(mutant));
  EXPECT_GE(rep.counts.at("N1"), 1u);
  ViolationReport clean = check_invariants(Trace::from_text(text));
  EXPECT_EQ(clean.counts.at("N1"), 0u);
}

TEST(Checker, FlagsInferredCommitment) {
  const std::string text = run_trace(single_commit_scenario()).to_text();
  const std::string mutant = replace_in_trace(
      text, "fsm A 1 move from=reflecting ev=commit_ack to=committed",
      "fsm A 1 move from=tentative ev=data to=committed");
  ViolationReport rep = check_invariants(Trace::from_text(mutant));
  EXPECT_GE(rep.counts.at("N2"), 1u);
}

TEST(Checker, FlagsCorruptedCommit) {
  Trace trace = run_trace(single_commit_scenario());
  // Find the copy validated by the initiator and mark it corrupted.
  std::uint64_t copy = 0;
  for (const auto& r : trace.records)
    if (r.kind == RecordKind::Validated && r.get("want")) copy = r.get_u64("copy");
  ASSERT_NE(copy, 0u);
  const std::string mutant = replace_in_trace(
      trace.to_text(), "validated ok=1 copy=" + std::to_string(copy),
      "validated ok=1 copy=" + std::to_string(copy) + "\n9 0 wire - 1 corrupt copy=" +
          std::to_string(copy));
  ViolationReport rep = check_invariants(Trace::from_text(mutant));
  EXPECT_GE(rep.counts.at("N3"), 1u);
}

TEST(Checker, FlagsTimeoutCommit) {
  const std::string text = run_trace(single_commit_scenario()).to_text();
  const std::string mutant = replace_in_trace(
      text, "fsm A 1 move from=reflecting ev=commit_ack to=committed",
      "fsm A 1 move from=reflecting ev=timeout to=committed");
  ViolationReport rep = check_invariants(Trace::from_text(mutant));
  EXPECT_GE(rep.counts.at("N4"), 1u);
}

TEST(Checker, FlagsCommitWithoutValidation) {
  Trace trace = run_trace(single_commit_scenario());
  std::string needle;
  for (const auto& r : trace.records)
    if (r.kind == RecordKind::Validated && r.get("want")) needle = r.line();
  ASSERT_FALSE(needle.empty());
  const std::string mutant = drop_line_containing(trace.to_text(), needle);
  ViolationReport rep = check_invariants(Trace::from_text(mutant));
  EXPECT_GE(rep.counts.at("A2"), 1u);
}

TEST(Checker, FlagsStagedLeak) {
  const std::string text = run_trace(single_commit_scenario()).to_text();
  // An observer read returning a value no commit ever applied.
  const std::string mutant =
      replace_in_trace(text, "20 0 obs B - read keys=1:10,2:20",
                       "20 0 obs B - read keys=1:99,2:20");
  ViolationReport rep = check_invariants(Trace::from_text(mutant));
  EXPECT_GE(rep.counts.at("A1"), 1u);
}

TEST(Checker, FlagsMixedEraSnapshot) {
  const std::string mutant =
      "#oae-trace v1\n"
      "1 0 aud A 1 created initiator=A tie=A:0 fields=1:10,2:20 attempt=1\n"
      "1 0 aud A 1 intent digest=0000000000000000 sv=1\n"
      "3 0 aud B 1 applied actor=B fields=1:10 sv=1 digest=0000000000000000\n"
      "4 0 obs B - read keys=1:10,2:~\n"
      "5 0 aud B 1 applied actor=B fields=2:20 sv=1 digest=0000000000000000\n";
  ViolationReport rep = check_invariants(Trace::from_text(mutant));
  EXPECT_GE(rep.counts.at("A3"), 1u);
}

TEST(Checker, EvidenceCarriesVerbatimRecords) {
  const std::string text = run_trace(single_commit_scenario()).to_text();
  const std::string mutant = drop_line_containing(text, "fsm B 1 move from=reflecting ev=commit_ack to=committed");
  ViolationReport rep = check_invariants(Trace::from_text(mutant));
  ASSERT_FALSE(rep.violations.empty());
  for (const auto& v : rep.violations) ASSERT_FALSE(v.evidence.empty());
  // Evidence lines are copied verbatim from the trace.
  const Trace parsed = Trace::from_text(mutant);
  bool found = false;
  for (const auto& r : parsed.records)
    if (r.line() == rep.violations.front().evidence.front()) found = true;
  EXPECT_TRUE(found);
}

// --- four-valued relations ---------------------------------------------------

std::size_t find_record(const Trace& t, const char* endpoint, RecordKind kind,
                        const char* key = nullptr, const char* value = nullptr) {
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    const auto& r = t.records[i];
    if (r.endpoint != endpoint || r.kind != kind) continue;
    if (key && (!r.get(key) || *r.get(key) != value)) continue;
    return i;
  }
  throw std::runtime_error("record not found");
}

TEST(Relations, SendBeforeReflectAckAfterCommit) {
  Trace trace = run_trace(single_commit_scenario());
  const auto send = find_record(trace, "A", RecordKind::Emit, "frame", "tentative");
  const auto reflect = find_record(trace, "B", RecordKind::Emit, "frame", "reflection");
  EXPECT_EQ(relate(trace, send, reflect), CausalRelation::Before);
  EXPECT_EQ(relate(trace, reflect, send), CausalRelation::After);
}

TEST(Relations, SameEventIsAFault) {
  Trace trace = run_trace(single_commit_scenario());
  const auto send = find_record(trace, "A", RecordKind::Emit, "frame", "tentative");
  EXPECT_THROW(relate(trace, send, send), LookupFault);
  EXPECT_THROW(relate(trace, send, trace.records.size() + 5), LookupFault);
}

TEST(Relations, CrossedInitiationsIndefiniteThenResolved) {
  Trace trace = run_trace(crossed_scenario());
  const auto a_init = find_record(trace, "A", RecordKind::Emit, "frame", "tentative");
  const auto b_init = find_record(trace, "B", RecordKind::Emit, "frame", "tentative");
  // While both sit in crossed Tentative the pair is genuinely unresolved.
  EXPECT_EQ(relate(trace, a_init, b_init, trace.records[b_init].tick),
            CausalRelation::Indefinite);
  // After the round resolves and commits, no order was ever created between
  // the two initiations: the pair resolves away from Indefinite.
  EXPECT_EQ(relate(trace, a_init, b_init), CausalRelation::Concurrent);
  // The loser's initiation is causally upstream of the winner's late events.
  Tick commit_tick = 0;
  for (const auto& r : trace.records)
    if (r.kind == RecordKind::Outcome && *r.get("result") == "commit") commit_tick = r.tick;
  ASSERT_GT(commit_tick, 0u);
  const auto a_commit = find_record(trace, "A", RecordKind::Move, "to", "committed");
  EXPECT_EQ(relate(trace, b_init, a_commit), CausalRelation::Before);
}

TEST(Relations, MatrixDiagonalExcluded) {
  Trace trace = run_trace(single_commit_scenario());
  auto m = relation_matrix(trace, 60);
  ASSERT_GT(m.events.size(), 2u);
  EXPECT_THROW(m.at(1, 1), LookupFault);
  // Two events at the same endpoint are ordered by its local history.
  std::optional<std::size_t> first_a, second_a;
  for (std::size_t i = 0; i < m.events.size(); ++i) {
    if (trace.records[m.events[i]].endpoint != "A") continue;
    if (!first_a)
      first_a = i;
    else if (!second_a)
      second_a = i;
  }
  ASSERT_TRUE(first_a && second_a);
  EXPECT_EQ(m.at(*first_a, *second_a), CausalRelation::Before);
  EXPECT_EQ(m.at(*second_a, *first_a), CausalRelation::After);
}

// Resolution is irreversible and happens only at commit ticks: sample the
// matrix at every event tick and check each pair's trajectory matches
// Indefinite* (Before|After|Concurrent)? with at most one change.
TEST(Relations, TrajectoriesMatchIndefiniteStarDefinite) {
  for (auto scn : {single_commit_scenario(), crossed_scenario()}) {
    Trace trace = run_trace(scn);
    std::set<Tick> ticks;
    std::set<Tick> commit_ticks;
    for (const auto& r : trace.records) {
      ticks.insert(r.tick);
      if (r.kind == RecordKind::Outcome &&
          (*r.get("result") == "commit" || *r.get("result") == "completed"))
        commit_ticks.insert(r.tick);
    }
    auto final_matrix = relation_matrix(trace, trace.records.back().tick);
    const auto& events = final_matrix.events;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<Tick, CausalRelation>>>
        trajectories;
    for (Tick t : ticks) {
      auto m = relation_matrix(trace, t);
      for (std::size_t i = 0; i < m.events.size(); ++i)
        for (std::size_t j = i + 1; j < m.events.size(); ++j)
          trajectories[{m.events[i], m.events[j]}].push_back({t, m.at(i, j)});
    }
    for (const auto& [pair, traj] : trajectories) {
      bool resolved = false;
      CausalRelation value = CausalRelation::Indefinite;
      Tick change_tick = 0;
      for (const auto& [t, rel] : traj) {
        if (!resolved) {
          if (rel != CausalRelation::Indefinite) {
            resolved = true;
            value = rel;
            change_tick = t;
          }
        } else {
          ASSERT_EQ(rel, value) << "relation changed after resolution";
        }
      }
      if (resolved && traj.front().second == CausalRelation::Indefinite) {
        // The pair actually transitioned; that can only happen at a commit.
        EXPECT_TRUE(commit_ticks.count(change_tick))
            << "resolution at non-commit tick " << change_tick;
      }
    }
    (void)events;
  }
}

// --- DCO projection -----------------------------------------------------------

TEST(Dco, FaultFreeSingleInitiatorHasEmptyLossSet) {
  Trace trace = run_trace(single_commit_scenario());
  auto proj = dco_project(trace);
  EXPECT_TRUE(proj.loss_set.empty());
  EXPECT_FALSE(proj.entries.empty());
}

TEST(Dco, CrossedInitiationsLeaveALoss) {
  Trace trace = run_trace(crossed_scenario());
  auto proj = dco_project(trace);
  EXPECT_FALSE(proj.loss_set.empty());
  // Projection is total: every unordered pair of events appears exactly once.
  auto m = relation_matrix(trace, trace.records.back().tick);
  EXPECT_EQ(proj.entries.size(), m.events.size() * (m.events.size() - 1) / 2);
  for (const auto& e : proj.entries) ASSERT_NE(e.rel, CausalRelation::Indefinite);
}

TEST(Dco, ProjectionIsDeterministic) {
  Trace t1 = run_trace(crossed_scenario());
  Trace t2 = run_trace(crossed_scenario());
  EXPECT_EQ(dco_project(t1).serialize(), dco_project(t2).serialize());
}

// Two runs that differ only in which side the idle circulation starts from:
// different trace bytes, identical projections, non-empty loss.
TEST(Dco, HyperdataOrderingIsInvisibleToTheProjection) {
  Scenario scn;
  scn.horizon = 19;
  scn.hyperdata.enabled = true;

  scn.hyperdata.start = Side::A;
  Trace ta = run_trace(scn);
  scn.hyperdata.start = Side::B;
  Trace tb = run_trace(scn);

  EXPECT_NE(ta.to_text(), tb.to_text());
  auto pa = dco_project(ta);
  auto pb = dco_project(tb);
  EXPECT_EQ(pa.serialize(), pb.serialize());
  EXPECT_FALSE(pa.loss_set.empty());
}

}  // namespace

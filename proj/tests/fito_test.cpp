#include <gtest/gtest.h>

#include "oae/analysis.hpp"
#include "oae/netsim.hpp"

namespace {

using namespace oae;
using analysis::check_invariants;
using analysis::ViolationReport;
using sim::Simulator;

ScriptOp initiate(Tick tick, const char* actor, std::vector<FieldWrite> writes) {
  ScriptOp op;
  op.kind = ScriptOpKind::Initiate;
  op.tick = tick;
  op.actor = actor;
  op.writes = std::move(writes);
  return op;
}

ScriptOp read(Tick tick, const char* actor, std::vector<FieldId> keys) {
  ScriptOp op;
  op.kind = ScriptOpKind::Read;
  op.tick = tick;
  op.actor = actor;
  op.keys = std::move(keys);
  return op;
}

ScriptOp set_schema(Tick tick, const char* actor, SchemaVersion v) {
  ScriptOp op;
  op.kind = ScriptOpKind::SetSchema;
  op.tick = tick;
  op.actor = actor;
  op.version = v;
  return op;
}

TEST(Fito, HappyPathFieldVisibleAndCompletionLogged) {
  Scenario scn;
  scn.mode = SimMode::Fito;
  scn.horizon = 40;
  scn.script.push_back(initiate(2, "A", {{1, 10}}));
  scn.script.push_back(read(20, "B", {1}));
  auto sim = Simulator::from_scenario(scn);
  sim.run();
  EXPECT_EQ(sim.stats().fito_completions, 1u);
  bool saw_value = false;
  for (const auto& r : sim.trace().records)
    if (r.kind == RecordKind::Read && *r.get("keys") == "1:10") saw_value = true;
  EXPECT_TRUE(saw_value);
}

// A two-field write becomes visible one field at a time: an observer reading
// between the two deliveries sees a mixed-era snapshot. Reads are placed at
// every tick, so every interleaving of read and delivery occurs.
TEST(Fito, MixedEraSnapshotObserved) {
  Scenario scn;
  scn.mode = SimMode::Fito;
  scn.horizon = 40;
  scn.script.push_back(initiate(2, "A", {{1, 111}, {2, 222}}));
  for (Tick t = 0; t <= 12; ++t) scn.script.push_back(read(t, "B", {1, 2}));
  auto sim = Simulator::from_scenario(scn);
  sim.run();
  bool mixed = false;
  for (const auto& r : sim.trace().records)
    if (r.kind == RecordKind::Read && *r.get("keys") == "1:111,2:~") mixed = true;
  EXPECT_TRUE(mixed);
  ViolationReport rep = check_invariants(sim.trace());
  EXPECT_GE(rep.counts.at("A3"), 1u);
  EXPECT_GE(rep.counts.at("A1"), 1u);  // partial exposure of a multi-field write
}

// Same script, reflective mode: the snapshot set is exactly all-old or
// all-new, never mixed.
TEST(Fito, OaeModeSameScriptHasNoMixedEra) {
  Scenario scn;
  scn.horizon = 40;
  scn.script.push_back(initiate(2, "A", {{1, 111}, {2, 222}}));
  for (Tick t = 0; t <= 12; ++t) scn.script.push_back(read(t, "B", {1, 2}));
  auto sim = Simulator::from_scenario(scn);
  sim.run();
  ViolationReport rep = check_invariants(sim.trace());
  EXPECT_EQ(rep.counts.at("A3"), 0u);
  EXPECT_EQ(rep.counts.at("A1"), 0u);
}

// Schema skew: the receiver stores a different interpretation of the same
// bytes, completion is still signalled, and the auditor counts it against
// atomic communication.
TEST(Fito, SchemaSkewCompletesWithDivergentInterpretation) {
  Scenario scn;
  scn.mode = SimMode::Fito;
  scn.horizon = 60;
  scn.script.push_back(set_schema(1, "B", kSchemaV2));
  scn.script.push_back(initiate(2, "A", {{1, 10}}));
  auto sim = Simulator::from_scenario(scn);
  sim.run();
  EXPECT_EQ(sim.stats().fito_completions, 1u);  // completion succeeded
  ViolationReport rep = check_invariants(sim.trace());
  EXPECT_GE(rep.counts.at("A2"), 1u);  // meaning was not preserved
  // KBP view: the completion tick never reaches knowledge balance
  // eligibility, there was no reflection round.
  EXPECT_GE(rep.kbp_ineligible_commits, 1u);
}

// The same skewed scenario under reflective semantics: the digest mismatch
// aborts the round instead of completing it.
TEST(Fito, OaeModeSkewAbortsInstead) {
  Scenario scn;
  scn.horizon = 60;
  scn.script.push_back(set_schema(1, "B", kSchemaV2));
  scn.script.push_back(initiate(2, "A", {{1, 10}}));
  auto sim = Simulator::from_scenario(scn);
  sim.run();
  EXPECT_EQ(sim.stats().committed, 0u);
  EXPECT_EQ(sim.stats().aborted, 1u);
  bool divergence = false;
  for (const auto& r : sim.trace().records)
    if (r.kind == RecordKind::Outcome && r.get("reason") &&
        *r.get("reason") == "semantic_divergence")
      divergence = true;
  EXPECT_TRUE(divergence);
  ViolationReport rep = check_invariants(sim.trace());
  EXPECT_EQ(rep.total(), 0u) << analysis::report_text(rep);
}

// Timeout-and-retry: under total loss every frame is retried up to the limit
// and then fails stop; the reflective protocol aborts with zero retries.
TEST(Fito, TotalLossRetriesThenFailstop) {
  Scenario scn;
  scn.mode = SimMode::Fito;
  scn.horizon = 200;
  scn.link.loss_prob = 1.0;
  scn.fito_retry_limit = 3;
  scn.script.push_back(initiate(2, "A", {{1, 10}}));
  auto sim = Simulator::from_scenario(scn, 44);
  sim.run();
  EXPECT_EQ(sim.stats().fito_completions, 0u);
  EXPECT_EQ(sim.stats().fito_retries, 3u);
  EXPECT_EQ(sim.stats().fito_failstops, 1u);

  Scenario oae_scn = scn;
  oae_scn.mode = SimMode::Oae;
  auto oae_sim = Simulator::from_scenario(oae_scn, 44);
  oae_sim.run();
  EXPECT_EQ(oae_sim.stats().committed, 0u);
  EXPECT_EQ(oae_sim.stats().aborted, 1u);
  ViolationReport rep = check_invariants(oae_sim.trace());
  EXPECT_EQ(rep.retries, 0u);  // aborts to quiescence, never retries
}

// Corrupted frames are dropped by the link CRC and retried with a clean
// copy, so completion eventually succeeds with the intended content.
TEST(Fito, CorruptionRetriesToCleanCompletion) {
  Scenario scn;
  scn.mode = SimMode::Fito;
  scn.horizon = 200;
  scn.link.corrupt_prob = 0.6;
  scn.fito_retry_limit = 10;
  scn.script.push_back(initiate(2, "A", {{1, 10}}));
  int completions = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto sim = Simulator::from_scenario(scn, seed);
    sim.run();
    if (sim.stats().fito_completions == 1) {
      ++completions;
      ViolationReport rep = check_invariants(sim.trace());
      EXPECT_EQ(rep.counts.at("A2"), 0u);  // clean copy, same meaning
    }
  }
  EXPECT_GT(completions, 20);
}

TEST(Fito, ComparisonGridShape) {
  Scenario scn;
  scn.horizon = 60;
  scn.script.push_back(set_schema(1, "B", kSchemaV2));
  scn.script.push_back(initiate(2, "A", {{1, 10}, {2, 20}}));
  for (Tick t = 0; t <= 12; ++t) scn.script.push_back(read(t, "B", {1, 2}));
  auto oae_sim = Simulator::from_scenario(scn, 9, SimMode::Oae);
  oae_sim.run();
  auto fito_sim = Simulator::from_scenario(scn, 9, SimMode::Fito);
  fito_sim.run();
  auto grid = analysis::comparison_grid(check_invariants(oae_sim.trace()),
                                        check_invariants(fito_sim.trace()));
  EXPECT_NE(grid.find("A2 atomic communication"), std::string::npos);
  EXPECT_NE(grid.find("oae"), std::string::npos);
  EXPECT_NE(grid.find("fito"), std::string::npos);
}

}  // namespace

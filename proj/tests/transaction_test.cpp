#include "oae/transaction.hpp"

#include <gtest/gtest.h>

#include "oae/netsim.hpp"

namespace {

using oae::FieldWrite;
using oae::Frame;
using oae::FrameKind;
using oae::Transaction;
using oae::TransactionRegistry;
using oae::TxnPhase;
using oae::TxnResult;
using oae::ValidationOutcome;
using oae::VisibleStore;

TEST(VisibleStoreOps, StagedWritesInvisibleUntilCommit) {
  VisibleStore store;
  store.stage(1, {{1, 10}, {2, 20}, {3, 30}});
  EXPECT_FALSE(store.read(1).has_value());
  EXPECT_FALSE(store.read(2).has_value());
  EXPECT_FALSE(store.read(3).has_value());
  TransactionRegistry reg;
  auto& txn = reg.create(0, 0, oae::Side::A, {{1, 10}, {2, 20}, {3, 30}}, 1, 1, 5);
  store.stage(txn.id, {{1, 10}, {2, 20}, {3, 30}});
  oae::commit_visibility(store, txn);
  EXPECT_EQ(store.read(1), 10);
  EXPECT_EQ(store.read(2), 20);
  EXPECT_EQ(store.read(3), 30);
}

TEST(VisibleStoreOps, CommitIsIdempotentAndUnknownCommitFaults) {
  VisibleStore store;
  TransactionRegistry reg;
  auto& txn = reg.create(0, 0, oae::Side::A, {{1, 1}}, 1, 1, 0);
  store.stage(txn.id, {{1, 1}});
  auto first = oae::commit_visibility(store, txn);
  EXPECT_EQ(first.size(), 1u);
  auto again = oae::commit_visibility(store, txn);
  EXPECT_TRUE(again.empty());  // no-op
  auto& other = reg.create(0, 0, oae::Side::A, {{9, 9}}, 1, 2, 0);
  EXPECT_THROW(oae::commit_visibility(store, other), oae::ProtocolFault);
}

TEST(VisibleStoreOps, AbortRollback) {
  VisibleStore store;
  TransactionRegistry reg;
  auto& txn = reg.create(0, 0, oae::Side::A, {{1, 1}}, 1, 1, 0);
  store.stage(txn.id, {{1, 1}});
  oae::abort_rollback(store, txn);
  EXPECT_FALSE(store.read(1).has_value());
  oae::abort_rollback(store, txn);  // idempotent
  // Abort after commit must fault: committed state is not silently revoked.
  auto& txn2 = reg.create(0, 0, oae::Side::A, {{2, 2}}, 1, 2, 0);
  store.stage(txn2.id, {{2, 2}});
  oae::commit_visibility(store, txn2);
  EXPECT_THROW(oae::abort_rollback(store, txn2), oae::ProtocolFault);
}

TEST(TransactionOps, ReflectionCarriesDigestNotPayload) {
  TransactionRegistry reg;
  auto& txn = reg.create(0, 0, oae::Side::A, {{1, 10}, {2, 20}}, 1, 1, 0);
  Frame tentative = oae::make_tentative_frame(txn, {0, 1});
  Frame reflection = oae::make_reflection_frame(tentative, oae::kSchemaV1);
  EXPECT_EQ(reflection.kind, FrameKind::Reflection);
  EXPECT_EQ(reflection.body.size(), 8u);  // a digest, never the payload
  EXPECT_EQ(oae::decode_digest(reflection.body), txn.intent);
}

TEST(TransactionOps, ValidateReflectionMatch) {
  TransactionRegistry reg;
  auto& txn = reg.create(0, 0, oae::Side::A, {{1, 10}}, 1, 1, 0);
  Frame tentative = oae::make_tentative_frame(txn, {0, 1});
  Frame reflection = oae::make_reflection_frame(tentative, oae::kSchemaV1);
  auto v = oae::validate_reflection(txn, reflection);
  EXPECT_EQ(v.outcome, ValidationOutcome::Commit);
}

// A receiver on a different schema version interprets the same bytes
// differently; the divergence surfaces as a digest mismatch and an abort
// with a semantic-divergence reason.
TEST(TransactionOps, ValidateReflectionSchemaSkewAborts) {
  TransactionRegistry reg;
  auto& txn = reg.create(0, 0, oae::Side::A, {{1, 10}}, oae::kSchemaV1, 1, 0);
  Frame tentative = oae::make_tentative_frame(txn, {0, 1});
  Frame reflection = oae::make_reflection_frame(tentative, oae::kSchemaV2);
  auto v = oae::validate_reflection(txn, reflection);
  EXPECT_EQ(v.outcome, ValidationOutcome::Abort);
  EXPECT_EQ(v.reason, "semantic_divergence");
  EXPECT_NE(v.echoed, v.expected);
}

TEST(TransactionOps, ValidateReflectionUnknownTxnFaults) {
  TransactionRegistry reg;
  auto& txn = reg.create(0, 0, oae::Side::A, {{1, 10}}, 1, 1, 0);
  Frame tentative = oae::make_tentative_frame(txn, {0, 1});
  Frame reflection = oae::make_reflection_frame(tentative, oae::kSchemaV1);
  reflection.txn = 999;
  EXPECT_THROW(oae::validate_reflection(txn, reflection), oae::LookupFault);
}

TEST(TransactionRegistryLifecycle, PhasesAreMonotone) {
  TransactionRegistry reg;
  auto& t = reg.create(0, 0, oae::Side::A, {{1, 1}}, 1, 1, 0);
  EXPECT_EQ(t.phase, TxnPhase::Indefinite);
  EXPECT_FALSE(t.orientation.has_value());  // indefinite = no orientation
  EXPECT_TRUE(reg.resolve_if_indefinite(t.id, oae::Side::A));
  EXPECT_EQ(t.phase, TxnPhase::Resolution);
  EXPECT_TRUE(t.orientation.has_value());
  EXPECT_FALSE(reg.resolve_if_indefinite(t.id, oae::Side::B));  // second is a no-op
  EXPECT_TRUE(reg.complete(t.id, TxnResult::Commit, "", 9));
  EXPECT_FALSE(reg.complete(t.id, TxnResult::Commit, "", 9));
  EXPECT_THROW(reg.complete(t.id, TxnResult::Abort, "x", 10), oae::ProtocolFault);
  EXPECT_THROW(reg.get(12345), oae::LookupFault);
}

// Observers never see a strict subset of a transaction's writes: a read
// placed at every tick across a three-field commit sees zero fields before
// the commit tick and all three after.
TEST(TransactionOps, MidTentativeObserversSeeNothing) {
  oae::Scenario scn;
  scn.horizon = 60;
  oae::ScriptOp init;
  init.kind = oae::ScriptOpKind::Initiate;
  init.tick = 5;
  init.actor = "A";
  init.writes = {{1, 10}, {2, 20}, {3, 30}};
  scn.script.push_back(init);
  for (oae::Tick t = 0; t < 30; ++t) {
    oae::ScriptOp rd;
    rd.kind = oae::ScriptOpKind::Read;
    rd.tick = t;
    rd.actor = t % 2 ? "A" : "B";
    rd.keys = {1, 2, 3};
    scn.script.push_back(rd);
  }
  auto sim = oae::sim::Simulator::from_scenario(scn);
  sim.run();
  for (const auto& r : sim.trace().records) {
    if (r.kind != oae::RecordKind::Read) continue;
    const std::string snap = *r.get("keys");
    const bool all_empty = snap == "1:~,2:~,3:~";
    const bool all_set = snap == "1:10,2:20,3:30";
    EXPECT_TRUE(all_empty || all_set) << "mixed or partial snapshot: " << snap;
  }
  EXPECT_EQ(sim.stats().committed, 1u);
}

}  // namespace

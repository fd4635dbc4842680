// Acceptance suite: each check prints one PASS/FAIL line. The process exits
// nonzero if any check fails. Scenario and golden files are read from the
// source tree.

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oae/analysis.hpp"
#include "oae/consensus.hpp"
#include "oae/link_fsm.hpp"
#include "oae/netsim.hpp"

using namespace oae;
using analysis::check_invariants;
using analysis::ViolationReport;
using sim::Simulator;

namespace {

int failures = 0;
std::chrono::steady_clock::time_point t0;

void start() { t0 = std::chrono::steady_clock::now(); }

void verdict(int criterion, bool ok, const std::string& what, const std::string& detail = "") {
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
          .count();
  std::cout << (ok ? "PASS" : "FAIL") << " criterion-" << criterion << " " << what << " ["
            << elapsed << " ms]";
  if (!detail.empty()) std::cout << " :: " << detail;
  std::cout << std::endl;
  if (!ok) ++failures;
}

std::string scenario_path(const std::string& name) {
  return std::string(OAE_SOURCE_DIR) + "/scenarios/" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// --- criterion 1: transition closure ---------------------------------------

void criterion1() {
  start();
  std::vector<EndpointFsm> contexts;
  auto make = [](LinkState s, TxnRole role, bool validated, bool decided) {
    EndpointFsm f;
    f.state = s;
    f.role = role;
    f.validated = validated;
    f.decided = decided;
    if (s == LinkState::Tentative || s == LinkState::Reflecting) {
      f.current_txn = 10;
      f.timeout_deadline = 50;
    }
    if (s == LinkState::Committed || s == LinkState::Aborted) f.concluded_txn = 10;
    if (role == TxnRole::Initiator) f.own_tie = TieBreak{0, 1};
    return f;
  };
  contexts.push_back(make(LinkState::Reset, TxnRole::None, false, false));
  contexts.push_back(make(LinkState::Idle, TxnRole::None, false, false));
  contexts.push_back(make(LinkState::Tentative, TxnRole::Initiator, false, false));
  contexts.push_back(make(LinkState::Tentative, TxnRole::Responder, false, false));
  contexts.push_back(make(LinkState::Reflecting, TxnRole::Initiator, false, false));
  contexts.push_back(make(LinkState::Reflecting, TxnRole::Initiator, true, true));
  contexts.push_back(make(LinkState::Reflecting, TxnRole::Responder, true, false));
  contexts.push_back(make(LinkState::Reflecting, TxnRole::Responder, false, false));
  contexts.push_back(make(LinkState::Committed, TxnRole::None, false, false));
  contexts.push_back(make(LinkState::Aborted, TxnRole::None, false, false));
  {
    auto loser = make(LinkState::Tentative, TxnRole::Initiator, false, false);
    loser.side = Side::B;
    loser.own_tie = TieBreak{1, 3};
    contexts.push_back(loser);
  }

  auto frame_of = [](FrameKind kind, TxnId txn, TieBreak tie) {
    Frame f;
    f.kind = kind;
    f.txn = txn;
    f.tiebreak = tie;
    if (kind == FrameKind::Reflection || kind == FrameKind::CommitAck)
      f.body = encode_digest(0x99);
    if (kind == FrameKind::Tentative) f.body = encode_fields({{1, 2}});
    return f;
  };
  std::vector<LinkEvent> events;
  for (auto kind : {LinkEventKind::LinkUp, LinkEventKind::Initiate, LinkEventKind::ValidationOk,
                    LinkEventKind::ValidationFail, LinkEventKind::Timeout, LinkEventKind::Quiesce})
    events.push_back(LinkEvent{kind, 60, 99, std::nullopt});
  for (TxnId txn : {10ull, 11ull}) {
    for (auto tie : {TieBreak{0, 1}, TieBreak{1, 9}})
      events.push_back(LinkEvent{LinkEventKind::DataArrived, 60, 0,
                                 frame_of(FrameKind::Tentative, txn, tie)});
    events.push_back(LinkEvent{LinkEventKind::ReflectionArrived, 60, 0,
                               frame_of(FrameKind::Reflection, txn, {1, 1})});
    events.push_back(
        LinkEvent{LinkEventKind::CommitAck, 60, 0, frame_of(FrameKind::CommitAck, txn, {1, 1})});
    events.push_back(
        LinkEvent{LinkEventKind::PeerAbort, 60, 0, frame_of(FrameKind::AbortNotify, txn, {1, 1})});
  }

  std::set<std::pair<LinkState, LinkState>> edges;
  bool tentative_to_committed = false;
  for (const auto& ctx : contexts)
    for (const auto& ev : events) {
      StepResult r = step(ctx, ev);
      if (r.moved) {
        edges.insert({r.from, r.to});
        if (r.from == LinkState::Tentative && r.to == LinkState::Committed)
          tentative_to_committed = true;
      }
    }
  const std::set<std::pair<LinkState, LinkState>> expected = {
      {LinkState::Reset, LinkState::Idle},          {LinkState::Idle, LinkState::Tentative},
      {LinkState::Tentative, LinkState::Reflecting}, {LinkState::Reflecting, LinkState::Committed},
      {LinkState::Tentative, LinkState::Aborted},   {LinkState::Reflecting, LinkState::Aborted},
      {LinkState::Committed, LinkState::Idle},      {LinkState::Aborted, LinkState::Idle},
  };
  verdict(1, edges == expected && !tentative_to_committed,
          "fsm closure: exhaustive product reaches exactly the eight transitions",
          "edges=" + std::to_string(edges.size()));
}

// --- criteria 2, 3, 7: the big sweep ----------------------------------------

struct SweepOutcome {
  ViolationReport oae;
  ViolationReport fito;
};

SweepOutcome sweep_standard(std::uint64_t seeds) {
  Scenario scn = load_scenario(scenario_path("standard_faults.json"));
  SweepOutcome out;
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    auto sim = Simulator::from_scenario(scn, s, SimMode::Oae);
    sim.run();
    out.oae.merge(check_invariants(sim.trace()));
  }
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    auto sim = Simulator::from_scenario(scn, s, SimMode::Fito);
    sim.run();
    out.fito.merge(check_invariants(sim.trace()));
  }
  return out;
}

void criteria_2_3_7(const SweepOutcome& sweep) {
  const auto& oae_rep = sweep.oae;
  bool c2 = oae_rep.total() == 0 && oae_rep.conservation_ok && oae_rep.commits > 0;
  {
    std::ostringstream d;
    d << "A1=" << oae_rep.counts.at("A1") << " A2=" << oae_rep.counts.at("A2")
      << " A3=" << oae_rep.counts.at("A3") << " N1=" << oae_rep.counts.at("N1")
      << " N2=" << oae_rep.counts.at("N2") << " N3=" << oae_rep.counts.at("N3")
      << " N4=" << oae_rep.counts.at("N4") << " commits=" << oae_rep.commits
      << " aborts=" << oae_rep.aborts;
    verdict(2, c2, "normative sweep: 10000 seeded fault scenarios, zero violations", d.str());
  }
  {
    const auto& f = sweep.fito;
    std::ostringstream d;
    d << "fito A2=" << f.counts.at("A2") << " A3=" << f.counts.at("A3")
      << " completions=" << f.completions;
    verdict(3, f.counts.at("A2") > 0 && f.counts.at("A3") > 0,
            "contrast: same sweep in fito mode shows A2>0 and A3>0", d.str());
  }
}

void criterion7(const SweepOutcome& sweep) {
  start();
  Scenario skew = load_scenario(scenario_path("skew.json"));
  auto fito_skew = Simulator::from_scenario(skew, 1, SimMode::Fito);
  fito_skew.run();
  auto skew_rep = check_invariants(fito_skew.trace());
  const auto& oae_rep = sweep.oae;
  const bool ok = oae_rep.kbp_balance_violations == 0 && oae_rep.kbp_records >= 1000000 &&
                  oae_rep.kbp_commit_checks > 0 && oae_rep.kbp_ineligible_commits == 0 &&
                  skew_rep.kbp_ineligible_commits >= 1;
  std::ostringstream d;
  d << "balance_violations=" << oae_rep.kbp_balance_violations << "/" << oae_rep.kbp_records
    << " records, ineligible=" << oae_rep.kbp_ineligible_commits << "/"
    << oae_rep.kbp_commit_checks << " commits, fito_skew_ineligible="
    << skew_rep.kbp_ineligible_commits;
  verdict(7, ok, "kbp: balance holds every tick, eligibility at every commit", d.str());
}

// --- criterion 4: timeout-abort vs timeout-retry ------------------------------

void criterion4() {
  start();
  Scenario scn = load_scenario(scenario_path("loss_all.json"));
  auto oae_sim = Simulator::from_scenario(scn, 1, SimMode::Oae);
  oae_sim.run();
  std::size_t txns = 0, aborted = 0, committed = 0;
  for (const auto& [id, t] : oae_sim.registry().all()) {
    ++txns;
    if (t.result == TxnResult::Abort) ++aborted;
    if (t.result == TxnResult::Commit) ++committed;
  }
  auto oae_rep = check_invariants(oae_sim.trace());

  auto fito_sim = Simulator::from_scenario(scn, 1, SimMode::Fito);
  fito_sim.run();
  // Every baseline transaction must retry at least once before failing stop.
  std::map<TxnId, int> retries_per_txn;
  std::size_t failstops = 0, fito_txns = 0;
  for (const auto& r : fito_sim.trace().records) {
    if (r.kind == RecordKind::Retry) retries_per_txn[r.txn]++;
    if (r.kind == RecordKind::Outcome && *r.get("result") == "failstop") ++failstops;
    if (r.kind == RecordKind::Created) ++fito_txns;
  }
  bool every_retried = fito_txns > 0 && retries_per_txn.size() == fito_txns;
  for (const auto& [id, n] : retries_per_txn) every_retried &= n >= 1;

  const bool ok = txns == 3 && aborted == txns && committed == 0 && oae_rep.retries == 0 &&
                  every_retried && failstops == fito_txns;
  std::ostringstream d;
  d << "oae aborted=" << aborted << "/" << txns << " committed=" << committed
    << "; fito retried=" << retries_per_txn.size() << "/" << fito_txns
    << " failstops=" << failstops;
  verdict(4, ok, "total loss: oae aborts everything, fito retries then fail-stops", d.str());
}

// --- criterion 5: four-valued resolution trajectories --------------------------

bool trajectories_ok(const Trace& trace, std::string& why) {
  std::set<Tick> ticks, commit_ticks;
  for (const auto& r : trace.records) {
    ticks.insert(r.tick);
    if (r.kind == RecordKind::Outcome &&
        (*r.get("result") == "commit" || *r.get("result") == "completed"))
      commit_ticks.insert(r.tick);
  }
  std::map<std::pair<std::size_t, std::size_t>, std::pair<bool, CausalRelation>> state;
  std::map<std::pair<std::size_t, std::size_t>, Tick> change_tick;
  for (Tick t : ticks) {
    auto m = analysis::relation_matrix(trace, t);
    for (std::size_t i = 0; i < m.events.size(); ++i)
      for (std::size_t j = i + 1; j < m.events.size(); ++j) {
        const auto key = std::make_pair(m.events[i], m.events[j]);
        const CausalRelation rel = m.at(i, j);
        auto it = state.find(key);
        if (it == state.end()) {
          state[key] = {rel != CausalRelation::Indefinite, rel};
          if (rel != CausalRelation::Indefinite) change_tick[key] = t;
        } else if (!it->second.first) {
          if (rel != CausalRelation::Indefinite) {
            it->second = {true, rel};
            change_tick[key] = t;
            if (!commit_ticks.count(t)) {
              why = "resolution at non-commit tick " + std::to_string(t);
              return false;
            }
          }
        } else if (rel != it->second.second) {
          why = "relation changed after resolution at tick " + std::to_string(t);
          return false;
        }
      }
  }
  return true;
}

void criterion5() {
  start();
  std::string why;
  bool ok = true;
  for (const char* name : {"crossed.json", "hyperdata_a.json", "single_commit.json"}) {
    Scenario scn = load_scenario(scenario_path(name));
    auto sim = Simulator::from_scenario(scn);
    sim.run();
    if (!trajectories_ok(sim.trace(), why)) {
      ok = false;
      why = std::string(name) + ": " + why;
      break;
    }
  }
  if (ok) {
    Scenario scn = load_scenario(scenario_path("standard_faults.json"));
    for (std::uint64_t seed = 1; seed <= 12 && ok; ++seed) {
      auto sim = Simulator::from_scenario(scn, seed, SimMode::Oae);
      sim.run();
      if (!trajectories_ok(sim.trace(), why)) {
        ok = false;
        why = "standard seed " + std::to_string(seed) + ": " + why;
      }
    }
  }
  verdict(5, ok, "four-valued resolution: trajectories are Indefinite*(definite)?", why);
}

// --- criterion 6: expressiveness witness ---------------------------------------

void criterion6() {
  start();
  auto run_file = [](const char* name) {
    Scenario scn = load_scenario(scenario_path(name));
    auto sim = Simulator::from_scenario(scn);
    sim.run();
    return sim.trace();
  };
  Trace ta = run_file("hyperdata_a.json");
  Trace tb = run_file("hyperdata_b.json");
  auto pa = analysis::dco_project(ta);
  auto pb = analysis::dco_project(tb);
  const bool traces_differ = ta.to_text() != tb.to_text();
  const bool images_equal = pa.serialize() == pb.serialize();
  const bool lossy = !pa.loss_set.empty() && !pb.loss_set.empty();
  std::ostringstream d;
  d << "traces_differ=" << traces_differ << " images_equal=" << images_equal
    << " loss_pairs=" << pa.loss_set.size();
  verdict(6, traces_differ && images_equal && lossy,
          "expressiveness: distinct indefinite-phase traces, identical projections", d.str());
}

// --- criterion 8: perfect information feedback ----------------------------------

void criterion8() {
  start();
  auto commit_vs_txdone = [](const char* name) {
    Scenario scn = load_scenario(scenario_path(name));
    auto sim = Simulator::from_scenario(scn);
    sim.run();
    std::optional<Tick> commit, txdone;
    for (const auto& r : sim.trace().records) {
      if (r.kind == RecordKind::Move && *r.get("to") == "committed" && !commit) commit = r.tick;
      if (r.kind == RecordKind::TxDone && !txdone) txdone = r.tick;
    }
    return std::make_pair(commit, txdone);
  };
  auto [pc, pt] = commit_vs_txdone("pif.json");
  auto [nc, nt] = commit_vs_txdone("non_pif.json");
  Scenario pif_scn = load_scenario(scenario_path("pif.json"));
  Scenario non_scn = load_scenario(scenario_path("non_pif.json"));
  const bool ok = pif_condition(pif_scn.link) && !pif_condition(non_scn.link) && pc && pt &&
                  *pc <= *pt && nc && nt && *nc > *nt;
  std::ostringstream d;
  if (pc && pt && nc && nt)
    d << "pif: commit@" << *pc << " <= txdone@" << *pt << "; non-pif: commit@" << *nc
      << " > txdone@" << *nt;
  verdict(8, ok, "pif: commit inside the frame time iff the round trip beats it", d.str());
}

// --- criterion 9: consensus --------------------------------------------------------

void criterion9() {
  start();
  auto two = consensus::exhaustive_consensus(2, {10, 20}, 6);
  auto three = consensus::exhaustive_consensus(3, {1, 2, 3}, 4);
  bool ok = two.failures == 0 && three.failures == 0 && two.max_steps <= 4 &&
            three.max_steps <= 4;
  std::uint64_t max_steps = 0;
  std::size_t random_failures = 0;
  SplitMix64 rng(0xACCE55);
  for (int trial = 0; trial < 1000; ++trial) {
    consensus::ConsensusScenario scn;
    scn.n = 5;
    scn.proposals = {1, 2, 3, 4, 5};
    for (std::size_t i = 0; i < scn.n; ++i) scn.start_ticks.push_back(1 + rng.next() % 20);
    const std::size_t crashes = rng.next() % 3;
    while (scn.crash_set.size() < crashes) scn.crash_set.insert(rng.next() % scn.n);
    scn.crash_tick = 1 + rng.next() % 30;
    scn.seed = rng.next();
    auto r = consensus::run_consensus(scn);
    if (!r.agreement || !r.validity || !r.all_live_decided) ++random_failures;
    for (std::size_t i = 0; i < scn.n; ++i)
      if (!scn.crash_set.count(i)) max_steps = std::max(max_steps, r.steps[i]);
  }
  ok = ok && random_failures == 0 && max_steps <= 6;
  std::ostringstream d;
  d << "exhaustive n=2:" << two.runs << " n=3:" << three.runs
    << " runs, random n=5: failures=" << random_failures << "/1000 max_steps=" << max_steps;
  verdict(9, ok, "consensus: agreement, validity, bounded steps; crashes stall nobody", d.str());
}

// --- criterion 10: determinism and golden traces ------------------------------------

void criterion10() {
  start();
  const char* canonical[] = {"single_commit.json", "crossed.json", "pif.json",
                             "hyperdata_a.json", "loss_all.json"};
  bool ok = true;
  std::string why;
  for (const char* name : canonical) {
    Scenario scn = load_scenario(scenario_path(name));
    auto once = Simulator::from_scenario(scn);
    auto twice = Simulator::from_scenario(scn);
    const std::string a = once.run().to_text();
    const std::string b = twice.run().to_text();
    if (a != b) {
      ok = false;
      why = std::string(name) + ": two runs differ";
      break;
    }
    const std::string golden_path = std::string(OAE_SOURCE_DIR) + "/tests/golden/" +
                                    scn.name + ".trace";
    std::string golden;
    try {
      golden = read_file(golden_path);
    } catch (const std::exception&) {
      ok = false;
      why = "missing golden file " + golden_path;
      break;
    }
    if (golden != a) {
      ok = false;
      why = std::string(name) + ": trace differs from checked-in golden";
      break;
    }
  }
  verdict(10, ok, "determinism: run-twice identity and golden traces", why);
}

}  // namespace

int main() {
  std::cout << "acceptance suite\n";
  criterion1();

  start();
  SweepOutcome sweep = sweep_standard(10000);
  criteria_2_3_7(sweep);
  criterion4();
  criterion5();
  criterion6();
  criterion7(sweep);
  criterion8();
  criterion9();
  criterion10();

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : "FAILURES PRESENT") << " (" << failures
            << " failed)\n";
  return failures == 0 ? 0 : 1;
}

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "oae/kbp.hpp"
#include "oae/link_fsm.hpp"
#include "oae/payload.hpp"
#include "oae/rng.hpp"
#include "oae/scenario.hpp"
#include "oae/store.hpp"
#include "oae/tensor_clock.hpp"
#include "oae/trace.hpp"
#include "oae/transaction.hpp"

namespace oae {
namespace sim {

// Time model: integer ticks. A frame's leading edge arrives one_way_delay
// after emission and carries the full content (cut-through), while the wire
// stays occupied until emission + frame_tx_time; that gap is what lets a
// round trip finish before the transmitter falls silent. Faults are decided
// once per emission from the per-direction seeded stream, so a trace is a
// pure function of (scenario, seed, mode).

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

struct SimConfig {
  struct LinkDef {
    ActorId a = 0;
    ActorId b = 1;
    LinkParams params;
  };
  std::vector<std::string> actors{"A", "B"};
  std::vector<LinkDef> links{LinkDef{}};
  Tick horizon = 200;
  SimMode mode = SimMode::Oae;
  HyperdataConfig hyperdata;
  int fito_retry_limit = 3;
};

struct RunStats {
  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;
  std::uint64_t rejected_initiations = 0;
  std::uint64_t kbp_balance_violations = 0;
  std::uint64_t kbp_commit_checks = 0;
  std::uint64_t kbp_ineligible_commits = 0;
  std::uint64_t kbp_ticks_audited = 0;
  std::uint64_t fito_completions = 0;
  std::uint64_t fito_retries = 0;
  std::uint64_t fito_failstops = 0;
};

class Simulator {
 public:
  using CommitHook = std::function<void(const Transaction&, std::uint64_t seq)>;

  explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg)) {
    for (ActorId i = 0; i < cfg_.actors.size(); ++i) {
      ActorState a;
      a.name = cfg_.actors[i];
      actors_.push_back(std::move(a));
    }
    for (LinkId li = 0; li < cfg_.links.size(); ++li) {
      const auto& def = cfg_.links[li];
      LinkRuntime link;
      link.id = li;
      link.actor_of[0] = def.a;
      link.actor_of[1] = def.b;
      link.params = def.params;
      for (int side = 0; side < 2; ++side) {
        auto& ep = link.ep[side];
        ep.fsm.side = static_cast<Side>(side);
        ep.fsm.timeout_ticks = def.params.effective_timeout();
        ep.epi.owner = static_cast<Side>(side);
        ep.epi.known_mask = static_cast<std::uint8_t>(
            kbp::own_proposal_mask(static_cast<Side>(side)) |
            kbp::reflected_digest_mask(static_cast<Side>(side)));
        ep.epi.known_values = 0;
        ep.epi.round = 0;
        ep.fault_rng = SplitMix64::derive(def.params.seed, 2ull * li + static_cast<unsigned>(side));
      }
      link.hyper_rng = SplitMix64::derive(def.params.seed, 1000ull + li);
      links_.push_back(std::move(link));
    }
    // Links come up at tick zero, before any scripted work.
    for (LinkId li = 0; li < links_.size(); ++li)
      for (int side = 0; side < 2; ++side)
        schedule(0, EvKind::LinkUp, li, static_cast<Side>(side));
    if (cfg_.hyperdata.enabled && cfg_.mode == SimMode::Oae)
      schedule(0, EvKind::Hyper, 0, Side::A);
  }

  static Simulator from_scenario(const Scenario& scn, std::optional<std::uint64_t> seed = {},
                                 std::optional<SimMode> mode = {}) {
    validate(scn);
    SimConfig cfg;
    cfg.actors = scn.actors;
    SimConfig::LinkDef def;
    def.a = 0;
    def.b = 1;
    def.params = scn.link;
    if (seed) def.params.seed = *seed;
    cfg.links = {def};
    cfg.horizon = scn.horizon;
    cfg.mode = mode.value_or(scn.mode);
    cfg.hyperdata = scn.hyperdata;
    cfg.fito_retry_limit = scn.fito_retry_limit;
    Simulator s(cfg);
    for (const auto& op : scn.script) s.schedule_script(op);
    return s;
  }

  // --- programmatic driving (consensus topologies, tests) ------------------

  void schedule_script(const ScriptOp& op) {
    ActorId actor = actor_by_name(op.actor);
    switch (op.kind) {
      case ScriptOpKind::Initiate:
        schedule_initiate(link_of_actor(actor), actor, op.writes, op.tick);
        break;
      case ScriptOpKind::Read:
        schedule_read(actor, op.keys, op.tick);
        break;
      case ScriptOpKind::SetSchema:
        schedule_set_schema(actor, op.version, op.tick);
        break;
    }
  }

  void schedule_initiate(LinkId link, ActorId actor, std::vector<FieldWrite> writes, Tick tick) {
    Ev ev = make_ev(tick, EvKind::Initiate, link, side_of(link, actor));
    ev.writes = std::move(writes);
    push(std::move(ev));
  }
  void schedule_read(ActorId actor, std::vector<FieldId> keys, Tick tick) {
    Ev ev = make_ev(tick, EvKind::Read, 0, Side::A);
    ev.actor = actor;
    ev.keys = std::move(keys);
    push(std::move(ev));
  }
  void schedule_set_schema(ActorId actor, SchemaVersion v, Tick tick) {
    Ev ev = make_ev(tick, EvKind::SetSchema, 0, Side::A);
    ev.actor = actor;
    ev.version = v;
    push(std::move(ev));
  }
  void schedule_crash(ActorId actor, Tick tick) {
    Ev ev = make_ev(tick, EvKind::Crash, 0, Side::A);
    ev.actor = actor;
    push(std::move(ev));
  }

  void set_commit_hook(CommitHook hook) { commit_hook_ = std::move(hook); }

  /// Appends an auditor-channel record on behalf of a layered protocol
  /// (the consensus register uses this for its operation log).
  void append_record(TraceRecord r) { trace_.records.push_back(std::move(r)); }

  // --- run loop -------------------------------------------------------------

  struct TickResult {
    Tick tick;
    std::size_t first_record;
    std::size_t record_count;
  };

  /// Processes the next tick's event batch. Returns nothing once the run is
  /// over (queue drained or horizon crossed, after the closing sweep).
  std::optional<TickResult> advance() {
    if (finished_) return std::nullopt;
    if (queue_.empty() || queue_.top().tick > cfg_.horizon) {
      finish();
      return std::nullopt;
    }
    const Tick t = queue_.top().tick;
    now_ = t;
    const std::size_t first = trace_.records.size();
    while (!queue_.empty() && queue_.top().tick == t) {
      Ev ev = queue_.top();
      queue_.pop();
      dispatch(ev);
    }
    sequence_commits();
    audit_tick(t);
    return TickResult{t, first, trace_.records.size() - first};
  }

  const Trace& run() {
    while (advance()) {
    }
    return trace_;
  }

  const Trace& trace() const { return trace_; }
  const TransactionRegistry& registry() const { return registry_; }
  const RunStats& stats() const { return stats_; }
  Tick now() const { return now_; }
  const VisibleStore& store_of(ActorId a) const { return actors_.at(a).store; }
  std::uint64_t next_sequence() const { return next_seq_; }

  ActorId actor_by_name(const std::string& name) const {
    for (ActorId i = 0; i < actors_.size(); ++i)
      if (actors_[i].name == name) return i;
    throw LookupFault("unknown actor '" + name + "'");
  }

 private:
  // --- internal event machinery --------------------------------------------

  enum class EvKind : std::uint8_t {
    LinkUp,
    Initiate,
    Read,
    SetSchema,
    Crash,
    Delivery,
    TxDone,
    Timeout,
    Quiesce,
    Hyper,
    FitoRetry,
  };

  struct Ev {
    Tick tick = 0;
    std::uint64_t seq = 0;
    EvKind kind = EvKind::LinkUp;
    LinkId link = 0;
    Side side = Side::A;
    ActorId actor = 0;
    std::uint64_t copy = 0;        // Delivery / TxDone
    std::uint64_t sched_epoch = 0; // Delivery reschedule guard
    std::uint64_t epoch = 0;       // Timeout guard
    TxnId txn = 0;
    int field_index = 0;           // FitoRetry
    int attempt = 0;               // FitoRetry
    std::vector<FieldWrite> writes;
    std::vector<FieldId> keys;
    SchemaVersion version = kSchemaV1;

    struct Later {
      bool operator()(const Ev& x, const Ev& y) const {
        if (x.tick != y.tick) return x.tick > y.tick;
        return x.seq > y.seq;
      }
    };
  };

  struct FrameCopy {
    Frame frame;
    std::uint64_t id = 0;
    LinkId link = 0;
    Side from = Side::A;
    bool corrupted = false;
    Tick emitted = 0;
    Tick delivery = 0;
    std::uint64_t sched_epoch = 0;
    bool delivered = false;
    bool dropped = false;
    bool flushed = false;
  };

  struct EndpointState {
    EndpointFsm fsm;
    kbp::EpiRegister epi;
    SplitMix64 fault_rng{0};  // stream for frames this side emits
    std::set<TxnId> seen_concluded;
    std::uint64_t deadline_epoch = 0;
    Frame pending_data;  // tentative frame being responded to
  };

  struct LinkRuntime {
    LinkId id = 0;
    ActorId actor_of[2] = {0, 1};
    LinkParams params;
    EndpointState ep[2];
    TensorClock clock;
    kbp::OntRegister ont;
    std::uint64_t attempts = 0;  // per-link round-attempt counter
    SplitMix64 hyper_rng{0};
    std::uint64_t hyper_seq = 0;
    std::vector<std::uint64_t> in_flight[2];  // copies pending per direction
    std::vector<TxnId> commits_this_tick;
  };

  struct ActorState {
    std::string name;
    VisibleStore store;
    SchemaVersion schema = kSchemaV1;
    bool alive = true;
  };

  struct FitoTxn {
    TxnId txn = 0;
    LinkId link = 0;
    Side sender = Side::A;
    std::vector<FieldWrite> fields;
    std::vector<bool> acked;
    std::vector<int> attempts;
    bool concluded = false;
  };

  SimConfig cfg_;
  std::vector<ActorState> actors_;
  std::vector<LinkRuntime> links_;
  TransactionRegistry registry_;
  Trace trace_;
  RunStats stats_;
  std::priority_queue<Ev, std::vector<Ev>, typename Ev::Later> queue_;
  std::map<std::uint64_t, FrameCopy> copies_;
  std::map<std::pair<ActorId, TxnId>, SchemaVersion> staged_schema_;
  std::map<TxnId, FitoTxn> fito_;
  std::vector<TxnId> commit_batch_;
  CommitHook commit_hook_;
  std::uint64_t next_ev_seq_ = 0;
  std::uint64_t next_copy_ = 0;
  std::uint64_t next_seq_ = 1;  // committed-transaction sequence numbers
  Tick now_ = 0;
  bool finished_ = false;

  Ev make_ev(Tick tick, EvKind kind, LinkId link, Side side) {
    Ev ev;
    ev.tick = tick;
    ev.kind = kind;
    ev.link = link;
    ev.side = side;
    return ev;
  }
  void push(Ev ev) {
    ev.seq = next_ev_seq_++;
    queue_.push(std::move(ev));
  }
  void schedule(Tick tick, EvKind kind, LinkId link, Side side) {
    push(make_ev(tick, kind, link, side));
  }

  Side side_of(LinkId link, ActorId actor) const {
    const auto& l = links_.at(link);
    if (l.actor_of[0] == actor) return Side::A;
    if (l.actor_of[1] == actor) return Side::B;
    throw LookupFault("actor " + std::to_string(actor) + " is not on link " + std::to_string(link));
  }
  LinkId link_of_actor(ActorId actor) const {
    for (const auto& l : links_)
      if (l.actor_of[0] == actor || l.actor_of[1] == actor) return l.id;
    throw LookupFault("actor " + std::to_string(actor) + " has no link");
  }
  ActorState& actor_at(LinkRuntime& link, Side s) { return actors_[link.actor_of[static_cast<int>(s)]]; }
  const std::string& name_of(LinkRuntime& link, Side s) {
    return actors_[link.actor_of[static_cast<int>(s)]].name;
  }

  // --- trace helpers --------------------------------------------------------

  TraceRecord& rec(Tick tick, LinkId link, Channel ch, const std::string& endpoint, TxnId txn,
                   RecordKind kind) {
    TraceRecord r;
    r.tick = tick;
    r.link = link;
    r.channel = ch;
    r.endpoint = endpoint;
    r.txn = txn;
    r.kind = kind;
    trace_.records.push_back(std::move(r));
    return trace_.records.back();
  }

  void trace_fsm(LinkRuntime& link, Side side, const StepResult& sr, LinkEventKind ev, TxnId txn) {
    if (sr.moved) {
      auto& r = rec(now_, link.id, Channel::Fsm, name_of(link, side), txn, RecordKind::Move);
      r.set("from", std::string(to_token(sr.from)))
          .set("ev", std::string(to_token(ev)))
          .set("to", std::string(to_token(sr.to)));
      if (sr.reason) r.set("reason", std::string(sr.reason));
    } else {
      auto& r = rec(now_, link.id, Channel::Fsm, name_of(link, side), txn,
                    sr.rejected ? RecordKind::Rejected : RecordKind::Ignored);
      r.set("state", std::string(to_token(sr.from)))
          .set("ev", std::string(to_token(ev)))
          .set("reason", std::string(sr.reason ? sr.reason : "unspecified"));
    }
  }

  // --- emission pipeline ----------------------------------------------------

  std::uint64_t emit_frame(LinkRuntime& link, Side from, Frame frame) {
    const int dir = static_cast<int>(from);
    FrameCopy c;
    c.frame = std::move(frame);
    c.id = ++next_copy_;
    c.link = link.id;
    c.from = from;
    c.emitted = now_;
    c.delivery = now_ + link.params.one_way_delay;

    {
      auto& r = rec(now_, link.id, Channel::Wire, name_of(link, from), c.frame.txn,
                    RecordKind::Emit);
      r.set("frame", std::string(to_token(c.frame.kind))).set("copy", c.id);
      if (c.frame.kind == FrameKind::Tentative || c.frame.kind == FrameKind::FitoData)
        r.set("tie", std::string(c.frame.tiebreak.endpoint ? "B" : "A") + ":" +
                         std::to_string(c.frame.tiebreak.counter))
            .set("sv", static_cast<std::uint64_t>(c.frame.schema));
    }
    if (c.frame.kind == FrameKind::Tentative || c.frame.kind == FrameKind::FitoData) {
      Ev done = make_ev(now_ + link.params.frame_tx_time, EvKind::TxDone, link.id, from);
      done.copy = c.id;
      push(std::move(done));
    }

    auto& rng = link.ep[dir].fault_rng;
    const bool lost = rng.chance(link.params.loss_prob);
    const bool duped = rng.chance(link.params.dup_prob);
    const bool reordered = rng.chance(link.params.reorder_prob);
    const bool corrupted = rng.chance(link.params.corrupt_prob);

    if (lost) {
      c.dropped = true;
      const std::uint64_t id = c.id;
      const TxnId txn = c.frame.txn;
      copies_.emplace(id, std::move(c));
      rec(now_, link.id, Channel::Wire, "", txn, RecordKind::Drop).set("copy", id);
      return id;
    }
    if (corrupted && !c.frame.body.empty()) {
      const std::uint64_t bit = rng.next() % (c.frame.body.size() * 8);
      c.frame.body[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      c.corrupted = true;
      rec(now_, link.id, Channel::Wire, "", c.frame.txn, RecordKind::Corrupt).set("copy", c.id);
    }
    if (reordered) {
      std::uint64_t other = 0;
      if (!link.in_flight[dir].empty()) other = link.in_flight[dir].back();
      if (other != 0) {
        FrameCopy& o = copies_[other];
        std::swap(c.delivery, o.delivery);
        o.sched_epoch++;
        Ev redo = make_ev(o.delivery, EvKind::Delivery, link.id, opposite(o.from));
        redo.copy = o.id;
        redo.sched_epoch = o.sched_epoch;
        push(std::move(redo));
      } else {
        c.delivery += 1;  // nothing to swap with; degrades to a delay
      }
      rec(now_, link.id, Channel::Wire, "", c.frame.txn, RecordKind::Reorder)
          .set("copy", c.id)
          .set("with", other);
    }

    const std::uint64_t id = c.id;
    schedule_delivery(link, c);
    copies_.emplace(id, std::move(c));

    if (duped) {
      FrameCopy d = copies_[id];
      d.id = ++next_copy_;
      d.delivery = copies_[id].delivery + 1;
      d.sched_epoch = 0;
      rec(now_, link.id, Channel::Wire, "", d.frame.txn, RecordKind::Dup)
          .set("copy", d.id)
          .set("of", id);
      const std::uint64_t did = d.id;
      schedule_delivery(link, d);
      copies_.emplace(did, std::move(d));
    }
    return id;
  }

  void schedule_delivery(LinkRuntime& link, FrameCopy& c) {
    link.in_flight[static_cast<int>(c.from)].push_back(c.id);
    Ev ev = make_ev(c.delivery, EvKind::Delivery, link.id, opposite(c.from));
    ev.copy = c.id;
    ev.sched_epoch = c.sched_epoch;
    push(std::move(ev));
  }

  void unflight(LinkRuntime& link, const FrameCopy& c) {
    auto& v = link.in_flight[static_cast<int>(c.from)];
    v.erase(std::remove(v.begin(), v.end(), c.id), v.end());
  }

  // --- event dispatch ---------------------------------------------------------

  void dispatch(const Ev& ev) {
    switch (ev.kind) {
      case EvKind::LinkUp: handle_link_up(ev); break;
      case EvKind::Initiate: handle_initiate(ev); break;
      case EvKind::Read: handle_read(ev); break;
      case EvKind::SetSchema: handle_set_schema(ev); break;
      case EvKind::Crash: handle_crash(ev); break;
      case EvKind::Delivery: handle_delivery(ev); break;
      case EvKind::TxDone: handle_txdone(ev); break;
      case EvKind::Timeout: handle_timeout(ev); break;
      case EvKind::Quiesce: handle_quiesce(ev); break;
      case EvKind::Hyper: handle_hyper(ev); break;
      case EvKind::FitoRetry: handle_fito_retry(ev); break;
    }
  }

  void handle_link_up(const Ev& ev) {
    LinkRuntime& link = links_[ev.link];
    auto& ep = link.ep[static_cast<int>(ev.side)];
    LinkEvent e{LinkEventKind::LinkUp, now_, 0, std::nullopt};
    StepResult sr = step(ep.fsm, e);
    trace_fsm(link, ev.side, sr, LinkEventKind::LinkUp, 0);
    ep.fsm = sr.next;
  }

  void handle_initiate(const Ev& ev) {
    LinkRuntime& link = links_[ev.link];
    auto& ep = link.ep[static_cast<int>(ev.side)];
    ActorState& actor = actor_at(link, ev.side);
    if (!actor.alive) return;
    if (cfg_.mode == SimMode::Fito) {
      fito_write(link, ev.side, ev.writes);
      return;
    }
    if (ep.fsm.state != LinkState::Idle) {
      LinkEvent e{LinkEventKind::Initiate, now_, 0, std::nullopt};
      StepResult sr = step(ep.fsm, e);
      trace_fsm(link, ev.side, sr, LinkEventKind::Initiate, 0);
      stats_.rejected_initiations++;
      return;
    }
    link.attempts++;
    Transaction& txn = registry_.create(link.id, link.actor_of[static_cast<int>(ev.side)],
                                        ev.side, ev.writes, actor.schema, link.attempts, now_);
    LinkEvent e{LinkEventKind::Initiate, now_, txn.id, std::nullopt};
    StepResult sr = step(ep.fsm, e);
    trace_fsm(link, ev.side, sr, LinkEventKind::Initiate, txn.id);
    ep.fsm = sr.next;

    rec(now_, link.id, Channel::Auditor, name_of(link, ev.side), txn.id, RecordKind::Created)
        .set("initiator", name_of(link, ev.side))
        .set("tie", std::string(to_token(ev.side)) + ":" + std::to_string(ep.fsm.own_tie.counter))
        .set("fields", fields_token(txn.writes))
        .set("attempt", txn.attempt);
    rec(now_, link.id, Channel::Auditor, name_of(link, ev.side), txn.id, RecordKind::Intent)
        .set("digest", hex64(txn.intent))
        .set("sv", static_cast<std::uint64_t>(txn.schema));

    // Stage locally under the initiator's own interpretation.
    auto staged = interpret_writes(txn.writes, actor.schema);
    actor.store.stage(txn.id, staged);
    staged_schema_[{link.actor_of[static_cast<int>(ev.side)], txn.id}] = actor.schema;
    rec(now_, link.id, Channel::Auditor, name_of(link, ev.side), txn.id, RecordKind::Staged)
        .set("actor", name_of(link, ev.side))
        .set("n", static_cast<std::uint64_t>(staged.size()));

    // Clock: initiation counters move at the initiating side's Idle->Tentative.
    link.clock = record_initiation(link.clock, ev.side);
    trace_clock(link);

    // The endpoint knows it has an outstanding proposal: its ontic proposal
    // bit and its own epistemic copy move together.
    const bool parity = txn.intent & 1;
    link.ont.set(kbp::own_proposal_pos(ev.side), parity);
    set_epi_value(ep.epi, kbp::own_proposal_pos(ev.side), parity);

    process_actions(link, ev.side, sr, nullptr);
  }

  void handle_read(const Ev& ev) {
    ActorState& actor = actors_[ev.actor];
    if (!actor.alive) return;
    std::string snapshot;
    for (std::size_t i = 0; i < ev.keys.size(); ++i) {
      if (i) snapshot += ',';
      snapshot += std::to_string(ev.keys[i]);
      snapshot += ':';
      auto v = actor.store.read(ev.keys[i]);
      snapshot += v ? std::to_string(*v) : "~";
    }
    rec(now_, link_of_actor(ev.actor), Channel::Observer, actor.name, 0, RecordKind::Read)
        .set("keys", snapshot);
  }

  void handle_set_schema(const Ev& ev) {
    ActorState& actor = actors_[ev.actor];
    if (!actor.alive) return;
    actor.schema = ev.version;
    rec(now_, link_of_actor(ev.actor), Channel::Auditor, actor.name, 0, RecordKind::Schema)
        .set("sv", static_cast<std::uint64_t>(ev.version));
  }

  void handle_crash(const Ev& ev) {
    actors_[ev.actor].alive = false;
    rec(now_, 0, Channel::Auditor, actors_[ev.actor].name, 0, RecordKind::SweepAbort)
        .set("halted", std::uint64_t{1});
  }

  void handle_txdone(const Ev& ev) {
    LinkRuntime& link = links_[ev.link];
    rec(now_, link.id, Channel::Wire, name_of(link, ev.side), copies_[ev.copy].frame.txn,
        RecordKind::TxDone)
        .set("copy", ev.copy);
  }

  void handle_timeout(const Ev& ev) {
    LinkRuntime& link = links_[ev.link];
    auto& ep = link.ep[static_cast<int>(ev.side)];
    if (ev.epoch != ep.deadline_epoch) return;  // deadline was superseded
    StepResult sr = on_timeout(ep.fsm, now_);
    if (!sr.moved) return;
    const TxnId txn = sr.actions.empty() ? 0 : sr.actions.front().txn;
    trace_fsm(link, ev.side, sr, LinkEventKind::Timeout, txn);
    ep.fsm = sr.next;
    process_actions(link, ev.side, sr, nullptr);
    conclude_abort(link, ev.side, txn, "timeout");
  }

  void handle_quiesce(const Ev& ev) {
    LinkRuntime& link = links_[ev.link];
    auto& ep = link.ep[static_cast<int>(ev.side)];
    if (ep.fsm.state != LinkState::Committed && ep.fsm.state != LinkState::Aborted) return;
    if (!ep.fsm.concluded_txn || *ep.fsm.concluded_txn != ev.txn) return;
    LinkEvent e{LinkEventKind::Quiesce, now_, 0, std::nullopt};
    StepResult sr = step(ep.fsm, e);
    trace_fsm(link, ev.side, sr, LinkEventKind::Quiesce, ev.txn);
    ep.fsm = sr.next;
    // The outstanding proposal is gone; the endpoint knows its own bit.
    link.ont.set(kbp::own_proposal_pos(ev.side), false);
    set_epi_value(ep.epi, kbp::own_proposal_pos(ev.side), false);
  }

  void handle_hyper(const Ev& ev) {
    LinkRuntime& link = links_[ev.link];
    if (now_ < cfg_.horizon) schedule(now_ + 1, EvKind::Hyper, link.id, Side::A);
    if (!circulation_active(link)) return;
    const Side holder =
        static_cast<Side>((now_ + (cfg_.hyperdata.start == Side::A ? 0 : 1)) % 2);
    rec(now_, link.id, Channel::Wire, name_of(link, holder), 0, RecordKind::Hyper)
        .set("seq", link.hyper_seq++)
        .set("token", hex64(link.hyper_rng.next()));
  }

  bool circulation_active(LinkRuntime& link) {
    // Hyperdata circulates while the link's order is unresolved: idle, or
    // rounds still in their indefinite phase. It stops once a round resolves
    // and resumes after completion.
    for (const auto& [id, txn] : registry_.all()) {
      if (txn.link != link.id) continue;
      if (txn.phase == TxnPhase::Resolution) return false;
    }
    return true;
  }

  // --- delivery and the OAE protocol ---------------------------------------

  void handle_delivery(const Ev& ev) {
    auto it = copies_.find(ev.copy);
    if (it == copies_.end()) return;
    FrameCopy& copy = it->second;
    if (copy.delivered || copy.dropped) return;
    if (copy.sched_epoch != ev.sched_epoch || copy.delivery != ev.tick) return;  // rescheduled
    LinkRuntime& link = links_[copy.link];
    const Side to = opposite(copy.from);
    copy.delivered = true;
    unflight(link, copy);
    rec(now_, link.id, Channel::Wire, name_of(link, to), copy.frame.txn, RecordKind::Deliver)
        .set("copy", copy.id);

    ActorState& actor = actor_at(link, to);
    if (!actor.alive) {
      rec(now_, link.id, Channel::Fsm, name_of(link, to), copy.frame.txn, RecordKind::Ignored)
          .set("state", "halted")
          .set("ev", std::string(to_token(copy.frame.kind)))
          .set("reason", "halted");
      return;
    }

    switch (copy.frame.kind) {
      case FrameKind::FitoData: fito_on_data(link, to, copy); return;
      case FrameKind::FitoAck: fito_on_ack(link, to, copy); return;
      default: break;
    }

    auto& ep = link.ep[static_cast<int>(to)];
    if (ep.seen_concluded.count(copy.frame.txn)) {
      rec(now_, link.id, Channel::Fsm, name_of(link, to), copy.frame.txn, RecordKind::Ignored)
          .set("state", std::string(to_token(ep.fsm.state)))
          .set("ev", std::string(to_token(copy.frame.kind)))
          .set("reason", "stale_txn");
      return;
    }

    switch (copy.frame.kind) {
      case FrameKind::Tentative: on_tentative(link, to, copy); break;
      case FrameKind::Reflection: on_reflection(link, to, copy); break;
      case FrameKind::CommitAck: on_commit_ack(link, to, copy); break;
      case FrameKind::AbortNotify: on_peer_abort(link, to, copy); break;
      default: break;  // hyperdata never travels the delivery pipeline
    }
  }

  void on_tentative(LinkRuntime& link, Side to, FrameCopy& copy) {
    auto& ep = link.ep[static_cast<int>(to)];
    LinkEvent e{LinkEventKind::DataArrived, now_, 0, copy.frame};
    StepResult sr = step(ep.fsm, e);
    trace_fsm(link, to, sr, LinkEventKind::DataArrived, copy.frame.txn);
    ep.fsm = sr.next;
    bool staged = false;
    for (const auto& a : sr.actions) staged |= (a.kind == ActionKind::StageIncoming);
    process_actions(link, to, sr, &copy);
    if (!staged) return;

    // Validation happens in the same instant the content lands.
    if (copy.corrupted) {
      dispatch_validation(link, to, copy.frame.txn, false, 0, "integrity_check_failed", copy.id);
      return;
    }
    ActorState& actor = actor_at(link, to);
    auto interpreted = interpret_writes(decode_fields(copy.frame.body), actor.schema);
    const std::uint64_t digest = canonical_digest(copy.frame.txn, actor.schema, interpreted);
    if (registry_.contains(copy.frame.txn)) registry_.get(copy.frame.txn).reflected_digest = digest;
    rec(now_, link.id, Channel::Auditor, name_of(link, to), copy.frame.txn, RecordKind::Validated)
        .set("ok", std::uint64_t{1})
        .set("copy", copy.id)
        .set("digest", hex64(digest));
    dispatch_validation(link, to, copy.frame.txn, true, digest, "", copy.id);
  }

  void dispatch_validation(LinkRuntime& link, Side side, TxnId txn, bool ok,
                           std::uint64_t digest, const std::string& why, std::uint64_t copy_id) {
    auto& ep = link.ep[static_cast<int>(side)];
    if (!ok) {
      rec(now_, link.id, Channel::Auditor, name_of(link, side), txn, RecordKind::Validated)
          .set("ok", std::uint64_t{0})
          .set("copy", copy_id)
          .set("reason", why);
    }
    LinkEvent e{ok ? LinkEventKind::ValidationOk : LinkEventKind::ValidationFail, now_, txn,
                std::nullopt};
    StepResult sr = step(ep.fsm, e);
    trace_fsm(link, side, sr, e.kind, txn);
    ep.fsm = sr.next;
    process_actions(link, side, sr, nullptr);
    (void)digest;
    if (!ok && sr.moved && sr.to == LinkState::Aborted)
      conclude_abort(link, side, txn, "validation_failed");
  }

  void on_reflection(LinkRuntime& link, Side to, FrameCopy& copy) {
    auto& ep = link.ep[static_cast<int>(to)];
    LinkEvent e{LinkEventKind::ReflectionArrived, now_, 0, copy.frame};
    StepResult sr = step(ep.fsm, e);
    trace_fsm(link, to, sr, LinkEventKind::ReflectionArrived, copy.frame.txn);
    ep.fsm = sr.next;
    process_actions(link, to, sr, &copy);
    if (!sr.moved || sr.to != LinkState::Reflecting) return;

    // The reflected digest bit reaches this endpoint now: the ontic digest
    // position and the receiver's epistemic copy update in the same event.
    const TxnId txn = copy.frame.txn;
    Transaction& t = registry_.get(txn);
    const bool true_parity = t.reflected_digest ? (*t.reflected_digest & 1) : false;
    link.ont.set(kbp::reflected_digest_pos(to), true_parity);
    if (!copy.corrupted) {
      kbp::EpiFragment frag;
      frag.mask = kbp::reflected_digest_mask(to);
      frag.values = static_cast<std::uint8_t>((decode_digest(copy.frame.body) & 1)
                                                  ? frag.mask
                                                  : 0);
      frag.round = t.attempt;
      ep.epi = kbp::merge_reflection(ep.epi, frag);
    }

    if (copy.corrupted) {
      dispatch_validation(link, to, txn, false, 0, "integrity_check_failed", copy.id);
      return;
    }
    ValidationResult v = validate_reflection(t, copy.frame);
    auto& r = rec(now_, link.id, Channel::Auditor, name_of(link, to), txn, RecordKind::Validated);
    r.set("ok", std::uint64_t{v.outcome == ValidationOutcome::Commit ? 1u : 0u})
        .set("copy", copy.id)
        .set("digest", hex64(v.echoed))
        .set("want", hex64(v.expected));
    if (v.outcome == ValidationOutcome::Commit) {
      dispatch_validation(link, to, txn, true, v.echoed, "", copy.id);
    } else {
      r.set("reason", v.reason);
      LinkEvent fail{LinkEventKind::ValidationFail, now_, txn, std::nullopt};
      StepResult fr = step(ep.fsm, fail);
      trace_fsm(link, to, fr, LinkEventKind::ValidationFail, txn);
      ep.fsm = fr.next;
      process_actions(link, to, fr, nullptr);
      conclude_abort(link, to, txn, v.reason);
    }
  }

  void on_commit_ack(LinkRuntime& link, Side to, FrameCopy& copy) {
    auto& ep = link.ep[static_cast<int>(to)];
    if (copy.corrupted && ep.fsm.state == LinkState::Reflecting && ep.fsm.current_txn &&
        *ep.fsm.current_txn == copy.frame.txn) {
      dispatch_validation(link, to, copy.frame.txn, false, 0, "integrity_check_failed", copy.id);
      return;
    }
    LinkEvent e{LinkEventKind::CommitAck, now_, 0, copy.frame};
    StepResult sr = step(ep.fsm, e);
    trace_fsm(link, to, sr, LinkEventKind::CommitAck, copy.frame.txn);
    ep.fsm = sr.next;
    if (sr.moved && sr.to == LinkState::Committed) {
      // The initiator's validation digest reaches the responder here.
      Transaction& t = registry_.get(copy.frame.txn);
      link.ont.set(kbp::reflected_digest_pos(to), t.intent & 1);
      kbp::EpiFragment frag;
      frag.mask = kbp::reflected_digest_mask(to);
      frag.values = static_cast<std::uint8_t>((decode_digest(copy.frame.body) & 1) ? frag.mask : 0);
      frag.round = t.attempt;
      ep.epi = kbp::merge_reflection(ep.epi, frag);
    }
    process_actions(link, to, sr, &copy);
  }

  void on_peer_abort(LinkRuntime& link, Side to, FrameCopy& copy) {
    auto& ep = link.ep[static_cast<int>(to)];
    LinkEvent e{LinkEventKind::PeerAbort, now_, 0, copy.frame};
    StepResult sr = step(ep.fsm, e);
    const TxnId txn = ep.fsm.current_txn.value_or(copy.frame.txn);
    trace_fsm(link, to, sr, LinkEventKind::PeerAbort, txn);
    ep.fsm = sr.next;
    process_actions(link, to, sr, &copy);
    if (sr.moved && sr.to == LinkState::Aborted) conclude_abort(link, to, txn, "peer_abort");
  }

  // --- FSM action realization -----------------------------------------------

  void process_actions(LinkRuntime& link, Side side, const StepResult& sr, FrameCopy* ctx) {
    auto& ep = link.ep[static_cast<int>(side)];
    ActorState& actor = actor_at(link, side);
    for (const auto& a : sr.actions) {
      switch (a.kind) {
        case ActionKind::EmitTentative: {
          Transaction& t = registry_.get(a.txn);
          emit_frame(link, side, make_tentative_frame(t, ep.fsm.own_tie));
          break;
        }
        case ActionKind::StageIncoming: {
          if (!ctx) break;
          ep.pending_data = ctx->frame;
          auto interpreted = interpret_writes(decode_fields(ctx->frame.body), actor.schema);
          actor.store.stage(a.txn, interpreted);
          staged_schema_[{link.actor_of[static_cast<int>(side)], a.txn}] = actor.schema;
          rec(now_, link.id, Channel::Auditor, name_of(link, side), a.txn, RecordKind::Staged)
              .set("actor", name_of(link, side))
              .set("n", static_cast<std::uint64_t>(interpreted.size()));
          break;
        }
        case ActionKind::EmitReflection: {
          Frame reflection = make_reflection_frame(ep.pending_data, actor.schema);
          emit_frame(link, side, reflection);
          if (registry_.resolve_if_indefinite(a.txn, opposite(side)))
            rec(now_, link.id, Channel::Auditor, name_of(link, side), a.txn, RecordKind::Resolved)
                .set("orientation", std::string(to_token(opposite(side))))
                .set("phase", "resolution");
          break;
        }
        case ActionKind::EmitCommitAck: {
          Transaction& t = registry_.get(a.txn);
          Frame ack;
          ack.kind = FrameKind::CommitAck;
          ack.txn = a.txn;
          ack.schema = t.schema;
          ack.body = encode_digest(t.intent);
          emit_frame(link, side, ack);
          break;
        }
        case ActionKind::EmitAbortNotify: {
          Frame notify;
          notify.kind = FrameKind::AbortNotify;
          notify.txn = a.txn;
          notify.body = {std::uint8_t{1}};
          emit_frame(link, side, notify);
          break;
        }
        case ActionKind::DiscardStaged: {
          if (actor.store.has_staged(a.txn)) abort_rollback(actor.store, registry_.get(a.txn));
          break;
        }
        case ActionKind::ConvertOwnInitiation: {
          // Tie-break lost: own round folds into the peer's.
          if (actor.store.has_staged(a.txn)) actor.store.discard(a.txn);
          registry_.convert(a.txn, a.other_txn, opposite(side), now_);
          ep.seen_concluded.insert(a.txn);
          rec(now_, link.id, Channel::Auditor, name_of(link, side), a.txn, RecordKind::Converted)
              .set("winner", a.other_txn)
              .set("reason", "tiebreak_lost");
          emit_outcome_if_new(link, a.txn);
          if (registry_.resolve_if_indefinite(a.other_txn, opposite(side)))
            rec(now_, link.id, Channel::Auditor, name_of(link, side), a.other_txn,
                RecordKind::Resolved)
                .set("orientation", std::string(to_token(opposite(side))))
                .set("phase", "resolution");
          break;
        }
        case ActionKind::NoteTieBreakWon: {
          registry_.convert(a.other_txn, a.txn, side, now_);
          ep.seen_concluded.insert(a.other_txn);
          rec(now_, link.id, Channel::Auditor, name_of(link, side), a.other_txn,
              RecordKind::Converted)
              .set("winner", a.txn)
              .set("reason", "tiebreak_lost");
          emit_outcome_if_new(link, a.other_txn);
          if (registry_.resolve_if_indefinite(a.txn, side))
            rec(now_, link.id, Channel::Auditor, name_of(link, side), a.txn, RecordKind::Resolved)
                .set("orientation", std::string(to_token(side)))
                .set("phase", "resolution");
          break;
        }
        case ActionKind::InitiatorDecided: {
          rec(now_, link.id, Channel::Auditor, name_of(link, side), a.txn, RecordKind::Decided)
              .set("decision", "commit");
          break;
        }
        case ActionKind::RoundClosed: {
          close_round(link, side, a.txn);
          break;
        }
        case ActionKind::SetDeadline: {
          ep.deadline_epoch++;
          Ev t = make_ev(a.deadline, EvKind::Timeout, link.id, side);
          t.epoch = ep.deadline_epoch;
          push(std::move(t));
          break;
        }
        case ActionKind::ClearDeadline: {
          ep.deadline_epoch++;
          break;
        }
      }
    }
  }

  /// The bilateral commit point: the ack has reached the responder, so both
  /// endpoints conclude the round in this same instant: states, the mutual
  /// round counter, and visibility in both stores.
  void close_round(LinkRuntime& link, Side responder, TxnId txn) {
    const Side initiator = opposite(responder);
    auto& iep = link.ep[static_cast<int>(initiator)];
    LinkEvent e{LinkEventKind::CommitAck, now_, txn, std::nullopt};
    StepResult sr = step(iep.fsm, e);
    trace_fsm(link, initiator, sr, LinkEventKind::CommitAck, txn);
    iep.fsm = sr.next;
    process_actions(link, initiator, sr, nullptr);

    if (registry_.complete(txn, TxnResult::Commit, "", now_)) {
      const Tick initiator_commit = now_;
      const Tick responder_commit = now_;
      rec(now_, link.id, Channel::Auditor, "", txn, RecordKind::Outcome)
          .set("result", "commit")
          .set("window", responder_commit - initiator_commit);
      stats_.committed++;
    }
    link.ep[static_cast<int>(responder)].seen_concluded.insert(txn);
    iep.seen_concluded.insert(txn);

    link.clock = record_round_completion(link.clock);
    trace_clock(link);

    for (int s = 0; s < 2; ++s) {
      ActorState& actor = actor_at(link, static_cast<Side>(s));
      if (!actor.store.has_staged(txn) && actor.store.applied(txn)) continue;
      auto writes = commit_visibility(actor.store, registry_.get(txn));
      const SchemaVersion sv = staged_schema_[{link.actor_of[s], txn}];
      rec(now_, link.id, Channel::Auditor, actor.name, txn, RecordKind::Applied)
          .set("actor", actor.name)
          .set("fields", fields_token(writes))
          .set("sv", static_cast<std::uint64_t>(sv))
          .set("digest", hex64(canonical_digest(txn, sv, writes)));
    }

    link.commits_this_tick.push_back(txn);
    commit_batch_.push_back(txn);

    schedule_quiesce(link, initiator, txn);
    schedule_quiesce(link, responder, txn);
  }

  void schedule_quiesce(LinkRuntime& link, Side side, TxnId txn) {
    Ev q = make_ev(now_ + 1, EvKind::Quiesce, link.id, side);
    q.txn = txn;
    push(std::move(q));
  }

  void conclude_abort(LinkRuntime& link, Side side, TxnId txn, const std::string& reason) {
    if (txn == 0) return;
    link.ep[static_cast<int>(side)].seen_concluded.insert(txn);
    if (registry_.contains(txn)) {
      registry_.complete(txn, TxnResult::Abort, reason, now_);
      emit_outcome_if_new(link, txn);
    }
    schedule_quiesce(link, side, txn);
  }

  std::set<TxnId> outcome_emitted_;
  void emit_outcome_if_new(LinkRuntime& link, TxnId txn) {
    if (outcome_emitted_.count(txn)) return;
    const Transaction& t = registry_.get(txn);
    if (t.phase != TxnPhase::Completed) return;
    outcome_emitted_.insert(txn);
    auto& r = rec(now_, link.id, Channel::Auditor, "", txn, RecordKind::Outcome);
    r.set("result", std::string(to_token(t.result)));
    if (t.result == TxnResult::Abort) {
      r.set("reason", t.abort_reason);
      stats_.aborted++;
    }
  }

  void trace_clock(LinkRuntime& link) {
    rec(now_, link.id, Channel::Auditor, "", 0, RecordKind::Clock)
        .set("ca", link.clock.initiated_a)
        .set("cb", link.clock.initiated_b)
        .set("d", link.clock.mutual_rounds);
  }

  static std::string fields_token(const std::vector<FieldWrite>& writes) {
    std::string out;
    for (std::size_t i = 0; i < writes.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(writes[i].field);
      out += ':';
      out += std::to_string(writes[i].value);
    }
    return out.empty() ? "~" : out;
  }

  void set_epi_value(kbp::EpiRegister& epi, kbp::OntBit pos, bool v) {
    if (v)
      epi.known_values |= static_cast<std::uint8_t>(1u << pos);
    else
      epi.known_values &= static_cast<std::uint8_t>(~(1u << pos));
  }

  // --- FITO baseline ----------------------------------------------------------

  /// One-sided write: per-field frames, receiver-visible on delivery, sender
  /// completion on transport acks, timeout-and-retry up to the configured
  /// limit, then an explicit fail-stop. No reflection, no staging.
  void fito_write(LinkRuntime& link, Side side, const std::vector<FieldWrite>& writes) {
    ActorState& actor = actor_at(link, side);
    link.attempts++;
    Transaction& txn = registry_.create(link.id, link.actor_of[static_cast<int>(side)], side,
                                        writes, actor.schema, link.attempts, now_);
    registry_.resolve_if_indefinite(txn.id, side);
    rec(now_, link.id, Channel::Auditor, name_of(link, side), txn.id, RecordKind::Created)
        .set("initiator", name_of(link, side))
        .set("tie", std::string(to_token(side)) + ":0")
        .set("fields", fields_token(txn.writes))
        .set("attempt", txn.attempt);
    rec(now_, link.id, Channel::Auditor, name_of(link, side), txn.id, RecordKind::Intent)
        .set("digest", hex64(txn.intent))
        .set("sv", static_cast<std::uint64_t>(txn.schema));
    const bool parity = txn.intent & 1;
    link.ont.set(kbp::own_proposal_pos(side), parity);
    set_epi_value(link.ep[static_cast<int>(side)].epi, kbp::own_proposal_pos(side), parity);

    FitoTxn ft;
    ft.txn = txn.id;
    ft.link = link.id;
    ft.sender = side;
    ft.fields = writes;
    ft.acked.assign(writes.size(), false);
    ft.attempts.assign(writes.size(), 0);
    fito_[txn.id] = std::move(ft);
    for (std::size_t i = 0; i < writes.size(); ++i)
      fito_emit_field(link, txn.id, static_cast<int>(i), now_ + i);
  }

  void fito_emit_field(LinkRuntime& link, TxnId txn, int index, Tick when) {
    if (when > now_) {
      Ev ev = make_ev(when, EvKind::FitoRetry, link.id, fito_[txn].sender);
      ev.txn = txn;
      ev.field_index = index;
      ev.attempt = -1;  // placeholder for the first emission
      push(std::move(ev));
      return;
    }
    FitoTxn& ft = fito_[txn];
    Frame f;
    f.kind = FrameKind::FitoData;
    f.txn = txn;
    f.tiebreak = TieBreak{static_cast<std::uint8_t>(ft.sender), 0};
    f.schema = registry_.get(txn).schema;
    f.body = encode_fields({ft.fields[static_cast<std::size_t>(index)]});
    emit_frame(link, ft.sender, f);
    Ev retry = make_ev(now_ + link.params.effective_timeout(), EvKind::FitoRetry, link.id,
                       ft.sender);
    retry.txn = txn;
    retry.field_index = index;
    retry.attempt = ft.attempts[static_cast<std::size_t>(index)];
    push(std::move(retry));
  }

  void handle_fito_retry(const Ev& ev) {
    auto it = fito_.find(ev.txn);
    if (it == fito_.end()) return;
    FitoTxn& ft = it->second;
    LinkRuntime& link = links_[ev.link];
    if (ev.attempt == -1) {  // deferred first emission
      if (!ft.concluded) fito_emit_field(link, ev.txn, ev.field_index, now_);
      return;
    }
    if (ft.concluded || ft.acked[static_cast<std::size_t>(ev.field_index)]) return;
    if (ev.attempt != ft.attempts[static_cast<std::size_t>(ev.field_index)]) return;  // superseded
    if (ft.attempts[static_cast<std::size_t>(ev.field_index)] >= cfg_.fito_retry_limit) {
      // Detected unrecoverable: give up loudly.
      ft.concluded = true;
      registry_.complete(ev.txn, TxnResult::Abort, "failstop", now_);
      rec(now_, link.id, Channel::Auditor, name_of(link, ft.sender), ev.txn, RecordKind::Outcome)
          .set("result", "failstop")
          .set("attempts",
               static_cast<std::uint64_t>(ft.attempts[static_cast<std::size_t>(ev.field_index)] + 1));
      stats_.fito_failstops++;
      return;
    }
    ft.attempts[static_cast<std::size_t>(ev.field_index)]++;
    rec(now_, link.id, Channel::Auditor, name_of(link, ft.sender), ev.txn, RecordKind::Retry)
        .set("field", static_cast<std::uint64_t>(
                          ft.fields[static_cast<std::size_t>(ev.field_index)].field))
        .set("attempt", static_cast<std::uint64_t>(
                            ft.attempts[static_cast<std::size_t>(ev.field_index)]));
    stats_.fito_retries++;
    fito_emit_field(link, ev.txn, ev.field_index, now_);
  }

  void fito_on_data(LinkRuntime& link, Side to, FrameCopy& copy) {
    ActorState& actor = actor_at(link, to);
    if (copy.corrupted) {
      rec(now_, link.id, Channel::Fsm, name_of(link, to), copy.frame.txn, RecordKind::Ignored)
          .set("state", "fito")
          .set("ev", "fito_data")
          .set("reason", "crc_drop");
      return;
    }
    auto raw = decode_fields(copy.frame.body);
    if (raw.size() != 1) return;
    FieldWrite w{raw[0].field, interpret(raw[0].value, actor.schema)};
    // Placement is visibility: the field lands in observer-readable state
    // the moment it arrives, one cache-line-sized unit at a time.
    actor.store.place_direct(copy.frame.txn, w);
    rec(now_, link.id, Channel::Auditor, actor.name, copy.frame.txn, RecordKind::Applied)
        .set("actor", actor.name)
        .set("fields", fields_token({w}))
        .set("sv", static_cast<std::uint64_t>(actor.schema))
        .set("digest", hex64(canonical_digest(copy.frame.txn, actor.schema, {w})));
    Frame ack;
    ack.kind = FrameKind::FitoAck;
    ack.txn = copy.frame.txn;
    ack.body = encode_fields({FieldWrite{raw[0].field, 0}});
    emit_frame(link, to, ack);
  }

  void fito_on_ack(LinkRuntime& link, Side to, FrameCopy& copy) {
    (void)to;
    auto it = fito_.find(copy.frame.txn);
    if (it == fito_.end()) return;
    FitoTxn& ft = it->second;
    if (ft.concluded || copy.corrupted) return;
    auto fields = decode_fields(copy.frame.body);
    if (fields.size() != 1) return;
    for (std::size_t i = 0; i < ft.fields.size(); ++i)
      if (ft.fields[i].field == fields[0].field) ft.acked[i] = true;
    bool all = true;
    for (bool b : ft.acked) all &= b;
    if (!all) return;
    // Completion on delivery notification: the sender now *believes* the
    // write is done. No digest was ever validated.
    ft.concluded = true;
    registry_.complete(ft.txn, TxnResult::Commit, "", now_);
    rec(now_, link.id, Channel::Auditor, name_of(link, ft.sender), ft.txn, RecordKind::Outcome)
        .set("result", "completed")
        .set("window", std::uint64_t{0});
    stats_.fito_completions++;
    link.commits_this_tick.push_back(ft.txn);
    link.ont.set(kbp::own_proposal_pos(ft.sender), false);
    set_epi_value(link.ep[static_cast<int>(ft.sender)].epi, kbp::own_proposal_pos(ft.sender),
                  false);
  }

  // --- end-of-tick duties -----------------------------------------------------

  void sequence_commits() {
    if (commit_batch_.empty()) return;
    // Total order for layered protocols: commit tick, ties by link id.
    std::sort(commit_batch_.begin(), commit_batch_.end(), [this](TxnId x, TxnId y) {
      const auto& tx = registry_.get(x);
      const auto& ty = registry_.get(y);
      if (tx.link != ty.link) return tx.link < ty.link;
      return x < y;
    });
    for (TxnId id : commit_batch_) {
      const std::uint64_t seq = next_seq_++;
      if (commit_hook_) commit_hook_(registry_.get(id), seq);
    }
    commit_batch_.clear();
  }

  void audit_tick(Tick t) {
    for (auto& link : links_) {
      for (int s = 0; s < 2; ++s) {
        auto& ep = link.ep[s];
        const bool balanced = kbp::knowledge_balance_check(ep.epi);
        if (!balanced) stats_.kbp_balance_violations++;
        auto& r = rec(t, link.id, Channel::Kbp, name_of(link, static_cast<Side>(s)), 0,
                      RecordKind::Balance);
        r.set("mask", kbp::mask_string(ep.epi.known_mask))
            .set("bits", std::string(1, '0' + ((ep.epi.known_bits() >> 1) & 1)) +
                             std::string(1, '0' + (ep.epi.known_bits() & 1)))
            .set("round", ep.epi.round)
            .set("balanced", std::uint64_t{balanced ? 1u : 0u});
        if (!link.commits_this_tick.empty()) {
          // Every round committing at this tick must find the registers
          // complementary, current, and digest-consistent.
          bool eligible = true;
          std::string reason;
          for (TxnId id : link.commits_this_tick) {
            const Transaction& txn = registry_.get(id);
            try {
              if (link.ep[0].epi.round != txn.attempt || link.ep[1].epi.round != txn.attempt)
                throw StaleRoundFault("register round does not match the committing attempt");
              if (!kbp::commit_eligible(link.ep[0].epi, link.ep[1].epi)) {
                eligible = false;
                if (reason.empty()) reason = "digest_mismatch";
              }
            } catch (const StaleRoundFault&) {
              eligible = false;
              if (reason.empty()) reason = "stale_round";
            } catch (const ProtocolFault&) {
              eligible = false;
              if (reason.empty()) reason = "mask_overlap";
            }
          }
          r.set("eligible", std::uint64_t{eligible ? 1u : 0u});
          if (!eligible) r.set("why", reason);
          if (s == 1) {
            stats_.kbp_commit_checks++;
            if (!eligible) stats_.kbp_ineligible_commits++;
          }
        }
      }
      link.commits_this_tick.clear();
      stats_.kbp_ticks_audited++;
    }
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    now_ = std::min<Tick>(queue_.empty() ? now_ : cfg_.horizon, cfg_.horizon);
    // Outstanding work is swept into explicit aborts; in-flight frames flush.
    std::uint64_t swept = 0;
    for (auto& link : links_) {
      for (int s = 0; s < 2; ++s) {
        auto& ep = link.ep[s];
        if (ep.fsm.current_txn) {
          const TxnId txn = *ep.fsm.current_txn;
          LinkEvent e{LinkEventKind::Timeout, now_, 0, std::nullopt};
          StepResult sr = step(ep.fsm, e);
          trace_fsm(link, static_cast<Side>(s), sr, LinkEventKind::Timeout, txn);
          ep.fsm = sr.next;
          // Discard staging but do not notify: the scenario is over.
          ActorState& actor = actor_at(link, static_cast<Side>(s));
          if (actor.store.has_staged(txn)) actor.store.discard(txn);
          if (registry_.contains(txn) &&
              registry_.get(txn).phase != TxnPhase::Completed) {
            registry_.complete(txn, TxnResult::Abort, "horizon_sweep", now_);
            emit_outcome_if_new(link, txn);
            ++swept;
          }
        }
      }
      for (int dir = 0; dir < 2; ++dir) {
        for (std::uint64_t id : link.in_flight[dir]) {
          FrameCopy& c = copies_[id];
          if (c.delivered || c.dropped || c.flushed) continue;
          c.flushed = true;
          rec(now_, link.id, Channel::Wire, "", c.frame.txn, RecordKind::Flush).set("copy", id);
        }
        link.in_flight[dir].clear();
      }
    }
    for (const auto& [id, txn] : registry_.all()) {
      if (txn.phase != TxnPhase::Completed) {
        registry_.complete(id, TxnResult::Abort, "horizon_sweep", now_);
        emit_outcome_if_new(links_[txn.link], id);
        ++swept;
      }
      if (fito_.count(id) && !fito_[id].concluded) fito_[id].concluded = true;
    }
    if (swept)
      rec(now_, 0, Channel::Auditor, "", 0, RecordKind::SweepAbort).set("aborted", swept);
  }
};

}  // namespace sim
}  // namespace oae

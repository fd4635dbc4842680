#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "oae/frame.hpp"
#include "oae/types.hpp"

namespace oae {

enum class LinkState : std::uint8_t { Reset, Idle, Tentative, Reflecting, Committed, Aborted };

inline const char* to_token(LinkState s) {
  switch (s) {
    case LinkState::Reset: return "reset";
    case LinkState::Idle: return "idle";
    case LinkState::Tentative: return "tentative";
    case LinkState::Reflecting: return "reflecting";
    case LinkState::Committed: return "committed";
    default: return "aborted";
  }
}

enum class LinkEventKind : std::uint8_t {
  LinkUp,
  Initiate,
  DataArrived,
  ReflectionArrived,
  ValidationOk,
  ValidationFail,
  Timeout,
  PeerAbort,
  CommitAck,
  Quiesce,
};

inline const char* to_token(LinkEventKind k) {
  switch (k) {
    case LinkEventKind::LinkUp: return "link_up";
    case LinkEventKind::Initiate: return "initiate";
    case LinkEventKind::DataArrived: return "data";
    case LinkEventKind::ReflectionArrived: return "reflection";
    case LinkEventKind::ValidationOk: return "validation_ok";
    case LinkEventKind::ValidationFail: return "validation_fail";
    case LinkEventKind::Timeout: return "timeout";
    case LinkEventKind::PeerAbort: return "peer_abort";
    case LinkEventKind::CommitAck: return "commit_ack";
    default: return "quiesce";
  }
}

struct LinkEvent {
  LinkEventKind kind;
  Tick now = 0;
  TxnId txn = 0;                // Initiate: engine-allocated id
  std::optional<Frame> frame;   // frame-borne events
};

enum class TxnRole : std::uint8_t { None, Initiator, Responder };

/// Every transition in the protocol; the set below is closed, there is no
/// code path producing any other edge. In particular commitment is reachable
/// only through Reflecting.
inline std::vector<LinkState> valid_transitions(LinkState s) {
  switch (s) {
    case LinkState::Reset: return {LinkState::Idle};
    case LinkState::Idle: return {LinkState::Tentative};
    case LinkState::Tentative: return {LinkState::Reflecting, LinkState::Aborted};
    case LinkState::Reflecting: return {LinkState::Committed, LinkState::Aborted};
    case LinkState::Committed: return {LinkState::Idle};
    default: return {LinkState::Idle};
  }
}

/// One endpoint's view of its link. A single-owner value advanced only by
/// the event loop; step() is state in, state out.
struct EndpointFsm {
  Side side = Side::A;
  Tick timeout_ticks = 8;  // deadline horizon for Tentative/Reflecting

  LinkState state = LinkState::Reset;
  std::optional<TxnId> current_txn;    // present iff Tentative or Reflecting
  std::optional<TxnId> concluded_txn;  // present iff Committed or Aborted
  TxnRole role = TxnRole::None;
  bool validated = false;  // semantic check passed for the current round
  bool decided = false;    // initiator has issued its commit decision
  std::optional<Tick> timeout_deadline;
  std::uint64_t initiation_counter = 0;
  TieBreak own_tie{};
};

enum class ActionKind : std::uint8_t {
  EmitTentative,
  EmitReflection,
  EmitCommitAck,
  EmitAbortNotify,
  StageIncoming,         // decode + stage the arrived payload as provisional
  DiscardStaged,
  ConvertOwnInitiation,  // tie-break lost: own txn folds into the peer's
  NoteTieBreakWon,
  InitiatorDecided,
  RoundClosed,           // ack landed: both ends commit, visibility applies
  SetDeadline,
  ClearDeadline,
};

struct Action {
  ActionKind kind;
  TxnId txn = 0;
  TxnId other_txn = 0;  // ConvertOwnInitiation / NoteTieBreakWon: peer txn
  Tick deadline = 0;    // SetDeadline
};

struct StepResult {
  EndpointFsm next;
  std::vector<Action> actions;
  bool moved = false;
  LinkState from = LinkState::Reset;
  LinkState to = LinkState::Reset;
  bool rejected = false;        // malformed-for-state event, recorded
  const char* reason = nullptr; // set for non-moves and for abort moves
};

namespace detail {

inline StepResult ignore(const EndpointFsm& fsm, const char* reason) {
  StepResult r{fsm, {}, false, fsm.state, fsm.state, false, reason};
  return r;
}

inline StepResult reject(const EndpointFsm& fsm, const char* reason) {
  StepResult r{fsm, {}, false, fsm.state, fsm.state, true, reason};
  return r;
}

inline StepResult abort_from(EndpointFsm fsm, const char* reason, bool notify_peer) {
  StepResult r;
  r.from = fsm.state;
  r.reason = reason;
  TxnId txn = fsm.current_txn.value_or(0);
  fsm.state = LinkState::Aborted;
  fsm.concluded_txn = fsm.current_txn;
  fsm.current_txn.reset();
  fsm.role = TxnRole::None;
  fsm.validated = false;
  fsm.decided = false;
  fsm.timeout_deadline.reset();
  r.next = fsm;
  r.moved = true;
  r.to = LinkState::Aborted;
  r.actions.push_back({ActionKind::DiscardStaged, txn});
  if (notify_peer) r.actions.push_back({ActionKind::EmitAbortNotify, txn});
  r.actions.push_back({ActionKind::ClearDeadline, txn});
  return r;
}

}  // namespace detail

/// Advances one endpoint by one event. Pure: the only outputs are the next
/// state and an action list for the engine to realize. Events that do not
/// match the current state leave it unchanged and are recorded with a
/// reason, never silently.
inline StepResult step(const EndpointFsm& fsm, const LinkEvent& ev) {
  using detail::abort_from;
  using detail::ignore;
  using detail::reject;

  const LinkState s = fsm.state;

  // Events meaningless outside an active round, handled uniformly.
  auto stray = [&](const char* why) { return ignore(fsm, why); };

  switch (ev.kind) {
    case LinkEventKind::LinkUp: {
      if (s != LinkState::Reset) return ignore(fsm, "already_up");
      EndpointFsm next = fsm;
      next.state = LinkState::Idle;
      StepResult r{next, {}, true, s, LinkState::Idle, false, nullptr};
      return r;
    }

    case LinkEventKind::Initiate: {
      if (s != LinkState::Idle) return reject(fsm, "not_idle");
      EndpointFsm next = fsm;
      next.state = LinkState::Tentative;
      next.current_txn = ev.txn;
      next.concluded_txn.reset();
      next.role = TxnRole::Initiator;
      next.validated = false;
      next.decided = false;
      next.initiation_counter += 1;
      next.own_tie = TieBreak{static_cast<std::uint8_t>(fsm.side), next.initiation_counter};
      next.timeout_deadline = ev.now + fsm.timeout_ticks;
      StepResult r{next, {}, true, s, LinkState::Tentative, false, nullptr};
      r.actions.push_back({ActionKind::EmitTentative, ev.txn});
      r.actions.push_back({ActionKind::SetDeadline, ev.txn, 0, *next.timeout_deadline});
      return r;
    }

    case LinkEventKind::DataArrived: {
      if (!ev.frame || (ev.frame->kind != FrameKind::Tentative))
        return stray("stray_frame");
      const Frame& f = *ev.frame;
      if (s == LinkState::Idle) {
        EndpointFsm next = fsm;
        next.state = LinkState::Tentative;
        next.current_txn = f.txn;
        next.concluded_txn.reset();
        next.role = TxnRole::Responder;
        next.validated = false;
        next.decided = false;
        next.timeout_deadline = ev.now + fsm.timeout_ticks;
        StepResult r{next, {}, true, s, LinkState::Tentative, false, nullptr};
        r.actions.push_back({ActionKind::StageIncoming, f.txn});
        r.actions.push_back({ActionKind::SetDeadline, f.txn, 0, *next.timeout_deadline});
        return r;
      }
      if (s == LinkState::Tentative && fsm.role == TxnRole::Initiator &&
          fsm.current_txn && f.txn != *fsm.current_txn) {
        // Crossed initiations: both sides proposed at once. The lower
        // tie-break tuple keeps the initiative; the other side's proposal
        // converts into a reflection obligation for the winner's round.
        if (fsm.own_tie < f.tiebreak) {
          StepResult r = ignore(fsm, "tiebreak_won");
          r.actions.push_back({ActionKind::NoteTieBreakWon, *fsm.current_txn, f.txn});
          return r;
        }
        EndpointFsm next = fsm;
        next.role = TxnRole::Responder;
        TxnId own = *fsm.current_txn;
        next.current_txn = f.txn;
        next.timeout_deadline = ev.now + fsm.timeout_ticks;
        StepResult r{next, {}, false, s, s, false, "tiebreak_lost"};
        r.actions.push_back({ActionKind::ConvertOwnInitiation, own, f.txn});
        r.actions.push_back({ActionKind::StageIncoming, f.txn});
        r.actions.push_back({ActionKind::SetDeadline, f.txn, 0, *next.timeout_deadline});
        return r;
      }
      if ((s == LinkState::Tentative || s == LinkState::Reflecting) && fsm.current_txn &&
          f.txn == *fsm.current_txn)
        return ignore(fsm, "duplicate_data");
      if (s == LinkState::Committed || s == LinkState::Aborted)
        return ignore(fsm, "late_frame");
      return stray("stray_frame");
    }

    case LinkEventKind::ReflectionArrived: {
      if (s == LinkState::Tentative && fsm.role == TxnRole::Initiator && ev.frame &&
          fsm.current_txn && ev.frame->txn == *fsm.current_txn) {
        EndpointFsm next = fsm;
        next.state = LinkState::Reflecting;
        StepResult r{next, {}, true, s, LinkState::Reflecting, false, nullptr};
        return r;
      }
      if (s == LinkState::Reflecting && fsm.current_txn && ev.frame &&
          ev.frame->txn == *fsm.current_txn)
        return ignore(fsm, "duplicate_reflection");
      if (s == LinkState::Committed || s == LinkState::Aborted)
        return ignore(fsm, "late_frame");
      return stray("stray_frame");
    }

    case LinkEventKind::ValidationOk: {
      if (s == LinkState::Tentative && fsm.role == TxnRole::Responder) {
        EndpointFsm next = fsm;
        next.state = LinkState::Reflecting;
        next.validated = true;
        next.timeout_deadline = ev.now + fsm.timeout_ticks;
        StepResult r{next, {}, true, s, LinkState::Reflecting, false, nullptr};
        r.actions.push_back({ActionKind::EmitReflection, *fsm.current_txn});
        r.actions.push_back({ActionKind::SetDeadline, *fsm.current_txn, 0, *next.timeout_deadline});
        return r;
      }
      if (s == LinkState::Tentative)
        return ignore(fsm, "reflection_required");  // no shortcut to commitment
      if (s == LinkState::Reflecting && fsm.role == TxnRole::Initiator && !fsm.decided) {
        EndpointFsm next = fsm;
        next.validated = true;
        next.decided = true;
        next.timeout_deadline = ev.now + fsm.timeout_ticks;
        StepResult r{next, {}, false, s, s, false, "await_ack_round"};
        r.actions.push_back({ActionKind::InitiatorDecided, *fsm.current_txn});
        r.actions.push_back({ActionKind::EmitCommitAck, *fsm.current_txn});
        r.actions.push_back({ActionKind::SetDeadline, *fsm.current_txn, 0, *next.timeout_deadline});
        return r;
      }
      return ignore(fsm, "no_pending_validation");
    }

    case LinkEventKind::ValidationFail: {
      if ((s == LinkState::Tentative && fsm.role == TxnRole::Responder) ||
          s == LinkState::Reflecting)
        return abort_from(fsm, "validation_failed", /*notify_peer=*/true);
      if (s == LinkState::Tentative) return ignore(fsm, "reflection_required");
      return ignore(fsm, "no_pending_validation");
    }

    case LinkEventKind::Timeout: {
      if (s == LinkState::Tentative || s == LinkState::Reflecting)
        return abort_from(fsm, "timeout", /*notify_peer=*/true);
      return ignore(fsm, "no_deadline");
    }

    case LinkEventKind::PeerAbort: {
      if (s == LinkState::Tentative || s == LinkState::Reflecting)
        return abort_from(fsm, "peer_abort", /*notify_peer=*/false);
      if (s == LinkState::Committed) return ignore(fsm, "committed_not_revocable");
      if (s == LinkState::Aborted) return ignore(fsm, "already_aborted");
      return stray("no_active_txn");
    }

    case LinkEventKind::CommitAck: {
      if (s == LinkState::Reflecting && fsm.validated && fsm.current_txn) {
        if (fsm.role == TxnRole::Responder && ev.frame && ev.frame->txn != *fsm.current_txn)
          return ignore(fsm, "stray_frame");
        if (fsm.role == TxnRole::Initiator && !fsm.decided)
          return ignore(fsm, "no_pending_validation");
        EndpointFsm next = fsm;
        TxnId txn = *fsm.current_txn;
        next.state = LinkState::Committed;
        next.concluded_txn = txn;
        next.current_txn.reset();
        next.role = TxnRole::None;
        next.validated = false;
        next.decided = false;
        next.timeout_deadline.reset();
        StepResult r{next, {}, true, s, LinkState::Committed, false, nullptr};
        if (fsm.role == TxnRole::Responder) r.actions.push_back({ActionKind::RoundClosed, txn});
        r.actions.push_back({ActionKind::ClearDeadline, txn});
        return r;
      }
      if (s == LinkState::Committed || s == LinkState::Aborted)
        return ignore(fsm, "late_frame");
      return stray("stray_frame");
    }

    case LinkEventKind::Quiesce: {
      if (s == LinkState::Committed || s == LinkState::Aborted) {
        EndpointFsm next = fsm;
        next.state = LinkState::Idle;
        next.concluded_txn.reset();
        StepResult r{next, {}, true, s, LinkState::Idle, false, nullptr};
        return r;
      }
      if (s == LinkState::Idle) return ignore(fsm, "already_idle");
      return ignore(fsm, "busy");
    }
  }
  return ignore(fsm, "unhandled");
}

/// Deadline-driven wrapper: fires only when a deadline has actually lapsed
/// in a state with an outstanding round.
inline StepResult on_timeout(const EndpointFsm& fsm, Tick now) {
  if (!fsm.timeout_deadline || *fsm.timeout_deadline > now)
    return detail::ignore(fsm, "no_deadline");
  if (fsm.state != LinkState::Tentative && fsm.state != LinkState::Reflecting)
    return detail::ignore(fsm, "no_deadline");
  LinkEvent ev{LinkEventKind::Timeout, now, 0, std::nullopt};
  return step(fsm, ev);
}

}  // namespace oae

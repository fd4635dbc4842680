#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oae/types.hpp"

namespace oae {

enum class Channel : std::uint8_t { Wire, Fsm, Observer, Auditor, Kbp };

inline const char* to_token(Channel c) {
  switch (c) {
    case Channel::Wire: return "wire";
    case Channel::Fsm: return "fsm";
    case Channel::Observer: return "obs";
    case Channel::Auditor: return "aud";
    default: return "kbp";
  }
}

enum class RecordKind : std::uint8_t {
  // wire
  Emit, Deliver, Drop, Dup, Corrupt, Reorder, TxDone, Flush, Hyper,
  // fsm
  Move, Ignored, Rejected,
  // observer
  Read,
  // auditor
  Created, Intent, Staged, Resolved, Converted, Validated, Decided,
  Outcome, Applied, Clock, Schema, Retry, Cas, SweepAbort,
  // kbp
  Balance,
};

inline const char* to_token(RecordKind k) {
  switch (k) {
    case RecordKind::Emit: return "emit";
    case RecordKind::Deliver: return "deliver";
    case RecordKind::Drop: return "drop";
    case RecordKind::Dup: return "dup";
    case RecordKind::Corrupt: return "corrupt";
    case RecordKind::Reorder: return "reorder";
    case RecordKind::TxDone: return "txdone";
    case RecordKind::Flush: return "flush";
    case RecordKind::Hyper: return "hyper";
    case RecordKind::Move: return "move";
    case RecordKind::Ignored: return "ignored";
    case RecordKind::Rejected: return "rejected";
    case RecordKind::Read: return "read";
    case RecordKind::Created: return "created";
    case RecordKind::Intent: return "intent";
    case RecordKind::Staged: return "staged";
    case RecordKind::Resolved: return "resolved";
    case RecordKind::Converted: return "converted";
    case RecordKind::Validated: return "validated";
    case RecordKind::Decided: return "decided";
    case RecordKind::Outcome: return "outcome";
    case RecordKind::Applied: return "applied";
    case RecordKind::Clock: return "clock";
    case RecordKind::Schema: return "schema";
    case RecordKind::Retry: return "retry";
    case RecordKind::Cas: return "cas";
    case RecordKind::SweepAbort: return "sweep";
    default: return "balance";
  }
}

/// One event in a run. Serialized as a single line with fixed field order:
///   tick link channel endpoint txn kind key=value...
/// Endpoint and txn print as '-' when not applicable. Keys appear in the
/// order they were appended, which call sites keep fixed per kind, so a
/// trace is byte-stable for a given (scenario, seed).
struct TraceRecord {
  Tick tick = 0;
  LinkId link = 0;
  Channel channel = Channel::Auditor;
  std::string endpoint;  // actor name, empty = none
  TxnId txn = 0;         // 0 = none
  RecordKind kind = RecordKind::Created;
  std::vector<std::pair<std::string, std::string>> kv;

  TraceRecord& set(std::string key, std::string value) {
    kv.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  TraceRecord& set(std::string key, std::uint64_t value) {
    return set(std::move(key), std::to_string(value));
  }
  TraceRecord& set(std::string key, std::int64_t value) {
    return set(std::move(key), std::to_string(value));
  }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    return std::nullopt;
  }
  std::uint64_t get_u64(const std::string& key) const {
    auto v = get(key);
    if (!v) throw LookupFault("trace record has no key '" + key + "'");
    return std::stoull(*v);
  }
  std::int64_t get_i64(const std::string& key) const {
    auto v = get(key);
    if (!v) throw LookupFault("trace record has no key '" + key + "'");
    return std::stoll(*v);
  }

  std::string line() const {
    std::ostringstream os;
    os << tick << ' ' << link << ' ' << to_token(channel) << ' '
       << (endpoint.empty() ? "-" : endpoint) << ' ';
    if (txn == 0)
      os << '-';
    else
      os << txn;
    os << ' ' << to_token(kind);
    for (const auto& [k, v] : kv) os << ' ' << k << '=' << v;
    return os.str();
  }

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  static constexpr const char* kHeader = "#oae-trace v1";

  std::vector<TraceRecord> records;

  std::string to_text() const {
    std::ostringstream os;
    os << kHeader << '\n';
    for (const auto& r : records) os << r.line() << '\n';
    return os.str();
  }

  static Trace from_text(const std::string& text);
};

namespace detail {

inline Channel channel_from_token(const std::string& t) {
  if (t == "wire") return Channel::Wire;
  if (t == "fsm") return Channel::Fsm;
  if (t == "obs") return Channel::Observer;
  if (t == "aud") return Channel::Auditor;
  if (t == "kbp") return Channel::Kbp;
  throw ParseFault("unknown trace channel '" + t + "'");
}

inline RecordKind kind_from_token(const std::string& t) {
  static const std::pair<const char*, RecordKind> table[] = {
      {"emit", RecordKind::Emit},       {"deliver", RecordKind::Deliver},
      {"drop", RecordKind::Drop},       {"dup", RecordKind::Dup},
      {"corrupt", RecordKind::Corrupt}, {"reorder", RecordKind::Reorder},
      {"txdone", RecordKind::TxDone},   {"flush", RecordKind::Flush},
      {"hyper", RecordKind::Hyper},     {"move", RecordKind::Move},
      {"ignored", RecordKind::Ignored}, {"rejected", RecordKind::Rejected},
      {"read", RecordKind::Read},       {"created", RecordKind::Created},
      {"intent", RecordKind::Intent},   {"staged", RecordKind::Staged},
      {"resolved", RecordKind::Resolved}, {"converted", RecordKind::Converted},
      {"validated", RecordKind::Validated}, {"decided", RecordKind::Decided},
      {"outcome", RecordKind::Outcome}, {"applied", RecordKind::Applied},
      {"clock", RecordKind::Clock},     {"schema", RecordKind::Schema},
      {"retry", RecordKind::Retry},     {"cas", RecordKind::Cas},
      {"sweep", RecordKind::SweepAbort}, {"balance", RecordKind::Balance},
  };
  for (const auto& [tok, kind] : table)
    if (t == tok) return kind;
  throw ParseFault("unknown trace record kind '" + t + "'");
}

}  // namespace detail

inline Trace Trace::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    throw ParseFault(std::string("trace header mismatch: expected '") + kHeader + "', got '" +
                     line + "'");
  Trace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TraceRecord r;
    std::string endpoint, txn, channel, kind;
    if (!(ls >> r.tick >> r.link >> channel >> endpoint >> txn >> kind))
      throw ParseFault("trace line " + std::to_string(lineno) + " malformed: '" + line + "'");
    r.channel = detail::channel_from_token(channel);
    r.endpoint = endpoint == "-" ? "" : endpoint;
    r.txn = txn == "-" ? 0 : std::stoull(txn);
    r.kind = detail::kind_from_token(kind);
    std::string tok;
    while (ls >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw ParseFault("trace line " + std::to_string(lineno) + " has bare token '" + tok + "'");
      r.kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    trace.records.push_back(std::move(r));
  }
  return trace;
}

}  // namespace oae

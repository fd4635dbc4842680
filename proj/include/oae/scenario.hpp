#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oae/payload.hpp"
#include "oae/types.hpp"

namespace oae {

struct LinkParams {
  Tick one_way_delay = 2;
  Tick frame_tx_time = 1;  // ticks a data frame occupies the wire
  double loss_prob = 0.0;
  double dup_prob = 0.0;
  double reorder_prob = 0.0;
  double corrupt_prob = 0.0;
  std::uint64_t seed = 1;
  Tick timeout_ticks = 0;  // 0 = default, four one-way delays

  Tick effective_timeout() const {
    return timeout_ticks != 0 ? timeout_ticks : 4 * one_way_delay;
  }
};

/// True when the round trip beats the forward transmission: acknowledgments
/// arrive while the frame is still being clocked onto the wire.
inline bool pif_condition(const LinkParams& p) {
  return 2 * p.one_way_delay < p.frame_tx_time;
}

enum class SimMode : std::uint8_t { Oae, Fito };

inline const char* to_token(SimMode m) { return m == SimMode::Oae ? "oae" : "fito"; }

enum class ScriptOpKind : std::uint8_t { Initiate, Read, SetSchema };

struct ScriptOp {
  Tick tick = 0;
  ScriptOpKind kind = ScriptOpKind::Initiate;
  std::string actor;
  std::vector<FieldWrite> writes;  // Initiate
  std::vector<FieldId> keys;       // Read
  SchemaVersion version = kSchemaV1;  // SetSchema
};

struct HyperdataConfig {
  bool enabled = false;
  Side start = Side::A;
};

struct Scenario {
  std::string name = "scenario";
  LinkParams link;
  Tick horizon = 200;
  SimMode mode = SimMode::Oae;
  HyperdataConfig hyperdata;
  int fito_retry_limit = 3;
  std::vector<std::string> actors{"A", "B"};  // exactly two for file scenarios
  std::vector<ScriptOp> script;
};

struct ScenarioError : ProtocolFault {
  std::vector<std::string> problems;
  explicit ScenarioError(std::vector<std::string> p)
      : ProtocolFault(join(p)), problems(std::move(p)) {}

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::ostringstream os;
    os << "scenario invalid (" << p.size() << " problem" << (p.size() == 1 ? "" : "s") << "):";
    for (const auto& s : p) os << "\n  - " << s;
    return os.str();
  }
};

namespace detail {

inline void validate_scenario(const Scenario& s, std::vector<std::string>& problems) {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(s.link.loss_prob)) problems.push_back("link.loss_prob must be in [0,1]");
  if (!prob_ok(s.link.dup_prob)) problems.push_back("link.dup_prob must be in [0,1]");
  if (!prob_ok(s.link.reorder_prob)) problems.push_back("link.reorder_prob must be in [0,1]");
  if (!prob_ok(s.link.corrupt_prob)) problems.push_back("link.corrupt_prob must be in [0,1]");
  if (s.link.one_way_delay < 1) problems.push_back("link.one_way_delay must be >= 1 tick");
  if (s.link.frame_tx_time < 1) problems.push_back("link.frame_tx_time must be >= 1 tick");
  if (s.horizon == 0) problems.push_back("horizon must be finite and positive");
  if (s.actors.size() != 2) problems.push_back("exactly two actors are required");
  if (s.fito_retry_limit < 0) problems.push_back("fito_retry_limit must be >= 0");
  for (std::size_t i = 0; i < s.script.size(); ++i) {
    const auto& op = s.script[i];
    const std::string at = "script[" + std::to_string(i) + "]";
    bool known_actor = false;
    for (const auto& a : s.actors) known_actor |= (a == op.actor);
    if (!known_actor) problems.push_back(at + " references undeclared actor '" + op.actor + "'");
    if (op.tick > s.horizon) problems.push_back(at + " is scheduled past the horizon");
    if (op.kind == ScriptOpKind::Initiate && op.writes.empty())
      problems.push_back(at + " initiate has no writes");
    if (op.kind == ScriptOpKind::Read && op.keys.empty())
      problems.push_back(at + " read has no keys");
    if (op.kind == ScriptOpKind::SetSchema && op.version != kSchemaV1 && op.version != kSchemaV2)
      problems.push_back(at + " schema version must be 1 or 2");
  }
}

}  // namespace detail

inline void validate(const Scenario& s) {
  std::vector<std::string> problems;
  detail::validate_scenario(s, problems);
  if (!problems.empty()) throw ScenarioError(std::move(problems));
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  std::vector<std::string> problems;
  Scenario s;
  try {
    s.name = j.value("name", std::string("scenario"));
    s.horizon = j.value("horizon", 200u);
    if (j.contains("mode")) {
      const std::string m = j["mode"];
      if (m == "oae")
        s.mode = SimMode::Oae;
      else if (m == "fito")
        s.mode = SimMode::Fito;
      else
        problems.push_back("mode must be 'oae' or 'fito'");
    }
    if (j.contains("actors")) s.actors = j["actors"].get<std::vector<std::string>>();
    if (j.contains("link")) {
      const auto& l = j["link"];
      s.link.one_way_delay = l.value("one_way_delay", 2u);
      s.link.frame_tx_time = l.value("frame_tx_time", 1u);
      s.link.loss_prob = l.value("loss_prob", 0.0);
      s.link.dup_prob = l.value("dup_prob", 0.0);
      s.link.reorder_prob = l.value("reorder_prob", 0.0);
      s.link.corrupt_prob = l.value("corrupt_prob", 0.0);
      s.link.seed = l.value("seed", 1u);
      s.link.timeout_ticks = l.value("timeout_ticks", 0u);
    }
    if (j.contains("hyperdata")) {
      const auto& h = j["hyperdata"];
      s.hyperdata.enabled = h.value("enabled", false);
      const std::string start = h.value("start", "A");
      if (start == "A")
        s.hyperdata.start = Side::A;
      else if (start == "B")
        s.hyperdata.start = Side::B;
      else
        problems.push_back("hyperdata.start must be 'A' or 'B'");
    }
    s.fito_retry_limit = j.value("fito_retry_limit", 3);
    if (j.contains("script")) {
      for (const auto& e : j["script"]) {
        ScriptOp op;
        op.tick = e.value("tick", 0u);
        op.actor = e.value("actor", std::string());
        const std::string kind = e.value("op", std::string());
        if (kind == "initiate") {
          op.kind = ScriptOpKind::Initiate;
          if (e.contains("writes"))
            for (const auto& w : e["writes"])
              op.writes.push_back(FieldWrite{w.value("field", 0u), w.value("value", 0)});
        } else if (kind == "read") {
          op.kind = ScriptOpKind::Read;
          if (e.contains("keys"))
            for (const auto& k : e["keys"]) op.keys.push_back(k.get<FieldId>());
        } else if (kind == "set_schema") {
          op.kind = ScriptOpKind::SetSchema;
          op.version = static_cast<SchemaVersion>(e.value("version", 1u));
        } else {
          problems.push_back("script op must be initiate, read or set_schema, got '" + kind + "'");
          continue;
        }
        s.script.push_back(std::move(op));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    problems.push_back(std::string("json shape error: ") + e.what());
  }
  detail::validate_scenario(s, problems);
  if (!problems.empty()) throw ScenarioError(std::move(problems));
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseFault("cannot open scenario file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseFault("scenario file '" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace oae

#include "beliefsim/trace_io.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace beliefsim {

using nlohmann::json;

namespace {

void reject_unknown_fields(const json& j, const std::set<std::string>& known,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key()))
      throw ValidationError("unknown field '" + it.key() + "' in " + where);
  }
}

LikertRating rating_from(const json& j, const std::string& where) {
  if (!j.is_number_integer())
    throw ValidationError("rating must be an integer in " + where);
  return LikertRating(j.get<int>());
}

json persona_to_json(const Persona& p) {
  json j{{"agent_id", p.agent_id},
         {"display_name", p.display_name},
         {"demographics", p.demographics}};
  if (p.big5) {
    json b = json::object();
    for (const auto& [trait, score] : *p.big5) b[trait] = score;
    j["big5"] = b;
  } else {
    j["big5"] = nullptr;
  }
  return j;
}

Persona persona_from_json(const json& j, SchemaMode mode) {
  if (!j.is_object()) throw ValidationError("persona must be an object");
  if (mode == SchemaMode::strict)
    reject_unknown_fields(j, {"agent_id", "display_name", "demographics", "big5"},
                          "persona");
  Persona p;
  p.agent_id = j.at("agent_id").get<std::string>();
  p.display_name = j.at("display_name").get<std::string>();
  p.demographics = j.at("demographics").get<std::string>();
  const json& b = j.at("big5");
  if (!b.is_null()) {
    std::map<std::string, double> traits;
    for (auto it = b.begin(); it != b.end(); ++it)
      traits[it.key()] = it.value().get<double>();
    p.big5 = std::move(traits);
  }
  return p;
}

json observation_to_json(const PeerObservation& o) {
  return json{{"peer_id", o.peer_id},
              {"rating", o.rating.value()},
              {"reason", o.reason}};
}

PeerObservation observation_from_json(const json& j, SchemaMode mode,
                                      const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " entry must be an object");
  if (mode == SchemaMode::strict)
    reject_unknown_fields(j, {"peer_id", "rating", "reason"}, where);
  PeerObservation o;
  o.peer_id = j.at("peer_id").get<std::string>();
  o.rating = rating_from(j.at("rating"), where);
  o.reason = j.at("reason").get<std::string>();
  return o;
}

json response_to_json(const std::optional<StageResponse>& r) {
  if (!r) return nullptr;
  return json{{"rating", r->rating.value()}, {"reason", r->reason}};
}

std::optional<StageResponse> response_from_json(const json& j, SchemaMode mode,
                                                const std::string& where) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_object()) throw ValidationError(where + " must be an object or null");
  if (mode == SchemaMode::strict)
    reject_unknown_fields(j, {"rating", "reason"}, where);
  return StageResponse{rating_from(j.at("rating"), where),
                       j.at("reason").get<std::string>()};
}

}  // namespace

std::string trace_to_json_line(const RoundTrace& t) {
  json j;
  j["participant_id"] = t.participant_id;
  j["round"] = t.round;
  j["topic"] = t.topic;
  j["statement"] = t.statement;
  j["statement_is_true"] =
      t.statement_is_true ? json(*t.statement_is_true) : json(nullptr);
  j["persona"] = persona_to_json(t.persona);
  j["stage1"] = response_to_json(t.stage1);
  json peers = json::array();
  for (const auto& p : t.peers) peers.push_back(observation_to_json(p));
  j["peers"] = std::move(peers);
  j["stage2"] = response_to_json(t.stage2);
  json cands = json::array();
  for (const auto& c : t.candidates) cands.push_back(observation_to_json(c));
  j["candidates"] = std::move(cands);
  j["k"] = t.k;
  j["follows"] = t.follows ? json(*t.follows) : json(nullptr);
  j["status"] = std::string(to_string(t.status));
  return j.dump();
}

RoundTrace trace_from_json_line(const std::string& line, SchemaMode mode) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("record must be an object");
  if (mode == SchemaMode::strict)
    reject_unknown_fields(j,
                          {"participant_id", "round", "topic", "statement",
                           "statement_is_true", "persona", "stage1", "peers",
                           "stage2", "candidates", "k", "follows", "status"},
                          "record");

  RoundTrace t;
  try {
    t.participant_id = j.at("participant_id").get<std::string>();
    t.round = j.at("round").get<int>();
    t.topic = j.at("topic").get<std::string>();
    t.statement = j.at("statement").get<std::string>();
    const json& truth = j.at("statement_is_true");
    if (!truth.is_null()) t.statement_is_true = truth.get<bool>();
    t.persona = persona_from_json(j.at("persona"), mode);
    t.stage1 = response_from_json(j.at("stage1"), mode, "stage1");
    for (const auto& p : j.at("peers"))
      t.peers.push_back(observation_from_json(p, mode, "peers"));
    t.stage2 = response_from_json(j.at("stage2"), mode, "stage2");
    for (const auto& c : j.at("candidates"))
      t.candidates.push_back(observation_from_json(c, mode, "candidates"));
    t.k = j.at("k").get<int>();
    const json& follows = j.at("follows");
    if (!follows.is_null()) t.follows = follows.get<std::vector<std::string>>();
    t.status = trace_status_from_string(j.at("status").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed record: ") + e.what());
  }
  validate(t);
  return t;
}

Cohort load_cohort(const std::filesystem::path& path, SchemaMode mode,
                   std::optional<std::string> label) {
  std::ifstream in(path);
  if (!in) throw TraceFileError("cannot open '" + path.string() + "'");

  Cohort cohort;
  cohort.label = label ? *label : path.stem().string();

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      cohort.insert(trace_from_json_line(line, mode));
    } catch (const ValidationError& e) {
      throw TraceFileError(line_no, e.what());
    }
  }
  try {
    validate(cohort);
  } catch (const ValidationError& e) {
    throw TraceFileError(std::string(e.what()) + " in '" + path.string() + "'");
  }
  return cohort;
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TraceFileError("cannot open '" + path.string() + "' for writing");
  for (const auto& [key, trace] : cohort.traces) out << trace_to_json_line(trace) << '\n';
  out.flush();
  if (!out) throw TraceFileError("write failed for '" + path.string() + "'");
}

std::pair<Cohort, Cohort> align_cohorts(const Cohort& a, const Cohort& b,
                                        Stage required) {
  Cohort out_a{a.label, {}};
  Cohort out_b{b.label, {}};
  for (const auto& [key, trace_a] : a.traces) {
    auto it = b.traces.find(key);
    if (it == b.traces.end()) continue;
    if (!trace_a.has_stage(required) || !it->second.has_stage(required)) continue;
    out_a.traces.emplace(key, trace_a);
    out_b.traces.emplace(key, it->second);
  }
  if (out_a.empty()) throw ValidationError("no comparable instances");
  return {std::move(out_a), std::move(out_b)};
}

}  // namespace beliefsim

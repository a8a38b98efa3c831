#include "beliefsim/types.hpp"

#include <algorithm>
#include <set>

namespace beliefsim {

void validate(const Persona& persona) {
  if (persona.agent_id.empty())
    throw ValidationError("persona agent_id must be non-empty");
  if (persona.big5) {
    if (persona.big5->size() != kBig5Traits.size())
      throw ValidationError("big5 must contain exactly the five canonical traits");
    auto it = persona.big5->begin();
    for (std::string_view want : kBig5Traits) {
      if (it->first != want)
        throw ValidationError("big5 has unexpected trait key '" + it->first + "'");
      ++it;
    }
  }
}

std::string_view to_string(TraceStatus status) {
  switch (status) {
    case TraceStatus::complete: return "complete";
    case TraceStatus::failed_stage1: return "failed_stage1";
    case TraceStatus::failed_stage2: return "failed_stage2";
    case TraceStatus::failed_stage3: return "failed_stage3";
  }
  return "unknown";
}

TraceStatus trace_status_from_string(std::string_view s) {
  if (s == "complete") return TraceStatus::complete;
  if (s == "failed_stage1") return TraceStatus::failed_stage1;
  if (s == "failed_stage2") return TraceStatus::failed_stage2;
  if (s == "failed_stage3") return TraceStatus::failed_stage3;
  throw ValidationError("unknown status '" + std::string(s) + "'");
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::rate: return "stage1";
    case Stage::update: return "stage2";
    case Stage::follow: return "stage3";
  }
  return "unknown";
}

bool RoundTrace::has_stage(Stage stage) const {
  switch (stage) {
    case Stage::rate: return status != TraceStatus::failed_stage1;
    case Stage::update:
      return status == TraceStatus::complete || status == TraceStatus::failed_stage3;
    case Stage::follow: return status == TraceStatus::complete;
  }
  return false;
}

void validate(const RoundTrace& t) {
  if (t.participant_id.empty())
    throw ValidationError("participant_id must be non-empty");
  if (t.round < 1) throw ValidationError("round must be >= 1");
  if (t.k < 0) throw ValidationError("k must be >= 0");
  validate(t.persona);

  for (const auto& p : t.peers)
    if (p.peer_id.empty()) throw ValidationError("peer_id must be non-empty");
  for (const auto& c : t.candidates)
    if (c.peer_id.empty()) throw ValidationError("candidate peer_id must be non-empty");

  std::set<std::string> cand_ids;
  for (const auto& c : t.candidates)
    if (!cand_ids.insert(c.peer_id).second)
      throw ValidationError("duplicate candidate id '" + c.peer_id + "'");

  // stage data must match the status, and never skip a stage
  const bool want1 = t.has_stage(Stage::rate);
  const bool want2 = t.has_stage(Stage::update);
  const bool want3 = t.has_stage(Stage::follow);
  if (t.stage1.has_value() != want1)
    throw ValidationError(std::string("stage1 data inconsistent with status '") +
                          std::string(to_string(t.status)) + "'");
  if (t.stage2.has_value() != want2)
    throw ValidationError(std::string("stage2 data inconsistent with status '") +
                          std::string(to_string(t.status)) + "'");
  if (t.follows.has_value() != want3)
    throw ValidationError(std::string("follows inconsistent with status '") +
                          std::string(to_string(t.status)) + "'");

  if (t.stage2 && t.peers.empty())
    throw ValidationError("peers must be non-empty when stage2 is present");

  if (t.follows) {
    if (t.k < 1) throw ValidationError("k must be >= 1 for a complete trace");
    if (static_cast<int>(t.follows->size()) != t.k)
      throw ValidationError("follows must have exactly k entries");
    std::set<std::string> seen;
    for (const auto& id : *t.follows) {
      if (!seen.insert(id).second)
        throw ValidationError("duplicate follow id '" + id + "'");
      if (!cand_ids.contains(id))
        throw ValidationError("follow id '" + id + "' not among candidates");
    }
  }
}

void Cohort::insert(RoundTrace trace) {
  TraceKey key = key_of(trace);
  auto [it, inserted] = traces.emplace(std::move(key), std::move(trace));
  if (!inserted)
    throw ValidationError("duplicate trace key (" + it->first.first + ", " +
                          std::to_string(it->first.second) + ")");
}

void validate(const Cohort& cohort) {
  std::map<std::string, std::string> participant_agent;  // participant -> agent_id
  std::map<std::string, std::string> agent_participant;  // agent_id -> participant
  for (const auto& [key, trace] : cohort.traces) {
    if (key != key_of(trace))
      throw ValidationError("trace key does not match trace contents for (" +
                            key.first + ", " + std::to_string(key.second) + ")");
    validate(trace);
    const std::string& pid = trace.participant_id;
    const std::string& aid = trace.persona.agent_id;
    auto [pit, pnew] = participant_agent.emplace(pid, aid);
    if (!pnew && pit->second != aid)
      throw ValidationError("participant '" + pid + "' has inconsistent agent_id");
    auto [ait, anew] = agent_participant.emplace(aid, pid);
    if (!anew && ait->second != pid)
      throw ValidationError("agent_id '" + aid + "' shared by two participants");
  }
}

}  // namespace beliefsim

#pragma once

// Shared builders for test cohorts.

#include <string>
#include <utility>
#include <vector>

#include "beliefsim/rng.hpp"
#include "beliefsim/types.hpp"

namespace beliefsim::testing {

struct TraceSpec {
  std::string pid = "u1";
  int round = 1;
  int stage1 = 2;
  std::vector<int> peers = {2, 2};
  int stage2 = 2;
  std::vector<std::pair<std::string, int>> candidates = {{"c1", 1}, {"c2", 3}};
  int k = 1;
  std::vector<std::string> follows = {"c1"};
  TraceStatus status = TraceStatus::complete;
};

inline RoundTrace make_trace(const TraceSpec& spec) {
  RoundTrace t;
  t.participant_id = spec.pid;
  t.round = spec.round;
  t.topic = "topic";
  t.statement = "statement about " + spec.pid;
  t.persona.agent_id = spec.pid;
  t.persona.display_name = "Agent " + spec.pid;
  t.persona.demographics = "persona of " + spec.pid;
  int i = 0;
  for (int rating : spec.peers)
    t.peers.push_back({"p" + std::to_string(++i), LikertRating(rating), "peer view"});
  for (const auto& [id, rating] : spec.candidates)
    t.candidates.push_back({id, LikertRating(rating), "candidate view"});
  t.k = spec.k;
  t.status = spec.status;
  if (t.has_stage(Stage::rate))
    t.stage1 = StageResponse{LikertRating(spec.stage1), "initial view"};
  if (t.has_stage(Stage::update))
    t.stage2 = StageResponse{LikertRating(spec.stage2), "updated view"};
  if (t.has_stage(Stage::follow)) t.follows = spec.follows;
  return t;
}

inline Cohort make_cohort(const std::string& label,
                          const std::vector<TraceSpec>& specs) {
  Cohort cohort;
  cohort.label = label;
  for (const auto& spec : specs) cohort.insert(make_trace(spec));
  return cohort;
}

// A cohort exercising every optional field and status, for round-trip tests.
inline Cohort random_cohort(Rng& rng, int participants, int rounds,
                            const std::string& label) {
  Cohort cohort;
  cohort.label = label;
  for (int p = 0; p < participants; ++p) {
    const std::string pid = "r" + std::to_string(p + 1);
    for (int round = 1; round <= rounds; ++round) {
      TraceSpec spec;
      spec.pid = pid;
      spec.round = round;
      spec.stage1 = static_cast<int>(rng.uniform_int(5));
      spec.peers = {static_cast<int>(rng.uniform_int(5)),
                    static_cast<int>(rng.uniform_int(5)),
                    static_cast<int>(rng.uniform_int(5))};
      spec.stage2 = static_cast<int>(rng.uniform_int(5));
      spec.candidates = {{"c1", static_cast<int>(rng.uniform_int(5))},
                         {"c2", static_cast<int>(rng.uniform_int(5))},
                         {"c3", static_cast<int>(rng.uniform_int(5))}};
      spec.k = 2;
      spec.follows = rng.uniform_int(2) ? std::vector<std::string>{"c1", "c3"}
                                        : std::vector<std::string>{"c2", "c1"};
      switch (rng.uniform_int(8)) {
        case 0: spec.status = TraceStatus::failed_stage1; break;
        case 1: spec.status = TraceStatus::failed_stage2; break;
        case 2: spec.status = TraceStatus::failed_stage3; break;
        default: spec.status = TraceStatus::complete; break;
      }
      RoundTrace t = make_trace(spec);
      if (rng.uniform_int(2)) {
        t.persona.big5 = std::map<std::string, double>{
            {"agreeableness", rng.uniform_real() * 5},
            {"conscientiousness", rng.uniform_real() * 5},
            {"extraversion", rng.uniform_real() * 5},
            {"neuroticism", rng.uniform_real() * 5},
            {"openness", rng.uniform_real() * 5}};
      }
      if (rng.uniform_int(3) == 0) t.statement_is_true = rng.uniform_int(2) != 0;
      cohort.insert(std::move(t));
    }
  }
  return cohort;
}

/// The six-key worked pair behind the end-to-end comparison oracle: shared
/// stimuli, different stage responses and selections. Expected metric values
/// are frozen in the tests.
inline std::pair<Cohort, Cohort> fixture_pair() {
  struct Row {
    const char* pid;
    std::vector<int> peers;
    std::vector<int> cands;
    int ref_s1, ref_s2;
    std::vector<std::string> ref_follows;
    int sub_s1, sub_s2;
    std::vector<std::string> sub_follows;
  };
  const std::vector<Row> rows = {
      {"u1", {3, 1}, {4, 0, 2}, 4, 3, {"c1", "c3"}, 3, 3, {"c1", "c2"}},
      {"u2", {2, 4}, {1, 3, 0}, 1, 2, {"c1", "c2"}, 2, 3, {"c2", "c3"}},
      {"u3", {1, 1}, {0, 1, 4}, 0, 0, {"c1", "c2"}, 1, 1, {"c1", "c2"}},
      {"u4", {4, 2}, {2, 2, 4}, 2, 3, {"c1", "c2"}, 3, 3, {"c3", "c1"}},
      {"u5", {0, 2}, {3, 1, 0}, 3, 2, {"c1", "c2"}, 4, 2, {"c1", "c3"}},
      {"u6", {2, 2}, {4, 2, 1}, 2, 2, {"c2", "c3"}, 2, 2, {"c1", "c2"}},
  };
  Cohort reference{"human", {}};
  Cohort subject{"modelx", {}};
  for (const auto& row : rows) {
    TraceSpec spec;
    spec.pid = row.pid;
    spec.peers = row.peers;
    spec.candidates = {{"c1", row.cands[0]}, {"c2", row.cands[1]}, {"c3", row.cands[2]}};
    spec.k = 2;

    spec.stage1 = row.ref_s1;
    spec.stage2 = row.ref_s2;
    spec.follows = row.ref_follows;
    reference.insert(make_trace(spec));

    spec.stage1 = row.sub_s1;
    spec.stage2 = row.sub_s2;
    spec.follows = row.sub_follows;
    subject.insert(make_trace(spec));
  }
  return {std::move(subject), std::move(reference)};
}

}  // namespace beliefsim::testing

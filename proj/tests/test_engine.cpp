#include <doctest.h>

#include <fstream>

#include "beliefsim/belief_metrics.hpp"
#include "beliefsim/engine.hpp"
#include "beliefsim/trace_io.hpp"
#include "support/test_support.hpp"

using namespace beliefsim;
using namespace beliefsim::engine;

namespace {

// Fails at a chosen stage; records what it saw in round memory beforehand.
class FailingAgent : public agents::Agent {
 public:
  explicit FailingAgent(Stage fail_at) : fail_at_(fail_at) {}

  agents::AgentDecision stage1(const agents::AgentContext& ctx) override {
    observed_memory_at_stage1 = ctx.round_memory.size();
    if (fail_at_ == Stage::rate)
      throw agents::StageFailure(Stage::rate, "scripted failure");
    return agents::AgentDecision::rate(LikertRating(1), "one");
  }
  agents::AgentDecision stage2(const agents::AgentContext& ctx,
                               std::span<const PeerObservation>) override {
    observed_memory_at_stage2 = ctx.round_memory.size();
    if (fail_at_ == Stage::update)
      throw agents::StageFailure(Stage::update, "scripted failure");
    return agents::AgentDecision::rate(LikertRating(2), "two");
  }
  agents::AgentDecision stage3(const agents::AgentContext& ctx,
                               std::span<const PeerObservation> candidates,
                               int k) override {
    observed_memory_at_stage3 = ctx.round_memory.size();
    observed_summaries.assign(ctx.round_memory.size(), "");
    for (std::size_t i = 0; i < ctx.round_memory.size(); ++i)
      observed_summaries[i] = ctx.round_memory[i].summary;
    if (fail_at_ == Stage::follow)
      throw agents::StageFailure(Stage::follow, "scripted failure");
    std::vector<std::string> ids;
    for (int i = 0; i < k; ++i) ids.push_back(candidates[i].peer_id);
    return agents::AgentDecision::follow(std::move(ids), "first k");
  }

  Stage fail_at_;
  std::size_t observed_memory_at_stage1 = 99;
  std::size_t observed_memory_at_stage2 = 99;
  std::size_t observed_memory_at_stage3 = 99;
  std::vector<std::string> observed_summaries;
};

Stimulus simple_stimulus() {
  Stimulus s;
  s.topic = "t";
  s.statement = "s";
  s.peers = {{"p1", LikertRating(4), "r"}, {"p2", LikertRating(4), "r"}};
  s.candidates = {{"c1", LikertRating(0), "r"},
                  {"c2", LikertRating(3), "r"},
                  {"c3", LikertRating(4), "r"}};
  s.k = 2;
  return s;
}

Persona simple_persona(const std::string& id) {
  Persona p;
  p.agent_id = id;
  p.display_name = id;
  p.demographics = "test persona";
  return p;
}

}  // namespace

TEST_CASE("run_round: worked degroot update") {
  agents::InitialPolicy fixed;
  fixed.kind = agents::InitialPolicy::Kind::fixed;
  fixed.fixed_value = 0;
  agents::DeGrootAgent agent(1.0, fixed, 1);
  const auto trace = run_round(agent, simple_persona("u1"), {"u1", 1},
                               simple_stimulus());
  CHECK(trace.status == TraceStatus::complete);
  CHECK(trace.stage1->rating.value() == 0);
  CHECK(trace.stage2->rating.value() == 4);  // alpha=1, peers [4,4]
  CHECK_NOTHROW(validate(trace));
}

TEST_CASE("run_round: failure bookkeeping keeps earlier stages") {
  SUBCASE("stage-2 failure") {
    FailingAgent agent(Stage::update);
    const auto trace =
        run_round(agent, simple_persona("u1"), {"u1", 1}, simple_stimulus());
    CHECK(trace.status == TraceStatus::failed_stage2);
    REQUIRE(trace.stage1.has_value());
    CHECK(trace.stage1->rating.value() == 1);
    CHECK_FALSE(trace.stage2.has_value());
    CHECK_FALSE(trace.follows.has_value());
    CHECK(agent.observed_memory_at_stage3 == 99);  // stage 3 never ran
    CHECK_NOTHROW(validate(trace));
  }
  SUBCASE("stage-1 failure") {
    FailingAgent agent(Stage::rate);
    const auto trace =
        run_round(agent, simple_persona("u1"), {"u1", 1}, simple_stimulus());
    CHECK(trace.status == TraceStatus::failed_stage1);
    CHECK_FALSE(trace.stage1.has_value());
    CHECK(trace.peers.size() == 2);  // stimulus data retained
    CHECK_NOTHROW(validate(trace));
  }
  SUBCASE("stage-3 contract violations become failed_stage3") {
    // an agent returning duplicate ids
    class DuplicateAgent : public agents::Agent {
      agents::AgentDecision stage1(const agents::AgentContext&) override {
        return agents::AgentDecision::rate(LikertRating(1), "r");
      }
      agents::AgentDecision stage2(const agents::AgentContext&,
                                   std::span<const PeerObservation>) override {
        return agents::AgentDecision::rate(LikertRating(1), "r");
      }
      agents::AgentDecision stage3(const agents::AgentContext&,
                                   std::span<const PeerObservation>, int) override {
        return agents::AgentDecision::follow({"c1", "c1"}, "r");
      }
    };
    DuplicateAgent agent;
    const auto trace =
        run_round(agent, simple_persona("u1"), {"u1", 1}, simple_stimulus());
    CHECK(trace.status == TraceStatus::failed_stage3);
    CHECK(trace.stage2.has_value());
    CHECK_NOTHROW(validate(trace));
  }
}

TEST_CASE("round memory scoping: empty at stage 1, summaries accumulate in order") {
  FailingAgent agent(Stage::follow);  // reaches stage 3, then fails
  const auto trace =
      run_round(agent, simple_persona("u1"), {"u1", 1}, simple_stimulus());
  CHECK(agent.observed_memory_at_stage1 == 0);
  CHECK(agent.observed_memory_at_stage2 == 1);
  CHECK(agent.observed_memory_at_stage3 == 2);
  REQUIRE(agent.observed_summaries.size() == 2);
  CHECK(agent.observed_summaries[0] == "Stage 1: rated 1 because one");
  CHECK(agent.observed_summaries[1] == "Stage 2: rated 2 because two");
  CHECK(trace.status == TraceStatus::failed_stage3);
}

TEST_CASE("synthesize_stimuli") {
  SynthConfig config;
  config.participants = 100;
  config.rounds = 3;
  config.peers_per_round = 5;
  config.pool_size = 8;
  config.k = 3;

  SUBCASE("cardinalities everywhere") {
    const auto plan = synthesize_stimuli(config, 1);
    CHECK(plan.stimuli.size() == 300);
    CHECK(plan.personas.size() == 100);
    for (const auto& [key, stim] : plan.stimuli) {
      CHECK(stim.peers.size() == 5);
      CHECK(stim.candidates.size() == 8);
      CHECK(stim.k == 3);
    }
    CHECK_NOTHROW(validate(plan));
  }
  SUBCASE("same seed, same plan; different seed differs") {
    const auto a = synthesize_stimuli(config, 1);
    const auto b = synthesize_stimuli(config, 1);
    const auto c = synthesize_stimuli(config, 2);
    REQUIRE(a.stimuli.size() == b.stimuli.size());
    bool all_equal_ab = true, any_diff_ac = false;
    for (const auto& [key, stim] : a.stimuli) {
      const auto& other = b.stimuli.at(key);
      if (stim.candidates != other.candidates) all_equal_ab = false;
      if (stim.candidates != c.stimuli.at(key).candidates) any_diff_ac = true;
    }
    CHECK(all_equal_ab);
    CHECK(any_diff_ac);
  }
  SUBCASE("point-mass peer distribution") {
    config.peer_rating_pmf = {0, 0, 0, 0, 1};
    const auto plan = synthesize_stimuli(config, 3);
    for (const auto& [key, stim] : plan.stimuli)
      for (const auto& p : stim.peers) CHECK(p.rating.value() == 4);
  }
  SUBCASE("full rating coverage for exact-match candidates") {
    config.pool_covers_all_ratings = true;
    const auto plan = synthesize_stimuli(config, 4);
    for (const auto& [key, stim] : plan.stimuli) {
      std::array<bool, 5> seen{};
      for (const auto& c : stim.candidates) seen[c.rating.value()] = true;
      for (bool s : seen) CHECK(s);
    }
  }
  SUBCASE("bad cardinalities rejected") {
    config.k = 9;
    CHECK_THROWS_AS(synthesize_stimuli(config, 1), std::invalid_argument);
  }
}

TEST_CASE("run_cohort") {
  SynthConfig config;
  config.participants = 10;
  config.rounds = 3;

  SUBCASE("one trace per plan entry") {
    agents::DeGrootAgent agent(0.5, {}, 3);
    const auto cohort = run_cohort(agent, synthesize_stimuli(config, 3),
                                   {"c", 1, 3});
    CHECK(cohort.size() == 30);
    CHECK(cohort.label == "c");
    CHECK_NOTHROW(validate(cohort));
  }
  SUBCASE("bitwise identical across parallelism levels") {
    agents::DeGrootAgent agent(0.5, {}, 3);
    const auto plan = synthesize_stimuli(config, 3);
    const auto serial = run_cohort(agent, plan, {"c", 1, 3});
    const auto parallel = run_cohort(agent, plan, {"c", 8, 3});
    CHECK(serial == parallel);
    CHECK(trace_to_json_line(serial.traces.begin()->second) ==
          trace_to_json_line(parallel.traces.begin()->second));
  }
  SUBCASE("plan gaps reported up front") {
    auto plan = synthesize_stimuli(config, 3);
    plan.stimuli.erase({"u004", 2});
    agents::DeGrootAgent agent(0.5, {}, 3);
    try {
      run_cohort(agent, plan, {"c", 1, 3});
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("(u004, 2)") != std::string::npos);
    }
  }
  SUBCASE("failure isolation: one participant-round fails, others unchanged") {
    class SelectiveFailer : public agents::Agent {
     public:
      agents::AgentDecision stage1(const agents::AgentContext& ctx) override {
        if (ctx.participant_id == "u003" && ctx.round == 2)
          throw agents::StageFailure(Stage::rate, "selective");
        return base_.stage1(ctx);
      }
      agents::AgentDecision stage2(const agents::AgentContext& ctx,
                                   std::span<const PeerObservation> peers) override {
        return base_.stage2(ctx, peers);
      }
      agents::AgentDecision stage3(const agents::AgentContext& ctx,
                                   std::span<const PeerObservation> candidates,
                                   int k) override {
        return base_.stage3(ctx, candidates, k);
      }

     private:
      agents::DeGrootAgent base_{0.5, {}, 3};
    };
    const auto plan = synthesize_stimuli(config, 3);
    agents::DeGrootAgent clean_agent(0.5, {}, 3);
    SelectiveFailer failing_agent;
    const auto clean = run_cohort(clean_agent, plan, {"c", 2, 3});
    const auto dirty = run_cohort(failing_agent, plan, {"c", 2, 3});
    for (const auto& [key, trace] : clean.traces) {
      if (key == TraceKey{"u003", 2}) {
        CHECK(dirty.traces.at(key).status == TraceStatus::failed_stage1);
      } else {
        CHECK(dirty.traces.at(key) == trace);
      }
    }
  }
}

TEST_CASE("replay round-trips a recorded cohort bitwise") {
  // synthesize a "human" cohort, then replay it by (participant, round)
  SynthConfig config;
  config.participants = 8;
  config.rounds = 3;
  agents::DeGrootAgent agent(0.7, {}, 55);
  Cohort original =
      run_cohort(agent, synthesize_stimuli(config, 55), {"orig", 1, 3});

  // add recorded failures so replay must reproduce statuses too
  auto& t1 = original.traces.at({"u002", 1});
  t1.status = TraceStatus::failed_stage2;
  t1.stage2.reset();
  t1.follows.reset();
  auto& t2 = original.traces.at({"u005", 3});
  t2.status = TraceStatus::failed_stage3;
  t2.follows.reset();

  agents::ReplayAgent replay(original);
  const auto plan = StimulusPlan::from_cohort(original);
  RunOptions options;
  options.label = "orig";
  options.parallelism = 4;
  const Cohort replayed = run_cohort(replay, plan, options);
  CHECK(replayed == original);

  // and the replayed cohort compares clean against the original
  const auto report = metrics::compare_cohorts(replayed, original);
  CHECK(*report.stage1.kl == 0.0);
  CHECK(*report.stage1.wasserstein == 0.0);
  CHECK(report.stage1.spearman->rho == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("run config loading") {
  const auto dir = std::filesystem::temp_directory_path() / "beliefsim_engine_tests";
  std::filesystem::create_directories(dir);

  SUBCASE("full config round-trip") {
    const auto path = dir / "good.json";
    std::ofstream(path) << R"({
      "label": "demo",
      "agent": {"kind": "homophily",
                "base": {"kind": "degroot", "alpha": 0.25,
                         "initial": {"policy": "gaussian", "mu": 2.0, "sigma": 1.0}}},
      "stimuli": {"source": "synth", "participants": 4, "peers": 2, "pool": 5,
                   "k": 2, "cover_all_ratings": true},
      "parallelism": 2,
      "seed": 9,
      "rounds": 2,
      "output_path": "out.jsonl"
    })";
    const auto config = load_run_config(path);
    CHECK(config.label == "demo");
    CHECK(config.agent.kind == "homophily");
    REQUIRE(config.agent.base);
    CHECK(config.agent.base->alpha == 0.25);
    CHECK(config.stimuli.synth.pool_covers_all_ratings);
    const auto result = run_from_config(config);
    CHECK(result.cohort.size() == 8);
    CHECK(result.completed == 8);
  }
  SUBCASE("missing field names the path") {
    const auto path = dir / "missing.json";
    std::ofstream(path) << R"({"agent": {"kind": "degroot"},
                               "stimuli": {"source": "synth"}})";
    try {
      load_run_config(path);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("output_path") != std::string::npos);
    }
  }
  SUBCASE("unknown agent kind") {
    AgentSpec spec;
    spec.kind = "telepathic";
    CHECK_THROWS_AS(make_agent(spec, 1), ConfigError);
  }
  SUBCASE("endpoint accepted at the top level or nested under agent") {
    const auto path = dir / "llm_top.json";
    std::ofstream(path) << R"({
      "agent": {"kind": "llm"},
      "endpoint": {"base_url": "http://127.0.0.1:11434", "model_name": "m"},
      "stimuli": {"source": "synth"},
      "output_path": "o.jsonl"
    })";
    const auto config = load_run_config(path);
    CHECK(config.agent.endpoint.base_url == "http://127.0.0.1:11434");
    CHECK(config.agent.endpoint.model_name == "m");
    CHECK(config.agent.endpoint.temperature == 1.2);

    const auto nested = dir / "llm_nested.json";
    std::ofstream(nested) << R"({
      "agent": {"kind": "llm",
                "endpoint": {"base_url": "http://10.0.0.1:1", "model_name": "n",
                              "temperature": 0.7}},
      "stimuli": {"source": "synth"},
      "output_path": "o.jsonl"
    })";
    const auto config2 = load_run_config(nested);
    CHECK(config2.agent.endpoint.model_name == "n");
    CHECK(config2.agent.endpoint.temperature == 0.7);

    const auto missing = dir / "llm_missing.json";
    std::ofstream(missing) << R"({
      "agent": {"kind": "llm"},
      "stimuli": {"source": "synth"},
      "output_path": "o.jsonl"
    })";
    CHECK_THROWS_AS(load_run_config(missing), ConfigError);
  }
}

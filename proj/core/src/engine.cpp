#include "beliefsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "beliefsim/rng.hpp"
#include "beliefsim/trace_io.hpp"

namespace beliefsim::engine {

using nlohmann::json;

StimulusPlan StimulusPlan::from_cohort(const Cohort& cohort) {
  StimulusPlan plan;
  for (const auto& [key, trace] : cohort.traces) {
    plan.stimuli.emplace(key, Stimulus{trace.topic, trace.statement,
                                       trace.statement_is_true, trace.peers,
                                       trace.candidates, trace.k});
    plan.personas.emplace(trace.participant_id, trace.persona);
  }
  return plan;
}

void validate(const StimulusPlan& plan) {
  if (plan.stimuli.empty()) throw ValidationError("stimulus plan is empty");
  for (const auto& [key, stim] : plan.stimuli) {
    if (!plan.personas.contains(key.first))
      throw ValidationError("no persona for participant '" + key.first + "'");
    if (stim.k < 1 || static_cast<std::size_t>(stim.k) > stim.candidates.size())
      throw ValidationError("stimulus for (" + key.first + ", " +
                            std::to_string(key.second) +
                            ") violates 1 <= k <= |candidates|");
  }
}

namespace {

const std::vector<StatementSpec>& default_statement_bank() {
  static const std::vector<StatementSpec> bank = {
      {"urban_transit",
       "Most commuters in large cities would switch to public transit if "
       "service ran every five minutes.",
       std::nullopt},
      {"energy",
       "Household solar panels pay for themselves within ten years in most "
       "regions.",
       std::nullopt},
      {"urban_transit",
       "Congestion pricing reduces downtown traffic by more than a quarter "
       "within one year.",
       std::nullopt},
  };
  return bank;
}

std::string participant_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%03d", index + 1);
  return buf;
}

}  // namespace

StimulusPlan synthesize_stimuli(const SynthConfig& config, std::uint64_t seed) {
  if (config.participants < 1 || config.rounds < 1)
    throw std::invalid_argument("synthesize_stimuli: participants and rounds must be >= 1");
  if (config.k < 1 || config.k > config.pool_size)
    throw std::invalid_argument("synthesize_stimuli: need 1 <= k <= pool_size");
  if (config.peers_per_round < 1 || config.peers_per_round > config.pool_size)
    throw std::invalid_argument(
        "synthesize_stimuli: need 1 <= peers_per_round <= pool_size");
  if (config.pool_covers_all_ratings && config.pool_size < 5)
    throw std::invalid_argument(
        "synthesize_stimuli: rating coverage needs pool_size >= 5");

  const auto& bank =
      config.statements.empty() ? default_statement_bank() : config.statements;

  StimulusPlan plan;
  for (int p = 0; p < config.participants; ++p) {
    const std::string pid = participant_name(p);
    Persona persona;
    persona.agent_id = pid;
    persona.display_name = "Agent " + pid;
    persona.demographics = "synthetic persona " + pid;
    plan.personas.emplace(pid, persona);

    for (int round = 1; round <= config.rounds; ++round) {
      Rng rng(derive_seed(seed, pid, round, 100));
      const auto& stmt =
          bank[static_cast<std::size_t>(p * config.rounds + round - 1) % bank.size()];

      Stimulus stim;
      stim.topic = stmt.topic;
      stim.statement = stmt.statement;
      stim.statement_is_true = stmt.is_true;
      stim.k = config.k;
      for (int i = 0; i < config.pool_size; ++i) {
        const int rating = (config.pool_covers_all_ratings && i < 5)
                               ? i
                               : rng.draw_bin(config.peer_rating_pmf);
        stim.candidates.push_back(
            PeerObservation{"n" + std::to_string(i + 1), LikertRating(rating),
                            "synthetic peer rationale"});
      }
      stim.peers.assign(stim.candidates.begin(),
                        stim.candidates.begin() + config.peers_per_round);
      plan.stimuli.emplace(TraceKey{pid, round}, std::move(stim));
    }
  }
  return plan;
}

RoundTrace run_round(agents::Agent& agent, const Persona& persona,
                     const TraceKey& key, const Stimulus& stimulus) {
  RoundTrace trace;
  trace.participant_id = key.first;
  trace.round = key.second;
  trace.topic = stimulus.topic;
  trace.statement = stimulus.statement;
  trace.statement_is_true = stimulus.statement_is_true;
  trace.persona = persona;
  trace.peers = stimulus.peers;
  trace.candidates = stimulus.candidates;
  trace.k = stimulus.k;

  agents::AgentContext ctx;
  ctx.participant_id = key.first;
  ctx.round = key.second;
  ctx.persona = persona;
  ctx.statement = stimulus.statement;

  // stage 1: rate
  try {
    auto decision = agent.stage1(ctx);
    if (!decision.rating)
      throw agents::StageFailure(Stage::rate, "agent returned no rating");
    trace.stage1 = StageResponse{*decision.rating, decision.reason};
  } catch (const agents::StageFailure&) {
    trace.status = TraceStatus::failed_stage1;
    return trace;
  }
  ctx.round_memory.push_back(
      {Stage::rate, trace.stage1->rating, trace.stage1->reason,
       agents::stage_summary_line(Stage::rate, trace.stage1->rating,
                                  trace.stage1->reason)});

  // stage 2: observe peers and update
  try {
    auto decision = agent.stage2(ctx, stimulus.peers);
    if (!decision.rating)
      throw agents::StageFailure(Stage::update, "agent returned no rating");
    trace.stage2 = StageResponse{*decision.rating, decision.reason};
  } catch (const agents::StageFailure&) {
    trace.status = TraceStatus::failed_stage2;
    return trace;
  }
  ctx.round_memory.push_back(
      {Stage::update, trace.stage2->rating, trace.stage2->reason,
       agents::stage_summary_line(Stage::update, trace.stage2->rating,
                                  trace.stage2->reason)});

  // stage 3: choose whom to follow
  try {
    auto decision = agent.stage3(ctx, stimulus.candidates, stimulus.k);
    if (!decision.follow_ids)
      throw agents::StageFailure(Stage::follow, "agent returned no follow ids");
    // contract check: k distinct candidate ids
    if (static_cast<int>(decision.follow_ids->size()) != stimulus.k)
      throw agents::StageFailure(Stage::follow, "wrong follow count");
    std::set<std::string> seen;
    for (const auto& id : *decision.follow_ids) {
      if (!seen.insert(id).second)
        throw agents::StageFailure(Stage::follow, "duplicate follow id");
      const bool known =
          std::any_of(stimulus.candidates.begin(), stimulus.candidates.end(),
                      [&](const PeerObservation& c) { return c.peer_id == id; });
      if (!known)
        throw agents::StageFailure(Stage::follow, "follow id not a candidate");
    }
    trace.follows = std::move(decision.follow_ids);
  } catch (const agents::StageFailure&) {
    trace.status = TraceStatus::failed_stage3;
    return trace;
  }

  trace.status = TraceStatus::complete;
  return trace;
}

Cohort run_cohort(agents::Agent& agent, const StimulusPlan& plan,
                  const RunOptions& options) {
  validate(plan);
  if (options.parallelism < 1)
    throw std::invalid_argument("run_cohort: parallelism must be >= 1");

  if (options.require_rounds) {
    std::string gaps;
    std::set<std::string> participants;
    for (const auto& [key, stim] : plan.stimuli) participants.insert(key.first);
    for (const auto& pid : participants) {
      for (int round = 1; round <= *options.require_rounds; ++round) {
        if (!plan.stimuli.contains({pid, round})) {
          if (!gaps.empty()) gaps += ", ";
          gaps += "(" + pid + ", " + std::to_string(round) + ")";
        }
      }
    }
    if (!gaps.empty())
      throw ValidationError("stimulus plan has gaps: " + gaps);
  }

  std::vector<const std::pair<const TraceKey, Stimulus>*> entries;
  entries.reserve(plan.stimuli.size());
  for (const auto& entry : plan.stimuli) entries.push_back(&entry);

  std::vector<RoundTrace> results(entries.size());
  const int threads = std::min<int>(options.parallelism,
                                    static_cast<int>(entries.size()));

  auto run_one = [&](std::size_t index) {
    const auto& [key, stim] = *entries[index];
    results[index] = run_round(agent, plan.personas.at(key.first), key, stim);
  };

  if (threads <= 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) run_one(i);
  } else {
    // static partition by key hash; disjoint result slots, no locking
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = 0; i < entries.size(); ++i) {
          const auto& key = entries[i]->first;
          const std::uint64_t h =
              mix64(fnv1a64(key.first) ^ static_cast<std::uint64_t>(key.second));
          if (h % static_cast<std::uint64_t>(threads) !=
              static_cast<std::uint64_t>(t))
            continue;
          if (failed.load(std::memory_order_relaxed)) return;
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed.store(true, std::memory_order_relaxed);
            return;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  Cohort cohort;
  cohort.label = options.label;
  for (auto& trace : results) cohort.insert(std::move(trace));
  return cohort;
}

// ---- agent factory -----------------------------------------------------------

std::unique_ptr<agents::Agent> make_agent(const AgentSpec& spec,
                                          std::uint64_t seed,
                                          std::shared_ptr<llm::AuditLog> audit) {
  if (spec.kind == "degroot")
    return std::make_unique<agents::DeGrootAgent>(spec.alpha, spec.initial, seed);
  if (spec.kind == "stubborn")
    return std::make_unique<agents::StubbornAgent>(spec.initial, seed);
  if (spec.kind == "homophily") {
    if (!spec.base) throw ConfigError("agent.base: required for homophily");
    return std::make_unique<agents::HomophilyAgent>(
        make_agent(*spec.base, seed, audit));
  }
  if (spec.kind == "random_follow") {
    if (!spec.base) throw ConfigError("agent.base: required for random_follow");
    return std::make_unique<agents::RandomFollowAgent>(
        make_agent(*spec.base, seed, audit), seed);
  }
  if (spec.kind == "replay") {
    if (spec.replay_source.empty())
      throw ConfigError("agent.source: required for replay");
    return std::make_unique<agents::ReplayAgent>(
        load_cohort(spec.replay_source, SchemaMode::lenient));
  }
  if (spec.kind == "llm")
    return std::make_unique<llm::LlmAgent>(
        spec.endpoint, llm::LlmAgentOptions{spec.lenient_parse}, std::move(audit));
  throw ConfigError("agent.kind: unknown kind '" + spec.kind + "'");
}

// ---- run config ----------------------------------------------------------------

namespace {

template <typename T>
T require_field(const json& j, const std::string& context, const std::string& name) {
  auto it = j.find(name);
  if (it == j.end())
    throw ConfigError("missing field '" + context + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for field '" + context + name + "'");
  }
}

template <typename T>
T optional_field(const json& j, const std::string& context,
                 const std::string& name, T fallback) {
  auto it = j.find(name);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for field '" + context + name + "'");
  }
}

agents::InitialPolicy parse_initial_policy(const json& j, const std::string& context) {
  agents::InitialPolicy policy;
  if (j.is_null()) return policy;
  const std::string kind = require_field<std::string>(j, context, "policy");
  if (kind == "fixed") {
    policy.kind = agents::InitialPolicy::Kind::fixed;
    policy.fixed_value = require_field<int>(j, context, "value");
  } else if (kind == "uniform") {
    policy.kind = agents::InitialPolicy::Kind::uniform;
    policy.support = optional_field<std::vector<int>>(j, context, "support",
                                                      {0, 1, 2, 3, 4});
  } else if (kind == "gaussian") {
    policy.kind = agents::InitialPolicy::Kind::gaussian;
    policy.mu = require_field<double>(j, context, "mu");
    policy.sigma = require_field<double>(j, context, "sigma");
  } else {
    throw ConfigError("bad value for field '" + context + "policy'");
  }
  return policy;
}

llm::ModelEndpoint parse_endpoint(const json& j, const std::string& context) {
  llm::ModelEndpoint ep;
  const std::string url_env =
      optional_field<std::string>(j, context, "base_url_env", "");
  if (!url_env.empty()) {
    const char* value = std::getenv(url_env.c_str());
    if (!value)
      throw ConfigError("environment variable '" + url_env + "' (from '" +
                        context + "base_url_env') is not set");
    ep.base_url = value;
  } else {
    ep.base_url = require_field<std::string>(j, context, "base_url");
  }
  ep.model_name = require_field<std::string>(j, context, "model_name");
  ep.temperature = optional_field<double>(j, context, "temperature", 1.2);
  ep.timeout = std::chrono::milliseconds(
      optional_field<long>(j, context, "timeout_ms", 30000));
  ep.max_retries = optional_field<int>(j, context, "max_retries", 2);
  ep.retry_backoff = std::chrono::milliseconds(
      optional_field<long>(j, context, "retry_backoff_ms", 200));
  ep.chat_path = optional_field<std::string>(j, context, "chat_path",
                                             "/v1/chat/completions");
  ep.response_field_path = optional_field<std::string>(
      j, context, "response_path", "choices.0.message.content");
  const std::string key_env =
      optional_field<std::string>(j, context, "api_key_env", "");
  if (!key_env.empty()) {
    if (const char* value = std::getenv(key_env.c_str())) ep.api_key = value;
  }
  return ep;
}

// `fallback_endpoint` supports the top-level "endpoint" config layout.
AgentSpec parse_agent_spec(const json& j, const std::string& context,
                           const json* fallback_endpoint = nullptr) {
  AgentSpec spec;
  spec.kind = require_field<std::string>(j, context, "kind");
  spec.alpha = optional_field<double>(j, context, "alpha", 0.5);
  if (auto it = j.find("initial"); it != j.end())
    spec.initial = parse_initial_policy(*it, context + "initial.");
  spec.replay_source = optional_field<std::string>(j, context, "source", "");
  if (auto it = j.find("base"); it != j.end() && !it->is_null())
    spec.base = std::make_unique<AgentSpec>(
        parse_agent_spec(*it, context + "base.", fallback_endpoint));
  if (spec.kind == "llm") {
    auto it = j.find("endpoint");
    if (it != j.end()) {
      spec.endpoint = parse_endpoint(*it, context + "endpoint.");
    } else if (fallback_endpoint) {
      spec.endpoint = parse_endpoint(*fallback_endpoint, "endpoint.");
    } else {
      throw ConfigError("missing field '" + context + "endpoint'");
    }
  }
  return spec;
}

SynthConfig parse_synth(const json& j, const std::string& context) {
  SynthConfig synth;
  synth.participants = optional_field<int>(j, context, "participants", 10);
  synth.rounds = optional_field<int>(j, context, "rounds", 3);
  synth.peers_per_round = optional_field<int>(j, context, "peers", 4);
  synth.pool_size = optional_field<int>(j, context, "pool", 6);
  synth.k = optional_field<int>(j, context, "k", 2);
  if (auto it = j.find("peer_pmf"); it != j.end()) {
    auto pmf = it->get<std::vector<double>>();
    if (pmf.size() != 5)
      throw ConfigError("bad value for field '" + context +
                        "peer_pmf' (need 5 entries)");
    std::copy(pmf.begin(), pmf.end(), synth.peer_rating_pmf.begin());
  }
  synth.pool_covers_all_ratings =
      optional_field<bool>(j, context, "cover_all_ratings", false);
  if (auto it = j.find("statements"); it != j.end()) {
    for (const auto& s : *it) {
      StatementSpec spec;
      spec.topic = require_field<std::string>(s, context + "statements.", "topic");
      spec.statement =
          require_field<std::string>(s, context + "statements.", "statement");
      if (auto t = s.find("is_true"); t != s.end() && !t->is_null())
        spec.is_true = t->get<bool>();
      synth.statements.push_back(std::move(spec));
    }
  }
  return synth;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }

  RunConfig config;
  config.label = optional_field<std::string>(j, "", "label", "cohort");
  {
    auto it = j.find("agent");
    if (it == j.end()) throw ConfigError("missing field 'agent'");
    auto top_endpoint = j.find("endpoint");
    config.agent = parse_agent_spec(
        *it, "agent.", top_endpoint != j.end() ? &*top_endpoint : nullptr);
  }
  {
    auto it = j.find("stimuli");
    if (it == j.end()) throw ConfigError("missing field 'stimuli'");
    config.stimuli.source =
        require_field<std::string>(*it, "stimuli.", "source");
    if (config.stimuli.source == "synth") {
      config.stimuli.synth = parse_synth(*it, "stimuli.");
    } else if (config.stimuli.source == "file") {
      config.stimuli.path = require_field<std::string>(*it, "stimuli.", "path");
    } else {
      throw ConfigError("bad value for field 'stimuli.source'");
    }
  }
  config.parallelism = optional_field<int>(j, "", "parallelism", 1);
  config.seed = optional_field<std::uint64_t>(j, "", "seed", 0);
  config.rounds = optional_field<int>(j, "", "rounds", 3);
  config.output_path = require_field<std::string>(j, "", "output_path");
  config.audit_path = optional_field<std::string>(j, "", "audit_path", "");
  config.completion_threshold =
      optional_field<double>(j, "", "completion_threshold", 0.95);
  config.lenient_parse = optional_field<bool>(j, "", "lenient_parse", false);
  if (config.lenient_parse) config.agent.lenient_parse = true;
  return config;
}

RunResult run_from_config(const RunConfig& config) {
  StimulusPlan plan;
  std::optional<int> require_rounds;
  if (config.stimuli.source == "synth") {
    SynthConfig synth = config.stimuli.synth;
    synth.rounds = config.rounds;
    plan = synthesize_stimuli(synth, config.seed);
    require_rounds = config.rounds;
  } else {
    plan = StimulusPlan::from_cohort(
        load_cohort(config.stimuli.path, SchemaMode::lenient));
  }

  RunResult result;
  if (config.agent.kind == "llm") {
    const std::string audit_path = config.audit_path.empty()
                                       ? config.output_path + ".audit.jsonl"
                                       : config.audit_path;
    result.audit = std::make_shared<llm::AuditLog>(audit_path);
  }

  auto agent = make_agent(config.agent, config.seed, result.audit);

  RunOptions options;
  options.label = config.label;
  options.parallelism = config.parallelism;
  options.require_rounds = require_rounds;
  result.cohort = run_cohort(*agent, plan, options);
  for (const auto& [key, trace] : result.cohort.traces)
    if (trace.status == TraceStatus::complete) ++result.completed;
  return result;
}

}  // namespace beliefsim::engine

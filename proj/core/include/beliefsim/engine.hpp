#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "beliefsim/agents.hpp"
#include "beliefsim/llm_agent.hpp"
#include "beliefsim/types.hpp"

namespace beliefsim::engine {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The experiment-side inputs for one participant-round.
struct Stimulus {
  std::string topic;
  std::string statement;
  std::optional<bool> statement_is_true;
  std::vector<PeerObservation> peers;       // stage-2 panel
  std::vector<PeerObservation> candidates;  // stage-3 pool
  int k = 1;
};

/// Everything the engine feeds the agents: per-key stimuli plus the persona
/// table. Built synthetically or lifted from a recorded cohort (replay).
struct StimulusPlan {
  std::map<TraceKey, Stimulus> stimuli;
  std::map<std::string, Persona> personas;

  static StimulusPlan from_cohort(const Cohort& cohort);
};

void validate(const StimulusPlan& plan);

struct StatementSpec {
  std::string topic;
  std::string statement;
  std::optional<bool> is_true;
};

struct SynthConfig {
  int participants = 10;
  int rounds = 3;
  int peers_per_round = 4;  // N_j; the panel is a prefix of the pool
  int pool_size = 6;
  int k = 2;
  std::array<double, 5> peer_rating_pmf = {0.2, 0.2, 0.2, 0.2, 0.2};
  // Force the first five pool entries to cover each rating 0..4 exactly
  // once (pool_size must be >= 5); guarantees an exact-match candidate.
  bool pool_covers_all_ratings = false;
  std::vector<StatementSpec> statements;  // built-in bank when empty
};

// Deterministic given (config, seed); every per-key draw is independent of
// iteration order.
StimulusPlan synthesize_stimuli(const SynthConfig& config, std::uint64_t seed);

/// Runs stages 1 -> 2 -> 3 for one participant-round. A StageFailure stops
/// the round at that stage: earlier stage data stays on the trace and the
/// status records the failing stage. Never throws for agent failures.
RoundTrace run_round(agents::Agent& agent, const Persona& persona,
                     const TraceKey& key, const Stimulus& stimulus);

struct RunOptions {
  std::string label = "cohort";
  int parallelism = 1;
  // When set, every participant must cover rounds 1..require_rounds exactly.
  std::optional<int> require_rounds;
};

/// One trace per plan entry. Work is statically partitioned across threads
/// by key hash and results are re-assembled in key order, so output is
/// bitwise independent of the parallelism setting for deterministic agents.
Cohort run_cohort(agents::Agent& agent, const StimulusPlan& plan,
                  const RunOptions& options = {});

// ---- config-driven construction (the CLI surface) ---------------------------

struct AgentSpec {
  std::string kind;  // degroot | stubborn | homophily | random_follow | replay | llm
  double alpha = 0.5;
  agents::InitialPolicy initial;
  std::string replay_source;             // replay: cohort file
  std::unique_ptr<AgentSpec> base;       // homophily / random_follow wrap a base
  llm::ModelEndpoint endpoint;           // llm
  bool lenient_parse = false;
};

std::unique_ptr<agents::Agent> make_agent(
    const AgentSpec& spec, std::uint64_t seed,
    std::shared_ptr<llm::AuditLog> audit = nullptr);

struct StimuliSpec {
  std::string source = "synth";  // synth | file
  SynthConfig synth;
  std::string path;  // file: a cohort file whose stimuli are replayed
};

struct RunConfig {
  std::string label = "cohort";
  AgentSpec agent;
  StimuliSpec stimuli;
  int parallelism = 1;
  std::uint64_t seed = 0;
  int rounds = 3;
  std::string output_path = "cohort.jsonl";
  std::string audit_path;  // defaults to "<output_path>.audit.jsonl" for llm
  double completion_threshold = 0.95;
  bool lenient_parse = false;
};

// Throws ConfigError naming the offending field.
RunConfig load_run_config(const std::filesystem::path& path);

struct RunResult {
  Cohort cohort;
  std::size_t completed = 0;
  std::shared_ptr<llm::AuditLog> audit;  // set when an llm agent ran
};

RunResult run_from_config(const RunConfig& config);

}  // namespace beliefsim::engine

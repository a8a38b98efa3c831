#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beliefsim/rng.hpp"
#include "beliefsim/types.hpp"

namespace beliefsim::agents {

// What an agent remembers about an earlier stage of the same round. The
// summary line is the exact text later injected into prompts.
struct StageRecord {
  Stage stage = Stage::rate;
  LikertRating rating;
  std::string reason;
  std::string summary;
};

// "Stage 1: rated 3 because <reason>" -- pinned by golden files.
std::string stage_summary_line(Stage stage, LikertRating rating,
                               const std::string& reason);

/// Everything an agent may look at when deciding. round_memory is empty at
/// stage 1 and accumulates stage summaries within the current round only;
/// rounds are independent samples and share nothing.
struct AgentContext {
  std::string participant_id;
  int round = 1;
  Persona persona;
  std::string statement;
  std::vector<StageRecord> round_memory;

  const StageRecord* record_for(Stage stage) const;
};

struct AgentDecision {
  std::optional<LikertRating> rating;                   // stages 1-2
  std::optional<std::vector<std::string>> follow_ids;   // stage 3
  std::string reason;

  static AgentDecision rate(LikertRating r, std::string reason) {
    return {r, std::nullopt, std::move(reason)};
  }
  static AgentDecision follow(std::vector<std::string> ids, std::string reason) {
    return {std::nullopt, std::move(ids), std::move(reason)};
  }
};

/// An agent could not produce a usable decision for one stage. The engine
/// records the failure on the trace and moves on; it never aborts the run.
class StageFailure : public std::runtime_error {
 public:
  StageFailure(Stage stage, const std::string& what)
      : std::runtime_error(what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

/// The three-stage behavioral contract. Stage order within a round is
/// 1 -> 2 -> 3; prior-stage records arrive through the context, so
/// implementations can stay stateless and safe to call concurrently for
/// distinct participant-rounds.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentDecision stage1(const AgentContext& ctx) = 0;
  virtual AgentDecision stage2(const AgentContext& ctx,
                               std::span<const PeerObservation> peers) = 0;
  virtual AgentDecision stage3(const AgentContext& ctx,
                               std::span<const PeerObservation> candidates,
                               int k) = 0;
};

/// Stage-1 rating policy for scripted agents. Draws are a pure function of
/// (agent seed, participant, round), independent of call order.
struct InitialPolicy {
  enum class Kind { fixed, uniform, gaussian };

  Kind kind = Kind::uniform;
  int fixed_value = 2;
  std::vector<int> support = {0, 1, 2, 3, 4};  // uniform: drawn from this set
  double mu = 2.0;                             // gaussian: discretized, clamped
  double sigma = 1.0;

  LikertRating draw(Rng& rng) const;
};

// Selection rules shared by scripted agents; both break ties by ascending id.
std::vector<std::string> pick_top_rated(std::span<const PeerObservation> candidates,
                                        int k);
std::vector<std::string> pick_closest(std::span<const PeerObservation> candidates,
                                      int own_rating, int k);

/// Averaging updater: stage 2 emits
/// clamp(round(r0 + alpha * (mean_peers - r0)), 0, 4) with half-away-from-zero
/// rounding; stage 3 follows the k highest-rated candidates.
class DeGrootAgent : public Agent {
 public:
  DeGrootAgent(double alpha, InitialPolicy initial, std::uint64_t seed);

  AgentDecision stage1(const AgentContext& ctx) override;
  AgentDecision stage2(const AgentContext& ctx,
                       std::span<const PeerObservation> peers) override;
  AgentDecision stage3(const AgentContext& ctx,
                       std::span<const PeerObservation> candidates, int k) override;

 private:
  double alpha_;
  InitialPolicy initial_;
  std::uint64_t seed_;
};

// Never changes its stage-2 rating; exercises the degenerate-series paths.
class StubbornAgent : public Agent {
 public:
  StubbornAgent(InitialPolicy initial, std::uint64_t seed);

  AgentDecision stage1(const AgentContext& ctx) override;
  AgentDecision stage2(const AgentContext& ctx,
                       std::span<const PeerObservation> peers) override;
  AgentDecision stage3(const AgentContext& ctx,
                       std::span<const PeerObservation> candidates, int k) override;

 private:
  InitialPolicy initial_;
  std::uint64_t seed_;
};

// Stage 3 picks the k candidates closest to its own initial rating; stages
// 1-2 delegate to a base agent.
class HomophilyAgent : public Agent {
 public:
  explicit HomophilyAgent(std::unique_ptr<Agent> base);

  AgentDecision stage1(const AgentContext& ctx) override;
  AgentDecision stage2(const AgentContext& ctx,
                       std::span<const PeerObservation> peers) override;
  AgentDecision stage3(const AgentContext& ctx,
                       std::span<const PeerObservation> candidates, int k) override;

 private:
  std::unique_ptr<Agent> base_;
};

// Stage 3 picks a uniformly random k-subset; the no-homophily reference.
class RandomFollowAgent : public Agent {
 public:
  RandomFollowAgent(std::unique_ptr<Agent> base, std::uint64_t seed);

  AgentDecision stage1(const AgentContext& ctx) override;
  AgentDecision stage2(const AgentContext& ctx,
                       std::span<const PeerObservation> peers) override;
  AgentDecision stage3(const AgentContext& ctx,
                       std::span<const PeerObservation> candidates, int k) override;

 private:
  std::unique_ptr<Agent> base_;
  std::uint64_t seed_;
};

/// Re-emits the decisions recorded in a source cohort, keyed by
/// (participant_id, round). Missing stages replay as stage failures, so a
/// replayed cohort reproduces the source statuses exactly.
class ReplayAgent : public Agent {
 public:
  explicit ReplayAgent(Cohort source);

  AgentDecision stage1(const AgentContext& ctx) override;
  AgentDecision stage2(const AgentContext& ctx,
                       std::span<const PeerObservation> peers) override;
  AgentDecision stage3(const AgentContext& ctx,
                       std::span<const PeerObservation> candidates, int k) override;

 private:
  const RoundTrace& source_trace(const AgentContext& ctx, Stage stage) const;
  Cohort source_;
};

}  // namespace beliefsim::agents

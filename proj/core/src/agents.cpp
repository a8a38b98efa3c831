#include "beliefsim/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace beliefsim::agents {

std::string stage_summary_line(Stage stage, LikertRating rating,
                               const std::string& reason) {
  return "Stage " + std::to_string(static_cast<int>(stage)) + ": rated " +
         std::to_string(rating.value()) + " because " + reason;
}

const StageRecord* AgentContext::record_for(Stage stage) const {
  for (const auto& rec : round_memory)
    if (rec.stage == stage) return &rec;
  return nullptr;
}

LikertRating InitialPolicy::draw(Rng& rng) const {
  switch (kind) {
    case Kind::fixed:
      return LikertRating(fixed_value);
    case Kind::uniform: {
      if (support.empty())
        throw std::invalid_argument("initial policy: empty uniform support");
      return LikertRating(support[rng.uniform_int(support.size())]);
    }
    case Kind::gaussian: {
      const double v = std::round(rng.gaussian(mu, sigma));
      return LikertRating(static_cast<int>(
          std::clamp(v, double(LikertRating::kMin), double(LikertRating::kMax))));
    }
  }
  throw std::logic_error("initial policy: unknown kind");
}

namespace {

std::uint64_t stage_seed(std::uint64_t base, const AgentContext& ctx, Stage stage) {
  return derive_seed(base, ctx.participant_id, ctx.round, static_cast<int>(stage));
}

LikertRating own_stage1_rating(const AgentContext& ctx) {
  const StageRecord* rec = ctx.record_for(Stage::rate);
  if (!rec)
    throw std::logic_error("stage order violated: no stage-1 record in memory");
  return rec->rating;
}

double mean_rating(std::span<const PeerObservation> peers) {
  if (peers.empty()) throw std::invalid_argument("empty peer panel");
  double sum = 0.0;
  for (const auto& p : peers) sum += p.rating.value();
  return sum / static_cast<double>(peers.size());
}

void check_k(std::span<const PeerObservation> candidates, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > candidates.size())
    throw std::invalid_argument("stage 3 requires 1 <= k <= |candidates|");
}

}  // namespace

std::vector<std::string> pick_top_rated(std::span<const PeerObservation> candidates,
                                        int k) {
  check_k(candidates, k);
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (candidates[a].rating != candidates[b].rating)
      return candidates[a].rating > candidates[b].rating;
    return candidates[a].peer_id < candidates[b].peer_id;
  });
  std::vector<std::string> ids;
  for (int i = 0; i < k; ++i) ids.push_back(candidates[idx[i]].peer_id);
  return ids;
}

std::vector<std::string> pick_closest(std::span<const PeerObservation> candidates,
                                      int own_rating, int k) {
  check_k(candidates, k);
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto delta = [&](std::size_t i) {
    return std::abs(candidates[i].rating.value() - own_rating);
  };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (delta(a) != delta(b)) return delta(a) < delta(b);
    return candidates[a].peer_id < candidates[b].peer_id;
  });
  std::vector<std::string> ids;
  for (int i = 0; i < k; ++i) ids.push_back(candidates[idx[i]].peer_id);
  return ids;
}

// ---- DeGrootAgent ----------------------------------------------------------

DeGrootAgent::DeGrootAgent(double alpha, InitialPolicy initial, std::uint64_t seed)
    : alpha_(alpha), initial_(std::move(initial)), seed_(seed) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("DeGrootAgent: alpha must be in [0,1]");
}

AgentDecision DeGrootAgent::stage1(const AgentContext& ctx) {
  Rng rng(stage_seed(seed_, ctx, Stage::rate));
  return AgentDecision::rate(initial_.draw(rng), "scripted initial rating");
}

AgentDecision DeGrootAgent::stage2(const AgentContext& ctx,
                                   std::span<const PeerObservation> peers) {
  const double r0 = own_stage1_rating(ctx).value();
  const double updated = r0 + alpha_ * (mean_rating(peers) - r0);
  const double rounded = std::round(updated);  // half away from zero
  const int rating = static_cast<int>(std::clamp(
      rounded, double(LikertRating::kMin), double(LikertRating::kMax)));
  return AgentDecision::rate(LikertRating(rating), "moved toward the peer average");
}

AgentDecision DeGrootAgent::stage3(const AgentContext& ctx,
                                   std::span<const PeerObservation> candidates,
                                   int k) {
  (void)ctx;
  return AgentDecision::follow(pick_top_rated(candidates, k),
                               "followed the highest-rated candidates");
}

// ---- StubbornAgent ---------------------------------------------------------

StubbornAgent::StubbornAgent(InitialPolicy initial, std::uint64_t seed)
    : initial_(std::move(initial)), seed_(seed) {}

AgentDecision StubbornAgent::stage1(const AgentContext& ctx) {
  Rng rng(stage_seed(seed_, ctx, Stage::rate));
  return AgentDecision::rate(initial_.draw(rng), "scripted initial rating");
}

AgentDecision StubbornAgent::stage2(const AgentContext& ctx,
                                    std::span<const PeerObservation> peers) {
  (void)peers;
  return AgentDecision::rate(own_stage1_rating(ctx), "kept the initial rating");
}

AgentDecision StubbornAgent::stage3(const AgentContext& ctx,
                                    std::span<const PeerObservation> candidates,
                                    int k) {
  (void)ctx;
  return AgentDecision::follow(pick_top_rated(candidates, k),
                               "followed the highest-rated candidates");
}

// ---- HomophilyAgent --------------------------------------------------------

HomophilyAgent::HomophilyAgent(std::unique_ptr<Agent> base)
    : base_(std::move(base)) {
  if (!base_) throw std::invalid_argument("HomophilyAgent: base agent required");
}

AgentDecision HomophilyAgent::stage1(const AgentContext& ctx) {
  return base_->stage1(ctx);
}

AgentDecision HomophilyAgent::stage2(const AgentContext& ctx,
                                     std::span<const PeerObservation> peers) {
  return base_->stage2(ctx, peers);
}

AgentDecision HomophilyAgent::stage3(const AgentContext& ctx,
                                     std::span<const PeerObservation> candidates,
                                     int k) {
  const int own = own_stage1_rating(ctx).value();
  return AgentDecision::follow(pick_closest(candidates, own, k),
                               "followed candidates with similar ratings");
}

// ---- RandomFollowAgent -----------------------------------------------------

RandomFollowAgent::RandomFollowAgent(std::unique_ptr<Agent> base, std::uint64_t seed)
    : base_(std::move(base)), seed_(seed) {
  if (!base_) throw std::invalid_argument("RandomFollowAgent: base agent required");
}

AgentDecision RandomFollowAgent::stage1(const AgentContext& ctx) {
  return base_->stage1(ctx);
}

AgentDecision RandomFollowAgent::stage2(const AgentContext& ctx,
                                        std::span<const PeerObservation> peers) {
  return base_->stage2(ctx, peers);
}

AgentDecision RandomFollowAgent::stage3(const AgentContext& ctx,
                                        std::span<const PeerObservation> candidates,
                                        int k) {
  check_k(candidates, k);
  Rng rng(stage_seed(seed_, ctx, Stage::follow));
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // partial Fisher-Yates: first k entries form the sample
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_int(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::string> ids;
  for (int i = 0; i < k; ++i) ids.push_back(candidates[idx[i]].peer_id);
  return AgentDecision::follow(std::move(ids), "followed a random selection");
}

// ---- ReplayAgent -----------------------------------------------------------

ReplayAgent::ReplayAgent(Cohort source) : source_(std::move(source)) {}

const RoundTrace& ReplayAgent::source_trace(const AgentContext& ctx,
                                            Stage stage) const {
  auto it = source_.traces.find({ctx.participant_id, ctx.round});
  if (it == source_.traces.end())
    throw StageFailure(stage, "replay: no recorded trace for (" +
                                  ctx.participant_id + ", " +
                                  std::to_string(ctx.round) + ")");
  return it->second;
}

AgentDecision ReplayAgent::stage1(const AgentContext& ctx) {
  const RoundTrace& t = source_trace(ctx, Stage::rate);
  if (!t.stage1) throw StageFailure(Stage::rate, "replay: recorded stage-1 failure");
  return AgentDecision::rate(t.stage1->rating, t.stage1->reason);
}

AgentDecision ReplayAgent::stage2(const AgentContext& ctx,
                                  std::span<const PeerObservation> peers) {
  (void)peers;
  const RoundTrace& t = source_trace(ctx, Stage::update);
  if (!t.stage2) throw StageFailure(Stage::update, "replay: recorded stage-2 failure");
  return AgentDecision::rate(t.stage2->rating, t.stage2->reason);
}

AgentDecision ReplayAgent::stage3(const AgentContext& ctx,
                                  std::span<const PeerObservation> candidates,
                                  int k) {
  (void)candidates;
  (void)k;
  const RoundTrace& t = source_trace(ctx, Stage::follow);
  if (!t.follows) throw StageFailure(Stage::follow, "replay: recorded stage-3 failure");
  return AgentDecision::follow(*t.follows, "replayed recorded selection");
}

}  // namespace beliefsim::agents

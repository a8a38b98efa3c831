#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace beliefsim {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordinal agreement score on the five-point scale used throughout:
/// 0 = strongly disagree .. 4 = strongly agree.
class LikertRating {
 public:
  static constexpr int kMin = 0;
  static constexpr int kMax = 4;

  LikertRating() = default;
  explicit LikertRating(int value) : value_(value) {
    if (value < kMin || value > kMax)
      throw ValidationError("rating out of range (" + std::to_string(value) + ")");
  }

  int value() const { return value_; }
  auto operator<=>(const LikertRating&) const = default;

 private:
  int value_ = 0;
};

// Canonical Big-5 trait keys, sorted.
inline constexpr std::array<std::string_view, 5> kBig5Traits = {
    "agreeableness", "conscientiousness", "extraversion", "neuroticism",
    "openness"};

struct Persona {
  std::string agent_id;
  std::string display_name;
  std::string demographics;  // free-text persona description
  std::optional<std::map<std::string, double>> big5;

  bool operator==(const Persona&) const = default;
};

// Throws ValidationError on empty agent_id or non-canonical big5 keys.
void validate(const Persona& persona);

struct PeerObservation {
  std::string peer_id;
  LikertRating rating;
  std::string reason;

  bool operator==(const PeerObservation&) const = default;
};

struct StageResponse {
  LikertRating rating;
  std::string reason;

  bool operator==(const StageResponse&) const = default;
};

// How far a participant-round got before something went wrong.
enum class TraceStatus { complete, failed_stage1, failed_stage2, failed_stage3 };

std::string_view to_string(TraceStatus status);
TraceStatus trace_status_from_string(std::string_view s);

// The three protocol stages: rate the statement, observe peers and update,
// choose whom to follow.
enum class Stage { rate = 1, update = 2, follow = 3 };

std::string_view to_string(Stage stage);

/// One participant-round of the three-stage protocol. Stimulus fields
/// (statement, peers, candidates, k) are always present; stage responses are
/// present up to the first failed stage.
struct RoundTrace {
  std::string participant_id;
  int round = 1;
  std::string topic;
  std::string statement;
  std::optional<bool> statement_is_true;
  Persona persona;
  std::optional<StageResponse> stage1;
  std::vector<PeerObservation> peers;
  std::optional<StageResponse> stage2;
  std::vector<PeerObservation> candidates;
  int k = 0;
  std::optional<std::vector<std::string>> follows;
  TraceStatus status = TraceStatus::complete;

  bool operator==(const RoundTrace&) const = default;

  // True when the trace carries usable data for the given stage.
  bool has_stage(Stage stage) const;
};

// Full invariant check; throws ValidationError with a specific message.
void validate(const RoundTrace& trace);

using TraceKey = std::pair<std::string, int>;

inline TraceKey key_of(const RoundTrace& t) { return {t.participant_id, t.round}; }

/// A labeled set of traces keyed by (participant_id, round); the unit of all
/// metric computation. std::map keeps iteration sorted by key, which is the
/// canonical order everywhere (file output, metric series, exports).
struct Cohort {
  std::string label;
  std::map<TraceKey, RoundTrace> traces;

  bool operator==(const Cohort&) const = default;

  std::size_t size() const { return traces.size(); }
  bool empty() const { return traces.empty(); }

  // Throws ValidationError on duplicate key.
  void insert(RoundTrace trace);
};

// Per-trace validation plus cohort-level checks: one agent_id per
// participant, no agent_id shared by two participants.
void validate(const Cohort& cohort);

}  // namespace beliefsim

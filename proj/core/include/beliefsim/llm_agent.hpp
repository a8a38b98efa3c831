#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "beliefsim/agents.hpp"
#include "beliefsim/types.hpp"

namespace beliefsim::llm {

/// A chat-completion endpoint (any server speaking the common
/// {model, messages, temperature} request shape, e.g. a local runtime).
struct ModelEndpoint {
  std::string base_url;  // "http://127.0.0.1:11434"
  std::string model_name;
  double temperature = 1.2;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::chrono::milliseconds retry_backoff{200};
  std::string chat_path = "/v1/chat/completions";
  // Dot-separated path to the assistant text in the response body.
  std::string response_field_path = "choices.0.message.content";
  std::string api_key;  // optional; sent as a bearer token when non-empty
};

void validate(const ModelEndpoint& endpoint);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct PromptFixture {
  Stage stage = Stage::rate;
  std::string filled_template;
};

// ---- prompt rendering (byte-exact template instantiation) ------------------

std::string render_stage1_prompt(const agents::AgentContext& ctx);
std::string render_stage2_prompt(const agents::AgentContext& ctx,
                                 std::span<const PeerObservation> peers);
std::string render_stage3_prompt(const agents::AgentContext& ctx,
                                 std::span<const PeerObservation> candidates,
                                 int k);

// One observation per line, input order preserved:
// "id: <id> | rating: <r> | reason: <text>". Used for both the stage-2
// neighbor list and the stage-3 candidate list.
std::string observation_block(std::span<const PeerObservation> observations);

// ---- response parsing -------------------------------------------------------

enum class ParseErrorCode {
  no_rating,
  rating_out_of_range,
  no_follow_object,
  wrong_follow_count,
  unknown_follow_id,
  duplicate_follow_id,
};

class ResponseParseError : public std::runtime_error {
 public:
  ResponseParseError(ParseErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ParseErrorCode code() const { return code_; }

 private:
  ParseErrorCode code_;
};

struct RatingReply {
  LikertRating rating;
  std::string reason;
};

/// Strict: the first line of the form "Rating: <integer>" plus a "Reason:"
/// capture to the end of the text. Lenient additionally accepts the first
/// in-range integer after the token "Rating" anywhere in the text.
/// Out-of-range integers always fail; ratings are never clamped.
RatingReply parse_rating_response(std::string_view text, bool lenient = false);

// The declared response format: "Rating: <r>\nReason: <reason>".
std::string format_rating_response(LikertRating rating, std::string_view reason);

struct FollowReply {
  std::vector<std::string> follow_ids;
  std::string reason;
};

/// Extracts the first well-formed JSON object carrying a "follow_ids" string
/// array, then validates: exactly k ids, all distinct, all candidate ids.
FollowReply parse_follow_response(std::string_view text,
                                  std::span<const PeerObservation> candidates,
                                  int k);

// ---- transport ---------------------------------------------------------------

class EndpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChatAttempt {
  int attempt = 1;  // 1-based, counts every HTTP request
  std::string request_body;
  int status = 0;  // 0 on transport failure
  std::string response_body;
  std::string assistant_text;
  bool ok = false;
  std::string error;
};

using AttemptSink = std::function<void(const ChatAttempt&)>;

/// POSTs {model, messages, temperature, stream:false}; retries transport and
/// non-2xx failures up to endpoint.max_retries with exponential backoff.
/// Returns the assistant text found at endpoint.response_field_path.
std::string chat_complete(const ModelEndpoint& endpoint,
                          std::span<const ChatMessage> messages,
                          const AttemptSink& sink = {});

// True when a server answers at base_url (any HTTP status counts).
bool endpoint_reachable(const ModelEndpoint& endpoint);

std::string sha256_hex(std::string_view bytes);

/// Thread-safe line-delimited audit log. One record per request attempt:
/// {timestamp, participant_id, round, stage, attempt, request_bytes_sha256,
/// response_text}. Response text is stored exactly as received.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path);
  ~AuditLog();

  AuditLog(const AuditLog&) = delete;
  AuditLog& operator=(const AuditLog&) = delete;

  void append(const std::string& participant_id, int round, Stage stage,
              int attempt, const std::string& request_sha256,
              const std::string& response_text);

  const std::filesystem::path& path() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct LlmAgentOptions {
  bool lenient_parse = false;
};

/// Agent backed by a chat endpoint: renders the stage prompt, asks, parses.
/// A malformed reply is re-asked with the identical prompt up to
/// endpoint.max_retries times, then the stage fails (recorded on the trace,
/// never fatal to the run). Safe for concurrent participant-rounds.
class LlmAgent : public agents::Agent {
 public:
  explicit LlmAgent(ModelEndpoint endpoint, LlmAgentOptions options = {},
                    std::shared_ptr<AuditLog> audit = nullptr);

  agents::AgentDecision stage1(const agents::AgentContext& ctx) override;
  agents::AgentDecision stage2(const agents::AgentContext& ctx,
                               std::span<const PeerObservation> peers) override;
  agents::AgentDecision stage3(const agents::AgentContext& ctx,
                               std::span<const PeerObservation> candidates,
                               int k) override;

 private:
  std::string ask(const agents::AgentContext& ctx, Stage stage,
                  const std::string& prompt, int& attempt_counter);

  ModelEndpoint endpoint_;
  LlmAgentOptions options_;
  std::shared_ptr<AuditLog> audit_;
};

}  // namespace beliefsim::llm

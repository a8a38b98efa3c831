#include "beliefsim/llm_agent.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

namespace beliefsim::llm {

using nlohmann::json;

namespace {

// The three stage templates, placeholders in braces. Rendering substitutes
// placeholder tokens in a single pass; substituted values are never
// re-scanned, so braces inside user text stay literal.

constexpr std::string_view kStage1Template =
    R"(You are the person agent_id={agent_id}. You have the following persona={persona}.
Rate the following statement on a Likert scale from 0 to 4 based on how much you believe the statement to be true,
where 0 = strongly disagree and 4 = strongly agree.

Statement: "{statement}"

Format your response EXACTLY as follows:
Rating: <number>
Reason: <a short paragraph>)";

constexpr std::string_view kStage2Template =
    R"(You are the person agent_id={agent_id}. You have the following persona: {persona}.
- Memory: {memory_summary}

The statement to evaluate:
"{statement}"

Your current belief about the statement is {prior} because: {initial_rationale}.
Now you observe the following neighbor ratings and rationales: {obs_str}

Task:
Considering your own persona and your observed neighbor opinions, rate how much you believe the given statement to be true on a Likert scale from 0 to 4, where:
0 = strongly disagree; 4 = strongly agree

Provide a short rationale (1--2 sentences) explaining your update.

Format your response EXACTLY as:
Rating: <number>
Reason: <a short paragraph>)";

constexpr std::string_view kStage3Template =
    R"(You are a person with the following profile.
- id: {agent_id}
- name: {name}
- persona: {persona}
- memory: {memory_summary}

The statement to evaluate: "{statement}"

Here is what you did in the previous stages:
{stage1_summary}
{stage2_summary}

You must choose exactly {k} candidates from the list below.
Candidates: {candidates_block}

Respond ONLY in strict JSON:
{
  "follow_ids": ["<id1>", "<id2>", ... exactly {k} ids ...],
  "reason": "<short explanation>"
})";

bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_';
}

std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string_view,
                                                        std::string_view>>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const char c = tmpl[i];
    if (c != '{') {
      out += c;
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tmpl.size() && is_token_char(tmpl[j])) ++j;
    if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
      const std::string_view token = tmpl.substr(i + 1, j - i - 1);
      auto it = std::find_if(values.begin(), values.end(),
                             [&](const auto& kv) { return kv.first == token; });
      if (it == values.end())
        throw std::logic_error("template placeholder without binding: {" +
                               std::string(token) + "}");
      out += it->second;
      i = j + 1;
      continue;
    }
    out += c;  // literal brace (the stage-3 JSON skeleton)
    ++i;
  }
  return out;
}

const agents::StageRecord& require_record(const agents::AgentContext& ctx,
                                          Stage stage, const char* where) {
  const agents::StageRecord* rec = ctx.record_for(stage);
  if (!rec)
    throw std::invalid_argument(std::string(where) + ": missing " +
                                std::string(to_string(stage)) +
                                " record in round memory");
  return *rec;
}

void require_fields(const agents::AgentContext& ctx, const char* where) {
  if (ctx.statement.empty())
    throw std::invalid_argument(std::string(where) + ": empty statement");
  if (ctx.persona.agent_id.empty())
    throw std::invalid_argument(std::string(where) + ": persona missing agent_id");
}

}  // namespace

std::string observation_block(std::span<const PeerObservation> observations) {
  std::string out;
  for (const auto& o : observations) {
    out += "\nid: ";
    out += o.peer_id;
    out += " | rating: ";
    out += std::to_string(o.rating.value());
    out += " | reason: ";
    out += o.reason;
  }
  return out;
}

std::string render_stage1_prompt(const agents::AgentContext& ctx) {
  require_fields(ctx, "render_stage1_prompt");
  return render_template(kStage1Template,
                         {{"agent_id", ctx.persona.agent_id},
                          {"persona", ctx.persona.demographics},
                          {"statement", ctx.statement}});
}

std::string render_stage2_prompt(const agents::AgentContext& ctx,
                                 std::span<const PeerObservation> peers) {
  require_fields(ctx, "render_stage2_prompt");
  if (peers.empty())
    throw std::invalid_argument("render_stage2_prompt: empty peer panel");
  const auto& first = require_record(ctx, Stage::rate, "render_stage2_prompt");
  const std::string prior = std::to_string(first.rating.value());
  const std::string obs = observation_block(peers);
  return render_template(kStage2Template,
                         {{"agent_id", ctx.persona.agent_id},
                          {"persona", ctx.persona.demographics},
                          {"memory_summary", ""},
                          {"statement", ctx.statement},
                          {"prior", prior},
                          {"initial_rationale", first.reason},
                          {"obs_str", obs}});
}

std::string render_stage3_prompt(const agents::AgentContext& ctx,
                                 std::span<const PeerObservation> candidates,
                                 int k) {
  require_fields(ctx, "render_stage3_prompt");
  if (candidates.empty())
    throw std::invalid_argument("render_stage3_prompt: empty candidate list");
  if (k < 1 || static_cast<std::size_t>(k) > candidates.size())
    throw std::invalid_argument("render_stage3_prompt: k out of range");
  const auto& s1 = require_record(ctx, Stage::rate, "render_stage3_prompt");
  const auto& s2 = require_record(ctx, Stage::update, "render_stage3_prompt");
  const std::string k_str = std::to_string(k);
  const std::string cand = observation_block(candidates);
  return render_template(kStage3Template,
                         {{"agent_id", ctx.persona.agent_id},
                          {"name", ctx.persona.display_name},
                          {"persona", ctx.persona.demographics},
                          {"memory_summary", ""},
                          {"statement", ctx.statement},
                          {"stage1_summary", s1.summary},
                          {"stage2_summary", s2.summary},
                          {"k", k_str},
                          {"candidates_block", cand}});
}

// ---- rating parsing ----------------------------------------------------------

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::string_view skip_ws(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

// Matches a whole line of the form "Rating: <integer>"; returns the integer.
std::optional<long> match_rating_line(std::string_view line) {
  line = skip_ws(strip_cr(line));
  constexpr std::string_view kTag = "Rating:";
  if (!line.starts_with(kTag)) return std::nullopt;
  line = skip_ws(line.substr(kTag.size()));
  std::size_t i = 0;
  if (i < line.size() && (line[i] == '-' || line[i] == '+')) ++i;
  std::size_t digits_begin = i;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == digits_begin) return std::nullopt;
  if (!skip_ws(line.substr(i)).empty()) return std::nullopt;
  return std::stol(std::string(line.substr(0, i)));
}

// Reason capture: everything after the first "Reason:" in `text`, leading
// whitespace skipped, otherwise verbatim to the end.
std::string capture_reason(std::string_view text) {
  const std::size_t pos = text.find("Reason:");
  if (pos == std::string_view::npos) return {};
  std::string_view rest = text.substr(pos + 7);
  std::size_t i = 0;
  while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t')) ++i;
  return std::string(rest.substr(i));
}

}  // namespace

std::string format_rating_response(LikertRating rating, std::string_view reason) {
  return "Rating: " + std::to_string(rating.value()) + "\nReason: " +
         std::string(reason);
}

RatingReply parse_rating_response(std::string_view text, bool lenient) {
  // strict pass: first whole line of the form "Rating: <int>"
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    const std::string_view line = text.substr(line_start, line_end - line_start);
    if (auto value = match_rating_line(line)) {
      if (*value < LikertRating::kMin || *value > LikertRating::kMax)
        throw ResponseParseError(ParseErrorCode::rating_out_of_range,
                                 "rating out of range (" + std::to_string(*value) +
                                     ")");
      const std::string_view rest = text.substr(std::min(line_end + 1, text.size()));
      return {LikertRating(static_cast<int>(*value)), capture_reason(rest)};
    }
    if (line_end == text.size()) break;
    line_start = line_end + 1;
  }

  if (lenient) {
    const std::size_t tag = text.find("Rating");
    if (tag != std::string_view::npos) {
      std::string_view rest = text.substr(tag + 6);
      std::size_t i = 0;
      while (i < rest.size()) {
        if (std::isdigit(static_cast<unsigned char>(rest[i]))) {
          std::size_t begin = i;
          while (i < rest.size() &&
                 std::isdigit(static_cast<unsigned char>(rest[i])))
            ++i;
          const bool negative = begin > 0 && rest[begin - 1] == '-';
          // part of a decimal number, not a bare integer
          const bool decimal =
              (begin > 1 && rest[begin - 1] == '.' &&
               std::isdigit(static_cast<unsigned char>(rest[begin - 2]))) ||
              (i + 1 < rest.size() && rest[i] == '.' &&
               std::isdigit(static_cast<unsigned char>(rest[i + 1])));
          if (!negative && !decimal && i - begin == 1) {
            const int value = rest[begin] - '0';
            if (value <= LikertRating::kMax)
              return {LikertRating(value), capture_reason(text)};
          }
        } else {
          ++i;
        }
      }
    }
  }

  throw ResponseParseError(ParseErrorCode::no_rating, "no parsable rating");
}

// ---- follow parsing ----------------------------------------------------------

namespace {

// Position one past the matching close brace, or npos. Tracks JSON strings
// so braces inside them do not count.
std::size_t match_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

}  // namespace

FollowReply parse_follow_response(std::string_view text,
                                  std::span<const PeerObservation> candidates,
                                  int k) {
  if (candidates.empty())
    throw std::invalid_argument("parse_follow_response: empty candidate list");

  for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
       pos = text.find('{', pos + 1)) {
    const std::size_t end = match_brace(text, pos);
    if (end == std::string_view::npos) continue;
    const json j = json::parse(text.substr(pos, end - pos), nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    auto ids_it = j.find("follow_ids");
    if (ids_it == j.end() || !ids_it->is_array()) continue;
    bool all_strings = std::all_of(ids_it->begin(), ids_it->end(),
                                   [](const json& e) { return e.is_string(); });
    if (!all_strings) continue;

    FollowReply reply;
    for (const auto& e : *ids_it) reply.follow_ids.push_back(e.get<std::string>());
    if (auto r = j.find("reason"); r != j.end() && r->is_string())
      reply.reason = r->get<std::string>();

    if (static_cast<int>(reply.follow_ids.size()) != k)
      throw ResponseParseError(
          ParseErrorCode::wrong_follow_count,
          "expected exactly " + std::to_string(k) + " follow ids, got " +
              std::to_string(reply.follow_ids.size()));
    std::set<std::string> seen;
    for (const auto& id : reply.follow_ids) {
      if (!seen.insert(id).second)
        throw ResponseParseError(ParseErrorCode::duplicate_follow_id,
                                 "duplicate follow id '" + id + "'");
      const bool known = std::any_of(
          candidates.begin(), candidates.end(),
          [&](const PeerObservation& c) { return c.peer_id == id; });
      if (!known)
        throw ResponseParseError(ParseErrorCode::unknown_follow_id,
                                 "unknown follow id '" + id + "'");
    }
    return reply;
  }
  throw ResponseParseError(ParseErrorCode::no_follow_object,
                           "no JSON object with follow_ids found");
}

// ---- transport ----------------------------------------------------------------

void validate(const ModelEndpoint& endpoint) {
  if (endpoint.base_url.empty())
    throw std::invalid_argument("endpoint: base_url must be set");
  if (endpoint.model_name.empty())
    throw std::invalid_argument("endpoint: model_name must be set");
  if (!(endpoint.temperature > 0.0))
    throw std::invalid_argument("endpoint: temperature must be > 0");
  if (endpoint.max_retries < 0)
    throw std::invalid_argument("endpoint: max_retries must be >= 0");
  if (endpoint.timeout.count() <= 0)
    throw std::invalid_argument("endpoint: timeout must be positive");
}

namespace {

std::string walk_field_path(const json& body, const std::string& path) {
  const json* node = &body;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t dot = path.find('.', start);
    if (dot == std::string::npos) dot = path.size();
    const std::string token = path.substr(start, dot - start);
    if (node->is_array()) {
      const std::size_t index = std::stoul(token);
      if (index >= node->size()) throw std::out_of_range("index " + token);
      node = &(*node)[index];
    } else if (node->is_object()) {
      auto it = node->find(token);
      if (it == node->end()) throw std::out_of_range("field '" + token + "'");
      node = &*it;
    } else {
      throw std::out_of_range("cannot descend into '" + token + "'");
    }
    if (dot == path.size()) break;
    start = dot + 1;
  }
  if (!node->is_string())
    throw std::out_of_range("response field is not a string");
  return node->get<std::string>();
}

httplib::Client make_client(const ModelEndpoint& endpoint) {
  httplib::Client client(endpoint.base_url);
  client.set_connection_timeout(endpoint.timeout);
  client.set_read_timeout(endpoint.timeout);
  client.set_write_timeout(endpoint.timeout);
  return client;
}

}  // namespace

std::string chat_complete(const ModelEndpoint& endpoint,
                          std::span<const ChatMessage> messages,
                          const AttemptSink& sink) {
  validate(endpoint);
  if (messages.empty())
    throw std::invalid_argument("chat_complete: no messages");

  json body{{"model", endpoint.model_name},
            {"temperature", endpoint.temperature},
            {"stream", false}};
  json msgs = json::array();
  for (const auto& m : messages)
    msgs.push_back(json{{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  const std::string request = body.dump();

  httplib::Headers headers;
  if (!endpoint.api_key.empty())
    headers.emplace("Authorization", "Bearer " + endpoint.api_key);

  std::string last_error;
  for (int attempt = 1; attempt <= endpoint.max_retries + 1; ++attempt) {
    if (attempt > 1) {
      const int exponent = std::min(attempt - 2, 6);
      std::this_thread::sleep_for(endpoint.retry_backoff * (1 << exponent));
    }
    ChatAttempt record;
    record.attempt = attempt;
    record.request_body = request;

    httplib::Client client = make_client(endpoint);
    auto res = client.Post(endpoint.chat_path, headers, request, "application/json");
    if (!res) {
      record.error = "transport: " + std::string(httplib::to_string(res.error()));
      last_error = record.error;
      if (sink) sink(record);
      continue;
    }
    record.status = res->status;
    record.response_body = res->body;
    if (res->status < 200 || res->status >= 300) {
      record.error = "status " + std::to_string(res->status);
      last_error = record.error;
      if (sink) sink(record);
      continue;
    }
    try {
      const json parsed = json::parse(res->body);
      record.assistant_text = walk_field_path(parsed, endpoint.response_field_path);
    } catch (const std::exception& e) {
      record.error = std::string("bad response body: ") + e.what();
      last_error = record.error;
      if (sink) sink(record);
      continue;
    }
    record.ok = true;
    if (sink) sink(record);
    return record.assistant_text;
  }
  throw EndpointError("retries exhausted (" +
                      std::to_string(endpoint.max_retries + 1) + " attempts): " +
                      last_error);
}

bool endpoint_reachable(const ModelEndpoint& endpoint) {
  httplib::Client client(endpoint.base_url);
  client.set_connection_timeout(endpoint.timeout);
  client.set_read_timeout(endpoint.timeout);
  auto res = client.Get("/");
  return static_cast<bool>(res);  // any HTTP status means somebody answered
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

// ---- audit log -----------------------------------------------------------------

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

struct AuditLog::Impl {
  std::filesystem::path path;
  std::ofstream out;
  std::mutex mutex;
};

AuditLog::AuditLog(std::filesystem::path path) : impl_(std::make_unique<Impl>()) {
  impl_->path = std::move(path);
  impl_->out.open(impl_->path, std::ios::app);
  if (!impl_->out)
    throw std::runtime_error("cannot open audit log '" + impl_->path.string() + "'");
}

AuditLog::~AuditLog() = default;

const std::filesystem::path& AuditLog::path() const { return impl_->path; }

void AuditLog::append(const std::string& participant_id, int round, Stage stage,
                      int attempt, const std::string& request_sha256,
                      const std::string& response_text) {
  json record{{"timestamp", utc_timestamp()},
              {"participant_id", participant_id},
              {"round", round},
              {"stage", static_cast<int>(stage)},
              {"attempt", attempt},
              {"request_bytes_sha256", request_sha256},
              {"response_text", response_text}};
  const std::string line = record.dump();
  std::lock_guard<std::mutex> lock(impl_->mutex);
  impl_->out << line << '\n';
  impl_->out.flush();
}

// ---- agent ---------------------------------------------------------------------

LlmAgent::LlmAgent(ModelEndpoint endpoint, LlmAgentOptions options,
                   std::shared_ptr<AuditLog> audit)
    : endpoint_(std::move(endpoint)), options_(options), audit_(std::move(audit)) {
  validate(endpoint_);
}

std::string LlmAgent::ask(const agents::AgentContext& ctx, Stage stage,
                          const std::string& prompt, int& attempt_counter) {
  const std::vector<ChatMessage> messages{{"user", prompt}};
  AttemptSink sink;
  if (audit_) {
    sink = [&](const ChatAttempt& a) {
      ++attempt_counter;
      const std::string& text =
          a.ok ? a.assistant_text
               : (a.response_body.empty() ? a.error : a.response_body);
      audit_->append(ctx.participant_id, ctx.round, stage, attempt_counter,
                     sha256_hex(a.request_body), text);
    };
  }
  return chat_complete(endpoint_, messages, sink);
}

agents::AgentDecision LlmAgent::stage1(const agents::AgentContext& ctx) {
  const std::string prompt = render_stage1_prompt(ctx);
  int attempts = 0;
  std::string last_error;
  for (int round = 0; round <= endpoint_.max_retries; ++round) {
    std::string text;
    try {
      text = ask(ctx, Stage::rate, prompt, attempts);
    } catch (const EndpointError& e) {
      throw agents::StageFailure(Stage::rate, e.what());
    }
    try {
      auto reply = parse_rating_response(text, options_.lenient_parse);
      return agents::AgentDecision::rate(reply.rating, reply.reason);
    } catch (const ResponseParseError& e) {
      last_error = e.what();
    }
  }
  throw agents::StageFailure(Stage::rate, "malformed replies: " + last_error);
}

agents::AgentDecision LlmAgent::stage2(const agents::AgentContext& ctx,
                                       std::span<const PeerObservation> peers) {
  const std::string prompt = render_stage2_prompt(ctx, peers);
  int attempts = 0;
  std::string last_error;
  for (int round = 0; round <= endpoint_.max_retries; ++round) {
    std::string text;
    try {
      text = ask(ctx, Stage::update, prompt, attempts);
    } catch (const EndpointError& e) {
      throw agents::StageFailure(Stage::update, e.what());
    }
    try {
      auto reply = parse_rating_response(text, options_.lenient_parse);
      return agents::AgentDecision::rate(reply.rating, reply.reason);
    } catch (const ResponseParseError& e) {
      last_error = e.what();
    }
  }
  throw agents::StageFailure(Stage::update, "malformed replies: " + last_error);
}

agents::AgentDecision LlmAgent::stage3(const agents::AgentContext& ctx,
                                       std::span<const PeerObservation> candidates,
                                       int k) {
  const std::string prompt = render_stage3_prompt(ctx, candidates, k);
  int attempts = 0;
  std::string last_error;
  for (int round = 0; round <= endpoint_.max_retries; ++round) {
    std::string text;
    try {
      text = ask(ctx, Stage::follow, prompt, attempts);
    } catch (const EndpointError& e) {
      throw agents::StageFailure(Stage::follow, e.what());
    }
    try {
      auto reply = parse_follow_response(text, candidates, k);
      return agents::AgentDecision::follow(std::move(reply.follow_ids),
                                           std::move(reply.reason));
    } catch (const ResponseParseError& e) {
      last_error = e.what();
    }
  }
  throw agents::StageFailure(Stage::follow, "malformed replies: " + last_error);
}

}  // namespace beliefsim::llm

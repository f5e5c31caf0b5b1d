#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "dip/digest.hpp"
#include "dip/result.hpp"

namespace dip {

enum class Role { system, user, assistant };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

inline Result<Role> role_from_name(const std::string& s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  return make_error(Errc::schema_error, "unknown role: " + s);
}

struct Message {
  Role role = Role::user;
  std::string text;

  friend bool operator==(const Message&, const Message&) = default;
};

/// One chat-completion request. `sample_index` distinguishes self-consistency
/// samples that share an identical prompt; it participates in the cache key.
struct ChatRequest {
  std::string model_id;
  std::vector<Message> messages;
  double temperature = 0.0;
  double top_p = 1.0;
  std::optional<int> max_tokens;
  int sample_index = 0;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;

  Result<void> validate() const {
    if (model_id.empty()) return make_error(Errc::precondition, "model_id empty");
    if (messages.empty()) return make_error(Errc::precondition, "messages empty");
    if (temperature < 0.0) return make_error(Errc::precondition, "temperature < 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) return make_error(Errc::precondition, "top_p outside (0,1]");
    if (max_tokens && *max_tokens <= 0) return make_error(Errc::precondition, "max_tokens <= 0");
    if (sample_index < 0) return make_error(Errc::precondition, "sample_index < 0");
    return {};
  }

  /// Total characters across message texts; input side of the /4 usage estimator.
  size_t prompt_chars() const {
    size_t n = 0;
    for (const auto& m : messages) n += m.text.size();
    return n;
  }
};

/// Where a served record came from.
enum class RecordSource { live, cache, mock };

inline const char* record_source_name(RecordSource s) {
  switch (s) {
    case RecordSource::live: return "live";
    case RecordSource::cache: return "cache";
    case RecordSource::mock: return "mock";
  }
  return "live";
}

inline Result<RecordSource> record_source_from_name(const std::string& s) {
  if (s == "live") return RecordSource::live;
  if (s == "cache") return RecordSource::cache;
  if (s == "mock") return RecordSource::mock;
  return make_error(Errc::schema_error, "unknown record source: " + s);
}

/// One completed LLM call. Total tokens are derived, never stored.
struct CompletionRecord {
  std::string request_digest;
  std::string response_text;
  long input_tokens = 0;
  long output_tokens = 0;
  RecordSource backend = RecordSource::live;
  long latency_ms = 0;
  /// Token counts came from the character-length heuristic, not the provider.
  bool estimated = false;
  /// The backend rejected temperature/top_p and the call was retried without it.
  bool nondeterministic = false;

  long total_tokens() const { return input_tokens + output_tokens; }

  friend bool operator==(const CompletionRecord&, const CompletionRecord&) = default;
};

inline void to_json(nlohmann::json& j, const Message& m) {
  j = nlohmann::json{{"role", role_name(m.role)}, {"content", m.text}};
}

inline void from_json(const nlohmann::json& j, Message& m) {
  auto role = role_from_name(j.at("role").get<std::string>());
  if (!role.ok()) throw nlohmann::json::other_error::create(501, role.error().message, &j);
  m.role = role.value();
  m.text = j.at("content").get<std::string>();
}

inline void to_json(nlohmann::json& j, const ChatRequest& r) {
  j = nlohmann::json{{"model_id", r.model_id},
                     {"messages", r.messages},
                     {"temperature", r.temperature},
                     {"top_p", r.top_p},
                     {"sample_index", r.sample_index}};
  j["max_tokens"] = r.max_tokens ? nlohmann::json(*r.max_tokens) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, ChatRequest& r) {
  r.model_id = j.at("model_id").get<std::string>();
  r.messages = j.at("messages").get<std::vector<Message>>();
  r.temperature = j.at("temperature").get<double>();
  r.top_p = j.at("top_p").get<double>();
  r.sample_index = j.at("sample_index").get<int>();
  if (j.contains("max_tokens") && !j.at("max_tokens").is_null())
    r.max_tokens = j.at("max_tokens").get<int>();
  else
    r.max_tokens = std::nullopt;
}

inline void to_json(nlohmann::json& j, const CompletionRecord& r) {
  j = nlohmann::json{{"request_digest", r.request_digest},
                     {"response_text", r.response_text},
                     {"input_tokens", r.input_tokens},
                     {"output_tokens", r.output_tokens},
                     {"backend", record_source_name(r.backend)},
                     {"latency_ms", r.latency_ms},
                     {"estimated", r.estimated},
                     {"nondeterministic", r.nondeterministic}};
}

inline void from_json(const nlohmann::json& j, CompletionRecord& r) {
  r.request_digest = j.at("request_digest").get<std::string>();
  r.response_text = j.at("response_text").get<std::string>();
  r.input_tokens = j.at("input_tokens").get<long>();
  r.output_tokens = j.at("output_tokens").get<long>();
  auto src = record_source_from_name(j.at("backend").get<std::string>());
  if (!src.ok()) throw nlohmann::json::other_error::create(501, src.error().message, &j);
  r.backend = src.value();
  r.latency_ms = j.at("latency_ms").get<long>();
  r.estimated = j.value("estimated", false);
  r.nondeterministic = j.value("nondeterministic", false);
}

/// Stable digest of the request's key fields. The canonical form is a compact
/// JSON dump with sorted keys, so serialization field order and whitespace
/// cannot influence the key; message content is hashed byte-for-byte.
inline std::string cache_key(const ChatRequest& request) {
  nlohmann::json j = request;
  return sha256_hex(j.dump());
}

}  // namespace dip

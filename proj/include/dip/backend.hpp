#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dip/chat.hpp"
#include "dip/result.hpp"

namespace dip {

/// What the transport actually sends. The logical request is untouched (it
/// still defines the cache key); the include_* flags drop decoding parameters
/// the provider refused.
struct BackendCall {
  ChatRequest request;
  bool include_temperature = true;
  bool include_top_p = true;
};

struct BackendReply {
  std::string text;
  std::optional<long> input_tokens;
  std::optional<long> output_tokens;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Result<BackendReply> send(const BackendCall& call) = 0;
  virtual RecordSource source() const = 0;
};

/// In-memory backend driven by match rules, for tests and offline fixtures.
/// Rules are tried in registration order; the first match answers. Keeps a call
/// log and an in-flight high-water mark so tests can assert issue order and
/// concurrency bounds. Safe for concurrent send().
class ScriptedBackend : public Backend {
 public:
  using Matcher = std::function<bool(const ChatRequest&)>;
  using Responder = std::function<Result<BackendReply>(const ChatRequest&)>;

  void add_rule(Matcher match, Responder respond) {
    std::lock_guard lock(mu_);
    rules_.push_back({std::move(match), std::move(respond)});
  }

  void set_default(Responder respond) {
    std::lock_guard lock(mu_);
    default_ = std::move(respond);
  }

  void clear_rules() {
    std::lock_guard lock(mu_);
    rules_.clear();
  }

  /// Simulated per-call latency; useful when probing the concurrency bound.
  void set_delay(std::chrono::milliseconds d) { delay_ = d; }

  static Responder reply_text(std::string text) {
    return [text = std::move(text)](const ChatRequest& req) -> Result<BackendReply> {
      BackendReply r;
      r.text = text;
      r.input_tokens = static_cast<long>(req.prompt_chars());
      r.output_tokens = static_cast<long>(text.size());
      return r;
    };
  }

  static Responder reply_with_usage(std::string text, long input_tokens, long output_tokens) {
    return [=](const ChatRequest&) -> Result<BackendReply> {
      return BackendReply{text, input_tokens, output_tokens};
    };
  }

  static Responder reply_without_usage(std::string text) {
    return [text = std::move(text)](const ChatRequest&) -> Result<BackendReply> {
      return BackendReply{text, std::nullopt, std::nullopt};
    };
  }

  static Responder reply_error(Errc code, std::string message) {
    return [=](const ChatRequest&) -> Result<BackendReply> {
      return make_error(code, message);
    };
  }

  Result<BackendReply> send(const BackendCall& call) override {
    int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

    Responder respond;
    {
      std::lock_guard lock(mu_);
      log_.push_back(call);
      for (const auto& rule : rules_) {
        if (rule.match(call.request)) {
          respond = rule.respond;
          break;
        }
      }
      if (!respond) respond = default_;
    }
    --in_flight_;
    if (!respond)
      return make_error(Errc::backend_error, "scripted backend: no rule matches request");
    return respond(call.request);
  }

  RecordSource source() const override { return RecordSource::mock; }

  std::vector<BackendCall> call_log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  size_t call_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
  }

  int max_in_flight() const { return max_in_flight_.load(); }

  void clear_log() {
    std::lock_guard lock(mu_);
    log_.clear();
    max_in_flight_ = 0;
  }

 private:
  struct Rule {
    Matcher match;
    Responder respond;
  };

  mutable std::mutex mu_;
  std::vector<Rule> rules_;
  Responder default_;
  std::vector<BackendCall> log_;
  std::chrono::milliseconds delay_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

}  // namespace dip

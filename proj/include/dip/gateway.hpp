#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <memory>
#include <thread>
#include <utility>
#include <vector>

#include "dip/backend.hpp"
#include "dip/cache.hpp"
#include "dip/chat.hpp"
#include "dip/result.hpp"

namespace dip {

/// How a completion may be satisfied.
///  - replay: cache only; a miss is an error and no backend call is made.
///  - record: serve from cache when present, otherwise call the backend and
///    persist the response before returning.
///  - live:   always call the backend; persist the response before returning.
enum class BackendMode { replay, record, live };

inline const char* backend_mode_name(BackendMode m) {
  switch (m) {
    case BackendMode::replay: return "replay";
    case BackendMode::record: return "record";
    case BackendMode::live: return "live";
  }
  return "replay";
}

inline Result<BackendMode> backend_mode_from_name(const std::string& s) {
  if (s == "replay") return BackendMode::replay;
  if (s == "record") return BackendMode::record;
  if (s == "live") return BackendMode::live;
  return make_error(Errc::config_error, "unknown backend mode: " + s);
}

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double backoff_factor = 2.0;
};

struct GatewayOptions {
  RetryPolicy retry;
  /// When the provider omits usage fields, estimate tokens as ceil(chars/4)
  /// and flag the record instead of failing.
  bool allow_estimated_usage = false;
};

/// Provider-agnostic completion client: deterministic decoding defaults live in
/// ChatRequest, responses are content-addressed in ResponseCache, and batches
/// run under a bounded worker pool. Safe for concurrent use; the cache is the
/// only shared state and its writes are idempotent.
class Gateway {
 public:
  Gateway(std::filesystem::path cache_dir, std::shared_ptr<Backend> backend,
          GatewayOptions options = {})
      : cache_(std::move(cache_dir)), backend_(std::move(backend)), options_(options) {}

  ResponseCache& cache() { return cache_; }
  const ResponseCache& cache() const { return cache_; }

  Result<CompletionRecord> complete(const ChatRequest& request, BackendMode mode) {
    if (auto v = request.validate(); !v.ok()) return v.error();
    const std::string digest = cache_key(request);

    if (mode != BackendMode::live) {
      auto cached = cache_.load(digest);
      if (!cached.ok()) return cached.error();
      if (cached.value().has_value()) {
        CompletionRecord rec = cached.value()->record;
        rec.backend = RecordSource::cache;
        return rec;
      }
      if (mode == BackendMode::replay)
        return make_error(Errc::cache_miss, "replay mode, no cache entry for " + digest);
    }

    if (!backend_)
      return make_error(Errc::network, "no backend configured; only replay hits can be served");
    auto rec = call_with_retry(request, digest);
    if (!rec.ok()) return rec;
    if (auto st = cache_.store(digest, CacheEntry{request, rec.value()}); !st.ok())
      return st.error();
    return rec;
  }

  /// Issues `requests` through at most `parallelism` concurrent workers and
  /// returns one slot per request, in request order. A failing slot never
  /// aborts its neighbours.
  std::vector<Result<CompletionRecord>> dispatch_batch(const std::vector<ChatRequest>& requests,
                                                       int parallelism, BackendMode mode) {
    std::vector<Result<CompletionRecord>> results(
        requests.size(), Result<CompletionRecord>(make_error(Errc::network, "not dispatched")));
    if (requests.empty()) return results;
    if (parallelism < 1) parallelism = 1;

    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1))
        results[i] = complete(requests[i], mode);
    };

    const int workers = static_cast<int>(
        std::min<size_t>(static_cast<size_t>(parallelism), requests.size()));
    if (workers == 1) {
      worker();
      return results;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return results;
  }

 private:
  Result<CompletionRecord> call_with_retry(const ChatRequest& request, const std::string& digest) {
    BackendCall call{request, true, true};
    bool stripped = false;
    auto backoff = options_.retry.initial_backoff;
    int transport_attempts = 0;

    while (true) {
      const auto start = std::chrono::steady_clock::now();
      auto reply = backend_->send(call);
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);

      if (reply.ok()) return finalize(request, digest, reply.value(), elapsed, stripped);

      const Error& err = reply.error();
      if (err.code == Errc::backend_rejected_params && !stripped) {
        // One retry without the offending parameter; the record is flagged.
        const std::string param = err.param.value_or("");
        if (param == "temperature")
          call.include_temperature = false;
        else if (param == "top_p")
          call.include_top_p = false;
        else {
          call.include_temperature = false;
          call.include_top_p = false;
        }
        stripped = true;
        continue;
      }
      if (err.code == Errc::network && ++transport_attempts < options_.retry.attempts) {
        std::this_thread::sleep_for(backoff);
        backoff = std::chrono::milliseconds(static_cast<long>(
            static_cast<double>(backoff.count()) * options_.retry.backoff_factor));
        continue;
      }
      return err;
    }
  }

  Result<CompletionRecord> finalize(const ChatRequest& request, const std::string& digest,
                                    const BackendReply& reply, std::chrono::milliseconds latency,
                                    bool stripped) {
    CompletionRecord rec;
    rec.request_digest = digest;
    rec.response_text = reply.text;
    rec.backend = backend_->source();
    rec.latency_ms = latency.count();
    rec.nondeterministic = stripped;
    if (reply.input_tokens && reply.output_tokens) {
      rec.input_tokens = *reply.input_tokens;
      rec.output_tokens = *reply.output_tokens;
    } else {
      if (!options_.allow_estimated_usage)
        return make_error(Errc::usage_missing,
                          "backend returned no token usage for " + digest);
      rec.input_tokens = estimate_tokens(request.prompt_chars());
      rec.output_tokens = estimate_tokens(reply.text.size());
      rec.estimated = true;
    }
    return rec;
  }

  static long estimate_tokens(size_t chars) {
    return static_cast<long>((chars + 3) / 4);
  }

  ResponseCache cache_;
  std::shared_ptr<Backend> backend_;
  GatewayOptions options_;
};

}  // namespace dip

#pragma once

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <memory>
#include <string>

#include "dip/backend.hpp"
#include "dip/chat.hpp"
#include "dip/result.hpp"

namespace dip {

struct HttpBackendConfig {
  /// Full URL of the chat-completions endpoint,
  /// e.g. "https://api.example.com/v1/chat/completions".
  std::string endpoint;
  std::string api_key;
  std::chrono::milliseconds timeout{120000};
};

/// JSON-over-HTTP chat-completions transport. Retry and parameter-stripping
/// policy live in the Gateway; this class classifies failures:
/// transport/5xx/429 -> network (retryable), a 4xx naming temperature or top_p
/// -> backend_rejected_params, anything else -> backend_error.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    split_endpoint(config_.endpoint, base_, path_);
  }

  Result<BackendReply> send(const BackendCall& call) override {
    if (base_.empty() || path_.empty())
      return make_error(Errc::config_error, "invalid endpoint URL: " + config_.endpoint);

    httplib::Client client(base_);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout));
    httplib::Headers headers;
    if (!config_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + config_.api_key);

    const std::string body = build_body(call);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res)
      return make_error(Errc::network, "transport failure: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
      return make_error(Errc::network, "HTTP " + std::to_string(res->status));
    if (res->status < 200 || res->status >= 300) return classify_client_error(*res);
    return parse_body(res->body);
  }

  RecordSource source() const override { return RecordSource::live; }

  /// Exposed for tests: the exact JSON body sent for a call.
  static std::string build_body(const BackendCall& call) {
    nlohmann::json j;
    j["model"] = call.request.model_id;
    auto& msgs = j["messages"] = nlohmann::json::array();
    for (const auto& m : call.request.messages)
      msgs.push_back({{"role", role_name(m.role)}, {"content", m.text}});
    if (call.include_temperature) j["temperature"] = call.request.temperature;
    if (call.include_top_p) j["top_p"] = call.request.top_p;
    if (call.request.max_tokens) j["max_tokens"] = *call.request.max_tokens;
    return j.dump();
  }

  static Result<BackendReply> parse_body(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      BackendReply reply;
      reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (j.contains("usage")) {
        const auto& u = j.at("usage");
        if (u.contains("prompt_tokens")) reply.input_tokens = u.at("prompt_tokens").get<long>();
        if (u.contains("completion_tokens"))
          reply.output_tokens = u.at("completion_tokens").get<long>();
      }
      return reply;
    } catch (const std::exception& e) {
      return make_error(Errc::backend_error, std::string("malformed completion response: ") + e.what());
    }
  }

 private:
  static Error classify_client_error(const httplib::Response& res) {
    // Providers report unsupported sampler knobs as 4xx with the parameter
    // named in the error body.
    for (const char* param : {"temperature", "top_p"}) {
      if (res.body.find(param) != std::string::npos) {
        Error e = make_error(Errc::backend_rejected_params,
                             "HTTP " + std::to_string(res.status) + ": " + res.body);
        e.param = param;
        return e;
      }
    }
    return make_error(Errc::backend_error,
                      "HTTP " + std::to_string(res.status) + ": " + res.body);
  }

  static void split_endpoint(const std::string& url, std::string& base, std::string& path) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return;
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      base = url;
      path = "/";
    } else {
      base = url.substr(0, path_start);
      path = url.substr(path_start);
    }
  }

  HttpBackendConfig config_;
  std::string base_;
  std::string path_;
};

}  // namespace dip

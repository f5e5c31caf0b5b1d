#pragma once

#include <cstdlib>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dip/bench.hpp"
#include "dip/fsutil.hpp"
#include "dip/gateway.hpp"
#include "dip/pipeline.hpp"
#include "dip/result.hpp"

namespace dip {

/// Everything the CLI needs to set up a run. Sources, in precedence order:
/// built-in defaults, then the config file, then command-line flags. Secrets
/// (API key, endpoint URL) come only from the environment.
struct AppConfig {
  RunConfig run;
  std::string dataset;
  std::string cache_dir = ".dip-cache";
  std::string runs_root = "runs";
  std::optional<std::string> run_dir;  // explicit run directory wins over auto-naming
  BackendMode mode = BackendMode::replay;
  ReportFormat report_format = ReportFormat::markdown;
  bool allow_estimated_usage = false;
  bool retry_errors = false;
  std::optional<std::string> template_dir;
};

inline constexpr const char* kApiKeyEnvVar = "DIP_API_KEY";
inline constexpr const char* kEndpointEnvVar = "DIP_ENDPOINT";

inline std::optional<std::string> env_value(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

namespace detail {

/// Applies only the keys present in the section, leaving the rest untouched.
inline Result<void> apply_run_section(RunConfig& cfg, const nlohmann::json& j) {
  try {
    if (j.contains("method")) {
      auto m = method_from_name(j.at("method").get<std::string>());
      if (!m.ok()) return m.error();
      cfg.method = m.value();
    }
    if (j.contains("n_rationales")) cfg.n_rationales = j.at("n_rationales").get<int>();
    if (j.contains("batch_n")) cfg.batch_n = j.at("batch_n").get<int>();
    if (j.contains("use_batch_protocol"))
      cfg.use_batch_protocol = j.at("use_batch_protocol").get<bool>();
    if (j.contains("sc_samples")) cfg.sc_samples = j.at("sc_samples").get<int>();
    if (j.contains("sc_temperature")) cfg.sc_temperature = j.at("sc_temperature").get<double>();
    if (j.contains("temperature")) cfg.temperature = j.at("temperature").get<double>();
    if (j.contains("top_p")) cfg.top_p = j.at("top_p").get<double>();
    if (j.contains("max_tokens")) {
      if (j.at("max_tokens").is_null())
        cfg.max_tokens = std::nullopt;
      else
        cfg.max_tokens = j.at("max_tokens").get<int>();
    }
    if (j.contains("model_id")) cfg.model_id = j.at("model_id").get<std::string>();
    if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<int>();
    if (j.contains("deterministic")) cfg.deterministic = j.at("deterministic").get<bool>();
    return Result<void>{};
  } catch (const nlohmann::json::exception& e) {
    return make_error(Errc::config_error, std::string("bad run section: ") + e.what());
  }
}

}  // namespace detail

/// Parses the declarative config document: JSON with "run", "io", "backend",
/// and "report" sections, all optional.
inline Result<AppConfig> parse_app_config(const nlohmann::json& j) {
  AppConfig cfg;
  try {
    if (j.contains("run")) {
      if (auto r = detail::apply_run_section(cfg.run, j.at("run")); !r.ok()) return r.error();
    }
    if (j.contains("io")) {
      const auto& io = j.at("io");
      if (io.contains("dataset")) cfg.dataset = io.at("dataset").get<std::string>();
      if (io.contains("cache_dir")) cfg.cache_dir = io.at("cache_dir").get<std::string>();
      if (io.contains("runs_root")) cfg.runs_root = io.at("runs_root").get<std::string>();
      if (io.contains("run_dir")) cfg.run_dir = io.at("run_dir").get<std::string>();
      if (io.contains("template_dir")) cfg.template_dir = io.at("template_dir").get<std::string>();
    }
    if (j.contains("backend")) {
      const auto& be = j.at("backend");
      if (be.contains("mode")) {
        auto m = backend_mode_from_name(be.at("mode").get<std::string>());
        if (!m.ok()) return m.error();
        cfg.mode = m.value();
      }
      if (be.contains("allow_estimated_usage"))
        cfg.allow_estimated_usage = be.at("allow_estimated_usage").get<bool>();
      if (be.contains("retry_errors")) cfg.retry_errors = be.at("retry_errors").get<bool>();
    }
    if (j.contains("report")) {
      const auto& rp = j.at("report");
      if (rp.contains("format")) {
        auto f = report_format_from_name(rp.at("format").get<std::string>());
        if (!f.ok()) return f.error();
        cfg.report_format = f.value();
      }
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    return make_error(Errc::config_error, std::string("bad config document: ") + e.what());
  }
}

inline Result<AppConfig> load_app_config(const std::filesystem::path& path) {
  auto text = read_file(path);
  if (!text.ok()) return text.error();
  nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
  if (j.is_discarded())
    return make_error(Errc::config_error, "config is not valid JSON: " + path.string());
  return parse_app_config(j);
}

}  // namespace dip

#pragma once

#include <ctime>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "dip/fsutil.hpp"
#include "dip/pipeline.hpp"
#include "dip/result.hpp"

namespace dip {

inline constexpr int kManifestSchemaVersion = 1;

enum class TaskStatus { pending, ok, parse_fail, error };

inline const char* task_status_name(TaskStatus s) {
  switch (s) {
    case TaskStatus::pending: return "pending";
    case TaskStatus::ok: return "ok";
    case TaskStatus::parse_fail: return "parse_fail";
    case TaskStatus::error: return "error";
  }
  return "pending";
}

inline Result<TaskStatus> task_status_from_name(const std::string& s) {
  if (s == "pending") return TaskStatus::pending;
  if (s == "ok") return TaskStatus::ok;
  if (s == "parse_fail") return TaskStatus::parse_fail;
  if (s == "error") return TaskStatus::error;
  return make_error(Errc::schema_error, "unknown task status: " + s);
}

inline bool is_terminal(TaskStatus s) { return s != TaskStatus::pending; }

inline std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Everything needed to resume or replay a run. Timestamps live only here, so
/// trace files and reports stay byte-reproducible.
struct RunManifest {
  RunConfig config;
  std::string dataset_path;
  std::string dataset_digest;
  std::string cache_dir;
  std::string run_dir;
  std::string template_version;
  std::string backend_mode;  // mode of the most recent invocation
  std::string started_at;
  std::string finished_at;  // empty while unfinished
  std::map<std::string, TaskStatus> tasks;
  std::map<std::string, std::string> task_errors;  // message per errored task

  bool finished() const {
    if (tasks.empty()) return false;
    for (const auto& [id, status] : tasks)
      if (!is_terminal(status)) return false;
    return true;
  }

  int count(TaskStatus s) const {
    int n = 0;
    for (const auto& [id, status] : tasks)
      if (status == s) ++n;
    return n;
  }
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json tasks = nlohmann::json::object();
  for (const auto& [id, status] : m.tasks) tasks[id] = task_status_name(status);
  nlohmann::json j{{"schema_version", kManifestSchemaVersion},
                   {"config", to_json(m.config)},
                   {"calls_per_task", m.config.calls_per_task()},
                   {"dataset_path", m.dataset_path},
                   {"dataset_digest", m.dataset_digest},
                   {"cache_dir", m.cache_dir},
                   {"run_dir", m.run_dir},
                   {"template_version", m.template_version},
                   {"backend_mode", m.backend_mode},
                   {"started_at", m.started_at},
                   {"finished_at", m.finished_at},
                   {"tasks", std::move(tasks)}};
  j["task_errors"] = m.task_errors;
  return j;
}

inline Result<RunManifest> manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema_version", 0) != kManifestSchemaVersion)
      return make_error(Errc::schema_error, "unsupported manifest schema_version");
    RunManifest m;
    auto cfg = run_config_from_json(j.at("config"));
    if (!cfg.ok()) return cfg.error();
    m.config = cfg.take();
    m.dataset_path = j.value("dataset_path", std::string{});
    m.dataset_digest = j.value("dataset_digest", std::string{});
    m.cache_dir = j.value("cache_dir", std::string{});
    m.run_dir = j.value("run_dir", std::string{});
    m.template_version = j.value("template_version", std::string{});
    m.backend_mode = j.value("backend_mode", std::string{});
    m.started_at = j.value("started_at", std::string{});
    m.finished_at = j.value("finished_at", std::string{});
    if (j.contains("tasks")) {
      for (const auto& [id, status] : j.at("tasks").items()) {
        auto st = task_status_from_name(status.get<std::string>());
        if (!st.ok()) return st.error();
        m.tasks[id] = st.value();
      }
    }
    if (j.contains("task_errors"))
      m.task_errors = j.at("task_errors").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    return make_error(Errc::schema_error, std::string("bad manifest: ") + e.what());
  }
}

inline Result<void> save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  return write_file_atomic(path, to_json(m).dump(2) + "\n");
}

inline Result<RunManifest> load_manifest(const std::filesystem::path& path) {
  auto text = read_file(path);
  if (!text.ok()) return text.error();
  nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
  if (j.is_discarded())
    return make_error(Errc::schema_error, "manifest is not valid JSON: " + path.string());
  return manifest_from_json(j);
}

}  // namespace dip

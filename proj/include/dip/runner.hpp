#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dip/bench.hpp"
#include "dip/fsutil.hpp"
#include "dip/gateway.hpp"
#include "dip/manifest.hpp"
#include "dip/pipeline.hpp"
#include "dip/result.hpp"
#include "dip/task.hpp"
#include "dip/templates.hpp"

namespace dip {

struct RunnerSettings {
  RunConfig config;
  std::filesystem::path dataset_path;
  std::filesystem::path cache_dir;
  std::filesystem::path run_dir;
  BackendMode mode = BackendMode::replay;
  std::shared_ptr<Backend> backend;  // may be null for replay-only runs
  GatewayOptions gateway_options;
  /// Re-execute tasks whose previous invocation errored (terminal statuses are
  /// otherwise skipped on resume).
  bool retry_errors = false;
  const TemplateLibrary* templates = nullptr;  // null = builtin
};

struct RunSummary {
  RunManifest manifest;
  std::filesystem::path run_dir;
  int executed = 0;
  int skipped = 0;
};

/// Deterministic trace filename: sanitized task_id plus a digest suffix that
/// keeps ids unique after sanitization.
inline std::string trace_filename(const std::string& task_id) {
  std::string sane;
  sane.reserve(task_id.size());
  for (char c : task_id) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    sane.push_back(keep ? c : '_');
  }
  return sane + "-" + sha256_hex(task_id).substr(0, 8) + ".json";
}

/// Reads every trace under <run_dir>/traces, ordered by task_id.
inline Result<std::vector<RunTrace>> load_traces(const std::filesystem::path& run_dir) {
  const auto dir = run_dir / "traces";
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  }
  if (ec) return make_error(Errc::io_error, "cannot list " + dir.string() + ": " + ec.message());

  std::vector<RunTrace> traces;
  for (const auto& file : files) {
    auto text = read_file(file);
    if (!text.ok()) return text.error();
    nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
    if (j.is_discarded())
      return make_error(Errc::schema_error, "trace is not valid JSON: " + file.string());
    auto trace = trace_from_json(j);
    if (!trace.ok())
      return make_error(Errc::schema_error, file.string() + ": " + trace.error().message);
    traces.push_back(trace.take());
  }
  std::sort(traces.begin(), traces.end(),
            [](const RunTrace& a, const RunTrace& b) { return a.task_id < b.task_id; });
  return traces;
}

namespace detail {

/// Single-method report over a finished run directory; the Δ column is against
/// the run's own method, so it reads 0.00 until runs are merged by the report
/// command.
inline Result<void> write_run_reports(const std::filesystem::path& run_dir,
                                      const RunConfig& cfg,
                                      const std::vector<TaskInstance>& tasks,
                                      bool allow_estimated) {
  auto traces = load_traces(run_dir);
  if (!traces.ok()) return traces.error();
  if (traces.value().empty()) return Result<void>{};
  auto row = build_report_row(cfg.model_id, cfg.method, traces.value(), tasks, allow_estimated);
  if (!row.ok()) return row.error();
  auto md = emit_report({row.value()}, cfg.method, ReportFormat::markdown);
  if (!md.ok()) return md.error();
  auto csv = emit_report({row.value()}, cfg.method, ReportFormat::csv);
  if (!csv.ok()) return csv.error();
  if (auto w = write_file_atomic(run_dir / "report.md", md.value()); !w.ok()) return w.error();
  if (auto w = write_file_atomic(run_dir / "report.csv", csv.value()); !w.ok()) return w.error();
  return Result<void>{};
}

}  // namespace detail

/// Executes the configured method over the dataset with resume-on-restart:
/// tasks already in a terminal state are skipped, everything else runs under a
/// worker pool. Traces are written before the manifest marks a task terminal,
/// so a crash can only lose in-flight work, never record phantom completions.
inline Result<RunSummary> execute_run(const RunnerSettings& settings) {
  if (auto v = settings.config.validate(); !v.ok()) return v.error();
  const TemplateLibrary& lib =
      settings.templates ? *settings.templates : TemplateLibrary::builtin();

  auto tasks = load_dataset(settings.dataset_path);
  if (!tasks.ok()) return tasks.error();
  auto ds_digest = dataset_digest(settings.dataset_path);
  if (!ds_digest.ok()) return ds_digest.error();

  if (auto d = ensure_dir(settings.run_dir / "traces"); !d.ok()) return d.error();
  const auto manifest_path = settings.run_dir / "manifest.json";

  RunManifest manifest;
  if (std::filesystem::exists(manifest_path)) {
    auto loaded = load_manifest(manifest_path);
    if (!loaded.ok()) return loaded.error();
    manifest = loaded.take();
    if (config_digest(manifest.config) != config_digest(settings.config))
      return make_error(Errc::config_error,
                        "run directory was created with a different config: " +
                            settings.run_dir.string());
    if (manifest.dataset_digest != ds_digest.value())
      return make_error(Errc::dataset_mismatch,
                        "dataset changed since the run started: " + settings.run_dir.string());
    if (manifest.template_version != lib.version())
      return make_error(Errc::config_error,
                        "template_version changed since the run started: expected " +
                            manifest.template_version + ", have " + lib.version());
  } else {
    manifest.config = settings.config;
    manifest.dataset_path = settings.dataset_path.string();
    manifest.dataset_digest = ds_digest.value();
    manifest.cache_dir = settings.cache_dir.string();
    manifest.run_dir = settings.run_dir.string();
    manifest.template_version = lib.version();
    manifest.started_at = iso8601_utc_now();
  }
  manifest.backend_mode = backend_mode_name(settings.mode);
  for (const auto& task : tasks.value())
    manifest.tasks.emplace(task.task_id, TaskStatus::pending);

  std::vector<const TaskInstance*> to_run;
  int skipped = 0;
  for (const auto& task : tasks.value()) {
    const TaskStatus status = manifest.tasks.at(task.task_id);
    const bool rerun = status == TaskStatus::pending ||
                       (status == TaskStatus::error && settings.retry_errors);
    if (rerun)
      to_run.push_back(&task);
    else
      ++skipped;
  }
  if (auto s = save_manifest(manifest_path, manifest); !s.ok()) return s.error();

  Gateway gw(settings.cache_dir, settings.backend, settings.gateway_options);

  std::mutex mu;
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < to_run.size(); i = next.fetch_add(1)) {
      const TaskInstance& task = *to_run[i];
      auto trace = run_task(task, settings.config, gw, settings.mode, lib);

      std::lock_guard lock(mu);
      if (trace.ok()) {
        const std::string body = to_json(trace.value()).dump(2) + "\n";
        auto w = write_file_atomic(settings.run_dir / "traces" / trace_filename(task.task_id),
                                   body);
        if (w.ok()) {
          manifest.tasks[task.task_id] = trace.value().status == TraceStatus::ok
                                             ? TaskStatus::ok
                                             : TaskStatus::parse_fail;
          manifest.task_errors.erase(task.task_id);
        } else {
          manifest.tasks[task.task_id] = TaskStatus::error;
          manifest.task_errors[task.task_id] = w.error().to_string();
        }
      } else {
        manifest.tasks[task.task_id] = TaskStatus::error;
        manifest.task_errors[task.task_id] = trace.error().to_string();
      }
      save_manifest(manifest_path, manifest);
    }
  };

  const int workers = static_cast<int>(std::min<size_t>(
      static_cast<size_t>(std::max(1, settings.config.parallelism)), to_run.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (manifest.finished() && manifest.finished_at.empty())
    manifest.finished_at = iso8601_utc_now();
  if (auto s = save_manifest(manifest_path, manifest); !s.ok()) return s.error();

  if (manifest.count(TaskStatus::ok) + manifest.count(TaskStatus::parse_fail) > 0) {
    if (auto r = detail::write_run_reports(settings.run_dir, settings.config, tasks.value(),
                                           settings.gateway_options.allow_estimated_usage);
        !r.ok())
      return r.error();
  }

  RunSummary summary;
  summary.manifest = std::move(manifest);
  summary.run_dir = settings.run_dir;
  summary.executed = static_cast<int>(to_run.size());
  summary.skipped = skipped;
  return summary;
}

}  // namespace dip

// dip: run Diverge-to-Induce Prompting and its baselines over a task dataset,
// with a content-addressed response cache for offline replay.
//
// Subcommands: ingest, run, ablate, report, cache inspect, cache verify.
// Exit codes: 0 success, 1 configuration or usage error, 2 unrecoverable
// backend or cache-integrity error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dip/dip.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitBackend = 2;

int classify_exit(const dip::Error& e) {
  switch (e.code) {
    case dip::Errc::network:
    case dip::Errc::cache_miss:
    case dip::Errc::backend_error:
    case dip::Errc::backend_rejected_params:
    case dip::Errc::usage_missing:
      return kExitBackend;
    default:
      return kExitConfig;
  }
}

int fail(const dip::Error& e) {
  std::cerr << "error: " << e.to_string() << "\n";
  return classify_exit(e);
}

/// Secrets come only from the environment; everything else flows through the
/// config file and flags.
dip::Result<std::shared_ptr<dip::Backend>> make_backend(dip::BackendMode mode) {
  if (mode == dip::BackendMode::replay) return std::shared_ptr<dip::Backend>{};
  auto endpoint = dip::env_value(dip::kEndpointEnvVar);
  if (!endpoint)
    return dip::make_error(dip::Errc::config_error,
                           std::string(dip::kEndpointEnvVar) +
                               " must be set for record/live runs");
  dip::HttpBackendConfig cfg;
  cfg.endpoint = *endpoint;
  if (auto key = dip::env_value(dip::kApiKeyEnvVar)) cfg.api_key = *key;
  return std::shared_ptr<dip::Backend>(std::make_shared<dip::HttpBackend>(std::move(cfg)));
}

std::string utc_stamp_compact() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

/// `runs/<timestamp>-<config digest prefix>/`. Re-running the same config in
/// the same second lands on the same directory and resumes, which is safe
/// because resume verifies the config digest.
std::filesystem::path auto_run_dir(const std::string& runs_root, const dip::RunConfig& cfg) {
  return std::filesystem::path(runs_root) /
         (utc_stamp_compact() + "-" + dip::config_digest(cfg).substr(0, 12));
}

struct ModeFlags {
  bool replay = false;
  bool record = false;
  bool live = false;

  void add_to(CLI::App* cmd) {
    auto* r = cmd->add_flag("--replay", replay, "serve all completions from the cache");
    auto* c = cmd->add_flag("--record", record, "call the backend on cache miss, then cache");
    auto* l = cmd->add_flag("--live", live, "always call the backend (responses still cached)");
    r->excludes(c)->excludes(l);
    c->excludes(l);
  }

  void apply(dip::BackendMode& mode) const {
    if (replay) mode = dip::BackendMode::replay;
    if (record) mode = dip::BackendMode::record;
    if (live) mode = dip::BackendMode::live;
  }
};

/// Shared option surface for run/ablate. Flags override config-file values;
/// only flags the user actually passed are applied.
struct CommonOpts {
  std::string config_file;
  std::string method;
  int n_rationales = 0;
  int batch_n = 0;
  int sc_k = -1;
  double sc_temp = -1.0;
  std::string model;
  std::string dataset;
  std::string cache_dir;
  std::string runs_root;
  std::string run_dir;
  std::string template_dir;
  int parallelism = 0;
  std::string format;
  bool allow_estimated = false;
  bool retry_errors = false;
  ModeFlags mode;

  CLI::Option* opt_method = nullptr;
  CLI::Option* opt_n = nullptr;
  CLI::Option* opt_batch_n = nullptr;
  CLI::Option* opt_sc_k = nullptr;
  CLI::Option* opt_sc_temp = nullptr;
  CLI::Option* opt_model = nullptr;
  CLI::Option* opt_dataset = nullptr;
  CLI::Option* opt_cache_dir = nullptr;
  CLI::Option* opt_runs_root = nullptr;
  CLI::Option* opt_run_dir = nullptr;
  CLI::Option* opt_template_dir = nullptr;
  CLI::Option* opt_parallelism = nullptr;
  CLI::Option* opt_format = nullptr;
  CLI::Option* opt_batch = nullptr;
  bool use_batch = false;

  void add_to(CLI::App* cmd, bool with_method) {
    cmd->add_option("--config", config_file, "JSON config file (flags override it)");
    if (with_method) {
      opt_method = cmd->add_option("--method", method,
                                   "one of: zcot, scot, rcot, dip_r, dip");
      opt_sc_k = cmd->add_option("--sc-k", sc_k,
                                 "self-consistency samples for the answer stage (0 = off)");
      opt_sc_temp = cmd->add_option("--sc-temp", sc_temp,
                                    "sampling temperature for self-consistency samples");
      opt_batch = cmd->add_flag("--batch,!--no-batch", use_batch,
                                "request batch_n items in the diverge stages and keep the "
                                "first n, so those stage prompts are identical for every n");
    }
    opt_n = cmd->add_option("--n", n_rationales, "number of rationales / draft plans");
    opt_batch_n = cmd->add_option("--batch-n", batch_n, "batch size for the diverge stages");
    opt_model = cmd->add_option("--model", model, "model identifier sent to the backend");
    opt_dataset = cmd->add_option("--dataset", dataset, "task dataset (JSONL)");
    opt_cache_dir = cmd->add_option("--cache-dir", cache_dir, "response cache directory");
    opt_runs_root = cmd->add_option("--runs-root", runs_root, "parent directory for run dirs");
    opt_run_dir = cmd->add_option("--run-dir", run_dir, "explicit run directory (resumable)");
    opt_template_dir = cmd->add_option("--template-dir", template_dir,
                                       "load prompt templates from this directory");
    opt_parallelism = cmd->add_option("--parallelism", parallelism, "worker pool size");
    opt_format = cmd->add_option("--format", format, "stdout report format: markdown or csv");
    cmd->add_flag("--allow-estimated", allow_estimated,
                  "accept character-count token estimates when the backend omits usage");
    cmd->add_flag("--retry-errors", retry_errors, "re-execute tasks that previously errored");
    mode.add_to(cmd);
  }

  dip::Result<dip::AppConfig> resolve() const {
    dip::AppConfig app;
    if (!config_file.empty()) {
      auto loaded = dip::load_app_config(config_file);
      if (!loaded.ok()) return loaded.error();
      app = loaded.take();
    }
    if (opt_method && opt_method->count()) {
      auto m = dip::method_from_name(method);
      if (!m.ok()) return m.error();
      app.run.method = m.value();
    }
    if (opt_n && opt_n->count()) app.run.n_rationales = n_rationales;
    if (opt_batch_n && opt_batch_n->count()) app.run.batch_n = batch_n;
    if (opt_batch && opt_batch->count()) app.run.use_batch_protocol = use_batch;
    if (opt_sc_k && opt_sc_k->count()) app.run.sc_samples = sc_k;
    if (opt_sc_temp && opt_sc_temp->count()) app.run.sc_temperature = sc_temp;
    if (opt_model && opt_model->count()) app.run.model_id = model;
    if (opt_parallelism && opt_parallelism->count()) app.run.parallelism = parallelism;
    if (opt_dataset && opt_dataset->count()) app.dataset = dataset;
    if (opt_cache_dir && opt_cache_dir->count()) app.cache_dir = cache_dir;
    if (opt_runs_root && opt_runs_root->count()) app.runs_root = runs_root;
    if (opt_run_dir && opt_run_dir->count()) app.run_dir = run_dir;
    if (opt_template_dir && opt_template_dir->count()) app.template_dir = template_dir;
    if (opt_format && opt_format->count()) {
      auto f = dip::report_format_from_name(format);
      if (!f.ok()) return f.error();
      app.report_format = f.value();
    }
    if (allow_estimated) app.allow_estimated_usage = true;
    if (retry_errors) app.retry_errors = true;
    dip::AppConfig resolved = app;
    mode.apply(resolved.mode);
    return resolved;
  }
};

/// Templates resolved once per command; the optional owns the loaded library
/// so the raw pointer in RunnerSettings stays valid.
dip::Result<std::optional<dip::TemplateLibrary>> load_templates(const dip::AppConfig& app) {
  if (!app.template_dir) return std::optional<dip::TemplateLibrary>{};
  auto lib = dip::TemplateLibrary::load_dir(*app.template_dir);
  if (!lib.ok()) return lib.error();
  return std::optional<dip::TemplateLibrary>{lib.take()};
}

int cmd_ingest(const std::string& in, const std::string& family, const std::string& out) {
  auto text = dip::read_file(in);
  if (!text.ok()) return fail(text.error());
  nlohmann::json doc = nlohmann::json::parse(text.value(), nullptr, false);
  if (doc.is_discarded())
    return fail(dip::make_error(dip::Errc::schema_error, "input is not valid JSON: " + in));
  auto tasks = dip::bbh_to_tasks(doc, family);
  if (!tasks.ok()) return fail(tasks.error());
  if (auto w = dip::write_dataset(out, tasks.value()); !w.ok()) return fail(w.error());
  std::cout << "wrote " << tasks.value().size() << " tasks to " << out << "\n";
  return kExitOk;
}

int cmd_run(const CommonOpts& opts) {
  auto resolved = opts.resolve();
  if (!resolved.ok()) return fail(resolved.error());
  const dip::AppConfig& app = resolved.value();
  if (app.dataset.empty())
    return fail(dip::make_error(dip::Errc::config_error, "no dataset given (--dataset)"));

  auto templates = load_templates(app);
  if (!templates.ok()) return fail(templates.error());
  auto backend = make_backend(app.mode);
  if (!backend.ok()) return fail(backend.error());

  dip::RunnerSettings settings;
  settings.config = app.run;
  settings.dataset_path = app.dataset;
  settings.cache_dir = app.cache_dir;
  settings.run_dir = app.run_dir ? std::filesystem::path(*app.run_dir)
                                 : auto_run_dir(app.runs_root, app.run);
  settings.mode = app.mode;
  settings.backend = backend.value();
  settings.gateway_options.allow_estimated_usage = app.allow_estimated_usage;
  settings.retry_errors = app.retry_errors;
  if (templates.value()) settings.templates = &*templates.value();

  auto summary = dip::execute_run(settings);
  if (!summary.ok()) return fail(summary.error());
  const dip::RunManifest& m = summary.value().manifest;

  std::cout << "run dir: " << summary.value().run_dir.string() << "\n"
            << "method=" << dip::method_name(m.config.method) << " model=" << m.config.model_id
            << " calls_per_task=" << m.config.calls_per_task() << "\n"
            << "tasks=" << m.tasks.size() << " executed=" << summary.value().executed
            << " skipped=" << summary.value().skipped
            << " ok=" << m.count(dip::TaskStatus::ok)
            << " parse_fail=" << m.count(dip::TaskStatus::parse_fail)
            << " error=" << m.count(dip::TaskStatus::error) << "\n";
  for (const auto& [id, msg] : m.task_errors) std::cerr << id << ": " << msg << "\n";

  const auto report_path =
      summary.value().run_dir /
      (app.report_format == dip::ReportFormat::csv ? "report.csv" : "report.md");
  if (auto report = dip::read_file(report_path); report.ok()) std::cout << report.value();

  return m.count(dip::TaskStatus::error) == 0 ? kExitOk : kExitBackend;
}

int cmd_ablate(const CommonOpts& opts, std::vector<int> n_values, const std::string& out_dir) {
  auto resolved = opts.resolve();
  if (!resolved.ok()) return fail(resolved.error());
  const dip::AppConfig& app = resolved.value();
  if (app.dataset.empty())
    return fail(dip::make_error(dip::Errc::config_error, "no dataset given (--dataset)"));
  if (n_values.empty()) n_values = {1, 3, 5, 7, 9};

  auto templates = load_templates(app);
  if (!templates.ok()) return fail(templates.error());
  auto backend = make_backend(app.mode);
  if (!backend.ok()) return fail(backend.error());
  auto tasks = dip::load_dataset(app.dataset);
  if (!tasks.ok()) return fail(tasks.error());

  dip::GatewayOptions gw_opts;
  gw_opts.allow_estimated_usage = app.allow_estimated_usage;
  dip::Gateway gw(app.cache_dir, backend.value(), gw_opts);
  const dip::TemplateLibrary& lib =
      templates.value() ? *templates.value() : dip::TemplateLibrary::builtin();

  auto sweep = dip::ablation_sweep(tasks.value(), app.run, n_values, gw, app.mode, lib);
  if (!sweep.ok()) return fail(sweep.error());

  const std::string grid = dip::emit_ablation_grid(sweep.value(), app.report_format);
  std::cout << grid;
  if (!out_dir.empty()) {
    if (auto d = dip::ensure_dir(out_dir); !d.ok()) return fail(d.error());
    const auto base = std::filesystem::path(out_dir);
    auto md = dip::emit_ablation_grid(sweep.value(), dip::ReportFormat::markdown);
    auto csv = dip::emit_ablation_grid(sweep.value(), dip::ReportFormat::csv);
    if (auto w = dip::write_file_atomic(base / "ablation.md", md); !w.ok())
      return fail(w.error());
    if (auto w = dip::write_file_atomic(base / "ablation.csv", csv); !w.ok())
      return fail(w.error());
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& baseline,
               const std::string& format, const std::string& out, bool allow_estimated) {
  auto base_method = dip::method_from_name(baseline);
  if (!base_method.ok()) return fail(base_method.error());
  auto fmt = dip::report_format_from_name(format);
  if (!fmt.ok()) return fail(fmt.error());

  std::vector<dip::RunManifest> manifests;
  for (const auto& dir : run_dirs) {
    auto m = dip::load_manifest(std::filesystem::path(dir) / "manifest.json");
    if (!m.ok()) return fail(m.error());
    manifests.push_back(m.take());
  }
  for (size_t i = 1; i < manifests.size(); ++i) {
    if (manifests[i].dataset_digest != manifests[0].dataset_digest)
      return fail(dip::make_error(dip::Errc::dataset_mismatch,
                                  run_dirs[i] + " and " + run_dirs[0] +
                                      " were produced from different datasets"));
  }

  auto tasks = dip::load_dataset(manifests[0].dataset_path);
  if (!tasks.ok()) return fail(tasks.error());
  auto digest_now = dip::dataset_digest(manifests[0].dataset_path);
  if (!digest_now.ok()) return fail(digest_now.error());
  if (digest_now.value() != manifests[0].dataset_digest)
    return fail(dip::make_error(dip::Errc::dataset_mismatch,
                                "dataset file changed since the runs: " +
                                    manifests[0].dataset_path));

  std::vector<dip::ReportRow> rows;
  for (size_t i = 0; i < manifests.size(); ++i) {
    auto traces = dip::load_traces(run_dirs[i]);
    if (!traces.ok()) return fail(traces.error());
    auto row = dip::build_report_row(manifests[i].config.model_id, manifests[i].config.method,
                                     traces.value(), tasks.value(), allow_estimated);
    if (!row.ok()) return fail(row.error());
    rows.push_back(row.take());
  }

  auto doc = dip::emit_report(rows, base_method.value(), fmt.value());
  if (!doc.ok()) return fail(doc.error());
  if (out.empty()) {
    std::cout << doc.value();
  } else {
    if (auto w = dip::write_file_atomic(out, doc.value()); !w.ok()) return fail(w.error());
    std::cout << "wrote report to " << out << "\n";
  }
  return kExitOk;
}

int cmd_cache_inspect(const std::string& cache_dir, const std::string& digest) {
  dip::ResponseCache cache{std::filesystem::path(cache_dir)};
  if (!digest.empty()) {
    auto entry = cache.load(digest);
    if (!entry.ok()) return fail(entry.error());
    if (!entry.value())
      return fail(dip::make_error(dip::Errc::cache_miss, "no cache entry for " + digest));
    std::cout << nlohmann::json(*entry.value()).dump(2) << "\n";
    return kExitOk;
  }
  size_t entries = 0;
  uintmax_t bytes = 0;
  std::error_code ec;
  if (std::filesystem::exists(cache.dir(), ec)) {
    for (const auto& file : std::filesystem::recursive_directory_iterator(cache.dir(), ec)) {
      if (!file.is_regular_file() || file.path().extension() != ".json") continue;
      ++entries;
      bytes += file.file_size(ec);
    }
  }
  if (ec) return fail(dip::make_error(dip::Errc::io_error, "cache walk failed: " + ec.message()));
  std::cout << "dir: " << cache.dir().string() << "\n"
            << "entries: " << entries << "\n"
            << "bytes: " << bytes << "\n";
  return kExitOk;
}

int cmd_cache_verify(const std::string& cache_dir) {
  dip::ResponseCache cache{std::filesystem::path(cache_dir)};
  auto stats = cache.verify();
  if (!stats.ok()) return fail(stats.error());
  std::cout << "entries: " << stats.value().entries << "\n"
            << "corrupt: " << stats.value().corrupt.size() << "\n";
  for (const auto& path : stats.value().corrupt) std::cerr << "corrupt: " << path << "\n";
  return stats.value().corrupt.empty() ? kExitOk : kExitBackend;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diverge-to-Induce Prompting runner"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "convert a published task file to internal JSONL");
  std::string ingest_in, ingest_family, ingest_out;
  ingest->add_option("--in", ingest_in, "input JSON file")->required();
  ingest->add_option("--family", ingest_family, "task family name (e.g. snarks)")->required();
  ingest->add_option("--out", ingest_out, "output JSONL path")->required();

  // run
  auto* run = app.add_subcommand("run", "execute a method over a dataset");
  CommonOpts run_opts;
  run_opts.add_to(run, /*with_method=*/true);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "sweep rationale count under the batched protocol");
  CommonOpts ablate_opts;
  ablate_opts.add_to(ablate, /*with_method=*/false);
  std::vector<int> ablate_n;
  std::string ablate_out_dir;
  ablate->add_option("--n-list", ablate_n, "rationale counts to sweep (default 1 3 5 7 9)");
  ablate->add_option("--out-dir", ablate_out_dir, "also write ablation.md/.csv here");

  // report
  auto* report = app.add_subcommand("report", "merge finished runs into one comparison table");
  std::vector<std::string> report_dirs;
  std::string report_baseline = "zcot";
  std::string report_format = "markdown";
  std::string report_out;
  bool report_allow_estimated = false;
  report->add_option("run_dirs", report_dirs, "run directories to merge")->required();
  report->add_option("--baseline", report_baseline, "method the delta column compares against");
  report->add_option("--format", report_format, "markdown or csv");
  report->add_option("-o,--out", report_out, "write to file instead of stdout");
  report->add_flag("--allow-estimated", report_allow_estimated,
                   "accept estimated token usage in the averages");

  // cache
  auto* cache = app.add_subcommand("cache", "inspect or verify the response cache");
  cache->require_subcommand(1);
  auto* inspect = cache->add_subcommand("inspect", "summarize the cache or print one entry");
  std::string cache_dir = ".dip-cache";
  std::string inspect_digest;
  inspect->add_option("--cache-dir", cache_dir, "response cache directory");
  inspect->add_option("digest", inspect_digest, "print the entry with this digest");
  auto* verify = cache->add_subcommand("verify", "re-derive every entry digest");
  std::string verify_dir = ".dip-cache";
  verify->add_option("--cache-dir", verify_dir, "response cache directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*ingest) return cmd_ingest(ingest_in, ingest_family, ingest_out);
  if (*run) return cmd_run(run_opts);
  if (*ablate) return cmd_ablate(ablate_opts, ablate_n, ablate_out_dir);
  if (*report)
    return cmd_report(report_dirs, report_baseline, report_format, report_out,
                      report_allow_estimated);
  if (*inspect) return cmd_cache_inspect(cache_dir, inspect_digest);
  if (*verify) return cmd_cache_verify(verify_dir);
  return kExitConfig;
}

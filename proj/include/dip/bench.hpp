#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dip/pipeline.hpp"
#include "dip/result.hpp"
#include "dip/tagparse.hpp"
#include "dip/task.hpp"

namespace dip {

// ---------------------------------------------------------------------------
// Rounding and formatting
// ---------------------------------------------------------------------------

/// Internal math stays full-precision; these apply the 2-decimal round-half-up
/// (half away from zero) rule once, at emission.
inline long cents_round2(double x) { return std::llround(x * 100.0); }

inline std::string format_fixed2(double x) {
  const long cents = cents_round2(x);
  const long mag = std::labs(cents);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%ld.%02ld", cents < 0 ? "-" : "", mag / 100, mag % 100);
  return buf;
}

/// Like format_fixed2 but with an explicit leading "+" for positive values.
inline std::string format_signed2(double x) {
  const long cents = cents_round2(x);
  if (cents > 0) return "+" + format_fixed2(x);
  return format_fixed2(x);
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

/// Reads the internal JSONL schema (one task object per line), validates every
/// instance, and returns them ordered by task_id. When expected_suite is set,
/// rows from any other suite are rejected.
inline Result<std::vector<TaskInstance>> load_dataset(
    const std::filesystem::path& path, std::optional<Suite> expected_suite = std::nullopt) {
  std::ifstream in(path);
  if (!in) return make_error(Errc::io_error, "cannot open dataset " + path.string());

  std::vector<TaskInstance> tasks;
  std::set<std::string> seen_ids;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strutil::trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      return make_error(Errc::schema_error,
                        path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    auto task = task_from_json(j);
    if (!task.ok())
      return make_error(Errc::schema_error, path.string() + ":" + std::to_string(line_no) + ": " +
                                                task.error().message);
    if (expected_suite && task.value().suite != *expected_suite)
      return make_error(Errc::schema_error,
                        path.string() + ":" + std::to_string(line_no) + ": suite " +
                            suite_name(task.value().suite) + ", expected " +
                            suite_name(*expected_suite));
    if (!seen_ids.insert(task.value().task_id).second)
      return make_error(Errc::schema_error, path.string() + ":" + std::to_string(line_no) +
                                                ": duplicate task_id " + task.value().task_id);
    tasks.push_back(task.take());
  }
  if (tasks.empty()) return make_error(Errc::empty_dataset, "no tasks in " + path.string());
  std::sort(tasks.begin(), tasks.end(),
            [](const TaskInstance& a, const TaskInstance& b) { return a.task_id < b.task_id; });
  return tasks;
}

/// Digest of a dataset file's bytes, recorded in manifests so reports can
/// refuse to merge runs over different datasets.
inline Result<std::string> dataset_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return make_error(Errc::io_error, "cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

namespace detail {

/// Splits an option block like "(A) foo  (B) bar" or one option per line into
/// its entries, in order.
inline std::vector<std::string> parse_option_entries(std::string_view block) {
  std::vector<std::string> options;
  std::vector<size_t> starts;
  for (size_t i = 0; i + 2 < block.size(); ++i) {
    if (block[i] == '(' && std::isalpha(static_cast<unsigned char>(block[i + 1])) &&
        block[i + 2] == ')')
      starts.push_back(i);
  }
  for (size_t k = 0; k < starts.size(); ++k) {
    const size_t begin = starts[k];
    const size_t end = k + 1 < starts.size() ? starts[k + 1] : block.size();
    std::string entry = strutil::trim(block.substr(begin, end - begin));
    if (!entry.empty()) options.push_back(std::move(entry));
  }
  return options;
}

/// Task instructions for BBH families the shipped fixtures cover; anything
/// else falls back to the generic wording at render time.
inline std::string bbh_family_instructions(const std::string& family) {
  static const std::map<std::string, std::string> table = {
      {"salient_translation_error_detection",
       "Detect the type of error in an English translation of a German source sentence."},
  };
  auto it = table.find(family);
  return it == table.end() ? std::string{} : it->second;
}

}  // namespace detail

/// Converts BBH-style records ({"input": ..., "target": ...}) into validated
/// TaskInstances. Accepts either the published {"examples": [...]} document or
/// a bare array. Options are lifted out of the "Options:" block when present.
inline Result<std::vector<TaskInstance>> bbh_to_tasks(const nlohmann::json& doc,
                                                      const std::string& family) {
  const nlohmann::json* rows = nullptr;
  if (doc.is_array())
    rows = &doc;
  else if (doc.is_object() && doc.contains("examples") && doc.at("examples").is_array())
    rows = &doc.at("examples");
  else
    return make_error(Errc::schema_error, "expected an array or an object with \"examples\"");
  if (rows->empty()) return make_error(Errc::empty_dataset, "no examples in document");

  std::vector<TaskInstance> tasks;
  for (size_t i = 0; i < rows->size(); ++i) {
    const auto& row = (*rows)[i];
    if (!row.is_object() || !row.contains("input") || !row.contains("target"))
      return make_error(Errc::schema_error,
                        "example " + std::to_string(i) + ": missing input/target");
    TaskInstance t;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "%04zu", i);
    t.task_id = family + "_" + idbuf;
    t.suite = Suite::bbh;
    t.task_family = family;
    t.question_text = row.at("input").get<std::string>();
    const std::string target = row.at("target").get<std::string>();

    const size_t opt_pos = t.question_text.find("Options:");
    if (opt_pos != std::string::npos) {
      t.options = detail::parse_option_entries(
          std::string_view(t.question_text).substr(opt_pos + std::string("Options:").size()));
    }
    t.answer_kind = t.options.empty() ? AnswerKind::free_text : AnswerKind::option_letter;
    t.gold_answer = target;
    t.task_instructions = detail::bbh_family_instructions(family);
    if (auto v = validate_task(t); !v.ok())
      return make_error(Errc::schema_error, "example " + std::to_string(i) + ": " +
                                                v.error().message);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

/// Writes tasks as internal-schema JSONL, one object per line, sorted keys.
inline Result<void> write_dataset(const std::filesystem::path& path,
                                  const std::vector<TaskInstance>& tasks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return make_error(Errc::io_error, "cannot write dataset " + path.string());
  for (const auto& t : tasks) out << to_json(t).dump() << '\n';
  if (!out.good()) return make_error(Errc::io_error, "write failed for " + path.string());
  return Result<void>{};
}

// ---------------------------------------------------------------------------
// Scoring and token accounting
// ---------------------------------------------------------------------------

/// Exact-match accuracy in percent, full precision. Parse failures count as
/// incorrect; a trace whose task_id has no matching task is an error.
inline Result<double> score(const std::vector<RunTrace>& traces,
                            const std::vector<TaskInstance>& tasks) {
  if (traces.empty()) return make_error(Errc::precondition, "no traces to score");
  std::map<std::string, const TaskInstance*> by_id;
  for (const auto& t : tasks) by_id[t.task_id] = &t;

  long correct = 0;
  for (const auto& trace : traces) {
    auto it = by_id.find(trace.task_id);
    if (it == by_id.end())
      return make_error(Errc::task_mismatch, "trace for unknown task " + trace.task_id);
    if (trace.status == TraceStatus::ok &&
        trace.result.normalized_answer == it->second->gold_answer)
      ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(traces.size());
}

struct TokenAverages {
  double input = 0.0;
  double output = 0.0;
  double total = 0.0;  // always input + output
};

/// Per-question token sums (all stages, all SC samples) averaged over
/// questions. Estimated-usage records are rejected unless allow_estimated.
inline Result<TokenAverages> aggregate_tokens(const std::vector<RunTrace>& traces,
                                              bool allow_estimated = false) {
  if (traces.empty()) return make_error(Errc::precondition, "no traces to aggregate");
  long sum_in = 0, sum_out = 0;
  bool any_estimated = false, any_measured = false;
  for (const auto& trace : traces) {
    sum_in += trace.input_tokens();
    sum_out += trace.output_tokens();
    for (const auto& s : trace.stage_records)
      (s.record.estimated ? any_estimated : any_measured) = true;
  }
  if (any_estimated && !allow_estimated) {
    const char* detail = any_measured ? "measured and estimated token counts mixed"
                                      : "token counts are estimates";
    return make_error(Errc::mixed_estimation,
                      std::string(detail) + "; pass the estimated-usage flag to accept");
  }
  TokenAverages avg;
  const double n = static_cast<double>(traces.size());
  avg.input = static_cast<double>(sum_in) / n;
  avg.output = static_cast<double>(sum_out) / n;
  avg.total = avg.input + avg.output;
  return avg;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string model_id;
  Method method = Method::zcot;
  double accuracy_pct = 0.0;
  double delta_vs_baseline = 0.0;  // filled by emit_report
  double avg_input_tokens = 0.0;
  double avg_output_tokens = 0.0;
  double avg_total_tokens = 0.0;
  long n_questions = 0;
};

/// Scores and aggregates one (model, method) trace set into a report row.
inline Result<ReportRow> build_report_row(const std::string& model_id, Method method,
                                          const std::vector<RunTrace>& traces,
                                          const std::vector<TaskInstance>& tasks,
                                          bool allow_estimated = false) {
  ReportRow row;
  row.model_id = model_id;
  row.method = method;
  auto acc = score(traces, tasks);
  if (!acc.ok()) return acc.error();
  row.accuracy_pct = acc.value();
  auto tokens = aggregate_tokens(traces, allow_estimated);
  if (!tokens.ok()) return tokens.error();
  row.avg_input_tokens = tokens.value().input;
  row.avg_output_tokens = tokens.value().output;
  row.avg_total_tokens = tokens.value().total;
  row.n_questions = static_cast<long>(traces.size());
  return row;
}

enum class ReportFormat { markdown, csv };

inline Result<ReportFormat> report_format_from_name(const std::string& s) {
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  return make_error(Errc::config_error, "unknown report format: " + s);
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

/// Markdown delta cell: blue for improvement, red for degradation, plain 0.00.
inline std::string markdown_delta(double delta) {
  const long cents = cents_round2(delta);
  if (cents > 0) return "<span style=\"color:blue\">" + format_signed2(delta) + "</span>";
  if (cents < 0) return "<span style=\"color:red\">" + format_signed2(delta) + "</span>";
  return format_fixed2(delta);
}

inline bool method_before(Method a, Method b) {
  return static_cast<int>(a) < static_cast<int>(b);
}

}  // namespace detail

/// Renders the merged per-model, per-method table with a Δ column against
/// baseline_method. Rows are ordered by model, then canonical method order.
/// Markdown marks improvement blue and degradation red; CSV carries explicit
/// +/− signs, RFC 4180 framing, CRLF line endings.
inline Result<std::string> emit_report(std::vector<ReportRow> rows, Method baseline_method,
                                       ReportFormat format) {
  if (rows.empty()) return make_error(Errc::precondition, "no report rows");
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    return detail::method_before(a.method, b.method);
  });

  std::map<std::string, double> baseline_acc;
  for (const auto& row : rows)
    if (row.method == baseline_method) baseline_acc[row.model_id] = row.accuracy_pct;
  for (auto& row : rows) {
    auto it = baseline_acc.find(row.model_id);
    if (it == baseline_acc.end())
      return make_error(Errc::missing_baseline,
                        "no " + std::string(method_name(baseline_method)) + " row for model " +
                            row.model_id);
    row.delta_vs_baseline = row.accuracy_pct - it->second;
  }

  std::ostringstream out;
  if (format == ReportFormat::csv) {
    const char* crlf = "\r\n";
    out << "model,method,acc,delta,avg_in,avg_out,avg_total,n" << crlf;
    for (const auto& row : rows) {
      out << detail::csv_field(row.model_id) << ',' << method_name(row.method) << ','
          << format_fixed2(row.accuracy_pct) << ',' << format_signed2(row.delta_vs_baseline)
          << ',' << format_fixed2(row.avg_input_tokens) << ','
          << format_fixed2(row.avg_output_tokens) << ',' << format_fixed2(row.avg_total_tokens)
          << ',' << row.n_questions << crlf;
    }
  } else {
    out << "| Model | Method | Accuracy | Delta vs " << method_name(baseline_method)
        << " | Avg input | Avg output | Avg total | N |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& row : rows) {
      out << "| " << row.model_id << " | " << method_name(row.method) << " | "
          << format_fixed2(row.accuracy_pct) << " | "
          << detail::markdown_delta(row.delta_vs_baseline) << " | "
          << format_fixed2(row.avg_input_tokens) << " | "
          << format_fixed2(row.avg_output_tokens) << " | "
          << format_fixed2(row.avg_total_tokens) << " | " << row.n_questions << " |\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Ablation sweeps
// ---------------------------------------------------------------------------

struct AblationResult {
  std::string model_id;
  std::vector<int> n_values;
  std::map<int, double> accuracy_pct;
  std::map<int, std::vector<RunTrace>> traces;
};

/// One batched DIP run per n over the same tasks and gateway, so stage-1/2
/// completions come from the shared cache after the first n.
inline Result<AblationResult> ablation_sweep(const std::vector<TaskInstance>& tasks,
                                             const RunConfig& base_cfg,
                                             const std::vector<int>& n_values, Gateway& gw,
                                             BackendMode mode,
                                             const TemplateLibrary& lib =
                                                 TemplateLibrary::builtin()) {
  if (tasks.empty()) return make_error(Errc::precondition, "no tasks for ablation sweep");
  if (n_values.empty()) return make_error(Errc::precondition, "no n values for ablation sweep");
  for (int n : n_values)
    if (n < 1 || n > base_cfg.batch_n)
      return make_error(Errc::config_error, "ablation n=" + std::to_string(n) +
                                                " outside [1, batch_n=" +
                                                std::to_string(base_cfg.batch_n) + "]");

  AblationResult result;
  result.model_id = base_cfg.model_id;
  result.n_values = n_values;
  std::sort(result.n_values.begin(), result.n_values.end());
  result.n_values.erase(std::unique(result.n_values.begin(), result.n_values.end()),
                        result.n_values.end());

  for (int n : result.n_values) {
    RunConfig cfg = base_cfg;
    cfg.method = Method::dip;
    cfg.use_batch_protocol = true;
    cfg.n_rationales = n;
    if (auto v = cfg.validate(); !v.ok()) return v.error();

    std::vector<RunTrace> traces;
    for (const auto& task : tasks) {
      auto trace = run_task(task, cfg, gw, mode, lib);
      if (!trace.ok()) return trace.error();
      traces.push_back(trace.take());
    }
    auto acc = score(traces, tasks);
    if (!acc.ok()) return acc.error();
    result.accuracy_pct[n] = acc.value();
    result.traces[n] = std::move(traces);
  }
  return result;
}

/// Accuracy-per-n grid. When n=1 is part of the sweep, a summary row counts
/// the columns that beat it.
inline std::string emit_ablation_grid(const AblationResult& result, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    const char* crlf = "\r\n";
    out << "model";
    for (int n : result.n_values) out << ",n_" << n;
    out << crlf << detail::csv_field(result.model_id);
    for (int n : result.n_values) out << ',' << format_fixed2(result.accuracy_pct.at(n));
    out << crlf;
    if (result.accuracy_pct.count(1)) {
      const double base = result.accuracy_pct.at(1);
      out << "wins_vs_n1";
      for (int n : result.n_values) {
        out << ',';
        if (n == 1)
          out << '-';
        else
          out << (cents_round2(result.accuracy_pct.at(n)) > cents_round2(base) ? 1 : 0);
      }
      out << crlf;
    }
  } else {
    out << "| Model |";
    for (int n : result.n_values) out << " N=" << n << " |";
    out << "\n|---|";
    for (size_t i = 0; i < result.n_values.size(); ++i) out << "---|";
    out << "\n| " << result.model_id << " |";
    for (int n : result.n_values) out << ' ' << format_fixed2(result.accuracy_pct.at(n)) << " |";
    out << "\n";
    if (result.accuracy_pct.count(1)) {
      const double base = result.accuracy_pct.at(1);
      out << "| wins vs N=1 |";
      for (int n : result.n_values) {
        if (n == 1)
          out << " - |";
        else
          out << ' '
              << (cents_round2(result.accuracy_pct.at(n)) > cents_round2(base) ? 1 : 0)
              << " |";
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace dip

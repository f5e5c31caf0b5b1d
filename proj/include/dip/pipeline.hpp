#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dip/chat.hpp"
#include "dip/digest.hpp"
#include "dip/gateway.hpp"
#include "dip/result.hpp"
#include "dip/tagparse.hpp"
#include "dip/task.hpp"
#include "dip/templates.hpp"

namespace dip {

inline constexpr int kTraceSchemaVersion = 1;

/// Declaration order is the canonical report order.
enum class Method { zcot, scot, rcot, dip_r, dip };

inline constexpr Method kAllMethods[] = {Method::zcot, Method::scot, Method::rcot, Method::dip_r,
                                         Method::dip};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::zcot: return "zcot";
    case Method::scot: return "scot";
    case Method::rcot: return "rcot";
    case Method::dip_r: return "dip_r";
    case Method::dip: return "dip";
  }
  return "zcot";
}

inline Result<Method> method_from_name(const std::string& s) {
  if (s == "zcot") return Method::zcot;
  if (s == "scot") return Method::scot;
  if (s == "rcot") return Method::rcot;
  if (s == "dip_r" || s == "dip-r") return Method::dip_r;
  if (s == "dip") return Method::dip;
  return make_error(Errc::config_error, "unknown method: " + s);
}

/// LLM calls one pass of the method makes, before any self-consistency.
inline int base_call_count(Method m) {
  switch (m) {
    case Method::zcot:
    case Method::scot:
    case Method::rcot: return 1;
    case Method::dip_r: return 3;
    case Method::dip: return 4;
  }
  return 1;
}

struct RunConfig {
  Method method = Method::zcot;
  int n_rationales = 5;
  int batch_n = 9;
  /// When set, stage 1/2 request batch_n items and the first n_rationales are
  /// used, so runs at different n share those calls byte-for-byte.
  bool use_batch_protocol = false;
  int sc_samples = 0;  // 0 = self-consistency off
  double sc_temperature = 0.7;
  double temperature = 0.0;
  double top_p = 1.0;
  std::optional<int> max_tokens;
  std::string model_id = "mock-model";
  int parallelism = 1;
  bool deterministic = true;

  Result<void> validate() const {
    if (n_rationales < 1) return make_error(Errc::config_error, "n_rationales must be >= 1");
    if (batch_n < 1) return make_error(Errc::config_error, "batch_n must be >= 1");
    if (use_batch_protocol && n_rationales > batch_n)
      return make_error(Errc::config_error,
                        "n_rationales " + std::to_string(n_rationales) + " exceeds batch_n " +
                            std::to_string(batch_n));
    if (sc_samples != 0 && sc_samples < 2)
      return make_error(Errc::config_error, "sc_samples must be 0 or >= 2");
    if (parallelism < 1) return make_error(Errc::config_error, "parallelism must be >= 1");
    if (model_id.empty()) return make_error(Errc::config_error, "model_id is empty");
    return Result<void>{};
  }

  /// Total LLM calls per question under this config.
  int calls_per_task() const {
    const int base = base_call_count(method);
    return sc_samples >= 2 ? (base - 1) + sc_samples : base;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"method", method_name(c.method)},
                   {"n_rationales", c.n_rationales},
                   {"batch_n", c.batch_n},
                   {"use_batch_protocol", c.use_batch_protocol},
                   {"sc_samples", c.sc_samples},
                   {"sc_temperature", c.sc_temperature},
                   {"temperature", c.temperature},
                   {"top_p", c.top_p},
                   {"model_id", c.model_id},
                   {"parallelism", c.parallelism},
                   {"deterministic", c.deterministic}};
  j["max_tokens"] = c.max_tokens ? nlohmann::json(*c.max_tokens) : nlohmann::json(nullptr);
  return j;
}

inline Result<RunConfig> run_config_from_json(const nlohmann::json& j) {
  try {
    RunConfig c;
    auto m = method_from_name(j.at("method").get<std::string>());
    if (!m.ok()) return m.error();
    c.method = m.value();
    c.n_rationales = j.value("n_rationales", c.n_rationales);
    c.batch_n = j.value("batch_n", c.batch_n);
    c.use_batch_protocol = j.value("use_batch_protocol", c.use_batch_protocol);
    c.sc_samples = j.value("sc_samples", c.sc_samples);
    c.sc_temperature = j.value("sc_temperature", c.sc_temperature);
    c.temperature = j.value("temperature", c.temperature);
    c.top_p = j.value("top_p", c.top_p);
    if (j.contains("max_tokens") && !j.at("max_tokens").is_null())
      c.max_tokens = j.at("max_tokens").get<int>();
    c.model_id = j.value("model_id", c.model_id);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.deterministic = j.value("deterministic", c.deterministic);
    if (auto v = c.validate(); !v.ok()) return v.error();
    return c;
  } catch (const nlohmann::json::exception& e) {
    return make_error(Errc::config_error, std::string("bad run config: ") + e.what());
  }
}

inline std::string config_digest(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct StageRecord {
  std::string stage;  // rationale_gen | plan_gen | plan_induction | answer_gen
  int sample_index = 0;
  CompletionRecord record;
};

enum class TraceStatus { ok, parse_fail };

inline const char* trace_status_name(TraceStatus s) {
  return s == TraceStatus::ok ? "ok" : "parse_fail";
}

struct RunTrace {
  std::string task_id;
  Method method = Method::zcot;
  TraceStatus status = TraceStatus::ok;
  std::vector<StageRecord> stage_records;
  std::optional<RationaleSet> rationales;
  std::optional<DraftPlanSet> plans;
  std::optional<InducedPlan> induced;
  std::optional<std::string> strategy;   // scot only
  std::optional<std::string> framework;  // rcot only
  InferenceResult result;
  std::optional<Error> failure;  // present iff status == parse_fail

  long input_tokens() const {
    long t = 0;
    for (const auto& s : stage_records) t += s.record.input_tokens;
    return t;
  }
  long output_tokens() const {
    long t = 0;
    for (const auto& s : stage_records) t += s.record.output_tokens;
    return t;
  }
  long total_tokens() const { return input_tokens() + output_tokens(); }
  int call_count() const { return static_cast<int>(stage_records.size()); }

  bool any_estimated() const {
    return std::any_of(stage_records.begin(), stage_records.end(),
                       [](const StageRecord& s) { return s.record.estimated; });
  }

  /// (input, output) token sums keyed by stage label.
  std::map<std::string, std::pair<long, long>> per_stage_tokens() const {
    std::map<std::string, std::pair<long, long>> out;
    for (const auto& s : stage_records) {
      auto& slot = out[s.stage];
      slot.first += s.record.input_tokens;
      slot.second += s.record.output_tokens;
    }
    return out;
  }
};

namespace detail {

inline nlohmann::json rationales_to_json(const RationaleSet& r) {
  return nlohmann::json{{"items", r.items},
                        {"source_digest", r.source_digest},
                        {"surplus_discarded", r.surplus_discarded}};
}

inline RationaleSet rationales_from_json(const nlohmann::json& j) {
  RationaleSet r;
  r.items = j.at("items").get<std::vector<std::string>>();
  r.source_digest = j.value("source_digest", std::string{});
  r.surplus_discarded = j.value("surplus_discarded", 0);
  return r;
}

inline nlohmann::json plans_to_json(const DraftPlanSet& p) {
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& plan : p.plans) plans.push_back(plan.steps);
  return nlohmann::json{{"plans", plans},
                        {"source_digest", p.source_digest},
                        {"surplus_discarded", p.surplus_discarded}};
}

inline DraftPlanSet plans_from_json(const nlohmann::json& j) {
  DraftPlanSet p;
  for (const auto& steps : j.at("plans")) {
    Plan plan;
    plan.steps = steps.get<std::vector<std::string>>();
    p.plans.push_back(std::move(plan));
  }
  p.source_digest = j.value("source_digest", std::string{});
  p.surplus_discarded = j.value("surplus_discarded", 0);
  return p;
}

inline nlohmann::json induced_to_json(const InducedPlan& p) {
  return nlohmann::json{{"text", p.text}, {"steps", p.steps}, {"source_digest", p.source_digest}};
}

inline InducedPlan induced_from_json(const nlohmann::json& j) {
  InducedPlan p;
  p.text = j.at("text").get<std::string>();
  p.steps = j.value("steps", std::vector<std::string>{});
  p.source_digest = j.value("source_digest", std::string{});
  return p;
}

inline nlohmann::json failure_to_json(const Error& e) {
  nlohmann::json j{{"code", errc_name(e.code)}, {"message", e.message}};
  j["stage"] = e.stage ? nlohmann::json(*e.stage) : nlohmann::json(nullptr);
  j["cause"] = e.cause ? nlohmann::json(errc_name(*e.cause)) : nlohmann::json(nullptr);
  return j;
}

}  // namespace detail

inline nlohmann::json to_json(const RunTrace& t) {
  nlohmann::json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["task_id"] = t.task_id;
  j["method"] = method_name(t.method);
  j["status"] = trace_status_name(t.status);

  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : t.stage_records) {
    nlohmann::json sj = s.record;
    sj["stage"] = s.stage;
    sj["sample_index"] = s.sample_index;
    stages.push_back(std::move(sj));
  }
  j["stage_records"] = std::move(stages);

  j["rationales"] =
      t.rationales ? detail::rationales_to_json(*t.rationales) : nlohmann::json(nullptr);
  j["plans"] = t.plans ? detail::plans_to_json(*t.plans) : nlohmann::json(nullptr);
  j["induced"] = t.induced ? detail::induced_to_json(*t.induced) : nlohmann::json(nullptr);
  j["strategy"] = t.strategy ? nlohmann::json(*t.strategy) : nlohmann::json(nullptr);
  j["framework"] = t.framework ? nlohmann::json(*t.framework) : nlohmann::json(nullptr);

  j["result"] = nlohmann::json{{"chain_of_thought", t.result.chain_of_thought},
                               {"raw_answer", t.result.raw_answer},
                               {"normalized_answer", t.result.normalized_answer},
                               {"cot_missing", t.result.cot_missing},
                               {"answer_recovered", t.result.answer_recovered}};
  j["failure"] = t.failure ? detail::failure_to_json(*t.failure) : nlohmann::json(nullptr);
  j["tokens"] = nlohmann::json{{"input", t.input_tokens()},
                               {"output", t.output_tokens()},
                               {"total", t.total_tokens()}};
  return j;
}

inline Result<RunTrace> trace_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema_version", 0) != kTraceSchemaVersion)
      return make_error(Errc::schema_error, "unsupported trace schema_version");
    RunTrace t;
    t.task_id = j.at("task_id").get<std::string>();
    auto m = method_from_name(j.at("method").get<std::string>());
    if (!m.ok()) return m.error();
    t.method = m.value();
    const std::string status = j.at("status").get<std::string>();
    if (status == "ok")
      t.status = TraceStatus::ok;
    else if (status == "parse_fail")
      t.status = TraceStatus::parse_fail;
    else
      return make_error(Errc::schema_error, "unknown trace status: " + status);

    for (const auto& sj : j.at("stage_records")) {
      StageRecord s;
      s.stage = sj.at("stage").get<std::string>();
      s.sample_index = sj.value("sample_index", 0);
      s.record = sj.get<CompletionRecord>();
      t.stage_records.push_back(std::move(s));
    }

    if (j.contains("rationales") && !j.at("rationales").is_null())
      t.rationales = detail::rationales_from_json(j.at("rationales"));
    if (j.contains("plans") && !j.at("plans").is_null())
      t.plans = detail::plans_from_json(j.at("plans"));
    if (j.contains("induced") && !j.at("induced").is_null())
      t.induced = detail::induced_from_json(j.at("induced"));
    if (j.contains("strategy") && !j.at("strategy").is_null())
      t.strategy = j.at("strategy").get<std::string>();
    if (j.contains("framework") && !j.at("framework").is_null())
      t.framework = j.at("framework").get<std::string>();

    const auto& rj = j.at("result");
    t.result.chain_of_thought = rj.at("chain_of_thought").get<std::string>();
    t.result.raw_answer = rj.at("raw_answer").get<std::string>();
    t.result.normalized_answer = rj.at("normalized_answer").get<std::string>();
    t.result.cot_missing = rj.value("cot_missing", false);
    t.result.answer_recovered = rj.value("answer_recovered", false);

    if (j.contains("failure") && !j.at("failure").is_null()) {
      const auto& fj = j.at("failure");
      Error e;
      auto code = errc_from_name(fj.at("code").get<std::string>());
      if (!code) return make_error(Errc::schema_error, "unknown failure code in trace");
      e.code = *code;
      e.message = fj.value("message", std::string{});
      if (fj.contains("stage") && !fj.at("stage").is_null())
        e.stage = fj.at("stage").get<std::string>();
      if (fj.contains("cause") && !fj.at("cause").is_null()) {
        auto cause = errc_from_name(fj.at("cause").get<std::string>());
        if (!cause) return make_error(Errc::schema_error, "unknown failure cause in trace");
        e.cause = *cause;
      }
      t.failure = std::move(e);
    }

    if (j.contains("tokens")) {
      const auto& tok = j.at("tokens");
      if (tok.value("input", t.input_tokens()) != t.input_tokens() ||
          tok.value("output", t.output_tokens()) != t.output_tokens())
        return make_error(Errc::schema_error,
                          "trace token totals disagree with stage records: " + t.task_id);
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    return make_error(Errc::schema_error, std::string("bad trace record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Voting
// ---------------------------------------------------------------------------

/// Most frequent answer; ties broken by earliest first occurrence in sample
/// order. Empty input yields "".
inline std::string majority_vote(const std::vector<std::string>& answers) {
  std::map<std::string, int> counts;
  std::map<std::string, size_t> first_seen;
  for (size_t i = 0; i < answers.size(); ++i) {
    ++counts[answers[i]];
    first_seen.emplace(answers[i], i);
  }
  std::string best;
  int best_count = 0;
  size_t best_first = 0;
  for (const auto& [answer, count] : counts) {
    const size_t first = first_seen[answer];
    if (count > best_count || (count == best_count && first < best_first)) {
      best = answer;
      best_count = count;
      best_first = first;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Method execution
// ---------------------------------------------------------------------------

namespace detail {

inline ChatRequest make_request(const RunConfig& cfg, const PromptText& prompt,
                                double temperature, int sample_index) {
  ChatRequest req;
  req.model_id = cfg.model_id;
  req.messages = prompt.as_messages();
  req.temperature = temperature;
  req.top_p = cfg.top_p;
  req.max_tokens = cfg.max_tokens;
  req.sample_index = sample_index;
  return req;
}

/// Issues one stage call and appends its record to the trace.
inline Result<std::string> call_stage(Gateway& gw, BackendMode mode, const RunConfig& cfg,
                                      RunTrace& trace, const char* stage,
                                      const PromptText& prompt, double temperature,
                                      int sample_index = 0) {
  auto rec = gw.complete(make_request(cfg, prompt, temperature, sample_index), mode);
  if (!rec.ok()) return rec.error().with_stage(stage);
  std::string text = rec.value().response_text;
  trace.stage_records.push_back(StageRecord{stage, sample_index, rec.take()});
  return text;
}

inline Error stage_parse_error(const char* stage, Error cause) {
  Error e;
  e.code = Errc::stage_parse;
  e.message = std::string(stage) + ": " + cause.message;
  e.stage = stage;
  e.cause = cause.code;
  return e;
}

/// Marks the trace as a parse failure; the caller still gets a trace so the
/// question scores incorrect rather than vanishing from the denominator.
inline RunTrace fail_trace(RunTrace trace, const char* stage, Error cause) {
  trace.status = TraceStatus::parse_fail;
  trace.failure = stage_parse_error(stage, std::move(cause));
  return trace;
}

struct ParsedAnswer {
  InferenceResult result;
  std::optional<std::string> strategy;
  std::optional<std::string> framework;
};

/// Pulls chain_of_thought / final_answer (and optional strategy or framework
/// blocks) out of a completion and normalizes the answer.
inline Result<ParsedAnswer> parse_answer_text(const std::string& text, AnswerKind kind) {
  ParsedAnswer out;

  auto answer = extract_tagged(text, TagName::final_answer);
  if (!answer.ok()) return answer.error();
  out.result.raw_answer = answer.value().text;
  out.result.answer_recovered = answer.value().recovered;

  auto normalized = normalize_answer(out.result.raw_answer, kind);
  if (!normalized.ok()) return normalized.error();
  out.result.normalized_answer = normalized.take();

  auto cot = extract_tagged(text, TagName::chain_of_thought);
  if (cot.ok())
    out.result.chain_of_thought = cot.take().text;
  else
    out.result.cot_missing = true;

  if (auto strategy = extract_tagged(text, TagName::strategy); strategy.ok())
    out.strategy = strategy.take().text;
  if (auto framework = extract_tagged(text, TagName::reasoning_framework); framework.ok())
    out.framework = framework.take().text;
  return out;
}

/// Renders the prompt whose completion yields the final answer: the full
/// baseline prompt for single-call methods, the answer-stage prompt for
/// dip / dip_r.
inline Result<PromptText> answer_stage_prompt(const TaskInstance& task, const RunConfig& cfg,
                                              const RunTrace& trace, const TemplateLibrary& lib) {
  switch (cfg.method) {
    case Method::zcot: return render_baseline_prompt(task, PromptKind::zcot, lib);
    case Method::scot: return render_baseline_prompt(task, PromptKind::scot, lib);
    case Method::rcot: return render_baseline_prompt(task, PromptKind::rcot, lib);
    case Method::dip_r:
    case Method::dip:
      if (!trace.induced) return make_error(Errc::precondition, "no induced plan for answer stage");
      return render_answer_prompt(task, *trace.induced, lib);
  }
  return make_error(Errc::precondition, "unreachable method");
}

/// Runs every stage before the answer stage, leaving artifacts in the trace.
/// Single-call methods have no pre-answer stages. For dip under the batch
/// protocol, stage 1/2 request cfg.batch_n items and the first n_rationales
/// are kept, so those two requests are byte-identical across n.
inline Result<RunTrace> pre_answer_stages(const TaskInstance& task, const RunConfig& cfg,
                                          Gateway& gw, BackendMode mode,
                                          const TemplateLibrary& lib) {
  RunTrace trace;
  trace.task_id = task.task_id;
  trace.method = cfg.method;
  if (cfg.method == Method::zcot || cfg.method == Method::scot || cfg.method == Method::rcot)
    return trace;

  const int request_n = (cfg.method == Method::dip && cfg.use_batch_protocol) ? cfg.batch_n
                                                                              : cfg.n_rationales;

  if (cfg.method == Method::dip) {
    auto prompt = render_rationale_prompt(task, request_n, lib);
    if (!prompt.ok()) return prompt.error().with_stage("rationale_gen");
    auto text = call_stage(gw, mode, cfg, trace, "rationale_gen", prompt.value(), cfg.temperature);
    if (!text.ok()) return text.error();
    auto batch = parse_rationales(text.value(), request_n);
    if (!batch.ok()) return fail_trace(std::move(trace), "rationale_gen", batch.error());
    batch.value().source_digest = trace.stage_records.back().record.request_digest;

    auto plan_prompt = render_plan_prompt(task, batch.value(), lib);
    if (!plan_prompt.ok()) return plan_prompt.error().with_stage("plan_gen");
    auto plan_text = call_stage(gw, mode, cfg, trace, "plan_gen", plan_prompt.value(),
                                cfg.temperature);
    if (!plan_text.ok()) return plan_text.error();
    auto batch_plans = parse_plans(plan_text.value(), request_n);
    if (!batch_plans.ok()) return fail_trace(std::move(trace), "plan_gen", batch_plans.error());
    batch_plans.value().source_digest = trace.stage_records.back().record.request_digest;

    if (cfg.use_batch_protocol) {
      auto rs = truncate_prefix(batch.value(), cfg.n_rationales);
      if (!rs.ok()) return rs.error().with_stage("rationale_gen");
      auto ps = truncate_prefix(batch_plans.value(), cfg.n_rationales);
      if (!ps.ok()) return ps.error().with_stage("plan_gen");
      trace.rationales = rs.take();
      trace.plans = ps.take();
    } else {
      trace.rationales = batch.take();
      trace.plans = batch_plans.take();
    }
  } else {  // dip_r
    auto prompt = render_plan_direct_prompt(task, cfg.n_rationales, lib);
    if (!prompt.ok()) return prompt.error().with_stage("plan_gen");
    auto text = call_stage(gw, mode, cfg, trace, "plan_gen", prompt.value(), cfg.temperature);
    if (!text.ok()) return text.error();
    auto plans = parse_plans(text.value(), cfg.n_rationales);
    if (!plans.ok()) return fail_trace(std::move(trace), "plan_gen", plans.error());
    plans.value().source_digest = trace.stage_records.back().record.request_digest;
    trace.plans = plans.take();
  }

  auto induction_prompt = render_induction_prompt(task, *trace.plans, lib);
  if (!induction_prompt.ok()) return induction_prompt.error().with_stage("plan_induction");
  auto induction_text = call_stage(gw, mode, cfg, trace, "plan_induction",
                                   induction_prompt.value(), cfg.temperature);
  if (!induction_text.ok()) return induction_text.error();
  auto induced = parse_induced_plan(induction_text.value(),
                                    trace.stage_records.back().record.request_digest);
  if (!induced.ok()) return fail_trace(std::move(trace), "plan_induction", induced.error());
  trace.induced = induced.take();
  return trace;
}

/// Common single-pass execution: pre-answer stages, then one answer call.
inline Result<RunTrace> run_staged(const TaskInstance& task, const RunConfig& cfg, Gateway& gw,
                                   BackendMode mode, const TemplateLibrary& lib) {
  if (auto v = cfg.validate(); !v.ok()) return v.error();

  auto pre = pre_answer_stages(task, cfg, gw, mode, lib);
  if (!pre.ok()) return pre.error();
  RunTrace trace = pre.take();
  if (trace.status == TraceStatus::parse_fail) return trace;

  auto prompt = answer_stage_prompt(task, cfg, trace, lib);
  if (!prompt.ok()) return prompt.error().with_stage("answer_gen");
  auto text = call_stage(gw, mode, cfg, trace, "answer_gen", prompt.value(), cfg.temperature);
  if (!text.ok()) return text.error();
  auto parsed = parse_answer_text(text.value(), task.answer_kind);
  if (!parsed.ok()) return fail_trace(std::move(trace), "answer_gen", parsed.error());
  auto pa = parsed.take();
  trace.result = std::move(pa.result);
  if (cfg.method == Method::scot) trace.strategy = std::move(pa.strategy);
  if (cfg.method == Method::rcot) trace.framework = std::move(pa.framework);
  return trace;
}

}  // namespace detail

/// Four calls: rationales, draft plans, induced plan, answer.
inline Result<RunTrace> run_dip(const TaskInstance& task, const RunConfig& cfg, Gateway& gw,
                                BackendMode mode,
                                const TemplateLibrary& lib = TemplateLibrary::builtin()) {
  if (cfg.method != Method::dip)
    return make_error(Errc::precondition, "run_dip requires method dip");
  return detail::run_staged(task, cfg, gw, mode, lib);
}

/// Three calls: draft plans straight from the question, induced plan, answer.
inline Result<RunTrace> run_dip_r(const TaskInstance& task, const RunConfig& cfg, Gateway& gw,
                                  BackendMode mode,
                                  const TemplateLibrary& lib = TemplateLibrary::builtin()) {
  if (cfg.method != Method::dip_r)
    return make_error(Errc::precondition, "run_dip_r requires method dip_r");
  return detail::run_staged(task, cfg, gw, mode, lib);
}

/// One call for zcot / scot / rcot; strategy or framework blocks are captured
/// when present.
inline Result<RunTrace> run_baseline(const TaskInstance& task, const RunConfig& cfg, Gateway& gw,
                                     BackendMode mode,
                                     const TemplateLibrary& lib = TemplateLibrary::builtin()) {
  if (cfg.method != Method::zcot && cfg.method != Method::scot && cfg.method != Method::rcot)
    return make_error(Errc::precondition, "run_baseline requires a single-call method");
  return detail::run_staged(task, cfg, gw, mode, lib);
}

/// Self-consistency wrapper: pre-answer stages run once, then k answer-stage
/// samples at sc_temperature with sample_index 0..k-1. The vote is over
/// samples that parsed; fewer than ceil(k/2) parsed samples fails the trace.
inline Result<RunTrace> run_with_sc(const TaskInstance& task, const RunConfig& cfg, Gateway& gw,
                                    BackendMode mode,
                                    const TemplateLibrary& lib = TemplateLibrary::builtin()) {
  if (cfg.sc_samples < 2)
    return make_error(Errc::precondition, "self-consistency requires sc_samples >= 2");
  if (auto v = cfg.validate(); !v.ok()) return v.error();

  auto pre = detail::pre_answer_stages(task, cfg, gw, mode, lib);
  if (!pre.ok()) return pre.error();
  RunTrace trace = pre.take();
  if (trace.status == TraceStatus::parse_fail) return trace;  // pre-answer stage failed to parse

  auto prompt = detail::answer_stage_prompt(task, cfg, trace, lib);
  if (!prompt.ok()) return prompt.error().with_stage("answer_gen");

  const int k = cfg.sc_samples;
  struct Sample {
    detail::ParsedAnswer parsed;
    bool ok = false;
  };
  std::vector<Sample> samples(static_cast<size_t>(k));
  std::optional<Error> sample_error;
  for (int i = 0; i < k; ++i) {
    auto text = detail::call_stage(gw, mode, cfg, trace, "answer_gen", prompt.value(),
                                   cfg.sc_temperature, i);
    if (!text.ok()) {
      if (!sample_error) sample_error = text.error();
      continue;  // per-sample failures are tolerated up to the budget
    }
    auto parsed = detail::parse_answer_text(text.value(), task.answer_kind);
    if (!parsed.ok()) {
      if (!sample_error) sample_error = parsed.error().with_stage("answer_gen");
      continue;
    }
    samples[static_cast<size_t>(i)].parsed = parsed.take();
    samples[static_cast<size_t>(i)].ok = true;
  }

  std::vector<std::string> answers;
  for (const auto& s : samples)
    if (s.ok) answers.push_back(s.parsed.result.normalized_answer);

  if (answers.empty()) {
    Error cause = make_error(Errc::majority_undefined,
                             "no answer sample parsed (k=" + std::to_string(k) + ")");
    if (sample_error) cause.cause = sample_error->code;
    return detail::fail_trace(std::move(trace), "answer_gen", std::move(cause));
  }
  const int needed = (k + 1) / 2;
  if (static_cast<int>(answers.size()) < needed) {
    Error cause = make_error(Errc::sample_budget_exceeded,
                             std::to_string(answers.size()) + " of " + std::to_string(k) +
                                 " samples parsed, need " + std::to_string(needed));
    return detail::fail_trace(std::move(trace), "answer_gen", std::move(cause));
  }

  // The earliest winning sample's reasoning is kept as the representative.
  const std::string winner = majority_vote(answers);
  for (const auto& s : samples) {
    if (s.ok && s.parsed.result.normalized_answer == winner) {
      trace.result = s.parsed.result;
      if (cfg.method == Method::scot) trace.strategy = s.parsed.strategy;
      if (cfg.method == Method::rcot) trace.framework = s.parsed.framework;
      break;
    }
  }
  return trace;
}

/// Dispatches on method and self-consistency setting.
inline Result<RunTrace> run_task(const TaskInstance& task, const RunConfig& cfg, Gateway& gw,
                                 BackendMode mode,
                                 const TemplateLibrary& lib = TemplateLibrary::builtin()) {
  if (cfg.sc_samples >= 2) return run_with_sc(task, cfg, gw, mode, lib);
  switch (cfg.method) {
    case Method::zcot:
    case Method::scot:
    case Method::rcot: return run_baseline(task, cfg, gw, mode, lib);
    case Method::dip_r: return run_dip_r(task, cfg, gw, mode, lib);
    case Method::dip: return run_dip(task, cfg, gw, mode, lib);
  }
  return make_error(Errc::precondition, "unreachable method");
}

}  // namespace dip

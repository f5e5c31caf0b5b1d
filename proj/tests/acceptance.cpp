// Acceptance gate: each criterion prints exactly one PASS/FAIL line and the
// process exits nonzero if any failed. Expected values are pinned here as
// literals on purpose; loosening them is a deliberate act, not drift.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dip/dip.hpp"
#include "support/fixtures.hpp"

using namespace dip;

namespace {

struct Criterion {
  int number;
  const char* description;
  bool passed = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && passed) {
      passed = false;
      detail = what;
    }
  }
};

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// 1. Call accounting
// ---------------------------------------------------------------------------

void criterion_call_counts(Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  const auto task = fixtures::small_option_task("gate_0001");

  struct Case {
    Method method;
    int sc_samples;
    int expected_calls;
  };
  std::vector<Case> cases = {
      {Method::zcot, 0, 1}, {Method::scot, 0, 1},  {Method::rcot, 0, 1},
      {Method::dip_r, 0, 3}, {Method::dip, 0, 4},
  };
  for (int k : {3, 5, 10}) {
    cases.push_back({Method::zcot, k, k});
    cases.push_back({Method::dip, k, 3 + k});
  }

  for (const auto& cs : cases) {
    TempDir dir("gate-calls");
    auto backend = std::make_shared<ScriptedBackend>();
    backend->set_default(fixtures::auto_responder({"A"}));
    Gateway gw(dir.path, backend);
    RunConfig cfg;
    cfg.method = cs.method;
    cfg.sc_samples = cs.sc_samples;

    const std::string label = std::string(method_name(cs.method)) +
                              (cs.sc_samples ? "+sc" + std::to_string(cs.sc_samples) : "");
    c.expect(cfg.calls_per_task() == cs.expected_calls,
             label + ": calls_per_task() = " + std::to_string(cfg.calls_per_task()) +
                 ", expected " + std::to_string(cs.expected_calls));
    auto trace = run_task(task, cfg, gw, BackendMode::record);
    if (!trace.ok()) {
      c.expect(false, label + ": run failed: " + trace.error().to_string());
      continue;
    }
    c.expect(static_cast<int>(backend->call_count()) == cs.expected_calls,
             label + ": backend saw " + std::to_string(backend->call_count()) + " calls, expected " +
                 std::to_string(cs.expected_calls));
    c.expect(trace.value().call_count() == cs.expected_calls,
             label + ": trace recorded " + std::to_string(trace.value().call_count()) +
                 " calls, expected " + std::to_string(cs.expected_calls));
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(seconds < 5.0,
           "call-count checks took " + format_fixed2(seconds) + "s, budget is 5s");
}

// ---------------------------------------------------------------------------
// 2. Case-study replay
// ---------------------------------------------------------------------------

void criterion_case_study(Criterion& c) {
  TempDir dir("gate-case");
  const auto task = fixtures::case_study_task();
  const std::vector<TaskInstance> tasks = {task};

  auto config_for = [](Method m) {
    RunConfig cfg;
    cfg.method = m;
    cfg.n_rationales = 5;
    return cfg;
  };

  {
    auto backend = std::make_shared<ScriptedBackend>();
    fixtures::install_case_study_rules(*backend);
    Gateway recorder(dir.path, backend);
    for (Method m : kAllMethods) {
      auto trace = run_task(task, config_for(m), recorder, BackendMode::record);
      if (!trace.ok())
        c.expect(false, std::string("recording ") + method_name(m) + " failed: " +
                            trace.error().to_string());
    }
  }

  // Replay needs no backend at all.
  Gateway replayer(dir.path, nullptr);
  for (Method m : kAllMethods) {
    auto trace = run_task(task, config_for(m), replayer, BackendMode::replay);
    if (!trace.ok()) {
      c.expect(false, std::string("replaying ") + method_name(m) + " failed: " +
                          trace.error().to_string());
      continue;
    }
    const std::string expected = m == Method::dip ? "D" : "F";
    c.expect(trace.value().result.normalized_answer == expected,
             std::string(method_name(m)) + " answered '" +
                 trace.value().result.normalized_answer + "', expected '" + expected + "'");
    const bool should_be_correct = m == Method::dip;
    c.expect((trace.value().result.normalized_answer == task.gold_answer) == should_be_correct,
             std::string(method_name(m)) + " correctness disagrees with the expectation");

    auto acc = score({trace.value()}, tasks);
    if (!acc.ok()) {
      c.expect(false, std::string("scoring ") + method_name(m) + " failed");
      continue;
    }
    const std::string want = should_be_correct ? "100.00" : "0.00";
    c.expect(format_fixed2(acc.value()) == want,
             std::string(method_name(m)) + " scored " + format_fixed2(acc.value()) +
                 ", expected " + want);
  }
}

// ---------------------------------------------------------------------------
// 3. Token cost identities
// ---------------------------------------------------------------------------

std::vector<RunTrace> token_traces(int stages_per_trace) {
  std::vector<RunTrace> traces;
  for (int i = 0; i < 100; ++i) {
    RunTrace t;
    t.task_id = "tok_" + std::to_string(i);
    t.method = Method::zcot;
    t.result.normalized_answer = "A";
    for (int s = 0; s < stages_per_trace; ++s) {
      StageRecord rec;
      rec.stage = "answer_gen";
      rec.record.request_digest = std::string(64, 'b');
      rec.record.response_text = "r";
      rec.record.input_tokens = i < 46 ? 298 : 299;   // averages 298.54
      rec.record.output_tokens = i < 37 ? 376 : 377;  // averages 376.63
      rec.record.backend = RecordSource::mock;
      t.stage_records.push_back(std::move(rec));
    }
    traces.push_back(std::move(t));
  }
  return traces;
}

void criterion_token_identities(Criterion& c) {
  auto single = aggregate_tokens(token_traces(1));
  if (!single.ok()) {
    c.expect(false, "aggregation failed: " + single.error().to_string());
    return;
  }
  c.expect(format_fixed2(single.value().input) == "298.54",
           "avg input formatted as " + format_fixed2(single.value().input));
  c.expect(format_fixed2(single.value().output) == "376.63",
           "avg output formatted as " + format_fixed2(single.value().output));
  c.expect(format_fixed2(single.value().total) == "675.17",
           "avg total formatted as " + format_fixed2(single.value().total));
  c.expect(cents_round2(single.value().input) + cents_round2(single.value().output) ==
               cents_round2(single.value().total),
           "cents of input + output do not add up to cents of total");

  auto tripled = aggregate_tokens(token_traces(3));
  c.expect(tripled.ok() && format_fixed2(tripled.value().input) == "895.62",
           "3x stage average is " +
               (tripled.ok() ? format_fixed2(tripled.value().input) : std::string("error")) +
               ", expected 895.62");
  auto fived = aggregate_tokens(token_traces(5));
  c.expect(fived.ok() && format_fixed2(fived.value().input) == "1492.70",
           "5x stage average is " +
               (fived.ok() ? format_fixed2(fived.value().input) : std::string("error")) +
               ", expected 1492.70");
}

// ---------------------------------------------------------------------------
// 4. Shared batched diverge stages
// ---------------------------------------------------------------------------

void criterion_batch_sharing(Criterion& c) {
  TempDir dir("gate-batch");
  auto backend = std::make_shared<ScriptedBackend>();
  backend->set_default(fixtures::auto_responder({"A"}));
  Gateway gw(dir.path, backend);
  const auto task = fixtures::small_option_task("gate_0004");

  RunConfig cfg;
  cfg.method = Method::dip;
  cfg.use_batch_protocol = true;
  cfg.batch_n = 9;

  std::string rationale_digest, plan_digest;
  for (int n : {1, 3, 5, 7, 9}) {
    cfg.n_rationales = n;
    auto trace = run_task(task, cfg, gw, BackendMode::record);
    if (!trace.ok()) {
      c.expect(false, "n=" + std::to_string(n) + " failed: " + trace.error().to_string());
      return;
    }
    const auto& records = trace.value().stage_records;
    if (records.size() != 4) {
      c.expect(false, "n=" + std::to_string(n) + " produced " +
                          std::to_string(records.size()) + " stage records");
      return;
    }
    if (rationale_digest.empty()) {
      rationale_digest = records[0].record.request_digest;
      plan_digest = records[1].record.request_digest;
    } else {
      c.expect(records[0].record.request_digest == rationale_digest,
               "n=" + std::to_string(n) + " has a different stage-1 request digest");
      c.expect(records[1].record.request_digest == plan_digest,
               "n=" + std::to_string(n) + " has a different stage-2 request digest");
    }
    c.expect(trace.value().rationales &&
                 trace.value().rationales->items.size() == static_cast<size_t>(n),
             "n=" + std::to_string(n) + " kept the wrong number of rationales");
  }

  // Prefix law over randomized batches: truncation keeps the first k items
  // verbatim and composes (truncate to j then to k equals truncate to k).
  std::mt19937 rng(20260825);
  std::uniform_int_distribution<int> size_dist(1, 9);
  std::uniform_int_distribution<int> len_dist(1, 24);
  std::uniform_int_distribution<int> char_dist(0, 61);
  auto random_item = [&] {
    static const char* alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    std::string s;
    const int len = len_dist(rng);
    for (int i = 0; i < len; ++i) s.push_back(alphabet[char_dist(rng)]);
    return s;
  };

  for (int iter = 0; iter < 1000 && c.passed; ++iter) {
    RationaleSet batch;
    const int m = size_dist(rng);
    for (int i = 0; i < m; ++i) batch.items.push_back(random_item());
    batch.source_digest = sha256_hex("batch " + std::to_string(iter));

    std::uniform_int_distribution<int> k_dist(1, m);
    const int k = k_dist(rng);
    auto direct = truncate_prefix(batch, k);
    if (!direct.ok()) {
      c.expect(false, "iter " + std::to_string(iter) + ": truncation failed");
      return;
    }
    c.expect(direct.value().items.size() == static_cast<size_t>(k),
             "iter " + std::to_string(iter) + ": wrong prefix size");
    for (int i = 0; i < k; ++i)
      c.expect(direct.value().items[static_cast<size_t>(i)] ==
                   batch.items[static_cast<size_t>(i)],
               "iter " + std::to_string(iter) + ": item " + std::to_string(i) + " changed");
    c.expect(direct.value().source_digest == batch.source_digest,
             "iter " + std::to_string(iter) + ": source digest changed");

    std::uniform_int_distribution<int> j_dist(k, m);
    const int j = j_dist(rng);
    auto via_j = truncate_prefix(batch, j);
    if (via_j.ok()) {
      auto composed = truncate_prefix(via_j.value(), k);
      c.expect(composed.ok() && composed.value().items == direct.value().items,
               "iter " + std::to_string(iter) + ": truncation does not compose");
    }

    auto too_far = truncate_prefix(batch, m + 1);
    c.expect(!too_far.ok() && too_far.error().code == Errc::k_too_large,
             "iter " + std::to_string(iter) + ": oversized truncation not rejected");
  }
}

// ---------------------------------------------------------------------------
// 5. Majority vote against a brute-force oracle
// ---------------------------------------------------------------------------

void criterion_vote_oracle(Criterion& c) {
  static const char letters[] = {'A', 'B', 'C', 'D', 'E', 'F'};
  long checked = 0;

  for (int len = 1; len <= 5; ++len) {
    std::vector<int> odometer(static_cast<size_t>(len), 0);
    while (true) {
      std::vector<std::string> answers;
      for (int i = 0; i < len; ++i)
        answers.emplace_back(1, letters[odometer[static_cast<size_t>(i)]]);

      // Oracle: highest count wins; the leftmost element holding a maximal
      // count is, by construction, the earliest first occurrence.
      std::map<std::string, int> counts;
      for (const auto& a : answers) ++counts[a];
      int best = 0;
      for (const auto& [_, n] : counts) best = std::max(best, n);
      std::string expected;
      for (const auto& a : answers)
        if (counts[a] == best) {
          expected = a;
          break;
        }

      const std::string got = majority_vote(answers);
      if (got != expected) {
        std::string ballot;
        for (const auto& a : answers) ballot += a;
        c.expect(false, "ballot " + ballot + ": vote '" + got + "', oracle '" + expected + "'");
        return;
      }
      ++checked;

      int pos = len - 1;
      while (pos >= 0 && ++odometer[static_cast<size_t>(pos)] == 6) {
        odometer[static_cast<size_t>(pos)] = 0;
        --pos;
      }
      if (pos < 0) break;
    }
  }
  c.expect(checked == 9330, "enumerated " + std::to_string(checked) + " ballots, expected 9330");
}

// ---------------------------------------------------------------------------
// 6. Parser totality under fuzzing
// ---------------------------------------------------------------------------

void criterion_parser_fuzz(Criterion& c) {
  std::mt19937 rng(424242);
  std::uniform_int_distribution<int> len_dist(0, 300);
  std::uniform_int_distribution<int> byte_dist(0, 255);
  std::uniform_int_distribution<int> n_dist(1, 9);

  long processed = 0;
  try {
    for (int i = 0; i < 10000; ++i) {
      std::string s;
      const int len = len_dist(rng);
      s.reserve(static_cast<size_t>(len));
      for (int j = 0; j < len; ++j) s.push_back(static_cast<char>(byte_dist(rng)));

      for (TagName tag : {TagName::chain_of_thought, TagName::final_answer, TagName::strategy,
                          TagName::reasoning_framework})
        (void)extract_tagged(s, tag);
      (void)parse_rationales(s, n_dist(rng));
      (void)parse_plans(s, n_dist(rng));
      (void)parse_induced_plan(s, "fuzz-digest");
      (void)normalize_answer(s, AnswerKind::option_letter);
      (void)normalize_answer(s, AnswerKind::free_text);
      ++processed;
    }
  } catch (const std::exception& e) {
    c.expect(false, "input " + std::to_string(processed) + " threw: " + e.what());
    return;
  } catch (...) {
    c.expect(false, "input " + std::to_string(processed) + " threw a non-standard exception");
    return;
  }
  c.expect(processed == 10000,
           "processed " + std::to_string(processed) + " inputs, expected 10000");
}

// ---------------------------------------------------------------------------
// 7. Byte-identical replays
// ---------------------------------------------------------------------------

void criterion_replay_determinism(Criterion& c) {
  TempDir dir("gate-replay");
  std::vector<TaskInstance> tasks;
  for (int i = 0; i < 4; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "gate_%04d", i);
    tasks.push_back(fixtures::small_option_task(id));
  }
  if (auto w = write_dataset(dir.path / "tasks.jsonl", tasks); !w.ok()) {
    c.expect(false, "cannot write dataset");
    return;
  }

  RunnerSettings base;
  base.config.method = Method::dip;
  base.dataset_path = dir.path / "tasks.jsonl";
  base.cache_dir = dir.path / "cache";

  {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->set_default(fixtures::auto_responder({"A"}));
    // One task is scripted to answer without tags, so the parse-failure path
    // is part of what must replay deterministically.
    backend->add_rule(
        [](const ChatRequest& req) {
          return req.messages.front().text.find("gate_0002") != std::string::npos &&
                 fixtures::classify_prompt(req.messages.front().text) ==
                     fixtures::StageKind::answer;
        },
        ScriptedBackend::reply_text("tagless"));
    RunnerSettings record = base;
    record.run_dir = dir.path / "recording";
    record.mode = BackendMode::record;
    record.backend = backend;
    auto summary = execute_run(record);
    if (!summary.ok() || !summary.value().manifest.finished()) {
      c.expect(false, "recording run failed");
      return;
    }
  }

  for (const char* name : {"replay1", "replay2"}) {
    RunnerSettings replay = base;
    replay.run_dir = dir.path / name;
    replay.mode = BackendMode::replay;
    auto summary = execute_run(replay);
    if (!summary.ok() || summary.value().manifest.count(TaskStatus::error) != 0) {
      c.expect(false, std::string(name) + " did not complete cleanly");
      return;
    }
  }

  int compared = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path / "replay1" / "traces")) {
    const auto twin = dir.path / "replay2" / "traces" / entry.path().filename();
    if (!std::filesystem::exists(twin)) {
      c.expect(false, "missing twin trace " + entry.path().filename().string());
      return;
    }
    c.expect(slurp(entry.path()) == slurp(twin),
             "trace bytes differ: " + entry.path().filename().string());
    ++compared;
  }
  c.expect(compared == 4, "compared " + std::to_string(compared) + " traces, expected 4");
  c.expect(slurp(dir.path / "replay1" / "report.md") == slurp(dir.path / "replay2" / "report.md"),
           "report.md bytes differ between replays");
  c.expect(slurp(dir.path / "replay1" / "report.csv") ==
               slurp(dir.path / "replay2" / "report.csv"),
           "report.csv bytes differ between replays");
}

// ---------------------------------------------------------------------------
// 8. Exact report deltas
// ---------------------------------------------------------------------------

void criterion_report_deltas(Criterion& c) {
  std::vector<ReportRow> rows = {
      {"model-one", Method::zcot, 77.74, 0.0, 100.0, 50.0, 150.0, 100},
      {"model-one", Method::dip, 84.46, 0.0, 400.0, 200.0, 600.0, 100},
      {"model-two", Method::zcot, 35.00, 0.0, 100.0, 50.0, 150.0, 100},
      {"model-two", Method::dip, 32.00, 0.0, 400.0, 200.0, 600.0, 100},
  };
  auto md = emit_report(rows, Method::zcot, ReportFormat::markdown);
  if (!md.ok()) {
    c.expect(false, "markdown emission failed");
    return;
  }
  c.expect(md.value().find("<span style=\"color:blue\">+6.72</span>") != std::string::npos,
           "77.74 -> 84.46 is not marked as a +6.72 improvement");
  c.expect(md.value().find("<span style=\"color:red\">-3.00</span>") != std::string::npos,
           "35.00 -> 32.00 is not marked as a -3.00 degradation");
  for (const char* cell : {"77.74", "84.46", "35.00", "32.00"})
    c.expect(md.value().find(cell) != std::string::npos,
             std::string("accuracy cell ") + cell + " missing");
  c.expect(md.value().find("| model-one | zcot | 77.74 | 0.00 |") != std::string::npos,
           "baseline delta is not a plain 0.00");

  auto csv = emit_report(rows, Method::zcot, ReportFormat::csv);
  if (!csv.ok()) {
    c.expect(false, "csv emission failed");
    return;
  }
  c.expect(csv.value().find(",+6.72,") != std::string::npos, "csv lacks the +6.72 delta");
  c.expect(csv.value().find(",-3.00,") != std::string::npos, "csv lacks the -3.00 delta");
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "per-question call counts match every method and self-consistency setting"},
      {2, "the recorded case study replays with only the full pipeline answering correctly"},
      {3, "token cost averages reproduce the per-question identities exactly"},
      {4, "batched diverge stages share identical requests across rationale counts"},
      {5, "majority voting matches a brute-force oracle on all short ballots"},
      {6, "parsers survive ten thousand random byte strings"},
      {7, "two replays of one recording produce byte-identical traces and reports"},
      {8, "report deltas mark improvement and degradation at exact cent precision"},
  };

  criterion_call_counts(criteria[0]);
  criterion_case_study(criteria[1]);
  criterion_token_identities(criteria[2]);
  criterion_batch_sharing(criteria[3]);
  criterion_vote_oracle(criteria[4]);
  criterion_parser_fuzz(criteria[5]);
  criterion_replay_determinism(criteria[6]);
  criterion_report_deltas(criteria[7]);

  int failures = 0;
  for (const auto& c : criteria) {
    std::string line = std::string(c.passed ? "PASS" : "FAIL") + " criterion " +
                       std::to_string(c.number) + ": " + c.description;
    if (!c.passed) {
      line += " [" + c.detail + "]";
      ++failures;
    }
    std::puts(line.c_str());
  }
  return failures == 0 ? 0 : 1;
}

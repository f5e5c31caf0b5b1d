#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dip/result.hpp"
#include "dip/tagparse.hpp"

namespace dip {

enum class Suite { bbh, livebench_reasoning, custom };

inline const char* suite_name(Suite s) {
  switch (s) {
    case Suite::bbh: return "bbh";
    case Suite::livebench_reasoning: return "livebench_reasoning";
    case Suite::custom: return "custom";
  }
  return "custom";
}

inline Result<Suite> suite_from_name(const std::string& s) {
  if (s == "bbh") return Suite::bbh;
  if (s == "livebench_reasoning") return Suite::livebench_reasoning;
  if (s == "custom") return Suite::custom;
  return make_error(Errc::schema_error, "unknown suite: " + s);
}

/// One benchmark question. gold_answer is stored in normalized form.
struct TaskInstance {
  std::string task_id;
  Suite suite = Suite::custom;
  std::string task_family;  // subtask within the suite, may be empty
  std::string question_text;
  std::vector<std::string> options;  // empty for free-form tasks
  std::string gold_answer;
  AnswerKind answer_kind = AnswerKind::option_letter;
  std::string task_instructions;
  std::string output_format;
};

inline nlohmann::json to_json(const TaskInstance& t) {
  return nlohmann::json{{"task_id", t.task_id},
                        {"suite", suite_name(t.suite)},
                        {"task_family", t.task_family},
                        {"question_text", t.question_text},
                        {"options", t.options},
                        {"gold_answer", t.gold_answer},
                        {"answer_kind", answer_kind_name(t.answer_kind)},
                        {"task_instructions", t.task_instructions},
                        {"output_format", t.output_format}};
}

/// Validates invariants: non-empty id/question, normalizable gold answer,
/// options only with option_letter kind. Normalizes gold_answer in place.
inline Result<void> validate_task(TaskInstance& t) {
  if (t.task_id.empty()) return make_error(Errc::schema_error, "task_id is empty");
  if (t.question_text.empty())
    return make_error(Errc::schema_error, "task " + t.task_id + ": question_text is empty");
  if (!t.options.empty() && t.answer_kind != AnswerKind::option_letter)
    return make_error(Errc::schema_error,
                      "task " + t.task_id + ": options require answer_kind option_letter");
  auto gold = normalize_answer(t.gold_answer, t.answer_kind);
  if (!gold.ok())
    return make_error(Errc::schema_error,
                      "task " + t.task_id + ": gold_answer does not normalize: " +
                          gold.error().message);
  t.gold_answer = gold.take();
  return Result<void>{};
}

inline Result<TaskInstance> task_from_json(const nlohmann::json& j) {
  try {
    TaskInstance t;
    t.task_id = j.at("task_id").get<std::string>();
    auto suite = suite_from_name(j.value("suite", std::string{"custom"}));
    if (!suite.ok()) return suite.error();
    t.suite = suite.value();
    t.task_family = j.value("task_family", std::string{});
    t.question_text = j.at("question_text").get<std::string>();
    if (j.contains("options")) t.options = j.at("options").get<std::vector<std::string>>();
    t.gold_answer = j.at("gold_answer").get<std::string>();
    auto kind = answer_kind_from_name(j.value("answer_kind", std::string{"option_letter"}));
    if (!kind.ok()) return kind.error();
    t.answer_kind = kind.value();
    t.task_instructions = j.value("task_instructions", std::string{});
    t.output_format = j.value("output_format", std::string{});
    if (auto v = validate_task(t); !v.ok()) return v.error();
    return t;
  } catch (const nlohmann::json::exception& e) {
    return make_error(Errc::schema_error, std::string("bad task record: ") + e.what());
  }
}

}  // namespace dip

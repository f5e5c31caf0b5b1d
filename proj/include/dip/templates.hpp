#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dip/chat.hpp"
#include "dip/result.hpp"
#include "dip/tagparse.hpp"
#include "dip/task.hpp"

namespace dip {

/// Bumped whenever any template text changes; recorded in run manifests so
/// results are attributable to an exact prompt wording.
inline constexpr const char* kTemplateVersion = "dip-templates-v1";

enum class PromptKind {
  rationale_gen,
  plan_gen,
  plan_gen_direct,  // plans straight from the question, no rationales
  plan_induction,
  answer_gen,
  zcot,
  scot,
  rcot,
};

inline constexpr PromptKind kAllPromptKinds[] = {
    PromptKind::rationale_gen, PromptKind::plan_gen,  PromptKind::plan_gen_direct,
    PromptKind::plan_induction, PromptKind::answer_gen, PromptKind::zcot,
    PromptKind::scot,           PromptKind::rcot,
};

inline const char* prompt_kind_name(PromptKind k) {
  switch (k) {
    case PromptKind::rationale_gen: return "rationale_gen";
    case PromptKind::plan_gen: return "plan_gen";
    case PromptKind::plan_gen_direct: return "plan_gen_direct";
    case PromptKind::plan_induction: return "plan_induction";
    case PromptKind::answer_gen: return "answer_gen";
    case PromptKind::zcot: return "zcot";
    case PromptKind::scot: return "scot";
    case PromptKind::rcot: return "rcot";
  }
  return "answer_gen";
}

/// A fully rendered prompt, ready to become the user message of a ChatRequest.
struct PromptText {
  PromptKind kind;
  std::string text;

  std::vector<Message> as_messages() const { return {Message{Role::user, text}}; }
};

/// Everything rendering needs: the template kind plus all slot values.
/// Rendering is a pure function of this struct.
struct PromptSpec {
  PromptKind kind;
  std::string task_instructions;
  std::string output_format;
  std::map<std::string, std::string> body_slots;
};

namespace detail {

// Builtin template texts. These are byte-identical to assets/templates/*.txt;
// a test enforces the equality so the shipped files stay authoritative.

inline constexpr const char* kRationaleGenTemplate = R"TPL(<task_instructions>
{{task_instructions}}
</task_instructions>

<question>
{{question}}
</question>

Carefully consider the question above. Generate exactly {{n}} distinct high-level rationales, each describing a different problem-solving angle for the question. Do not solve the question yet.
Present the rationales as a numbered list in the following format:
(1) [First rationale]
(2) [Second rationale]
[Continue through ({{n}})]

Note: Do not use programming or code to solve this question.
)TPL";

inline constexpr const char* kPlanGenTemplate = R"TPL(<task_instructions>
{{task_instructions}}
</task_instructions>

<question>
{{question}}
</question>

<rationales>
{{rationales}}
</rationales>

For each rationale above, write one step-by-step draft plan that follows that rationale to solve the question. Plan i must correspond to rationale i. Present exactly {{n}} plans in the following format:
Plan 1:
Step 1: [First step]
Step 2: [Second step]
[Continue as necessary]
Plan 2:
Step 1: [First step]
[Continue as necessary]
[Continue through Plan {{n}}]

Note: Do not use programming or code to solve this question.
)TPL";

inline constexpr const char* kPlanGenDirectTemplate = R"TPL(<task_instructions>
{{task_instructions}}
</task_instructions>

<question>
{{question}}
</question>

Carefully consider the question above. Write exactly {{n}} distinct step-by-step draft plans for solving it, each taking a different problem-solving angle. Present the plans in the following format:
Plan 1:
Step 1: [First step]
Step 2: [Second step]
[Continue as necessary]
[Continue through Plan {{n}}]

Note: Do not use programming or code to solve this question.
)TPL";

inline constexpr const char* kPlanInductionTemplate = R"TPL(<task_instructions>
{{task_instructions}}
</task_instructions>

<question>
{{question}}
</question>

<draft_plans>
{{draft_plans}}
</draft_plans>

The draft plans above approach the question from diverse perspectives. Induce one final step-by-step plan that incorporates the diverse perspectives of the draft plans and best guides solving the question. Present the final plan as numbered steps in the following format:
Step 1: [First step]
Step 2: [Second step]
[Add additional steps if necessary]

Note: Do not use programming or code to solve this question.
)TPL";

inline constexpr const char* kAnswerGenTemplate = R"TPL(<task_instructions>
{{task_instructions}}
</task_instructions>

<reasoning_framework>
{{reasoning_framework}}
</reasoning_framework>

<output_format>
{{output_format}}
</output_format>

Follow these steps carefully:
1. Based on the reasoning_framework, provide a step-by-step chain of thought that answers the question. Present your chain of thought in the following format:
<chain_of_thought>
[Your step-by-step chain of thought here]
</chain_of_thought>

2. Based on your chain_of_thought, provide the final answer according to the rules specified in the output_format section.
If unsure and "Output Format" is option, guess the closest option. Present your final answer in the following format:
<final_answer>
[Your final answer here]
</final_answer>

Note:
- Do not use programming or code to solve this question.
- It's crucial to follow this structure and include both the chain of thought and the final answer in your response.

<question>
{{question}}
</question>
)TPL";

inline constexpr const char* kZcotTemplate = R"TPL(<task_instruction>
{{task_instruction}}
</task_instruction>

Note: Do not use programming or code to solve this question.

<output_format>
{{output_format}}
</output_format>

Follow these steps carefully:
1. Provide a step-by-step chain of thought that answers the question.
<chain_of_thought>
[Your step-by-step chain of thought here]
</chain_of_thought>

2. Based on your chain_of_thought, provide the final answer according to the rules specified in the output_format section.
If unsure and "Output Format" is option, guess the closest option. Present your final answer in the following format:
<final_answer>
[Your final answer here]
</final_answer>

<question>
{{question}}
</question>
)TPL";

inline constexpr const char* kScotTemplate = R"TPL(<task_instruction>
{{task_instruction}}
</task_instruction>

<output_format>
{{output_format}}
</output_format>

Follow these steps carefully:
1. Carefully consider the problem and generate the strategic knowledge that would best guide the problem-solving process.
<strategy>
[Your strategy here]
</strategy>

2. Provide a step-by-step chain of thought that answers the question.
<chain_of_thought>
[Your step-by-step chain of thought here]
</chain_of_thought>

3. Based on your chain_of_thought, provide the final answer according to the rules specified in the output_format section.
If unsure and "Output Format" is option, guess the closest option. Present your final answer in the following format:
<final_answer>
[Your final answer here]
</final_answer>

Note: Do not use programming or code to solve this question.

<question>
{{question}}
</question>
)TPL";

inline constexpr const char* kRcotTemplate = R"TPL(<task_instruction>
{{task_instruction}}
</task_instruction>

<output_format>
{{output_format}}
</output_format>

Follow these steps carefully:
1. First, carefully consider the question and propose a clear reasoning framework to guide your thinking.
<reasoning_framework>
Step 1: [First high-level reasoning step]
Step 2: [Second high-level reasoning step]
Step 3: [Third high-level reasoning step]
[Add additional steps if necessary]
</reasoning_framework>

2. Next, use the framework you've outlined to explain your reasoning step-by-step.
<chain_of_thought>
1. [Explanation aligned with Step 1]
2. [Explanation aligned with Step 2]
3. [Explanation aligned with Step 3]
[Continue as necessary]
</chain_of_thought>

3. Based on your chain_of_thought, provide the final answer according to the rules specified in the output_format section.
If unsure and "Output Format" is option, guess the closest option. Present your final answer in the following format:
<final_answer>
[Your final answer here]
</final_answer>

Note: Do not use programming or code to solve this question.

<question>
{{question}}
</question>
)TPL";

}  // namespace detail

/// Holds one template text per prompt kind and performs {{slot}} substitution.
class TemplateLibrary {
 public:
  static const TemplateLibrary& builtin() {
    static const TemplateLibrary lib = make_builtin();
    return lib;
  }

  /// Loads `<kind>.txt` for every prompt kind from a directory. All eight
  /// files must be present.
  static Result<TemplateLibrary> load_dir(const std::filesystem::path& dir,
                                          std::string version = "custom") {
    TemplateLibrary lib;
    lib.version_ = std::move(version);
    for (PromptKind kind : kAllPromptKinds) {
      const auto path = dir / (std::string(prompt_kind_name(kind)) + ".txt");
      std::ifstream in(path, std::ios::binary);
      if (!in)
        return make_error(Errc::io_error, "cannot open template file " + path.string());
      std::ostringstream buf;
      buf << in.rdbuf();
      lib.texts_[kind] = buf.str();
    }
    return lib;
  }

  const std::string& text(PromptKind kind) const { return texts_.at(kind); }
  const std::string& version() const { return version_; }

  /// Substitutes every {{slot}} in the template for `spec.kind`.
  /// task_instructions fills both the plural and singular slot names so one
  /// field serves all template kinds. Any unresolved slot is an error; no
  /// network activity can have happened by then.
  Result<PromptText> render(const PromptSpec& spec) const {
    std::map<std::string, std::string> slots = spec.body_slots;
    slots["task_instructions"] = spec.task_instructions;
    slots["task_instruction"] = spec.task_instructions;
    slots["output_format"] = spec.output_format;

    const std::string& tpl = text(spec.kind);
    std::string out;
    out.reserve(tpl.size() + 256);
    size_t pos = 0;
    while (true) {
      size_t open = tpl.find("{{", pos);
      if (open == std::string::npos) {
        out.append(tpl, pos, std::string::npos);
        break;
      }
      size_t close = tpl.find("}}", open + 2);
      if (close == std::string::npos) {
        out.append(tpl, pos, std::string::npos);
        break;
      }
      out.append(tpl, pos, open - pos);
      const std::string name = strutil::trim(tpl.substr(open + 2, close - open - 2));
      auto it = slots.find(name);
      if (it == slots.end())
        return make_error(Errc::missing_slot,
                          std::string("template ") + prompt_kind_name(spec.kind) +
                              " references missing slot {{" + name + "}}");
      out += it->second;
      pos = close + 2;
    }
    return PromptText{spec.kind, std::move(out)};
  }

 private:
  static TemplateLibrary make_builtin() {
    TemplateLibrary lib;
    lib.version_ = kTemplateVersion;
    lib.texts_[PromptKind::rationale_gen] = detail::kRationaleGenTemplate;
    lib.texts_[PromptKind::plan_gen] = detail::kPlanGenTemplate;
    lib.texts_[PromptKind::plan_gen_direct] = detail::kPlanGenDirectTemplate;
    lib.texts_[PromptKind::plan_induction] = detail::kPlanInductionTemplate;
    lib.texts_[PromptKind::answer_gen] = detail::kAnswerGenTemplate;
    lib.texts_[PromptKind::zcot] = detail::kZcotTemplate;
    lib.texts_[PromptKind::scot] = detail::kScotTemplate;
    lib.texts_[PromptKind::rcot] = detail::kRcotTemplate;
    return lib;
  }

  std::map<PromptKind, std::string> texts_;
  std::string version_;
};

/// Formats rationales in the canonical "(1) ..." list form the parsers expect.
inline std::string format_rationale_list(const RationaleSet& rs) {
  std::ostringstream out;
  for (size_t i = 0; i < rs.items.size(); ++i) {
    if (i) out << '\n';
    out << '(' << (i + 1) << ") " << rs.items[i];
  }
  return out.str();
}

/// Formats plans as "Plan i:" headers with one "Step j:" line per step.
inline std::string format_plan_block(const DraftPlanSet& ps) {
  std::ostringstream out;
  for (size_t i = 0; i < ps.plans.size(); ++i) {
    if (i) out << "\n\n";
    out << "Plan " << (i + 1) << ':';
    for (size_t j = 0; j < ps.plans[i].steps.size(); ++j)
      out << "\nStep " << (j + 1) << ": " << ps.plans[i].steps[j];
  }
  return out.str();
}

namespace detail {

inline std::string effective_task_instructions(const TaskInstance& task) {
  if (!task.task_instructions.empty()) return task.task_instructions;
  return "Answer the question below.";
}

inline std::string effective_output_format(const TaskInstance& task) {
  if (!task.output_format.empty()) return task.output_format;
  if (task.answer_kind == AnswerKind::option_letter)
    return "The output is a single letter corresponding to the correct option from the list "
           "(e.g., A, B, C, etc.).";
  return "Answer with the final result only.";
}

inline PromptSpec base_spec(const TaskInstance& task, PromptKind kind) {
  PromptSpec spec;
  spec.kind = kind;
  spec.task_instructions = effective_task_instructions(task);
  spec.output_format = effective_output_format(task);
  spec.body_slots["question"] = task.question_text;
  return spec;
}

}  // namespace detail

/// Stage 1: ask for exactly n high-level rationales.
inline Result<PromptText> render_rationale_prompt(const TaskInstance& task, int n,
                                                  const TemplateLibrary& lib =
                                                      TemplateLibrary::builtin()) {
  if (n < 1) return make_error(Errc::precondition, "rationale count must be >= 1");
  PromptSpec spec = detail::base_spec(task, PromptKind::rationale_gen);
  spec.body_slots["n"] = std::to_string(n);
  return lib.render(spec);
}

/// Stage 2: one draft plan per rationale, index-aligned.
inline Result<PromptText> render_plan_prompt(const TaskInstance& task, const RationaleSet& rs,
                                             const TemplateLibrary& lib =
                                                 TemplateLibrary::builtin()) {
  if (rs.items.empty()) return make_error(Errc::precondition, "rationale set is empty");
  for (const auto& item : rs.items)
    if (strutil::trim(item).empty())
      return make_error(Errc::precondition, "rationale set contains an empty item");
  PromptSpec spec = detail::base_spec(task, PromptKind::plan_gen);
  spec.body_slots["rationales"] = format_rationale_list(rs);
  spec.body_slots["n"] = std::to_string(rs.items.size());
  return lib.render(spec);
}

/// Rationale-free variant: n draft plans straight from the question.
inline Result<PromptText> render_plan_direct_prompt(const TaskInstance& task, int n,
                                                    const TemplateLibrary& lib =
                                                        TemplateLibrary::builtin()) {
  if (n < 1) return make_error(Errc::precondition, "plan count must be >= 1");
  PromptSpec spec = detail::base_spec(task, PromptKind::plan_gen_direct);
  spec.body_slots["n"] = std::to_string(n);
  return lib.render(spec);
}

/// Stage 3: synthesize one final plan from the draft plans.
inline Result<PromptText> render_induction_prompt(const TaskInstance& task,
                                                  const DraftPlanSet& ps,
                                                  const TemplateLibrary& lib =
                                                      TemplateLibrary::builtin()) {
  if (ps.plans.empty()) return make_error(Errc::precondition, "draft plan set is empty");
  PromptSpec spec = detail::base_spec(task, PromptKind::plan_induction);
  spec.body_slots["draft_plans"] = format_plan_block(ps);
  return lib.render(spec);
}

/// Stage 4: answer under the induced plan, tagged chain of thought + answer.
inline Result<PromptText> render_answer_prompt(const TaskInstance& task, const InducedPlan& plan,
                                               const TemplateLibrary& lib =
                                                   TemplateLibrary::builtin()) {
  if (strutil::trim(plan.text).empty())
    return make_error(Errc::precondition, "induced plan is empty");
  PromptSpec spec = detail::base_spec(task, PromptKind::answer_gen);
  spec.body_slots["reasoning_framework"] = plan.text;
  return lib.render(spec);
}

/// Single-call baselines: zcot, scot, rcot.
inline Result<PromptText> render_baseline_prompt(const TaskInstance& task, PromptKind kind,
                                                 const TemplateLibrary& lib =
                                                     TemplateLibrary::builtin()) {
  if (kind != PromptKind::zcot && kind != PromptKind::scot && kind != PromptKind::rcot)
    return make_error(Errc::precondition,
                      std::string("not a baseline prompt kind: ") + prompt_kind_name(kind));
  return lib.render(detail::base_spec(task, kind));
}

}  // namespace dip

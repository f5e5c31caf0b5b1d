#pragma once

// Shared test fixtures: a salient-translation case-study task with hand-written
// stage outputs for every method, plus a template-aware auto-responder that
// synthesizes well-formed stage outputs for any prompt.

#include <functional>
#include <regex>
#include <string>

#include "dip/backend.hpp"
#include "dip/task.hpp"

namespace fixtures {

using dip::ChatRequest;
using dip::Result;
using dip::ScriptedBackend;

// ---------------------------------------------------------------------------
// Case-study task: spot the error type in a German-to-English translation.
// Gold answer is (D) Named Entities; the one-call baselines and the
// no-rationale variant all land on F, only the full pipeline reaches D.
// ---------------------------------------------------------------------------

inline const char* case_study_question() {
  return
      "The following translations from German to English contain a particular error. That "
      "error will be one of the following types: Named Entities: An entity (names, places, "
      "locations, etc.) is changed to a different entity. Numerical Values: Numerical values "
      "(ordinals or cardinals), dates, and/or units are changed. Modifiers or Adjectives: The "
      "modifiers and adjectives pertaining to a noun are changed. Negation or Antonyms: "
      "Introduce or remove a negation or change comparatives to their antonyms. Facts: Trivial "
      "factual errors not pertaining to the above classes are introduced in the translations. "
      "Dropped Content: A significant clause in the translation is removed. Please identify "
      "that error.\n"
      "Source: Die Mexikanische Königsnatter oder San-Luis-Potosi-Königsnatter ist "
      "eine Schlange aus der Familie der Nattern.\n"
      "Translation: The Mexican King's Snake or San Luis Potosi King snake is a snake of the "
      "Lantern family.\n"
      "The translation contains an error pertaining to\n"
      "Options:\n"
      "(A) Modifiers or Adjectives\n"
      "(B) Numerical Values\n"
      "(C) Negation or Antonyms\n"
      "(D) Named Entities\n"
      "(E) Dropped Content\n"
      "(F) Facts";
}

inline dip::TaskInstance case_study_task() {
  dip::TaskInstance t;
  t.task_id = "salient_translation_error_detection_0000";
  t.suite = dip::Suite::bbh;
  t.task_family = "salient_translation_error_detection";
  t.question_text = case_study_question();
  t.options = {"(A) Modifiers or Adjectives", "(B) Numerical Values",
               "(C) Negation or Antonyms",    "(D) Named Entities",
               "(E) Dropped Content",         "(F) Facts"};
  t.answer_kind = dip::AnswerKind::option_letter;
  t.gold_answer = "(D) Named Entities";
  t.task_instructions =
      "Detect the type of error in an English translation of a German source sentence.";
  auto v = dip::validate_task(t);
  (void)v;
  return t;
}

// Stage 1: five rationales, each a different angle on the comparison.
inline const char* case_dip_rationales() {
  return
      "(1) Analyze the translation by comparing the source and target sentences to identify "
      "changes in named entities, numerical values, modifiers, negation, facts, or dropped "
      "content.\n"
      "(2) Focus on identifying changes in the family of the snake in the source and "
      "translation sentences to determine the type of error.\n"
      "(3) Examine name changes such as \"Mexikanische Königsnatter\" to \"Mexican "
      "King's Snake\" and \"San-Luis-Potosi-Königsnatter\" to \"San Luis Potosi King "
      "snake\".\n"
      "(4) Investigate whether the adjective/modifier for the family term shifts from "
      "\"Nattern\" to \"Lantern family\".\n"
      "(5) Check for any negation or antonyms introduced in the translation that could change "
      "the sentence meaning.";
}

// Stage 2: one draft plan per rationale.
inline const char* case_dip_plans() {
  return
      "Plan 1:\n"
      "Step 1: Compare the source sentence \"Die Mexikanische Königsnatter ...\" with "
      "the translation \"The Mexican King's Snake ...\" to identify changes.\n"
      "Step 2: Analyze the translation for changes in named entities (snake and family "
      "names).\n"
      "Step 3: Check for changes in numerical values, modifiers, negation, facts, or dropped "
      "content.\n"
      "Step 4: Determine the error type based on the identified changes.\n"
      "Plan 2:\n"
      "Step 1: Identify the family of the snake in the source sentence (\"der Nattern\").\n"
      "Step 2: Identify the family of the snake in the translation (\"the Lantern family\").\n"
      "Step 3: Compare the two families to determine if there is a change.\n"
      "Step 4: If a change exists, classify it as an error in named entities or "
      "modifiers/adjectives.\n"
      "Plan 3:\n"
      "Step 1: Examine the translation of \"Mexikanische Königsnatter\" to \"Mexican "
      "King's Snake\" for named-entity changes.\n"
      "Step 2: Examine \"San-Luis-Potosi-Königsnatter\" to \"San Luis Potosi King "
      "snake\" for named-entity changes.\n"
      "Step 3: Decide if the changes are significant enough to be classified as a "
      "named-entity error.\n"
      "Plan 4:\n"
      "Step 1: Identify the modifier/adjective for the family term in the source "
      "(\"Nattern\").\n"
      "Step 2: Identify the modifier/adjective for the family term in the translation "
      "(\"Lantern family\").\n"
      "Step 3: Compare the two modifiers/adjectives.\n"
      "Step 4: Classify the change as a modifier/adjective error.\n"
      "Plan 5:\n"
      "Step 1: Check the source sentence for any negations or comparatives.\n"
      "Step 2: Check the translation for any negations or comparatives.\n"
      "Step 3: Compare both sentences to determine if there is a change in negation or "
      "antonyms.";
}

// Stage 3: induced plan that aligns family names and sweeps every error type.
inline const char* case_dip_induced() {
  return
      "Step 1: Compare the source sentence \"Die Mexikanische Königsnatter oder "
      "San-Luis-Potosi-Königsnatter ist eine Schlange aus der Familie der Nattern\" with "
      "the translation \"The Mexican King's Snake or San Luis Potosi King snake is a snake of "
      "the Lantern family\" to identify any changes.\n"
      "Step 2: Analyze the translation for changes in named entities, such as the names of "
      "the snake and its family.\n"
      "Step 3: Check for changes in numerical values, modifiers, negation, facts, or dropped "
      "content.\n"
      "Step 4: Determine the type of error based on the identified changes.\n"
      "More specifically:\n"
      "- Identify the family of the snake in the source sentence (\"der Nattern\") and in the "
      "translation (\"the Lantern family\").\n"
      "- Compare the two families to determine if there is a change.\n"
      "- Examine the translation of \"Mexikanische Königsnatter\" to \"Mexican King's "
      "Snake\" and \"San-Luis-Potosi-Königsnatter\" to \"San Luis Potosi King snake\" "
      "for any changes in named entities.\n"
      "- Check if the changes are significant enough to be classified as an error in named "
      "entities or modifiers/adjectives.\n"
      "- Verify if there are any changes in negation or antonyms.\n"
      "- Verify if there are any changes in numerical values or facts.\n"
      "- Verify if any significant clause is dropped in the translation.\n"
      "Based on these steps, classify the error into one of the provided options: (A) "
      "Modifiers or Adjectives, (B) Numerical Values, (C) Negation or Antonyms, (D) Named "
      "Entities, (E) Dropped Content, (F) Facts.";
}

// Stage 4: the only response in the set that lands on the gold answer.
inline const char* case_dip_answer() {
  return
      "<chain_of_thought>\n"
      "1. Identify the source sentence and the translation.\n"
      "2. Compare named entities: \"Mexikanische Königsnatter\" and "
      "\"San-Luis-Potosi-Königsnatter\" become \"Mexican King's Snake\" and \"San Luis "
      "Potosi King snake\", which convey the same information.\n"
      "3. Check for changes in family names: the source says \"der Familie der Nattern\" "
      "while the translation says \"the Lantern family\". The family name has changed from "
      "\"Nattern\" to \"Lantern family\".\n"
      "4. Determine the type of error: \"Nattern\" names a specific family of snakes "
      "(colubrids) and \"Lantern family\" is not a recognized family, so a named entity was "
      "changed.\n"
      "5. Analyze each option: there are no numerical values, no negation, no dropped "
      "content, and no modifier change; the family-name change could be Named Entities or "
      "Facts.\n"
      "6. Conclusion: between Named Entities (D) and Facts (F), the error leans towards Named "
      "Entities because it changes the name of a specific family of snakes.\n"
      "</chain_of_thought>\n"
      "\n"
      "<final_answer>\n"
      "D\n"
      "</final_answer>";
}

// No-rationale variant, stage 2: plans drafted straight from the question.
inline const char* case_dipr_plans() {
  return
      "Plan 1:\n"
      "Step 1: Identify the key elements in the source sentence and the translation.\n"
      "Step 2: Compare the family names (\"Familie der Nattern\" vs. \"Lantern family\").\n"
      "Step 3: Determine the type of error based on this comparison.\n"
      "Plan 2:\n"
      "Step 1: Analyze the source sentence for specific details.\n"
      "Step 2: Examine the translation for changes in named entities, numerical values, "
      "modifiers, negation, or dropped content.\n"
      "Step 3: Classify the error based on the identified changes.\n"
      "Plan 3:\n"
      "Step 1: Check for changes in named entities between the source and translation.\n"
      "Step 2: Verify changes in numerical values, modifiers, or negation.\n"
      "Step 3: Identify if any content has been dropped or if there is a factual error.\n"
      "Plan 4:\n"
      "Step 1: Compare the source sentence and translation for changes in names or "
      "locations.\n"
      "Step 2: Examine whether there are changes in numerical values or units.\n"
      "Step 3: Determine if the error involves modifiers, negation, or factual errors.\n"
      "Plan 5:\n"
      "Step 1: Identify the error by comparing the family names in both sentences.\n"
      "Step 2: Classify the type of error (e.g., named entities, numerical values, "
      "modifiers).\n"
      "Step 3: Confirm the error type based on the comparison.";
}

// No-rationale variant, stage 3: a generic plan without the name-alignment cue.
inline const char* case_dipr_induced() {
  return
      "Step 1: Identify the key elements in the source sentence and the translation.\n"
      "Step 2: Compare the key elements such as family names, entities, numerical values, "
      "modifiers, and content to identify any changes.\n"
      "Step 3: Determine the type of error based on the comparison, considering the "
      "categories: Named Entities, Numerical Values, Modifiers or Adjectives, Negation or "
      "Antonyms, Facts, and Dropped Content.\n"
      "Step 4: Classify the error into one of the provided options (A, B, C, D, E, F) based "
      "on the identified change.\n"
      "Step 5: Confirm the error type based on the comparison and classification.";
}

inline const char* case_dipr_answer() {
  return
      "<chain_of_thought>\n"
      "Step 1: Identify key elements. The source names the snakes \"Mexikanische "
      "Königsnatter\" and \"San-Luis-Potosi-Königsnatter\" and the family \"der "
      "Nattern\"; the translation names them \"Mexican King's Snake\" and \"San Luis Potosi "
      "King snake\" and the family \"the Lantern family\".\n"
      "Step 2: Compare key elements. The snake names still refer to the same snakes, while "
      "the family becomes \"the Lantern family\".\n"
      "Step 3: Determine the type of error. \"Lantern family\" is not a recognized family of "
      "snakes, so the classification of the snakes is misrepresented.\n"
      "Step 4: Classify the error. Misrepresenting the family reads as a factual error about "
      "the classification.\n"
      "Step 5: Confirm the error type. The error is best classified as a factual error, "
      "which aligns with option (F) Facts.\n"
      "</chain_of_thought>\n"
      "\n"
      "<final_answer>\n"
      "F\n"
      "</final_answer>";
}

inline const char* case_zcot_answer() {
  return
      "<chain_of_thought>\n"
      "1. Identify the source sentence and its translation.\n"
      "2. Compare them: the snake names are translated accurately, but \"der Familie der "
      "Nattern\" (the colubrid family) is rendered as \"the Lantern family\".\n"
      "3. Determine the type of error: there are no numerical values, no negation change, "
      "and no dropped clause; the modifiers are generally preserved.\n"
      "4. Conclusion: stating the snake belongs to the \"Lantern family\" introduces an "
      "incorrect fact about its classification.\n"
      "5. Select the option: the error falls under Facts.\n"
      "</chain_of_thought>\n"
      "\n"
      "The final answer is:\n"
      "<final_answer>\n"
      "F\n"
      "</final_answer>";
}

inline const char* case_scot_answer() {
  return
      "<strategy>\n"
      "Analyze the source sentence and the translation, then compare them to determine the "
      "nature of the discrepancy. The key components to compare are the names of the species "
      "and the family of the species.\n"
      "</strategy>\n"
      "\n"
      "<chain_of_thought>\n"
      "1. Named entities and modifiers: the snake names are similar in both sentences and "
      "refer to the same entities.\n"
      "2. Family of the species: the source says the snake is \"aus der Familie der "
      "Nattern\" (the Colubridae family) while the translation says \"of the Lantern "
      "family\".\n"
      "3. Error identification: \"Lantern family\" does not correspond to any known snake "
      "classification, which indicates a factual error about the family.\n"
      "4. Type of error: no numerical values, negation, modifier change, or dropped content "
      "applies, so the error pertains to Facts.\n"
      "</chain_of_thought>\n"
      "\n"
      "<final_answer>\n"
      "F\n"
      "</final_answer>";
}

inline const char* case_rcot_answer() {
  return
      "<reasoning_framework>\n"
      "Step 1: Identify the key elements in the source sentence and the translation.\n"
      "Step 2: Compare the key elements to determine the type of error.\n"
      "Step 3: Analyze the differences and match them to the given error types.\n"
      "</reasoning_framework>\n"
      "\n"
      "<chain_of_thought>\n"
      "1. Key elements: the snake names, the family \"Familie der Nattern\", and their "
      "English renderings.\n"
      "2. Comparison: the names translate accurately, while \"der Nattern\" becomes \"the "
      "Lantern family\".\n"
      "3. Analysis: \"Nattern\" refers to the Colubridae family, not \"Lantern\", so the "
      "classification is wrong; the names themselves are unchanged.\n"
      "4. Error type: the closest match is Facts, a trivial factual error about the family "
      "classification.\n"
      "</chain_of_thought>\n"
      "\n"
      "<final_answer>\n"
      "F\n"
      "</final_answer>";
}

/// Wires the hand-written case-study outputs into a scripted backend. Rules
/// key off distinctive substrings of each stage prompt, so the same backend
/// serves all five methods over the case-study task.
inline void install_case_study_rules(ScriptedBackend& backend) {
  auto contains = [](const char* needle) {
    return [needle](const ChatRequest& req) {
      return req.messages.front().text.find(needle) != std::string::npos;
    };
  };
  auto both = [](ScriptedBackend::Matcher a, ScriptedBackend::Matcher b) {
    return [a = std::move(a), b = std::move(b)](const ChatRequest& req) {
      return a(req) && b(req);
    };
  };

  backend.add_rule(contains("distinct high-level rationales"),
                   ScriptedBackend::reply_text(case_dip_rationales()));
  backend.add_rule(contains("write one step-by-step draft plan that follows that rationale"),
                   ScriptedBackend::reply_text(case_dip_plans()));
  backend.add_rule(contains("distinct step-by-step draft plans"),
                   ScriptedBackend::reply_text(case_dipr_plans()));
  // Induction prompts embed the draft plans, so the plan wording tells the
  // two pipeline variants apart.
  backend.add_rule(both(contains("Induce one final step-by-step plan"),
                        contains("Identify the key elements in the source sentence")),
                   ScriptedBackend::reply_text(case_dipr_induced()));
  backend.add_rule(contains("Induce one final step-by-step plan"),
                   ScriptedBackend::reply_text(case_dip_induced()));
  // Answer prompts embed the induced plan; "More specifically:" appears only
  // in the full pipeline's plan, the "comparison and classification" step only
  // in the no-rationale variant's plan.
  backend.add_rule(contains("More specifically:"),
                   ScriptedBackend::reply_text(case_dip_answer()));
  backend.add_rule(contains("the comparison and classification"),
                   ScriptedBackend::reply_text(case_dipr_answer()));
  backend.add_rule(contains("generate the strategic knowledge"),
                   ScriptedBackend::reply_text(case_scot_answer()));
  backend.add_rule(contains("propose a clear reasoning framework"),
                   ScriptedBackend::reply_text(case_rcot_answer()));
  backend.set_default(ScriptedBackend::reply_text(case_zcot_answer()));
}

// ---------------------------------------------------------------------------
// Template-aware auto-responder: classifies any stage prompt by its distinctive
// instruction text and synthesizes a well-formed response, so pipeline tests
// can run arbitrary methods and task sets without per-prompt scripting.
// ---------------------------------------------------------------------------

enum class StageKind { rationales, plans_from_rationales, plans_direct, induction, answer };

inline StageKind classify_prompt(const std::string& prompt) {
  if (prompt.find("distinct high-level rationales") != std::string::npos)
    return StageKind::rationales;
  if (prompt.find("write one step-by-step draft plan that follows that rationale") !=
      std::string::npos)
    return StageKind::plans_from_rationales;
  if (prompt.find("distinct step-by-step draft plans") != std::string::npos)
    return StageKind::plans_direct;
  if (prompt.find("Induce one final step-by-step plan") != std::string::npos)
    return StageKind::induction;
  return StageKind::answer;
}

/// How many list items the prompt asks for ("... exactly N ...").
inline int requested_count(const std::string& prompt) {
  static const std::regex re("exactly (\\d+)");
  std::smatch m;
  if (std::regex_search(prompt, m, re)) return std::stoi(m[1]);
  return 1;
}

struct AutoResponderOptions {
  std::string answer = "D";
  /// Overrides `answer` when set; lets tests vary the letter per request
  /// (e.g. by sample_index for self-consistency votes).
  std::function<std::string(const ChatRequest&)> answer_for;
};

inline std::string synth_answer_response(const std::string& prompt, const std::string& letter) {
  std::string out;
  if (prompt.find("generate the strategic knowledge") != std::string::npos)
    out +=
        "<strategy>\nCompare the source and the candidate options before deciding.\n"
        "</strategy>\n\n";
  if (prompt.find("propose a clear reasoning framework") != std::string::npos)
    out +=
        "<reasoning_framework>\nStep 1: Identify the key elements.\nStep 2: Compare them.\n"
        "Step 3: Classify the difference.\n</reasoning_framework>\n\n";
  out +=
      "<chain_of_thought>\n1. Work through the plan.\n2. Settle on the answer.\n"
      "</chain_of_thought>\n\n<final_answer>\n" +
      letter + "\n</final_answer>";
  return out;
}

inline std::string synth_stage_response(const std::string& prompt, const std::string& letter) {
  switch (classify_prompt(prompt)) {
    case StageKind::rationales: {
      const int n = requested_count(prompt);
      std::string out;
      for (int i = 1; i <= n; ++i)
        out += "(" + std::to_string(i) + ") Consider problem-solving angle " +
               std::to_string(i) + " for this question.\n";
      return out;
    }
    case StageKind::plans_from_rationales:
    case StageKind::plans_direct: {
      const int n = requested_count(prompt);
      std::string out;
      for (int i = 1; i <= n; ++i) {
        out += "Plan " + std::to_string(i) + ":\n";
        out += "Step 1: Apply angle " + std::to_string(i) + " to the question.\n";
        out += "Step 2: Derive the answer from that angle.\n";
      }
      return out;
    }
    case StageKind::induction:
      return
          "Step 1: Combine the strongest ideas from the draft plans.\n"
          "Step 2: Execute the combined plan on the question.\n"
          "Step 3: State the answer.";
    case StageKind::answer:
      return synth_answer_response(prompt, letter);
  }
  return {};
}

inline ScriptedBackend::Responder auto_responder(AutoResponderOptions opts = {}) {
  return [opts](const ChatRequest& req) -> Result<dip::BackendReply> {
    const std::string& prompt = req.messages.front().text;
    const std::string letter = opts.answer_for ? opts.answer_for(req) : opts.answer;
    dip::BackendReply r;
    r.text = synth_stage_response(prompt, letter);
    r.input_tokens = static_cast<long>(req.prompt_chars());
    r.output_tokens = static_cast<long>(r.text.size());
    return r;
  };
}

/// Minimal multiple-choice task for call-count and vote tests.
inline dip::TaskInstance small_option_task(const std::string& id,
                                           const std::string& gold = "(A) yes") {
  dip::TaskInstance t;
  t.task_id = id;
  t.suite = dip::Suite::custom;
  t.task_family = "toy";
  t.question_text = "Question " + id + ": pick the best option.\nOptions:\n(A) yes\n(B) no";
  t.options = {"(A) yes", "(B) no"};
  t.answer_kind = dip::AnswerKind::option_letter;
  t.gold_answer = gold;
  t.task_instructions = "Pick the option that answers the question.";
  auto v = dip::validate_task(t);
  (void)v;
  return t;
}

}  // namespace fixtures

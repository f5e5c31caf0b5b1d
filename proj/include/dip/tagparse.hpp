#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dip/result.hpp"

namespace dip {

namespace strutil {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = false;
  for (char c : s) {
    if (is_space(c)) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out.push_back(' ');
    in_ws = false;
    out.push_back(c);
  }
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool ci_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

}  // namespace strutil

// ---------------------------------------------------------------------------
// Stage artifacts
// ---------------------------------------------------------------------------

/// Ordered high-level rationales, indices contiguous from 1.
struct RationaleSet {
  std::vector<std::string> items;
  std::string source_digest;
  /// Items beyond the expected count that were dropped (over-generation is
  /// tolerated, under-generation is not).
  int surplus_discarded = 0;
};

struct Plan {
  std::vector<std::string> steps;

  friend bool operator==(const Plan&, const Plan&) = default;
};

/// Ordered draft plans; plan i elaborates rationale i when produced from one.
struct DraftPlanSet {
  std::vector<Plan> plans;
  std::string source_digest;
  int surplus_discarded = 0;
};

/// The final plan synthesized from the draft plans. `steps` is a best-effort
/// decomposition; `text` is authoritative.
struct InducedPlan {
  std::string text;
  std::vector<std::string> steps;
  std::string source_digest;
};

/// Parsed final-stage output.
struct InferenceResult {
  std::string chain_of_thought;
  std::string raw_answer;
  std::string normalized_answer;
  /// The chain_of_thought tag was absent entirely.
  bool cot_missing = false;
  /// The final_answer tag was unclosed and recovered to end-of-text.
  bool answer_recovered = false;
};

enum class AnswerKind { option_letter, free_text };

inline const char* answer_kind_name(AnswerKind k) {
  return k == AnswerKind::option_letter ? "option_letter" : "free_text";
}

inline Result<AnswerKind> answer_kind_from_name(const std::string& s) {
  if (s == "option_letter") return AnswerKind::option_letter;
  if (s == "free_text") return AnswerKind::free_text;
  return make_error(Errc::schema_error, "unknown answer_kind: " + s);
}

// ---------------------------------------------------------------------------
// Tag extraction
// ---------------------------------------------------------------------------

enum class TagName { chain_of_thought, final_answer, strategy, reasoning_framework };

inline const char* tag_name_str(TagName t) {
  switch (t) {
    case TagName::chain_of_thought: return "chain_of_thought";
    case TagName::final_answer: return "final_answer";
    case TagName::strategy: return "strategy";
    case TagName::reasoning_framework: return "reasoning_framework";
  }
  return "final_answer";
}

struct ExtractedTag {
  std::string text;
  /// True when the opening tag had no close and content ran to end-of-text.
  bool recovered = false;
};

namespace detail {

/// Matches `<tag>` or `</tag>` at position i, case-insensitive on the name and
/// tolerant of whitespace inside the brackets. Returns one-past-the-'>' or
/// nullopt.
inline std::optional<size_t> match_tag_token(std::string_view text, size_t i,
                                             std::string_view tag, bool closing) {
  if (i >= text.size() || text[i] != '<') return std::nullopt;
  size_t j = i + 1;
  auto skip_ws = [&] {
    while (j < text.size() && strutil::is_space(text[j])) ++j;
  };
  skip_ws();
  if (closing) {
    if (j >= text.size() || text[j] != '/') return std::nullopt;
    ++j;
    skip_ws();
  }
  if (j + tag.size() > text.size()) return std::nullopt;
  if (!strutil::ci_equal(text.substr(j, tag.size()), tag)) return std::nullopt;
  j += tag.size();
  skip_ws();
  if (j >= text.size() || text[j] != '>') return std::nullopt;
  return j + 1;
}

inline std::optional<std::pair<size_t, size_t>> find_tag_token(std::string_view text, size_t from,
                                                               std::string_view tag, bool closing) {
  for (size_t i = from; i < text.size(); ++i) {
    if (text[i] != '<') continue;
    if (auto end = match_tag_token(text, i, tag, closing)) return std::pair{i, *end};
  }
  return std::nullopt;
}

}  // namespace detail

/// Content of the LAST well-formed `<tag>...</tag>` pair. If no pair closes but
/// an opening tag exists, content runs to end-of-text and the result is flagged
/// recovered.
inline Result<ExtractedTag> extract_tagged(std::string_view text, TagName tag) {
  const std::string_view name = tag_name_str(tag);
  std::optional<std::pair<size_t, size_t>> last_pair;  // (content begin, content end)
  std::optional<size_t> last_open_content;

  size_t pos = 0;
  while (true) {
    auto open = detail::find_tag_token(text, pos, name, /*closing=*/false);
    if (!open) break;
    last_open_content = open->second;
    auto close = detail::find_tag_token(text, open->second, name, /*closing=*/true);
    if (close) {
      last_pair = {open->second, close->first};
      pos = close->second;
    } else {
      break;
    }
  }

  if (last_pair)
    return ExtractedTag{strutil::trim(text.substr(last_pair->first,
                                                  last_pair->second - last_pair->first)),
                        false};
  if (last_open_content)
    return ExtractedTag{strutil::trim(text.substr(*last_open_content)), true};
  return make_error(Errc::tag_missing, std::string("no <") + std::string(name) + "> tag in text");
}

// ---------------------------------------------------------------------------
// Numbered-list and plan parsing
// ---------------------------------------------------------------------------

namespace detail {

enum class ListStyle { paren, dot, close_paren };  // "(1)", "1.", "1)"

inline bool at_line_start(std::string_view text, size_t i) {
  while (i > 0) {
    char c = text[i - 1];
    if (c == '\n' || c == '\r') return true;
    if (c == ' ' || c == '\t') {
      --i;
      continue;
    }
    return false;
  }
  return true;
}

/// Parses an unsigned integer at `i`; advances `i` past the digits.
inline std::optional<long> read_number(std::string_view text, size_t& i) {
  if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
  long v = 0;
  size_t start = i;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    if (i - start > 8) return std::nullopt;  // absurd index, not a list marker
    v = v * 10 + (text[i] - '0');
    ++i;
  }
  return v;
}

/// Matches a list marker of `style` at position i. Returns (number, end) on
/// match. Bare "1." / "1)" markers count only at line starts so decimals and
/// stray parentheses in prose do not split items; "(1)" is unambiguous anywhere.
inline std::optional<std::pair<long, size_t>> match_marker(std::string_view text, size_t i,
                                                           ListStyle style) {
  size_t j = i;
  switch (style) {
    case ListStyle::paren: {
      if (j >= text.size() || text[j] != '(') return std::nullopt;
      ++j;
      auto num = read_number(text, j);
      if (!num) return std::nullopt;
      if (j >= text.size() || text[j] != ')') return std::nullopt;
      return std::pair{*num, j + 1};
    }
    case ListStyle::dot:
    case ListStyle::close_paren: {
      if (!at_line_start(text, i)) return std::nullopt;
      auto num = read_number(text, j);
      if (!num) return std::nullopt;
      const char delim = style == ListStyle::dot ? '.' : ')';
      if (j >= text.size() || text[j] != delim) return std::nullopt;
      return std::pair{*num, j + 1};
    }
  }
  return std::nullopt;
}

/// Position and end of the marker for item `number` in `style`, at or after
/// `from`.
inline std::optional<std::pair<size_t, size_t>> find_marker(std::string_view text, size_t from,
                                                            ListStyle style, long number) {
  for (size_t i = from; i < text.size(); ++i) {
    if (auto m = match_marker(text, i, style)) {
      if (m->first == number) return std::pair{i, m->second};
    }
  }
  return std::nullopt;
}

/// The style of the earliest marker (any number) in the text.
inline std::optional<ListStyle> detect_style(std::string_view text) {
  for (size_t i = 0; i < text.size(); ++i) {
    for (ListStyle s : {ListStyle::paren, ListStyle::dot, ListStyle::close_paren})
      if (match_marker(text, i, s)) return s;
  }
  return std::nullopt;
}

/// Case-insensitive "Word <number>:" marker, e.g. "Plan 1:" / "Step 2:".
inline std::optional<std::pair<size_t, size_t>> find_labeled_marker(std::string_view text,
                                                                    size_t from,
                                                                    std::string_view word,
                                                                    long number) {
  for (size_t i = from; i + word.size() < text.size(); ++i) {
    if (!strutil::ci_equal(text.substr(i, word.size()), word)) continue;
    size_t j = i + word.size();
    while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
    auto num = read_number(text, j);
    if (!num || *num != number) continue;
    while (j < text.size() && (text[j] == ' ' || text[j] == '\t')) ++j;
    if (j < text.size() && text[j] == ':') return std::pair{i, j + 1};
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses "(1) ...", "1. ...", or "1) ..." numbered items; the style of the
/// earliest marker wins and is applied consistently. Fewer than `expected_n`
/// items is an error; surplus items are dropped and counted.
inline Result<RationaleSet> parse_rationales(std::string_view text, int expected_n) {
  if (expected_n < 1) return make_error(Errc::precondition, "expected_n must be >= 1");

  auto style = detail::detect_style(text);
  if (!style)
    return make_error(Errc::count_mismatch,
                      "found 0 rationales, expected " + std::to_string(expected_n));

  // Locate markers 1..expected_n in order, then the content between them.
  std::vector<std::pair<size_t, size_t>> markers;  // (start, content begin)
  size_t from = 0;
  for (long k = 1; k <= expected_n; ++k) {
    auto m = detail::find_marker(text, from, *style, k);
    if (!m) {
      return make_error(Errc::count_mismatch, "found " + std::to_string(k - 1) +
                                                  " rationales, expected " +
                                                  std::to_string(expected_n));
    }
    markers.push_back(*m);
    from = m->second;
  }
  auto surplus_start = detail::find_marker(text, from, *style, expected_n + 1);

  RationaleSet set;
  for (size_t k = 0; k < markers.size(); ++k) {
    const size_t begin = markers[k].second;
    size_t end = text.size();
    if (k + 1 < markers.size())
      end = markers[k + 1].first;
    else if (surplus_start)
      end = surplus_start->first;
    std::string item = strutil::trim(text.substr(begin, end - begin));
    if (item.empty())
      return make_error(Errc::count_mismatch, "found " + std::to_string(k) +
                                                  " rationales, expected " +
                                                  std::to_string(expected_n) +
                                                  " (item " + std::to_string(k + 1) + " empty)");
    set.items.push_back(std::move(item));
  }
  if (surplus_start) {
    long extra = expected_n + 1;
    size_t pos = surplus_start->second;
    set.surplus_discarded = 1;
    while (auto next = detail::find_marker(text, pos, *style, extra + 1)) {
      ++set.surplus_discarded;
      ++extra;
      pos = next->second;
    }
  }
  return set;
}

/// Splits on "Plan i:" headers, then on "Step j:" markers within each plan.
/// A plan block with no parseable step is an error.
inline Result<DraftPlanSet> parse_plans(std::string_view text, int expected_n) {
  if (expected_n < 1) return make_error(Errc::precondition, "expected_n must be >= 1");

  std::vector<std::pair<size_t, size_t>> headers;
  size_t from = 0;
  for (long k = 1; k <= expected_n; ++k) {
    auto h = detail::find_labeled_marker(text, from, "Plan", k);
    if (!h)
      return make_error(Errc::count_mismatch, "found " + std::to_string(k - 1) +
                                                  " plans, expected " +
                                                  std::to_string(expected_n));
    headers.push_back(*h);
    from = h->second;
  }
  auto surplus = detail::find_labeled_marker(text, from, "Plan", expected_n + 1);

  DraftPlanSet set;
  for (size_t k = 0; k < headers.size(); ++k) {
    const size_t begin = headers[k].second;
    size_t end = text.size();
    if (k + 1 < headers.size())
      end = headers[k + 1].first;
    else if (surplus)
      end = surplus->first;
    const std::string_view block = text.substr(begin, end - begin);

    Plan plan;
    size_t step_from = 0;
    for (long j = 1;; ++j) {
      auto sm = detail::find_labeled_marker(block, step_from, "Step", j);
      if (!sm) break;
      size_t content_begin = sm->second;
      size_t content_end = block.size();
      if (auto next = detail::find_labeled_marker(block, sm->second, "Step", j + 1))
        content_end = next->first;
      std::string step = strutil::trim(block.substr(content_begin, content_end - content_begin));
      if (step.empty()) break;
      plan.steps.push_back(std::move(step));
      step_from = content_end;
    }
    if (plan.steps.empty())
      return make_error(Errc::empty_plan,
                        "plan " + std::to_string(k + 1) + " has no parseable steps");
    set.plans.push_back(std::move(plan));
  }
  if (surplus) {
    long extra = expected_n + 1;
    size_t pos = surplus->second;
    set.surplus_discarded = 1;
    while (auto next = detail::find_labeled_marker(text, pos, "Plan", extra + 1)) {
      ++set.surplus_discarded;
      ++extra;
      pos = next->second;
    }
  }
  return set;
}

/// The induction response is consumed whole; step decomposition is best-effort
/// and may be empty.
inline Result<InducedPlan> parse_induced_plan(std::string_view text, std::string source_digest) {
  InducedPlan plan;
  plan.text = strutil::trim(text);
  if (plan.text.empty()) return make_error(Errc::empty_plan, "induced plan text is empty");
  plan.source_digest = std::move(source_digest);
  size_t from = 0;
  for (long j = 1;; ++j) {
    auto sm = detail::find_labeled_marker(plan.text, from, "Step", j);
    if (!sm) break;
    size_t end = plan.text.size();
    if (auto next = detail::find_labeled_marker(plan.text, sm->second, "Step", j + 1))
      end = next->first;
    std::string step = strutil::trim(std::string_view(plan.text).substr(sm->second, end - sm->second));
    if (step.empty()) break;
    plan.steps.push_back(std::move(step));
    from = end;
  }
  return plan;
}

/// Canonical answer form. option_letter: first standalone letter token,
/// stripped of surrounding punctuation, uppercased. free_text: trimmed,
/// whitespace-collapsed, lowercased.
inline Result<std::string> normalize_answer(std::string_view raw, AnswerKind kind) {
  const std::string trimmed = strutil::trim(raw);
  if (trimmed.empty()) return make_error(Errc::normalize_failed, "answer empty after trimming");

  if (kind == AnswerKind::free_text) return strutil::to_lower(strutil::collapse_whitespace(trimmed));

  auto is_strippable = [](char c) {
    switch (c) {
      case '(': case ')': case '[': case ']': case '{': case '}':
      case '.': case ',': case ':': case ';': case '!': case '?':
      case '*': case '_': case '"': case '\'': case '`': case '<': case '>':
        return true;
      default:
        return false;
    }
  };

  size_t i = 0;
  while (i < trimmed.size()) {
    while (i < trimmed.size() && strutil::is_space(trimmed[i])) ++i;
    size_t j = i;
    while (j < trimmed.size() && !strutil::is_space(trimmed[j])) ++j;
    std::string_view token(trimmed.data() + i, j - i);
    while (!token.empty() && is_strippable(token.front())) token.remove_prefix(1);
    while (!token.empty() && is_strippable(token.back())) token.remove_suffix(1);
    if (token.size() == 1 && std::isalpha(static_cast<unsigned char>(token[0])))
      return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(token[0]))));
    i = j;
  }
  return make_error(Errc::normalize_failed, "no standalone letter token in: " + trimmed);
}

/// First k items of a batch; the result for k is a strict prefix of the result
/// for any larger k.
inline Result<RationaleSet> truncate_prefix(const RationaleSet& batch, int k) {
  if (k < 1) return make_error(Errc::precondition, "k must be >= 1");
  if (static_cast<size_t>(k) > batch.items.size())
    return make_error(Errc::k_too_large, "k=" + std::to_string(k) + " exceeds batch size " +
                                             std::to_string(batch.items.size()));
  RationaleSet out;
  out.items.assign(batch.items.begin(), batch.items.begin() + k);
  out.source_digest = batch.source_digest;
  return out;
}

inline Result<DraftPlanSet> truncate_prefix(const DraftPlanSet& batch, int k) {
  if (k < 1) return make_error(Errc::precondition, "k must be >= 1");
  if (static_cast<size_t>(k) > batch.plans.size())
    return make_error(Errc::k_too_large, "k=" + std::to_string(k) + " exceeds batch size " +
                                             std::to_string(batch.plans.size()));
  DraftPlanSet out;
  out.plans.assign(batch.plans.begin(), batch.plans.begin() + k);
  out.source_digest = batch.source_digest;
  return out;
}

}  // namespace dip

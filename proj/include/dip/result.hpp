#pragma once

#include <cassert>
#include <optional>
#include <string>
#include <utility>
#include <variant>

namespace dip {

/// Error taxonomy shared by every module. Codes are stable identifiers;
/// human-oriented context goes in Error::message.
enum class Errc {
  // gateway
  network,
  cache_miss,
  usage_missing,
  backend_rejected_params,
  backend_error,
  // templates
  missing_slot,
  // tagparse
  tag_missing,
  count_mismatch,
  empty_plan,
  normalize_failed,
  k_too_large,
  // pipeline
  stage_parse,
  majority_undefined,
  sample_budget_exceeded,
  precondition,
  // bench
  schema_error,
  empty_dataset,
  task_mismatch,
  mixed_estimation,
  missing_baseline,
  dataset_mismatch,
  // cli / plumbing
  config_error,
  io_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::network: return "network";
    case Errc::cache_miss: return "cache_miss";
    case Errc::usage_missing: return "usage_missing";
    case Errc::backend_rejected_params: return "backend_rejected_params";
    case Errc::backend_error: return "backend_error";
    case Errc::missing_slot: return "missing_slot";
    case Errc::tag_missing: return "tag_missing";
    case Errc::count_mismatch: return "count_mismatch";
    case Errc::empty_plan: return "empty_plan";
    case Errc::normalize_failed: return "normalize_failed";
    case Errc::k_too_large: return "k_too_large";
    case Errc::stage_parse: return "stage_parse";
    case Errc::majority_undefined: return "majority_undefined";
    case Errc::sample_budget_exceeded: return "sample_budget_exceeded";
    case Errc::precondition: return "precondition";
    case Errc::schema_error: return "schema_error";
    case Errc::empty_dataset: return "empty_dataset";
    case Errc::task_mismatch: return "task_mismatch";
    case Errc::mixed_estimation: return "mixed_estimation";
    case Errc::missing_baseline: return "missing_baseline";
    case Errc::dataset_mismatch: return "dataset_mismatch";
    case Errc::config_error: return "config_error";
    case Errc::io_error: return "io_error";
  }
  return "unknown";
}

inline std::optional<Errc> errc_from_name(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(Errc::io_error); ++i) {
    const Errc c = static_cast<Errc>(i);
    if (name == errc_name(c)) return c;
  }
  return std::nullopt;
}

struct Error {
  Errc code = Errc::io_error;
  std::string message;
  /// Pipeline stage label when the error surfaced inside a run ("rationale_gen", ...).
  std::optional<std::string> stage;
  /// Underlying code when this error wraps another (stage_parse wraps a parser error).
  std::optional<Errc> cause;
  /// Offending parameter for backend_rejected_params ("temperature" or "top_p").
  std::optional<std::string> param;

  std::string to_string() const {
    std::string s = errc_name(code);
    if (stage) s += " [stage " + *stage + "]";
    if (cause) s += std::string(" (cause ") + errc_name(*cause) + ")";
    if (!message.empty()) s += ": " + message;
    return s;
  }

  Error with_stage(std::string stage_label) const {
    Error e = *this;
    e.stage = std::move(stage_label);
    return e;
  }
};

inline Error make_error(Errc code, std::string message) {
  return Error{code, std::move(message), std::nullopt, std::nullopt, std::nullopt};
}

/// Minimal value-or-error holder; the parser-totality contract ("every input
/// yields a value or typed error") rules out exceptions as the error channel.
template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Error error) : v_(std::move(error)) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& value() {
    assert(ok());
    return std::get<T>(v_);
  }
  const T& value() const {
    assert(ok());
    return std::get<T>(v_);
  }
  T&& take() {
    assert(ok());
    return std::move(std::get<T>(v_));
  }
  const Error& error() const {
    assert(!ok());
    return std::get<Error>(v_);
  }

 private:
  std::variant<T, Error> v_;
};

template <>
class Result<void> {
 public:
  Result() = default;
  Result(Error error) : err_(std::move(error)) {}

  bool ok() const { return !err_.has_value(); }
  explicit operator bool() const { return ok(); }
  const Error& error() const {
    assert(!ok());
    return *err_;
  }

 private:
  std::optional<Error> err_;
};

}  // namespace dip

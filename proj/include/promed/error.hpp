#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace promed {

enum class ErrorKind {
  invalid_case,         // malformed PatientCase / dataset record
  invalid_input,        // argument violates an operation precondition
  invariant_violation,  // internal contract broken (lengths, spans, conservation)
  too_large,            // exact enumeration refused above the subset limit
  capability_missing,   // oracle lacks a required facility (e.g. log-probs)
  oracle,               // oracle failed after retries
  retryable_oracle,     // transient oracle/transport failure
  config,               // bad run configuration
  render,               // prompt template placeholder missing
  degenerate_group,     // group too small for relative advantages
  undefined_metric,     // metric has no defined value (e.g. no relevant facts)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return kind_ == ErrorKind::retryable_oracle; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool ok, ErrorKind kind, const std::string& msg) {
  if (!ok) raise(kind, msg);
}

}  // namespace promed

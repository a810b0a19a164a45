#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace curvegraph {

enum class ErrorCode {
  parse_error,
  empty_graph,
  nonpositive_weight,
  duplicate_edge,
  disconnected,
  unknown_vertex,
  invalid_measure,
  missing_value,
  nonpositive_value,
  degenerate_function,
  precondition,
  invalid_argument,
  no_convergence,
  io_error,
  internal,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::empty_graph: return "empty_graph";
    case ErrorCode::nonpositive_weight: return "nonpositive_weight";
    case ErrorCode::duplicate_edge: return "duplicate_edge";
    case ErrorCode::disconnected: return "disconnected";
    case ErrorCode::unknown_vertex: return "unknown_vertex";
    case ErrorCode::invalid_measure: return "invalid_measure";
    case ErrorCode::missing_value: return "missing_value";
    case ErrorCode::nonpositive_value: return "nonpositive_value";
    case ErrorCode::degenerate_function: return "degenerate_function";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::no_convergence: return "no_convergence";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-readable code. The
// optional details list holds structured extras, e.g. the vertex lists of
// each component when a graph is disconnected.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

  // Internal errors signal a broken invariant in the library itself rather
  // than bad input.
  bool is_internal() const noexcept { return code_ == ErrorCode::internal; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              std::vector<std::string> details = {}) {
  throw Error(code, message, std::move(details));
}

}  // namespace curvegraph

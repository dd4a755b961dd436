#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spaq {

enum class ErrorCode {
  InvalidArgument,
  Io,
  // calib-graph
  CycleDetected,
  DanglingDependency,
  DuplicateId,
  InvalidTimeout,
  InvalidSpec,
  UnknownNode,
  MergeCreatesCycle,
  EdgeCreatesCycle,
  DuplicateEdge,
  // trace-store
  ParseError,
  NonMonotoneTime,
  DuplicateRunId,
  EmptySeries,
  MalformedTrace,
  // property-dsl
  SyntaxError,
  RangeError,
  UnknownParam,
  NoSamples,
  Unimplemented,
  // smc-engine
  EmptySamples,
  InsufficientData,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown by graph validation; carries every violation found, not just the first.
class GraphError : public Error {
 public:
  struct Violation {
    ErrorCode code;
    std::string message;
  };

  explicit GraphError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

}  // namespace spaq

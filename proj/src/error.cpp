#include "spaq/error.hpp"

namespace spaq {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DanglingDependency: return "DanglingDependency";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidTimeout: return "InvalidTimeout";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::MergeCreatesCycle: return "MergeCreatesCycle";
    case ErrorCode::EdgeCreatesCycle: return "EdgeCreatesCycle";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::DuplicateRunId: return "DuplicateRunId";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::UnknownParam: return "UnknownParam";
    case ErrorCode::NoSamples: return "NoSamples";
    case ErrorCode::Unimplemented: return "Unimplemented";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::InsufficientData: return "InsufficientData";
  }
  return "Unknown";
}

namespace {

std::string summarize(const std::vector<GraphError::Violation>& vs) {
  std::string msg = std::to_string(vs.size()) + " graph violation(s)";
  for (const auto& v : vs) msg += "\n  " + std::string(to_string(v.code)) + ": " + v.message;
  return msg;
}

}  // namespace

GraphError::GraphError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorCode::InvalidSpec : violations.front().code, summarize(violations)),
      violations_(std::move(violations)) {}

}  // namespace spaq

#include "devmodel/error.hpp"

#include <algorithm>

namespace devmodel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoMatch: return "NoMatch";
    case ErrorCode::MultipleMatch: return "MultipleMatch";
    case ErrorCode::MissingParameter: return "MissingParameter";
    case ErrorCode::MissingParameterRange: return "MissingParameterRange";
    case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorCode::IncomparableValues: return "IncomparableValues";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::ObjectNotInFromState: return "ObjectNotInFromState";
    case ErrorCode::TooEarly: return "TooEarly";
    case ErrorCode::BeyondHorizon: return "BeyondHorizon";
    case ErrorCode::UnknownArc: return "UnknownArc";
    case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::IntervalOrderViolation: return "IntervalOrderViolation";
    case ErrorCode::IntervalMismatch: return "IntervalMismatch";
    case ErrorCode::TupleOutOfProduct: return "TupleOutOfProduct";
    case ErrorCode::OrderCycle: return "OrderCycle";
    case ErrorCode::NoUniqueExtremes: return "NoUniqueExtremes";
    case ErrorCode::UnknownDiagram: return "UnknownDiagram";
    case ErrorCode::UnknownState: return "UnknownState";
    case ErrorCode::SpaceBoundExceeded: return "SpaceBoundExceeded";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::HorizonExceeded: return "HorizonExceeded";
    case ErrorCode::TrajectoryScenarioMismatch: return "TrajectoryScenarioMismatch";
    case ErrorCode::MissingScore: return "MissingScore";
    case ErrorCode::IncomparableReports: return "IncomparableReports";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnresolvedReference: return "UnresolvedReference";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(
      issues.begin(), issues.end(), [](const Issue& i) { return i.severity == Severity::Error; }));
}

void ValidationReport::merge(const ValidationReport& other, const std::string& prefix) {
  for (auto issue : other.issues) {
    if (!prefix.empty()) issue.path = issue.path.empty() ? prefix : prefix + "." + issue.path;
    issues.push_back(std::move(issue));
  }
}

}  // namespace devmodel

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace devmodel {

/// Discrete time on the integer tick grid.
using Tick = std::int64_t;

enum class ErrorCode {
  InvalidArgument,
  // statespace
  NoMatch,
  MultipleMatch,
  MissingParameter,
  MissingParameterRange,
  UnknownIdentifier,
  // dynamics
  IncomparableValues,
  SeriesTooShort,
  EmptyOverlap,
  // canonical
  ObjectNotInFromState,
  TooEarly,
  BeyondHorizon,
  UnknownArc,
  WindowOutOfRange,
  // composition
  IntervalOrderViolation,
  IntervalMismatch,
  TupleOutOfProduct,
  OrderCycle,
  NoUniqueExtremes,
  UnknownDiagram,
  UnknownState,
  SpaceBoundExceeded,
  // scenario
  ValidationFailed,
  HorizonExceeded,
  TrajectoryScenarioMismatch,
  MissingScore,
  IncomparableReports,
  // cli-io
  ParseError,
  UnresolvedReference,
  UnknownVersion,
  SchemaViolation,
};

std::string_view to_string(ErrorCode code);

/// The single exception type thrown by the library. `where` names the scale,
/// diagram, or subsystem the failure occurred in; `indices` carries 1-based
/// positions when the error concerns a set of list entries (e.g. the
/// predicates involved in a MultipleMatch).
class ModelError : public std::runtime_error {
 public:
  ModelError(ErrorCode code, const std::string& message, std::string where = {},
             std::vector<std::size_t> indices = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        where_(std::move(where)),
        indices_(std::move(indices)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& where() const noexcept { return where_; }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  ErrorCode code_;
  std::string where_;
  std::vector<std::size_t> indices_;
};

enum class Severity { Error, Warning };

/// One finding of a report-valued validation.
struct Issue {
  Severity severity = Severity::Error;
  std::string code;
  std::string path;
  std::string message;

  bool operator==(const Issue&) const = default;
};

struct ValidationReport {
  std::vector<Issue> issues;

  bool pass() const {
    for (const auto& i : issues) {
      if (i.severity == Severity::Error) return false;
    }
    return true;
  }
  std::size_t error_count() const;
  void error(std::string code, std::string path, std::string message) {
    issues.push_back({Severity::Error, std::move(code), std::move(path), std::move(message)});
  }
  void warn(std::string code, std::string path, std::string message) {
    issues.push_back({Severity::Warning, std::move(code), std::move(path), std::move(message)});
  }
  void merge(const ValidationReport& other, const std::string& prefix = {});
};

}  // namespace devmodel

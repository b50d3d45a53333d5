#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "devmodel/canonical.hpp"
#include "devmodel/composition.hpp"
#include "devmodel/dynamics.hpp"
#include "devmodel/predicate.hpp"
#include "devmodel/scenario.hpp"
#include "devmodel/statespace.hpp"

namespace devmodel::model {

inline constexpr int kFormatVersion = 1;

enum class Operation { Sequential, Parallel, Generalize, Consistency };
std::string_view to_string(Operation op);
std::optional<Operation> operation_from_string(std::string_view s);

/// A composition or consistency question over named canonical diagrams.
struct CompositionRequest {
  std::string id;
  Operation operation = Operation::Consistency;
  std::vector<std::string> diagrams;
  std::vector<Tick> intervals;
  composition::PrescribedSequence sequence;  // consistency; diagram = index into `diagrams`
  std::vector<composition::StateTuple> selection;  // generalize
  composition::OrderRelationSpec order;            // generalize
  bool operator==(const CompositionRequest&) const = default;
};

struct ScenarioEntry {
  scenario::Scenario scenario;
  std::optional<std::string> score_table;
  bool operator==(const ScenarioEntry&) const = default;
};

struct ModelFile {
  int format_version = kFormatVersion;
  ParameterSet parameters;
  std::map<std::string, statespace::Scale> scales;
  std::map<std::string, statespace::Classificator> classificators;
  std::map<std::string, statespace::RuleMatrix> rule_matrices;
  std::map<std::string, dynamics::Series> series;  // keyed by parameter
  std::map<std::string, canonical::Diagram> canonical_diagrams;
  std::map<std::string, CompositionRequest> composition_requests;
  std::map<std::string, ScenarioEntry> scenarios;
  std::map<std::string, scenario::EfficiencyCriterion> score_tables;
  bool operator==(const ModelFile&) const = default;

  /// Assembles the diagram set a request names.
  composition::TimedDiagramSet diagram_set(const CompositionRequest& r) const;
};

/// A parse or reference problem. `line`/`column` are 1-based and only set for
/// syntax errors; `path` locates the offending entry otherwise.
struct Diagnostic {
  ErrorCode code = ErrorCode::ParseError;
  std::string path;
  std::string message;
  std::size_t line = 0;
  std::size_t column = 0;
  std::string str() const;
};

struct ParseOutcome {
  ModelFile model;
  std::vector<Diagnostic> errors;
  bool ok() const { return errors.empty(); }
};

/// Collects every problem found instead of stopping at the first.
ParseOutcome parse_model_text(std::string_view text);

/// Reads and parses a file. Throws ModelError{ParseError} if it cannot be
/// read; otherwise throws the first diagnostic's code with every diagnostic
/// in the message.
ModelFile parse_model(const std::string& path);

nlohmann::json serialize_model(const ModelFile& m);

// Section-level conversions, shared with report files.
nlohmann::json to_json(const scenario::Scenario& sc);
nlohmann::json to_json(const scenario::EfficiencyCriterion& c);
nlohmann::json to_json(const canonical::Diagram& d);
/// Throws ModelError{ParseError | UnresolvedReference} with every problem
/// listed.
scenario::Scenario scenario_from_json(const nlohmann::json& j, const std::string& id);
scenario::EfficiencyCriterion criterion_from_json(const nlohmann::json& j);

}  // namespace devmodel::model

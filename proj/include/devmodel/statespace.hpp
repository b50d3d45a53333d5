#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "devmodel/error.hpp"
#include "devmodel/predicate.hpp"

namespace devmodel::statespace {

struct State {
  std::string id;
  std::size_t position = 0;  // 1-based within the owning scale
  std::string label;

  bool operator==(const State&) const = default;
};

/// Ordered predicates K1 < ... < Kn, predicate i defining state i.
class Scale {
 public:
  Scale() = default;
  /// Throws ModelError{InvalidArgument} when the lists differ in length, state
  /// ids repeat, or positions are not 1..n in order.
  Scale(std::string id, std::vector<Predicate> predicates, std::vector<State> states);

  const std::string& id() const { return id_; }
  const std::vector<Predicate>& predicates() const { return predicates_; }
  const std::vector<State>& states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  std::set<std::string, std::less<>> parameters() const;

  bool operator==(const Scale&) const = default;

 private:
  std::string id_;
  std::vector<Predicate> predicates_;
  std::vector<State> states_;
};

enum class MatchMode { Strict, FirstMatch };

struct ScaleMatch {
  std::size_t index = 0;  // 0-based predicate index
  State state;
};

/// Returns the unique state whose predicate holds.
/// Throws ModelError{MissingParameter | NoMatch | MultipleMatch}; MultipleMatch
/// carries the 1-based indices of every true predicate. In FirstMatch mode the
/// lowest true predicate wins instead.
ScaleMatch evaluate_scale(const Scale& scale, const Assignment& assignment,
                          MatchMode mode = MatchMode::Strict);

struct RefinementKey {
  std::string scale;
  std::size_t predicate = 0;  // 0-based
  auto operator<=>(const RefinementKey&) const = default;
};

struct TimeWindow {
  Tick first = 0;
  Tick last = 0;
  bool operator==(const TimeWindow&) const = default;
};

/// Tree of scales. The time window is carried as an annotation only; it does
/// not gate evaluation.
class Classificator {
 public:
  Classificator() = default;
  /// Throws ModelError{InvalidArgument} if the refinement structure is not a
  /// tree rooted at `root` or references unknown scales or predicate indices.
  Classificator(std::string id, std::string root, std::map<std::string, Scale> scales,
                std::map<RefinementKey, std::string> refinements,
                std::optional<TimeWindow> window = std::nullopt);

  const std::string& id() const { return id_; }
  const Scale& root() const { return scales_.at(root_); }
  const std::string& root_id() const { return root_; }
  const Scale& scale(const std::string& id) const { return scales_.at(id); }
  const std::map<std::string, Scale>& scales() const { return scales_; }
  const std::map<RefinementKey, std::string>& refinements() const { return refinements_; }
  const std::optional<TimeWindow>& window() const { return window_; }
  const Scale* refinement_of(const std::string& scale, std::size_t predicate) const;

  bool operator==(const Classificator&) const = default;

 private:
  std::string id_;
  std::string root_;
  std::map<std::string, Scale> scales_;
  std::map<RefinementKey, std::string> refinements_;
  std::optional<TimeWindow> window_;
};

struct PathStep {
  std::string scale;
  std::size_t predicate = 0;  // 0-based
  State state;
};

/// Root-to-leaf classification. Errors from evaluate_scale propagate with
/// `where()` set to the scale id.
std::vector<PathStep> classify_hierarchical(const Classificator& c, const Assignment& assignment,
                                            MatchMode mode = MatchMode::Strict);

struct SampleSpec {
  enum class Mode { Random, Grid } mode = Mode::Random;
  std::size_t samples = 10000;  // random: count; grid: points per axis
  std::uint64_t seed = 0;
  std::map<std::string, ValueRange, std::less<>> ranges;
  std::vector<Assignment> extra_points;  // always tested in addition
};

/// Builds a sample spec from parameter declarations; ordinal parameters use
/// their full level range. Throws ModelError{MissingParameterRange} for a
/// numeric parameter without a declared range.
SampleSpec sample_spec_for(const std::set<std::string, std::less<>>& parameters,
                           const ParameterSet& decls, std::size_t samples, std::uint64_t seed);

/// Every point produced by the spec over the given parameters. Ordinal
/// parameters (per decls) are sampled on integer ranks.
std::vector<Assignment> sample_points(const SampleSpec& spec,
                                      const std::set<std::string, std::less<>>& parameters,
                                      const ParameterSet& decls);

struct OverlapPoint {
  Assignment point;
  std::vector<std::size_t> predicates;  // 1-based
};

struct DisjointnessReport {
  std::string scale;
  std::size_t samples_tested = 0;
  std::vector<OverlapPoint> overlaps;
  std::vector<Assignment> uncovered;  // points where no predicate holds
  bool pass() const { return overlaps.empty(); }
};

/// Throws ModelError{MissingParameterRange}.
DisjointnessReport validate_scale_disjointness(const Scale& scale, const SampleSpec& spec,
                                               const ParameterSet& decls = {});

struct SubPredicateViolation {
  std::string parent_scale;
  std::size_t parent_predicate = 0;  // 1-based
  std::string child_scale;
  std::size_t child_predicate = 0;  // 1-based
  Assignment point;
};

struct SubPredicateReport {
  std::size_t samples_tested = 0;
  std::vector<SubPredicateViolation> violations;
  bool pass() const { return violations.empty(); }
};

/// Checks that a child predicate never holds where the refined parent
/// predicate is false. Throws ModelError{MissingParameterRange}.
SubPredicateReport validate_sub_predicates(const Classificator& c, const SampleSpec& spec,
                                           const ParameterSet& decls = {});

/// Rows are parameters, columns are classes. Cells are predicates over the
/// pseudo-parameter `state`, whose ordinal levels are the dynamics kinds.
class RuleMatrix {
 public:
  static constexpr const char* kStateVariable = "state";
  static const ParameterSet& cell_parameters();

  RuleMatrix() = default;
  /// Throws ModelError{InvalidArgument} on shape mismatch, or
  /// ModelError{ParseError|UnknownIdentifier} for a malformed cell.
  RuleMatrix(std::string id, std::vector<std::string> parameters, std::vector<std::string> classes,
             const std::vector<std::vector<std::string>>& cells);

  const std::string& id() const { return id_; }
  const std::vector<std::string>& parameters() const { return parameters_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const Predicate& cell(std::size_t row, std::size_t col) const { return cells_.at(row).at(col); }

  bool operator==(const RuleMatrix&) const = default;

 private:
  std::string id_;
  std::vector<std::string> parameters_;
  std::vector<std::string> classes_;
  std::vector<std::vector<Predicate>> cells_;
};

/// Class J is returned iff cell (I, J) holds for every row parameter I.
/// `dyn_states` maps parameter to dynamics-kind name.
/// Throws ModelError{MissingParameter | UnknownIdentifier}.
std::set<std::string> apply_rule_matrix(const RuleMatrix& m,
                                        const std::map<std::string, std::string, std::less<>>& dyn_states);

}  // namespace devmodel::statespace

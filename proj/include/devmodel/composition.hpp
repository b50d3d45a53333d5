#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "devmodel/canonical.hpp"

namespace devmodel::composition {

using canonical::Diagram;

/// Diagrams D1..Dn with their intervals [0, tau_i].
struct TimedDiagramSet {
  std::vector<Diagram> diagrams;
  std::vector<Tick> intervals;

  /// Throws ModelError{InvalidArgument} unless the lists match in length and
  /// 0 <= tau_i <= horizon of D_i.
  void check() const;
};

/// Chains D1..Dn into one diagram. With two or more diagrams the states are
/// qualified as "<diagram>/<state>", D_i's final state links to D_{i+1}'s
/// initial state by a development arc of delay tau_{i+1} - tau_i, and the
/// horizon becomes tau_n. A single diagram is returned unchanged.
/// Throws ModelError{IntervalOrderViolation} (indices = offending 1-based
/// pair) unless tau_1 < ... < tau_n.
Diagram compose_sequential(const TimedDiagramSet& set);

struct ProductArc {
  std::size_t from = 0;  // index into ParallelFragment::states
  std::size_t to = 0;
  std::size_t component = 0;
  canonical::ArcKey arc;
  Tick delay = 0;
};

/// Interleaving product: tuple states, each arc moving exactly one component.
struct ParallelFragment {
  std::vector<std::string> components;              // diagram ids
  std::vector<std::vector<std::string>> component_states;
  std::vector<std::vector<std::size_t>> states;     // tuples of 0-based state indices, lexicographic
  std::vector<ProductArc> arcs;
  std::size_t initial = 0;
  std::size_t final = 0;
  Tick interval = 0;

  std::string state_name(std::size_t index) const;
  std::optional<std::size_t> index_of(const std::vector<std::size_t>& tuple) const;
  /// Componentwise (product) order: a <= b in every component and a != b.
  bool precedes(std::size_t a, std::size_t b) const;
};

/// Throws ModelError{IntervalMismatch} unless every interval is equal.
ParallelFragment compose_parallel(const TimedDiagramSet& set);

using StateTuple = std::vector<std::string>;

struct OrderRelationSpec {
  std::vector<std::pair<StateTuple, StateTuple>> pairs;  // first < second
  bool operator==(const OrderRelationSpec&) const = default;
};

/// Parent-level diagram over selected tuples of child states. States are
/// ordered by a linear extension of `order` that prefers the
/// lexicographically smallest tuple of child state orders; development arcs
/// are the covering pairs of the order.
/// Throws ModelError{TupleOutOfProduct | OrderCycle | NoUniqueExtremes}.
Diagram generalize(const TimedDiagramSet& children, const std::vector<StateTuple>& selection,
                   const OrderRelationSpec& order);

std::string tuple_name(const StateTuple& t);

/// "Diagram `diagram` occupies `state` at some tick <= deadline", to be met
/// in list order.
struct PrescribedStep {
  std::size_t diagram = 0;
  std::string state;
  Tick deadline = 0;
  bool operator==(const PrescribedStep&) const = default;
};
using PrescribedSequence = std::vector<PrescribedStep>;

struct ScheduledFiring {
  std::size_t diagram = 0;
  canonical::ArcKey arc;
  Tick tick = 0;
  bool operator==(const ScheduledFiring&) const = default;
};

struct ConsistencyVerdict {
  bool consistent = false;
  /// Consistent: transitions realising the sequence, in firing order.
  std::vector<ScheduledFiring> witness;
  /// Consistent: tick at which each step was met.
  std::vector<Tick> met_at;
  /// Longest prefix that can be met; when inconsistent, step
  /// `satisfiable_prefix` (0-based) is the first one that cannot.
  std::size_t satisfiable_prefix = 0;
  std::size_t explored_states = 0;
};

/// Explicit reachability search over (tick, progress, per-diagram state and
/// capped residence). Firings are tried before waiting, lowest diagram index
/// and arc order first (development arcs, then backsteps), so the witness is
/// the earliest-firing one under that tie-break. A diagram may fire only at
/// ticks <= its interval tau_i.
/// Throws ModelError{UnknownDiagram | UnknownState | InvalidArgument |
/// SpaceBoundExceeded}.
ConsistencyVerdict check_consistency(const TimedDiagramSet& set, const PrescribedSequence& seq,
                                     std::size_t state_bound = 10'000'000);

/// Every legal timed firing sequence up to a horizon, stored as a tree in
/// preorder. Independent brute force used as ground truth for
/// check_consistency; no state merging is done.
class AttainableExecutions {
 public:
  /// True iff some execution meets every step of `seq` in order.
  bool satisfies(const PrescribedSequence& seq) const;
  /// Number of executions (every prefix of a firing sequence is one).
  std::size_t size() const { return tick_.size(); }
  std::vector<ScheduledFiring> execution(std::size_t index) const;
  Tick horizon() const { return horizon_; }

 private:
  friend AttainableExecutions enumerate_attainable_sequences(const TimedDiagramSet&, Tick,
                                                             std::size_t);
  std::size_t arity_ = 0;
  Tick horizon_ = 0;
  std::vector<std::vector<std::string>> state_names_;
  std::vector<std::vector<canonical::ArcKey>> arc_keys_;
  std::vector<std::int32_t> parent_;
  std::vector<Tick> tick_;
  std::vector<std::int16_t> diagram_;
  std::vector<std::int16_t> arc_;
  std::vector<std::uint8_t> config_;  // arity_ entries per node
};

/// Throws ModelError{SpaceBoundExceeded} past `bound` executions and
/// ModelError{InvalidArgument} if some diagram has a cycle of zero-delay
/// arcs (its executions would be unbounded).
AttainableExecutions enumerate_attainable_sequences(const TimedDiagramSet& set, Tick horizon,
                                                    std::size_t bound = 5'000'000);

}  // namespace devmodel::composition

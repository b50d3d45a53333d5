#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "devmodel/error.hpp"

namespace devmodel::canonical {

/// Development arcs (P) climb the state order; critical-backstep arcs (P0)
/// descend it.
enum class ArcKind { Development, Backstep };
std::string_view to_string(ArcKind k);

struct ArcKey {
  ArcKind kind = ArcKind::Development;
  std::string from;
  std::string to;

  auto operator<=>(const ArcKey&) const = default;
  bool operator==(const ArcKey&) const = default;
  std::string str() const;
};

/// `delay` is a minimum residence time in `from`: the arc may fire at any
/// tick >= entry + delay.
struct Arc {
  std::string from;
  std::string to;
  Tick delay = 0;

  bool operator==(const Arc&) const = default;
};

struct Placement {
  std::string state;
  Tick entry = 0;
  bool operator==(const Placement&) const = default;
};

/// Assignment of objects to states, keyed by object id.
struct ObjectDistribution {
  std::map<std::string, Placement> objects;

  /// N_i over the diagram's states, in state order.
  std::vector<std::size_t> counts(const std::vector<std::string>& states) const;
  /// `count` objects named "<state>#<k>" entering at tick 0, per state.
  static ObjectDistribution from_counts(const std::map<std::string, std::size_t>& per_state);

  bool operator==(const ObjectDistribution&) const = default;
};

struct Diagram {
  std::string id;
  std::optional<std::string> scale;  // ordering scale, when declared
  std::vector<std::string> states;   // ascending order
  std::vector<Arc> dev_arcs;
  std::vector<Arc> back_arcs;
  std::string initial;
  std::string final;
  Tick horizon = 0;
  ObjectDistribution initial_distribution;
  std::map<std::string, std::size_t> goal_counts;  // empty: no goal declared

  /// 1-based order of a state, or nullopt if it is not a member.
  std::optional<std::size_t> order(const std::string& state) const;
  const Arc* find_arc(const ArcKey& key) const;
  const std::vector<Arc>& arcs(ArcKind kind) const {
    return kind == ArcKind::Development ? dev_arcs : back_arcs;
  }

  bool operator==(const Diagram&) const = default;
};

struct CanonicalValidation {
  ValidationReport report;
  std::vector<std::string> unreachable;  // no development path from the initial state
  bool final_reachable = false;
  bool pass() const { return report.pass(); }
};

CanonicalValidation validate_canonical(const Diagram& d);

struct TransitionEvent {
  std::string object;
  ArcKey arc;
  Tick tick = 0;
  bool operator==(const TransitionEvent&) const = default;
};

struct ArcCounters {
  std::map<ArcKey, std::uint64_t> counts;
  std::vector<TransitionEvent> history;

  std::uint64_t at(const ArcKey& key) const {
    auto it = counts.find(key);
    return it == counts.end() ? 0 : it->second;
  }
  bool operator==(const ArcCounters&) const = default;
};

/// Checks legality and mutates in place. Throws ModelError{UnknownArc |
/// ObjectNotInFromState | BeyondHorizon | TooEarly}; on error nothing changes.
TransitionEvent apply_transition_in_place(ObjectDistribution& dist, ArcCounters& counters,
                                          const Diagram& d, const std::string& object,
                                          const ArcKey& arc, Tick tick);

struct TransitionResult {
  ObjectDistribution distribution;
  ArcCounters counters;
  TransitionEvent event;
};

/// Value-semantics form of apply_transition_in_place.
TransitionResult apply_transition(const ObjectDistribution& dist, const ArcCounters& counters,
                                  const Diagram& d, const std::string& object, const ArcKey& arc,
                                  Tick tick);

/// Replays events (stable-sorted by tick) from an initial distribution,
/// enforcing legality on every step.
struct Replay {
  ObjectDistribution distribution;
  ArcCounters counters;
};
Replay replay(const Diagram& d, const ObjectDistribution& initial,
              const std::vector<TransitionEvent>& history);

struct IntensityReport {
  std::string diagram;
  Tick first = 0;
  Tick last = 0;
  std::vector<std::string> states;
  /// occupancy[i][t - first] = N_i(t) after all events at ticks <= t.
  std::vector<std::vector<std::size_t>> occupancy;
  /// Cumulative count of events per arc within [first, t].
  std::map<ArcKey, std::vector<std::uint64_t>> arc_series;
  std::vector<std::uint64_t> development_series;
  std::vector<std::uint64_t> degradation_series;
  std::uint64_t development = 0;
  std::uint64_t degradation = 0;
  std::optional<double> ratio;  // development / degradation when degradation > 0
  std::size_t total_objects = 0;
  /// Reached counts at `last` minus goal counts, when a goal is declared.
  std::optional<std::map<std::string, std::int64_t>> goal_gap;
};

/// Throws ModelError{WindowOutOfRange} unless 0 <= first <= last <= horizon;
/// otherwise the errors of apply_transition for an illegal history.
IntensityReport intensity_report(const std::vector<TransitionEvent>& history, const Diagram& d,
                                 Tick first, Tick last, const ObjectDistribution& initial);

}  // namespace devmodel::canonical

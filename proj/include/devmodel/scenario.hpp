#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "devmodel/error.hpp"

namespace devmodel::scenario {

/// Forward transition fired by an input symbol (P1).
struct LabeledArc {
  std::string id;
  std::string from;
  std::string to;
  std::string symbol;
  bool operator==(const LabeledArc&) const = default;
};

/// Backstep taken in the absence of input symbols (P2).
struct BackArc {
  std::string id;
  std::string from;
  std::string to;
  bool operator==(const BackArc&) const = default;
};

struct HypothesisDiagram {
  std::string id;
  std::vector<std::string> states;  // ascending order
  std::string initial;
  std::string final;
  std::vector<std::string> alphabet;
  std::vector<LabeledArc> labeled_arcs;
  std::vector<BackArc> back_arcs;

  std::optional<std::size_t> order(const std::string& state) const;
  const LabeledArc* find_arc(const std::string& id) const;
  /// The arc leaving `state` labelled by `symbol`, if any.
  const LabeledArc* enabled_arc(const std::string& state, const std::string& symbol) const;
  bool operator==(const HypothesisDiagram&) const = default;
};

struct ArcRef {
  std::string subsystem;
  std::string arc;
  auto operator<=>(const ArcRef&) const = default;
  bool operator==(const ArcRef&) const = default;
  std::string str() const { return subsystem + ":" + arc; }
};

struct ParentLink {
  ArcRef parent;
  std::vector<ArcRef> children;
  bool operator==(const ParentLink&) const = default;
};

/// Z/U arc split, X^Z/X^U symbol split and the parent-arc tuples. A missing
/// upward threshold means "all children of the tuple".
struct AfterEffectScheme {
  std::set<ArcRef> isolated;
  std::set<ArcRef> coupled;
  std::set<std::string> individual_symbols;
  std::set<std::string> general_symbols;
  std::vector<ParentLink> parent_links;
  std::optional<std::size_t> upward_threshold;
  bool operator==(const AfterEffectScheme&) const = default;
};

struct Subsystem {
  std::string id;
  std::string parent;  // empty for the root
  bool operator==(const Subsystem&) const = default;
};

class Hierarchy {
 public:
  Hierarchy() = default;
  explicit Hierarchy(std::vector<Subsystem> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<Subsystem>& nodes() const { return nodes_; }
  /// Root first, children in declaration order. Only nodes reachable from
  /// the root appear.
  std::vector<std::string> preorder() const;
  std::vector<std::string> children(const std::string& id) const;
  std::optional<std::string> parent(const std::string& id) const;
  bool contains(const std::string& id) const;
  /// Rooted tree with unique ids.
  ValidationReport validate() const;
  bool operator==(const Hierarchy&) const = default;

 private:
  std::vector<Subsystem> nodes_;
};

inline constexpr const char* kBroadcast = "*";

/// One entry of the symbol time diagram; target "*" broadcasts to every
/// subsystem whose alphabet has the symbol.
struct Delivery {
  Tick tick = 0;
  std::string target;
  std::string symbol;
  bool operator==(const Delivery&) const = default;
};

struct Scenario {
  std::string id;
  std::vector<HypothesisDiagram> diagrams;
  Hierarchy hierarchy;
  std::map<std::string, std::string> assignment;  // subsystem -> diagram id
  std::vector<Delivery> time_diagram;
  AfterEffectScheme after_effect;
  Tick backstep_timeout = 1;
  std::optional<Tick> horizon;

  const HypothesisDiagram* diagram_of(const std::string& subsystem) const;
  bool operator==(const Scenario&) const = default;
};

/// Checks the diagram, hierarchy, assignment, time-diagram and after-effect
/// invariants; every violation is listed.
ValidationReport validate_scenario(const Scenario& sc);

struct SubsystemState {
  std::string state;
  Tick entry = 0;
  Tick quiet_since = 0;  // tick of the last firing in this subsystem
  bool operator==(const SubsystemState&) const = default;
};

/// Per-subsystem states in hierarchy preorder.
using Configuration = std::vector<SubsystemState>;

enum class EventKind { Delivery, Firing, Skipped };
enum class Cause { Direct, Downward, Upward, Backstep };
enum class SymbolClass { Individual, General, Unclassified };

std::string_view to_string(EventKind k);
std::string_view to_string(Cause c);
std::string_view to_string(SymbolClass c);
std::optional<EventKind> event_kind_from_string(std::string_view s);
std::optional<Cause> cause_from_string(std::string_view s);
std::optional<SymbolClass> symbol_class_from_string(std::string_view s);

/// `origin` is the index, within the same tick's events, of the event that
/// caused this one (the delivery behind a direct firing, the parent firing
/// behind a downward one, the completing child firing behind an upward one).
struct Event {
  Tick tick = 0;
  EventKind kind = EventKind::Delivery;
  std::string subsystem;
  std::string symbol;
  SymbolClass symbol_class = SymbolClass::Unclassified;
  bool effective = false;  // deliveries only
  std::string arc;
  std::string from;
  std::string to;
  Cause cause = Cause::Direct;
  bool coupled = false;
  bool backstep = false;
  std::optional<std::size_t> origin;
  std::string note;
  bool operator==(const Event&) const = default;
};

struct StepResult {
  Configuration configuration;
  std::vector<Event> events;
};

struct Trajectory {
  std::string scenario;
  std::vector<std::string> subsystems;           // preorder
  std::vector<std::vector<std::string>> states;  // state catalogue per subsystem
  Tick horizon = 0;                              // ticks 0 .. horizon-1
  Configuration initial;
  std::vector<Configuration> per_tick;  // configuration after each tick
  std::vector<Event> events;
  bool operator==(const Trajectory&) const = default;
};

/// Validated, indexed scenario that executes ticks.
class Engine {
 public:
  /// Throws ModelError{ValidationFailed}.
  explicit Engine(Scenario sc);
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  const Scenario& scenario() const;
  const std::vector<std::string>& subsystems() const;
  Configuration initial() const;

  /// One tick: (1) deliveries in hierarchy preorder then list order, with
  /// downward after-effect; (2) upward after-effect to a fixpoint; (3)
  /// backsteps after `backstep_timeout` quiet ticks.
  StepResult step(const Configuration& config, const std::vector<Delivery>& deliveries,
                  Tick tick) const;

  /// Throws ModelError{HorizonExceeded} if the time diagram schedules a tick
  /// at or beyond `horizon`.
  Trajectory run(Tick horizon) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Trajectory run_scenario(const Scenario& sc, Tick horizon);
StepResult step(const Configuration& config, const std::vector<Delivery>& deliveries,
                const Scenario& sc, Tick tick);

struct EfficiencyCriterion {
  std::map<std::string, std::map<std::string, double>> scores;  // subsystem -> state -> w
  bool operator==(const EfficiencyCriterion&) const = default;
};

struct EfficiencySeries {
  std::vector<std::string> subsystems;
  std::vector<std::vector<double>> per_subsystem;  // [subsystem][tick]
  std::vector<double> aggregate;
  double final_aggregate() const { return aggregate.empty() ? 0.0 : aggregate.back(); }
  bool operator==(const EfficiencySeries&) const = default;
};

/// w(t) per subsystem from the configuration after each tick.
/// Throws ModelError{MissingScore} unless the table covers every
/// (subsystem, state) pair of the trajectory's catalogue.
EfficiencySeries efficiency_process(const Trajectory& tr, const EfficiencyCriterion& crit);

struct RedundancyIncident {
  std::string subsystem;
  std::vector<Tick> ticks;  // every tick a symbol was delivered to it
  bool operator==(const RedundancyIncident&) const = default;
};

struct ScenarioReport {
  std::string scenario;
  std::vector<std::string> subsystems;
  Tick ticks = 0;
  bool complete = false;
  std::vector<std::string> non_final;
  std::vector<RedundancyIncident> redundancy;
  std::map<std::string, std::size_t> backsteps;
  std::size_t backstep_total = 0;
  double omitted_frequency = 0.0;  // backsteps per tick
  std::map<std::string, std::size_t> coupled_firings;
  std::size_t coupled_total = 0;
  double complexness_frequency = 0.0;  // coupled firings per tick
  /// Firings a subsystem underwent because of another subsystem's symbol.
  std::map<std::string, std::size_t> propagated_firings;
  std::optional<EfficiencySeries> efficiency;
  bool operator==(const ScenarioReport&) const = default;
};

/// Throws ModelError{TrajectoryScenarioMismatch}.
ScenarioReport analyze_trajectory(const Trajectory& tr, const Scenario& sc);

/// Ranking tiers, best first; reports in the same tier are tied.
struct Ranking {
  std::vector<std::vector<std::size_t>> tiers;
};

/// Complete first, then higher final aggregate efficiency, then fewer
/// backsteps, then fewer redundancy incidents.
/// Throws ModelError{IncomparableReports} for differing subsystem sets or a
/// mix of reports with and without efficiency, ModelError{InvalidArgument}
/// for fewer than two reports.
Ranking compare_scenarios(const std::vector<ScenarioReport>& reports);

}  // namespace devmodel::scenario

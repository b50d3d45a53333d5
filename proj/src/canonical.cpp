#include "devmodel/canonical.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace devmodel::canonical {

std::string_view to_string(ArcKind k) {
  return k == ArcKind::Development ? "dev" : "back";
}

std::string ArcKey::str() const {
  return std::string(to_string(kind)) + ":" + from + "->" + to;
}

std::vector<std::size_t> ObjectDistribution::counts(const std::vector<std::string>& states) const {
  std::vector<std::size_t> n(states.size(), 0);
  for (const auto& [_, p] : objects) {
    auto it = std::find(states.begin(), states.end(), p.state);
    if (it != states.end()) ++n[static_cast<std::size_t>(it - states.begin())];
  }
  return n;
}

ObjectDistribution ObjectDistribution::from_counts(
    const std::map<std::string, std::size_t>& per_state) {
  ObjectDistribution d;
  for (const auto& [state, count] : per_state) {
    for (std::size_t k = 1; k <= count; ++k) {
      d.objects[state + "#" + std::to_string(k)] = {state, 0};
    }
  }
  return d;
}

std::optional<std::size_t> Diagram::order(const std::string& state) const {
  auto it = std::find(states.begin(), states.end(), state);
  if (it == states.end()) return std::nullopt;
  return static_cast<std::size_t>(it - states.begin()) + 1;
}

const Arc* Diagram::find_arc(const ArcKey& key) const {
  for (const auto& a : arcs(key.kind)) {
    if (a.from == key.from && a.to == key.to) return &a;
  }
  return nullptr;
}

CanonicalValidation validate_canonical(const Diagram& d) {
  CanonicalValidation v;
  auto& r = v.report;
  std::set<std::string> seen;
  for (const auto& s : d.states) {
    if (!seen.insert(s).second) r.error("duplicate_state", "states", "state '" + s + "' repeats");
  }
  if (d.horizon < 0) r.error("horizon", "horizon", "horizon must be non-negative");
  if (!d.order(d.initial)) r.error("unknown_state", "initial", "initial state '" + d.initial + "' is not a state");
  if (!d.order(d.final)) r.error("unknown_state", "final", "final state '" + d.final + "' is not a state");

  for (ArcKind kind : {ArcKind::Development, ArcKind::Backstep}) {
    const std::string section = kind == ArcKind::Development ? "dev_arcs" : "back_arcs";
    std::set<std::pair<std::string, std::string>> pairs;
    const auto& list = d.arcs(kind);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Arc& a = list[i];
      const std::string path = section + "[" + std::to_string(i) + "]";
      const ArcKey key{kind, a.from, a.to};
      auto of = d.order(a.from);
      auto ot = d.order(a.to);
      if (!of) r.error("unknown_state", path, key.str() + ": unknown source state '" + a.from + "'");
      if (!ot) r.error("unknown_state", path, key.str() + ": unknown target state '" + a.to + "'");
      if (of && ot) {
        if (kind == ArcKind::Development && !(*of < *ot)) {
          r.error("order_violation", path, key.str() + ": development arc must climb the state order");
        }
        if (kind == ArcKind::Backstep && !(*ot < *of)) {
          r.error("order_violation", path, key.str() + ": backstep arc must descend the state order");
        }
      }
      if (a.delay < 0 || a.delay > d.horizon) {
        r.error("delay_range", path,
                key.str() + ": delay " + std::to_string(a.delay) + " outside [0, " +
                    std::to_string(d.horizon) + "]");
      }
      if (!pairs.insert({a.from, a.to}).second) {
        r.error("duplicate_arc", path, key.str() + " is declared twice");
      }
    }
  }

  for (const auto& [obj, p] : d.initial_distribution.objects) {
    if (!d.order(p.state)) {
      r.error("unknown_state", "initial_distribution." + obj, "object '" + obj + "' placed in unknown state '" + p.state + "'");
    }
  }
  for (const auto& [state, _] : d.goal_counts) {
    if (!d.order(state)) r.error("unknown_state", "goal_distribution." + state, "goal names unknown state '" + state + "'");
  }

  std::set<std::string> reached;
  if (d.order(d.initial)) {
    std::deque<std::string> frontier{d.initial};
    reached.insert(d.initial);
    while (!frontier.empty()) {
      auto cur = frontier.front();
      frontier.pop_front();
      for (const auto& a : d.dev_arcs) {
        if (a.from == cur && d.order(a.to) && reached.insert(a.to).second) frontier.push_back(a.to);
      }
    }
  }
  for (const auto& s : d.states) {
    if (!reached.count(s)) {
      v.unreachable.push_back(s);
      r.warn("unreachable", "states", "state '" + s + "' is not reachable from '" + d.initial + "'");
    }
  }
  v.final_reachable = reached.count(d.final) > 0;
  if (!v.final_reachable) {
    r.warn("final_unreachable", "final", "final state '" + d.final + "' is not reachable from the initial state");
  }
  return v;
}

TransitionEvent apply_transition_in_place(ObjectDistribution& dist, ArcCounters& counters,
                                          const Diagram& d, const std::string& object,
                                          const ArcKey& arc, Tick tick) {
  const Arc* a = d.find_arc(arc);
  if (a == nullptr) {
    throw ModelError(ErrorCode::UnknownArc, "diagram '" + d.id + "' has no arc " + arc.str(), d.id);
  }
  auto it = dist.objects.find(object);
  if (it == dist.objects.end() || it->second.state != arc.from) {
    std::string where = it == dist.objects.end() ? "is not in the distribution"
                                                 : "is in '" + it->second.state + "'";
    throw ModelError(ErrorCode::ObjectNotInFromState,
                     "object '" + object + "' " + where + ", arc " + arc.str() + " needs '" + arc.from + "'",
                     object);
  }
  if (tick < 0 || tick > d.horizon) {
    throw ModelError(ErrorCode::BeyondHorizon,
                     "tick " + std::to_string(tick) + " outside [0, " + std::to_string(d.horizon) + "]",
                     object);
  }
  if (tick < it->second.entry + a->delay) {
    throw ModelError(ErrorCode::TooEarly,
                     "object '" + object + "' entered '" + arc.from + "' at " +
                         std::to_string(it->second.entry) + "; arc " + arc.str() + " needs delay " +
                         std::to_string(a->delay) + ", fired at " + std::to_string(tick),
                     object);
  }
  it->second = {arc.to, tick};
  ++counters.counts[arc];
  counters.history.push_back({object, arc, tick});
  return counters.history.back();
}

TransitionResult apply_transition(const ObjectDistribution& dist, const ArcCounters& counters,
                                  const Diagram& d, const std::string& object, const ArcKey& arc,
                                  Tick tick) {
  TransitionResult r{dist, counters, {}};
  r.event = apply_transition_in_place(r.distribution, r.counters, d, object, arc, tick);
  return r;
}

namespace {

std::vector<TransitionEvent> by_tick(std::vector<TransitionEvent> events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const TransitionEvent& a, const TransitionEvent& b) { return a.tick < b.tick; });
  return events;
}

}  // namespace

Replay replay(const Diagram& d, const ObjectDistribution& initial,
              const std::vector<TransitionEvent>& history) {
  Replay r{initial, {}};
  for (const auto& e : by_tick(history)) {
    apply_transition_in_place(r.distribution, r.counters, d, e.object, e.arc, e.tick);
  }
  return r;
}

IntensityReport intensity_report(const std::vector<TransitionEvent>& history, const Diagram& d,
                                 Tick first, Tick last, const ObjectDistribution& initial) {
  if (first < 0 || last > d.horizon || first > last) {
    throw ModelError(ErrorCode::WindowOutOfRange,
                     "window [" + std::to_string(first) + ", " + std::to_string(last) +
                         "] is not inside [0, " + std::to_string(d.horizon) + "]",
                     d.id);
  }
  IntensityReport rep;
  rep.diagram = d.id;
  rep.first = first;
  rep.last = last;
  rep.states = d.states;
  rep.total_objects = initial.objects.size();
  const auto width = static_cast<std::size_t>(last - first + 1);
  rep.occupancy.assign(d.states.size(), std::vector<std::size_t>(width, 0));
  rep.development_series.assign(width, 0);
  rep.degradation_series.assign(width, 0);
  for (ArcKind kind : {ArcKind::Development, ArcKind::Backstep}) {
    for (const auto& a : d.arcs(kind)) {
      rep.arc_series[{kind, a.from, a.to}].assign(width, 0);
    }
  }

  const auto events = by_tick(history);
  ObjectDistribution dist = initial;
  ArcCounters counters;
  std::size_t next = 0;
  std::map<ArcKey, std::uint64_t> in_window;
  std::uint64_t dev = 0;
  std::uint64_t deg = 0;
  // Events before the window only shape the distribution.
  while (next < events.size() && events[next].tick < first) {
    const auto& e = events[next++];
    apply_transition_in_place(dist, counters, d, e.object, e.arc, e.tick);
  }
  for (Tick t = first; t <= last; ++t) {
    while (next < events.size() && events[next].tick == t) {
      const auto& e = events[next++];
      apply_transition_in_place(dist, counters, d, e.object, e.arc, e.tick);
      ++in_window[e.arc];
      (e.arc.kind == ArcKind::Development ? dev : deg) += 1;
    }
    const auto col = static_cast<std::size_t>(t - first);
    auto n = dist.counts(d.states);
    for (std::size_t i = 0; i < n.size(); ++i) rep.occupancy[i][col] = n[i];
    for (auto& [key, series] : rep.arc_series) {
      auto it = in_window.find(key);
      series[col] = it == in_window.end() ? 0 : it->second;
    }
    rep.development_series[col] = dev;
    rep.degradation_series[col] = deg;
  }
  // Remaining events still have to be legal.
  while (next < events.size()) {
    const auto& e = events[next++];
    apply_transition_in_place(dist, counters, d, e.object, e.arc, e.tick);
  }
  rep.development = dev;
  rep.degradation = deg;
  if (deg > 0) rep.ratio = static_cast<double>(dev) / static_cast<double>(deg);
  if (!d.goal_counts.empty()) {
    std::map<std::string, std::int64_t> gap;
    for (std::size_t i = 0; i < d.states.size(); ++i) {
      auto goal = d.goal_counts.find(d.states[i]);
      auto want = goal == d.goal_counts.end() ? 0 : static_cast<std::int64_t>(goal->second);
      gap[d.states[i]] = static_cast<std::int64_t>(rep.occupancy[i].back()) - want;
    }
    rep.goal_gap = std::move(gap);
  }
  return rep;
}

}  // namespace devmodel::canonical

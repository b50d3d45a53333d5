#include "devmodel/scenario.hpp"

#include <algorithm>
#include <deque>
#include <functional>

namespace devmodel::scenario {

std::optional<std::size_t> HypothesisDiagram::order(const std::string& state) const {
  auto it = std::find(states.begin(), states.end(), state);
  if (it == states.end()) return std::nullopt;
  return static_cast<std::size_t>(it - states.begin()) + 1;
}

const LabeledArc* HypothesisDiagram::find_arc(const std::string& arc_id) const {
  for (const auto& a : labeled_arcs) {
    if (a.id == arc_id) return &a;
  }
  return nullptr;
}

const LabeledArc* HypothesisDiagram::enabled_arc(const std::string& state,
                                                 const std::string& symbol) const {
  for (const auto& a : labeled_arcs) {
    if (a.from == state && a.symbol == symbol) return &a;
  }
  return nullptr;
}

std::vector<std::string> Hierarchy::preorder() const {
  std::vector<std::string> out;
  std::function<void(const std::string&, std::size_t)> visit = [&](const std::string& id,
                                                                    std::size_t depth) {
    if (depth > nodes_.size()) return;  // cycle guard
    out.push_back(id);
    for (const auto& c : children(id)) visit(c, depth + 1);
  };
  for (const auto& n : nodes_) {
    if (n.parent.empty()) {
      visit(n.id, 0);
      break;
    }
  }
  return out;
}

std::vector<std::string> Hierarchy::children(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.parent == id) out.push_back(n.id);
  }
  return out;
}

std::optional<std::string> Hierarchy::parent(const std::string& id) const {
  for (const auto& n : nodes_) {
    if (n.id == id) return n.parent.empty() ? std::nullopt : std::optional<std::string>(n.parent);
  }
  return std::nullopt;
}

bool Hierarchy::contains(const std::string& id) const {
  return std::any_of(nodes_.begin(), nodes_.end(), [&](const Subsystem& n) { return n.id == id; });
}

ValidationReport Hierarchy::validate() const {
  ValidationReport r;
  std::set<std::string> ids;
  std::size_t roots = 0;
  for (const auto& n : nodes_) {
    if (n.id.empty()) r.error("hierarchy", "hierarchy", "subsystem with empty id");
    if (!ids.insert(n.id).second) r.error("hierarchy", "hierarchy." + n.id, "duplicate subsystem id '" + n.id + "'");
    if (n.parent.empty()) ++roots;
  }
  if (nodes_.empty()) r.error("hierarchy", "hierarchy", "hierarchy is empty");
  if (!nodes_.empty() && roots != 1) {
    r.error("hierarchy", "hierarchy", "expected exactly one root, found " + std::to_string(roots));
  }
  for (const auto& n : nodes_) {
    if (!n.parent.empty() && !ids.count(n.parent)) {
      r.error("hierarchy", "hierarchy." + n.id, "parent '" + n.parent + "' is not a subsystem");
    }
  }
  if (roots == 1 && r.pass()) {
    auto order = preorder();
    std::set<std::string> reached(order.begin(), order.end());
    if (order.size() != reached.size() || reached.size() != ids.size()) {
      for (const auto& n : nodes_) {
        if (!reached.count(n.id)) {
          r.error("hierarchy", "hierarchy." + n.id, "subsystem '" + n.id + "' is not under the root (cycle?)");
        }
      }
    }
  }
  return r;
}

const HypothesisDiagram* Scenario::diagram_of(const std::string& subsystem) const {
  auto it = assignment.find(subsystem);
  if (it == assignment.end()) return nullptr;
  for (const auto& d : diagrams) {
    if (d.id == it->second) return &d;
  }
  return nullptr;
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Delivery: return "delivery";
    case EventKind::Firing: return "firing";
    case EventKind::Skipped: return "skipped";
  }
  return "delivery";
}

std::string_view to_string(Cause c) {
  switch (c) {
    case Cause::Direct: return "direct";
    case Cause::Downward: return "downward";
    case Cause::Upward: return "upward";
    case Cause::Backstep: return "backstep";
  }
  return "direct";
}

std::string_view to_string(SymbolClass c) {
  switch (c) {
    case SymbolClass::Individual: return "individual";
    case SymbolClass::General: return "general";
    case SymbolClass::Unclassified: return "unclassified";
  }
  return "unclassified";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (auto k : {EventKind::Delivery, EventKind::Firing, EventKind::Skipped}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<Cause> cause_from_string(std::string_view s) {
  for (auto c : {Cause::Direct, Cause::Downward, Cause::Upward, Cause::Backstep}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<SymbolClass> symbol_class_from_string(std::string_view s) {
  for (auto c : {SymbolClass::Individual, SymbolClass::General, SymbolClass::Unclassified}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

namespace {

void validate_diagram(const HypothesisDiagram& d, ValidationReport& r) {
  const std::string base = "diagrams." + d.id;
  std::set<std::string> states;
  if (d.states.empty()) r.error("diagram", base, "diagram has no states");
  for (const auto& s : d.states) {
    if (!states.insert(s).second) r.error("diagram", base + ".states", "state '" + s + "' repeats");
  }
  if (!d.order(d.initial)) r.error("diagram", base + ".initial", "initial state '" + d.initial + "' is not a state");
  if (!d.order(d.final)) r.error("diagram", base + ".final", "final state '" + d.final + "' is not a state");

  std::set<std::string> alphabet;
  for (const auto& x : d.alphabet) {
    if (!alphabet.insert(x).second) r.error("alphabet", base + ".alphabet", "symbol '" + x + "' repeats");
  }

  std::set<std::string> arc_ids;
  std::set<std::pair<std::string, std::string>> p1_pairs;
  std::set<std::pair<std::string, std::string>> from_symbol;
  std::set<std::string> used_symbols;
  for (const auto& a : d.labeled_arcs) {
    const std::string path = base + ".arcs." + a.id;
    if (a.id.empty()) r.error("arc", base + ".arcs", "labelled arc without id");
    if (!arc_ids.insert(a.id).second) r.error("arc", path, "arc id '" + a.id + "' repeats");
    auto of = d.order(a.from);
    auto ot = d.order(a.to);
    if (!of) r.error("arc", path, "unknown source state '" + a.from + "'");
    if (!ot) r.error("arc", path, "unknown target state '" + a.to + "'");
    if (of && ot && !(*of < *ot)) r.error("p1_direction", path, "symbol arc must climb the state order");
    if (!alphabet.count(a.symbol)) r.error("alphabet", path, "symbol '" + a.symbol + "' is not in the alphabet");
    if (!from_symbol.insert({a.from, a.symbol}).second) {
      r.error("determinism", path, "state '" + a.from + "' has two arcs labelled '" + a.symbol + "'");
    }
    p1_pairs.insert({a.from, a.to});
    used_symbols.insert(a.symbol);
  }
  for (const auto& a : d.back_arcs) {
    const std::string path = base + ".back_arcs." + a.id;
    if (!arc_ids.insert(a.id).second) r.error("arc", path, "arc id '" + a.id + "' repeats");
    auto of = d.order(a.from);
    auto ot = d.order(a.to);
    if (!of) r.error("arc", path, "unknown source state '" + a.from + "'");
    if (!ot) r.error("arc", path, "unknown target state '" + a.to + "'");
    if (of && ot && !(*ot < *of)) r.error("p2_direction", path, "backstep arc must descend the state order");
    if (p1_pairs.count({a.from, a.to})) r.error("p1_p2_overlap", path, "arc is in both P1 and P2");
  }
  for (const auto& x : d.alphabet) {
    if (!used_symbols.count(x)) r.error("alphabet", base + ".alphabet", "symbol '" + x + "' labels no arc");
  }
}

std::set<std::string> reachable_states(const HypothesisDiagram& d) {
  std::set<std::string> seen;
  if (!d.order(d.initial)) return seen;
  std::deque<std::string> q{d.initial};
  seen.insert(d.initial);
  auto visit = [&](const std::string& to) {
    if (seen.insert(to).second) q.push_back(to);
  };
  while (!q.empty()) {
    auto cur = q.front();
    q.pop_front();
    for (const auto& a : d.labeled_arcs) {
      if (a.from == cur) visit(a.to);
    }
    for (const auto& a : d.back_arcs) {
      if (a.from == cur) visit(a.to);
    }
  }
  return seen;
}

}  // namespace

ValidationReport validate_scenario(const Scenario& sc) {
  ValidationReport r;
  r.merge(sc.hierarchy.validate());

  std::set<std::string> diagram_ids;
  for (const auto& d : sc.diagrams) {
    if (!diagram_ids.insert(d.id).second) r.error("diagram", "diagrams." + d.id, "diagram id repeats");
    validate_diagram(d, r);
  }

  // M: total on the hierarchy and injective.
  std::map<std::string, std::string> used_by;
  for (const auto& n : sc.hierarchy.nodes()) {
    auto it = sc.assignment.find(n.id);
    if (it == sc.assignment.end()) {
      r.error("assignment", "assignment." + n.id, "subsystem '" + n.id + "' has no diagram");
      continue;
    }
    if (!diagram_ids.count(it->second)) {
      r.error("assignment", "assignment." + n.id, "diagram '" + it->second + "' does not exist");
    }
    auto [prev, fresh] = used_by.emplace(it->second, n.id);
    if (!fresh) {
      r.error("assignment", "assignment." + n.id,
              "diagram '" + it->second + "' is already assigned to '" + prev->second + "'");
    }
  }
  for (const auto& [sub, _] : sc.assignment) {
    if (!sc.hierarchy.contains(sub)) r.error("assignment", "assignment." + sub, "'" + sub + "' is not a subsystem");
  }
  for (const auto& id : diagram_ids) {
    if (!used_by.count(id)) r.warn("assignment", "diagrams." + id, "diagram '" + id + "' is not assigned");
  }

  if (sc.backstep_timeout < 1) r.error("timeout", "backstep_timeout", "backstep timeout must be at least 1 tick");
  if (sc.horizon && *sc.horizon < 0) r.error("horizon", "horizon", "horizon must be non-negative");

  const auto& ae = sc.after_effect;
  auto symbol_class = [&](const std::string& x) {
    if (ae.individual_symbols.count(x)) return SymbolClass::Individual;
    if (ae.general_symbols.count(x)) return SymbolClass::General;
    return SymbolClass::Unclassified;
  };

  // Time diagram.
  for (std::size_t i = 0; i < sc.time_diagram.size(); ++i) {
    const auto& c = sc.time_diagram[i];
    const std::string path = "time_diagram[" + std::to_string(i) + "]";
    if (c.tick < 0) r.error("time_diagram", path, "negative tick");
    if (sc.horizon && c.tick >= *sc.horizon) {
      r.error("time_diagram", path, "tick " + std::to_string(c.tick) + " is beyond the horizon");
    }
    if (c.target == kBroadcast) {
      bool any = false;
      for (const auto& n : sc.hierarchy.nodes()) {
        const auto* d = sc.diagram_of(n.id);
        any |= d != nullptr && std::count(d->alphabet.begin(), d->alphabet.end(), c.symbol) > 0;
      }
      if (!any) r.error("time_diagram", path, "no subsystem accepts broadcast symbol '" + c.symbol + "'");
      continue;
    }
    if (!sc.hierarchy.contains(c.target)) {
      r.error("time_diagram", path, "unknown target '" + c.target + "'");
      continue;
    }
    const auto* d = sc.diagram_of(c.target);
    if (d == nullptr) continue;
    if (std::count(d->alphabet.begin(), d->alphabet.end(), c.symbol) == 0) {
      r.error("time_diagram", path,
              "symbol '" + c.symbol + "' is not in the alphabet of '" + c.target + "'");
      continue;
    }
    if (symbol_class(c.symbol) == SymbolClass::General) {
      bool parent_role = false;
      for (const auto& a : d->labeled_arcs) {
        if (a.symbol != c.symbol) continue;
        for (const auto& l : ae.parent_links) parent_role |= l.parent == ArcRef{c.target, a.id};
      }
      if (!parent_role) {
        r.warn("double_role", path,
               "general symbol '" + c.symbol + "' delivered to '" + c.target +
                   "' where it heads no parent link; it will fire without propagation");
      }
    }
  }

  // Z/U and X^Z/X^U partitions.
  std::set<ArcRef> all_arcs;
  std::set<std::string> union_alphabet;
  for (const auto& n : sc.hierarchy.nodes()) {
    const auto* d = sc.diagram_of(n.id);
    if (d == nullptr) continue;
    union_alphabet.insert(d->alphabet.begin(), d->alphabet.end());
    for (const auto& a : d->labeled_arcs) {
      const ArcRef ref{n.id, a.id};
      all_arcs.insert(ref);
      const bool in_z = ae.isolated.count(ref) > 0;
      const bool in_u = ae.coupled.count(ref) > 0;
      if (in_z == in_u) {
        r.error("arc_partition", "after_effect." + ref.str(),
                in_z ? "arc is both isolated and coupled" : "arc is neither isolated nor coupled");
      }
      auto cls = symbol_class(a.symbol);
      if (cls == SymbolClass::Individual && in_u) {
        r.error("partition_violation", "after_effect." + ref.str(),
                "arc labelled by individual symbol '" + a.symbol + "' is coupled");
      }
      if (cls == SymbolClass::General && in_z) {
        r.error("partition_violation", "after_effect." + ref.str(),
                "arc labelled by general symbol '" + a.symbol + "' is isolated");
      }
    }
  }
  for (const auto* part : {&ae.isolated, &ae.coupled}) {
    for (const auto& ref : *part) {
      if (!all_arcs.count(ref)) r.error("arc_partition", "after_effect." + ref.str(), "no such labelled arc");
    }
  }
  for (const auto& x : union_alphabet) {
    const bool z = ae.individual_symbols.count(x) > 0;
    const bool u = ae.general_symbols.count(x) > 0;
    if (z == u) {
      r.error("symbol_partition", "after_effect.symbols." + x,
              z ? "symbol is both individual and general" : "symbol is neither individual nor general");
    }
  }
  for (const auto* part : {&ae.individual_symbols, &ae.general_symbols}) {
    for (const auto& x : *part) {
      if (!union_alphabet.count(x)) r.error("symbol_partition", "after_effect.symbols." + x, "symbol is in no alphabet");
    }
  }

  // Parent links.
  std::set<ArcRef> parents;
  for (std::size_t i = 0; i < ae.parent_links.size(); ++i) {
    const auto& l = ae.parent_links[i];
    const std::string path = "after_effect.parent_links[" + std::to_string(i) + "]";
    if (!all_arcs.count(l.parent)) r.error("parent_link", path, "parent arc " + l.parent.str() + " does not exist");
    else if (!ae.coupled.count(l.parent)) r.error("parent_link", path, "parent arc " + l.parent.str() + " is not coupled");
    if (!parents.insert(l.parent).second) r.error("parent_link", path, "parent arc " + l.parent.str() + " heads two links");
    if (l.children.empty()) r.error("parent_link", path, "tuple has no child arcs");
    const auto kids = sc.hierarchy.children(l.parent.subsystem);
    std::set<std::string> seen_children;
    for (const auto& c : l.children) {
      if (!all_arcs.count(c)) {
        r.error("parent_link", path, "child arc " + c.str() + " does not exist");
        continue;
      }
      if (!ae.coupled.count(c)) r.error("parent_link", path, "child arc " + c.str() + " is not coupled");
      if (std::find(kids.begin(), kids.end(), c.subsystem) == kids.end()) {
        r.error("parent_link", path,
                "child arc " + c.str() + " is not in a child subsystem of '" + l.parent.subsystem + "'");
      }
      if (!seen_children.insert(c.subsystem).second) {
        r.error("parent_link_arity", path, "tuple has two arcs of subsystem '" + c.subsystem + "'");
      }
    }
    if (ae.upward_threshold &&
        (*ae.upward_threshold < 1 || *ae.upward_threshold > l.children.size())) {
      r.error("threshold", path,
              "upward threshold " + std::to_string(*ae.upward_threshold) + " does not fit a tuple of " +
                  std::to_string(l.children.size()));
    }
  }

  // Coupled arcs must be reachable.
  for (const auto& ref : ae.coupled) {
    const auto* d = sc.diagram_of(ref.subsystem);
    if (d == nullptr) continue;
    const auto* a = d->find_arc(ref.arc);
    if (a == nullptr) continue;
    if (!reachable_states(*d).count(a->from)) {
      r.error("unreachable_coupled_arc", "after_effect." + ref.str(),
              "source state '" + a->from + "' is unreachable from '" + d->initial + "'");
    }
  }
  return r;
}

struct Engine::Impl {
  struct Sub {
    std::string id;
    const HypothesisDiagram* diagram = nullptr;
  };

  Scenario sc;
  std::vector<Sub> subs;  // preorder
  std::vector<std::string> names;
  std::map<std::string, std::size_t> index;
  std::map<ArcRef, std::size_t> link_of_parent;
  std::vector<std::size_t> upward_order;  // links, deepest parent first

  explicit Impl(Scenario s) : sc(std::move(s)) {
    auto report = validate_scenario(sc);
    if (!report.pass()) {
      std::string msg = "scenario '" + sc.id + "' is invalid:";
      for (const auto& i : report.issues) {
        if (i.severity == Severity::Error) msg += " [" + i.path + "] " + i.message + ";";
      }
      throw ModelError(ErrorCode::ValidationFailed, msg, sc.id);
    }
    names = sc.hierarchy.preorder();
    for (std::size_t i = 0; i < names.size(); ++i) {
      subs.push_back({names[i], sc.diagram_of(names[i])});
      index[names[i]] = i;
    }
    const auto& links = sc.after_effect.parent_links;
    for (std::size_t i = 0; i < links.size(); ++i) {
      link_of_parent[links[i].parent] = i;
      upward_order.push_back(i);
    }
    std::stable_sort(upward_order.begin(), upward_order.end(), [&](std::size_t a, std::size_t b) {
      return index.at(links[a].parent.subsystem) > index.at(links[b].parent.subsystem);
    });
  }

  SymbolClass symbol_class(const std::string& x) const {
    if (sc.after_effect.individual_symbols.count(x)) return SymbolClass::Individual;
    if (sc.after_effect.general_symbols.count(x)) return SymbolClass::General;
    return SymbolClass::Unclassified;
  }

  bool is_coupled(const std::string& sub, const std::string& arc) const {
    return sc.after_effect.coupled.count({sub, arc}) > 0;
  }

  Configuration initial() const {
    Configuration c;
    for (const auto& s : subs) c.push_back({s.diagram->initial, 0, 0});
    return c;
  }

  struct TickState {
    Configuration config;
    std::vector<Event> events;
    // Arcs fired this tick other than by downward propagation, with the
    // index of the firing event.
    std::map<ArcRef, std::size_t> fired_upward_eligible;
    std::set<ArcRef> fired;
    Tick tick = 0;
  };

  std::size_t log(TickState& ts, Event e) const {
    e.tick = ts.tick;
    ts.events.push_back(std::move(e));
    return ts.events.size() - 1;
  }

  std::size_t fire(TickState& ts, std::size_t sub, const LabeledArc& arc, Cause cause,
                   std::optional<std::size_t> origin, const std::string& symbol) const {
    auto& st = ts.config[sub];
    Event e;
    e.kind = EventKind::Firing;
    e.subsystem = subs[sub].id;
    e.symbol = symbol;
    e.symbol_class = symbol_class(arc.symbol);
    e.arc = arc.id;
    e.from = st.state;
    e.to = arc.to;
    e.cause = cause;
    e.coupled = is_coupled(subs[sub].id, arc.id);
    e.origin = origin;
    st = {arc.to, ts.tick, ts.tick};
    const std::size_t idx = log(ts, std::move(e));
    const ArcRef ref{subs[sub].id, arc.id};
    ts.fired.insert(ref);
    if (cause != Cause::Downward) ts.fired_upward_eligible.emplace(ref, idx);
    return idx;
  }

  void propagate_down(TickState& ts, std::size_t link, std::size_t origin) const {
    const auto& l = sc.after_effect.parent_links[link];
    for (const auto& child : l.children) {
      const std::size_t ci = index.at(child.subsystem);
      const LabeledArc* arc = subs[ci].diagram->find_arc(child.arc);
      if (ts.config[ci].state != arc->from) {
        Event e;
        e.kind = EventKind::Skipped;
        e.subsystem = child.subsystem;
        e.arc = arc->id;
        e.from = ts.config[ci].state;
        e.to = arc->to;
        e.cause = Cause::Downward;
        e.coupled = true;
        e.origin = origin;
        e.note = "source mismatch: in '" + ts.config[ci].state + "', arc needs '" + arc->from + "'";
        log(ts, std::move(e));
        continue;
      }
      const std::size_t fired = fire(ts, ci, *arc, Cause::Downward, origin, arc->symbol);
      if (auto it = link_of_parent.find(child); it != link_of_parent.end()) {
        propagate_down(ts, it->second, fired);
      }
    }
  }

  void deliver(TickState& ts, std::size_t sub, const std::string& symbol) const {
    Event d;
    d.kind = EventKind::Delivery;
    d.subsystem = subs[sub].id;
    d.symbol = symbol;
    d.symbol_class = symbol_class(symbol);
    const std::size_t delivery = log(ts, std::move(d));

    const LabeledArc* arc = subs[sub].diagram->enabled_arc(ts.config[sub].state, symbol);
    if (arc == nullptr) {
      ts.events[delivery].note = "no arc labelled '" + symbol + "' leaves '" + ts.config[sub].state + "'";
      return;
    }
    ts.events[delivery].effective = true;
    const std::size_t fired = fire(ts, sub, *arc, Cause::Direct, delivery, symbol);
    if (symbol_class(symbol) == SymbolClass::General) {
      if (auto it = link_of_parent.find({subs[sub].id, arc->id}); it != link_of_parent.end()) {
        propagate_down(ts, it->second, fired);
      }
    }
  }

  void upward(TickState& ts) const {
    const auto& links = sc.after_effect.parent_links;
    std::set<std::size_t> settled;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t li : upward_order) {
        if (settled.count(li)) continue;
        const auto& l = links[li];
        if (ts.fired.count(l.parent)) {
          settled.insert(li);
          continue;
        }
        std::size_t done = 0;
        std::optional<std::size_t> first_child;
        for (const auto& c : l.children) {
          auto it = ts.fired_upward_eligible.find(c);
          if (it == ts.fired_upward_eligible.end()) continue;
          ++done;
          first_child = first_child ? std::min(*first_child, it->second) : it->second;
        }
        const std::size_t need = sc.after_effect.upward_threshold.value_or(l.children.size());
        if (done < need) continue;
        settled.insert(li);
        const std::size_t pi = index.at(l.parent.subsystem);
        const LabeledArc* arc = subs[pi].diagram->find_arc(l.parent.arc);
        if (ts.config[pi].state != arc->from) {
          Event e;
          e.kind = EventKind::Skipped;
          e.subsystem = l.parent.subsystem;
          e.arc = arc->id;
          e.from = ts.config[pi].state;
          e.to = arc->to;
          e.cause = Cause::Upward;
          e.coupled = true;
          e.origin = first_child;
          e.note = "source mismatch: in '" + ts.config[pi].state + "', arc needs '" + arc->from + "'";
          log(ts, std::move(e));
          continue;
        }
        fire(ts, pi, *arc, Cause::Upward, first_child, arc->symbol);
        changed = true;
      }
    }
  }

  void backsteps(TickState& ts) const {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      auto& st = ts.config[i];
      if (ts.tick - st.quiet_since < sc.backstep_timeout) continue;
      const auto* d = subs[i].diagram;
      const BackArc* best = nullptr;
      std::size_t best_drop = 0;
      for (const auto& a : d->back_arcs) {
        if (a.from != st.state) continue;
        const std::size_t drop = *d->order(a.from) - *d->order(a.to);
        if (best == nullptr || drop < best_drop) {
          best = &a;
          best_drop = drop;
        }
      }
      if (best == nullptr) continue;
      Event e;
      e.kind = EventKind::Firing;
      e.subsystem = subs[i].id;
      e.arc = best->id;
      e.from = st.state;
      e.to = best->to;
      e.cause = Cause::Backstep;
      e.backstep = true;
      st = {best->to, ts.tick, ts.tick};
      log(ts, std::move(e));
    }
  }

  StepResult step(const Configuration& config, const std::vector<Delivery>& deliveries,
                  Tick tick) const {
    if (config.size() != subs.size()) {
      throw ModelError(ErrorCode::InvalidArgument, "configuration does not match the scenario", sc.id);
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i].diagram->order(config[i].state)) {
        throw ModelError(ErrorCode::InvalidArgument,
                         "configuration places '" + subs[i].id + "' in unknown state '" + config[i].state + "'",
                         sc.id);
      }
    }
    TickState ts{config, {}, {}, {}, tick};

    // Expand broadcasts and order by hierarchy preorder, then list order.
    std::vector<std::pair<std::size_t, std::string>> queue;
    for (const auto& d : deliveries) {
      if (d.target == kBroadcast) {
        for (std::size_t i = 0; i < subs.size(); ++i) {
          const auto& alpha = subs[i].diagram->alphabet;
          if (std::find(alpha.begin(), alpha.end(), d.symbol) != alpha.end()) queue.emplace_back(i, d.symbol);
        }
        continue;
      }
      auto it = index.find(d.target);
      if (it == index.end()) {
        throw ModelError(ErrorCode::InvalidArgument, "unknown delivery target '" + d.target + "'", sc.id);
      }
      queue.emplace_back(it->second, d.symbol);
    }
    std::stable_sort(queue.begin(), queue.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    for (const auto& [sub, symbol] : queue) deliver(ts, sub, symbol);
    upward(ts);
    backsteps(ts);
    return {std::move(ts.config), std::move(ts.events)};
  }
};

Engine::Engine(Scenario sc) : impl_(std::make_unique<Impl>(std::move(sc))) {}
Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

const Scenario& Engine::scenario() const { return impl_->sc; }
const std::vector<std::string>& Engine::subsystems() const { return impl_->names; }
Configuration Engine::initial() const { return impl_->initial(); }

StepResult Engine::step(const Configuration& config, const std::vector<Delivery>& deliveries,
                        Tick tick) const {
  return impl_->step(config, deliveries, tick);
}

Trajectory Engine::run(Tick horizon) const {
  const auto& sc = impl_->sc;
  if (horizon < 0) throw ModelError(ErrorCode::InvalidArgument, "horizon must be non-negative", sc.id);
  for (const auto& c : sc.time_diagram) {
    if (c.tick >= horizon) {
      throw ModelError(ErrorCode::HorizonExceeded,
                       "time diagram schedules tick " + std::to_string(c.tick) + " but the horizon is " +
                           std::to_string(horizon),
                       sc.id);
    }
  }
  std::map<Tick, std::vector<Delivery>> due;
  for (const auto& c : sc.time_diagram) due[c.tick].push_back(c);

  Trajectory tr;
  tr.scenario = sc.id;
  tr.subsystems = impl_->names;
  for (const auto& s : impl_->subs) tr.states.push_back(s.diagram->states);
  tr.horizon = horizon;
  tr.initial = initial();
  Configuration cur = tr.initial;
  static const std::vector<Delivery> none;
  for (Tick t = 0; t < horizon; ++t) {
    auto it = due.find(t);
    auto res = step(cur, it == due.end() ? none : it->second, t);
    cur = std::move(res.configuration);
    tr.per_tick.push_back(cur);
    for (auto& e : res.events) tr.events.push_back(std::move(e));
  }
  return tr;
}

Trajectory run_scenario(const Scenario& sc, Tick horizon) { return Engine(sc).run(horizon); }

StepResult step(const Configuration& config, const std::vector<Delivery>& deliveries,
                const Scenario& sc, Tick tick) {
  return Engine(sc).step(config, deliveries, tick);
}

EfficiencySeries efficiency_process(const Trajectory& tr, const EfficiencyCriterion& crit) {
  EfficiencySeries out;
  out.subsystems = tr.subsystems;
  std::vector<std::map<std::string, double>> table;
  for (std::size_t i = 0; i < tr.subsystems.size(); ++i) {
    const auto& sub = tr.subsystems[i];
    auto it = crit.scores.find(sub);
    for (const auto& s : tr.states.at(i)) {
      if (it == crit.scores.end() || !it->second.count(s)) {
        throw ModelError(ErrorCode::MissingScore, "no score for state '" + s + "' of '" + sub + "'", sub);
      }
    }
    table.push_back(it->second);
  }
  out.per_subsystem.assign(tr.subsystems.size(), {});
  for (const auto& config : tr.per_tick) {
    double total = 0.0;
    for (std::size_t i = 0; i < config.size(); ++i) {
      const double w = table[i].at(config[i].state);
      out.per_subsystem[i].push_back(w);
      total += w;
    }
    out.aggregate.push_back(total);
  }
  return out;
}

ScenarioReport analyze_trajectory(const Trajectory& tr, const Scenario& sc) {
  const auto names = sc.hierarchy.preorder();
  if (tr.subsystems != names) {
    throw ModelError(ErrorCode::TrajectoryScenarioMismatch,
                     "trajectory subsystems differ from scenario '" + sc.id + "'", sc.id);
  }
  if (tr.per_tick.size() != static_cast<std::size_t>(tr.horizon)) {
    throw ModelError(ErrorCode::TrajectoryScenarioMismatch, "trajectory has " +
                         std::to_string(tr.per_tick.size()) + " ticks, horizon is " + std::to_string(tr.horizon),
                     sc.id);
  }
  std::vector<const HypothesisDiagram*> diagrams;
  for (const auto& n : names) {
    const auto* d = sc.diagram_of(n);
    if (d == nullptr) {
      throw ModelError(ErrorCode::TrajectoryScenarioMismatch, "subsystem '" + n + "' has no diagram", sc.id);
    }
    diagrams.push_back(d);
  }
  const Configuration& last = tr.per_tick.empty() ? tr.initial : tr.per_tick.back();
  if (last.size() != names.size()) {
    throw ModelError(ErrorCode::TrajectoryScenarioMismatch, "configuration width differs from the hierarchy", sc.id);
  }

  ScenarioReport rep;
  rep.scenario = sc.id;
  rep.subsystems = names;
  rep.ticks = tr.horizon;
  rep.complete = true;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!diagrams[i]->order(last[i].state)) {
      throw ModelError(ErrorCode::TrajectoryScenarioMismatch,
                       "state '" + last[i].state + "' is not in the diagram of '" + names[i] + "'", sc.id);
    }
    if (last[i].state != diagrams[i]->final) {
      rep.complete = false;
      rep.non_final.push_back(names[i]);
    }
    rep.backsteps[names[i]] = 0;
    rep.coupled_firings[names[i]] = 0;
    rep.propagated_firings[names[i]] = 0;
  }

  std::map<std::string, std::set<Tick>> delivered_at;
  std::map<std::string, std::pair<bool, bool>> kinds;  // (individual, general)
  for (const auto& e : tr.events) {
    if (!rep.backsteps.count(e.subsystem)) {
      throw ModelError(ErrorCode::TrajectoryScenarioMismatch,
                       "event names unknown subsystem '" + e.subsystem + "'", sc.id);
    }
    if (e.kind == EventKind::Delivery) {
      delivered_at[e.subsystem].insert(e.tick);
      if (sc.after_effect.individual_symbols.count(e.symbol)) kinds[e.subsystem].first = true;
      if (sc.after_effect.general_symbols.count(e.symbol)) kinds[e.subsystem].second = true;
      continue;
    }
    if (e.kind != EventKind::Firing) continue;
    if (e.cause == Cause::Backstep) {
      ++rep.backsteps[e.subsystem];
      ++rep.backstep_total;
      continue;
    }
    if (sc.after_effect.coupled.count({e.subsystem, e.arc})) {
      ++rep.coupled_firings[e.subsystem];
      ++rep.coupled_total;
    }
    if (e.cause == Cause::Downward || e.cause == Cause::Upward) ++rep.propagated_firings[e.subsystem];
  }
  for (const auto& n : names) {
    auto k = kinds.find(n);
    if (k != kinds.end() && k->second.first && k->second.second) {
      const auto& ticks = delivered_at[n];
      rep.redundancy.push_back({n, std::vector<Tick>(ticks.begin(), ticks.end())});
    }
  }
  if (tr.horizon > 0) {
    rep.omitted_frequency = static_cast<double>(rep.backstep_total) / static_cast<double>(tr.horizon);
    rep.complexness_frequency = static_cast<double>(rep.coupled_total) / static_cast<double>(tr.horizon);
  }
  return rep;
}

Ranking compare_scenarios(const std::vector<ScenarioReport>& reports) {
  if (reports.size() < 2) {
    throw ModelError(ErrorCode::InvalidArgument, "comparison needs at least two reports");
  }
  auto subsystem_set = [](const ScenarioReport& r) {
    return std::set<std::string>(r.subsystems.begin(), r.subsystems.end());
  };
  const auto base = subsystem_set(reports.front());
  const bool with_efficiency = reports.front().efficiency.has_value();
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (subsystem_set(reports[i]) != base) {
      throw ModelError(ErrorCode::IncomparableReports,
                       "report " + std::to_string(i + 1) + " covers a different subsystem set", {}, {1, i + 1});
    }
    if (reports[i].efficiency.has_value() != with_efficiency) {
      throw ModelError(ErrorCode::IncomparableReports,
                       "only some reports carry an efficiency series", {}, {1, i + 1});
    }
  }
  // Smaller key ranks first.
  auto key = [](const ScenarioReport& r) {
    const double eff = r.efficiency ? r.efficiency->final_aggregate() : 0.0;
    return std::make_tuple(r.complete ? 0 : 1, -eff, r.backstep_total, r.redundancy.size());
  };
  std::vector<std::size_t> order(reports.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(reports[a]) < key(reports[b]); });
  Ranking out;
  for (std::size_t i : order) {
    if (!out.tiers.empty() && key(reports[out.tiers.back().front()]) == key(reports[i])) {
      out.tiers.back().push_back(i);
    } else {
      out.tiers.push_back({i});
    }
  }
  return out;
}

}  // namespace devmodel::scenario

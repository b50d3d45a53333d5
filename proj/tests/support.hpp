#pragma once

// Builders and independent recomputations shared by the unit and acceptance
// tests. Nothing here calls the code under test to compute an expectation.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "devmodel/canonical.hpp"
#include "devmodel/composition.hpp"
#include "devmodel/predicate.hpp"
#include "devmodel/scenario.hpp"
#include "devmodel/statespace.hpp"

#ifndef DEVMODEL_FIXTURES
#define DEVMODEL_FIXTURES "fixtures"
#endif

namespace testsupport {

using namespace devmodel;

/// Code of the ModelError thrown by `f`, or nullopt if nothing was thrown.
inline std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ModelError& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::string fixture(const std::string& name) { return std::string(DEVMODEL_FIXTURES) + "/" + name; }

inline ParameterSet numeric_params(const std::vector<std::string>& names, double lo = -100, double hi = 100) {
  ParameterSet ps;
  for (const auto& n : names) ps.add({n, ParameterKind::Numeric, {}, ValueRange{lo, hi}});
  return ps;
}

inline statespace::Scale make_scale(const std::string& id, const std::vector<std::string>& exprs,
                                    const ParameterSet& ps) {
  std::vector<Predicate> preds;
  std::vector<statespace::State> states;
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    const std::string sid = id + "_" + std::to_string(i + 1);
    preds.emplace_back(sid, exprs[i], ps);
    states.push_back({sid, i + 1, exprs[i]});
  }
  return statespace::Scale(id, std::move(preds), std::move(states));
}

/// Chain s1 -> s2 -> ... with the given development delays.
inline canonical::Diagram chain(const std::string& id, std::size_t n, Tick delay, Tick horizon) {
  canonical::Diagram d;
  d.id = id;
  for (std::size_t i = 1; i <= n; ++i) d.states.push_back("s" + std::to_string(i));
  for (std::size_t i = 0; i + 1 < n; ++i) d.dev_arcs.push_back({d.states[i], d.states[i + 1], delay});
  d.initial = d.states.front();
  d.final = d.states.back();
  d.horizon = horizon;
  return d;
}

/// Random canonical diagram: `n` states, up to `arcs` arcs (development arcs
/// climb, backsteps descend), delays in [min_delay, max_delay]. Backsteps get
/// at least `min_back_delay`, which keeps zero-delay cycles out when it is 1.
inline canonical::Diagram random_diagram(std::mt19937_64& rng, const std::string& id, std::size_t n,
                                         std::size_t arcs, Tick min_delay, Tick max_delay, Tick horizon,
                                         Tick min_back_delay = 0) {
  canonical::Diagram d;
  d.id = id;
  for (std::size_t i = 1; i <= n; ++i) d.states.push_back(id + "s" + std::to_string(i));
  d.initial = d.states.front();
  d.final = d.states.back();
  d.horizon = horizon;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<Tick> delay(min_delay, max_delay);
  std::set<std::pair<std::size_t, std::size_t>> used;
  for (std::size_t k = 0; k < arcs * 4 && used.size() < arcs; ++k) {
    auto a = pick(rng);
    auto b = pick(rng);
    if (a == b || !used.insert({a, b}).second) continue;
    canonical::Arc arc{d.states[a], d.states[b], delay(rng)};
    if (a > b) arc.delay = std::max(arc.delay, min_back_delay);
    (a < b ? d.dev_arcs : d.back_arcs).push_back(arc);
  }
  return d;
}

// ---- scenarios --------------------------------------------------------------

/// Root with two children; the root's arcs are parents of child tuples.
/// Matches fixtures/two_level.json in shape.
inline scenario::Scenario two_level(std::vector<scenario::Delivery> c, Tick timeout = 3,
                                    std::optional<std::size_t> threshold = std::nullopt) {
  using namespace scenario;
  auto diagram = [](const std::string& id, const std::string& p, const std::string& tune) {
    HypothesisDiagram d;
    d.id = id;
    d.states = {p + "0", p + "1", p + "2", p + "3"};
    d.initial = p + "0";
    d.final = p + "3";
    d.alphabet = {"launch", "expand", tune};
    return d;
  };
  HypothesisDiagram root = diagram("root_plan", "P", "certify");
  root.labeled_arcs = {{"p_launch", "P0", "P1", "launch"}, {"p_expand", "P1", "P2", "expand"},
                       {"p_certify", "P2", "P3", "certify"}};
  root.back_arcs = {{"p_lapse", "P2", "P1"}};
  HypothesisDiagram a = diagram("a_plan", "A", "tune_a");
  a.labeled_arcs = {{"a_start", "A0", "A1", "launch"}, {"a_grow", "A1", "A2", "expand"},
                    {"a_tune", "A2", "A3", "tune_a"}};
  a.back_arcs = {{"a_slip", "A3", "A2"}, {"a_drop", "A2", "A1"}};
  HypothesisDiagram b = diagram("b_plan", "B", "tune_b");
  b.labeled_arcs = {{"b_start", "B0", "B1", "launch"}, {"b_grow", "B1", "B2", "expand"},
                    {"b_tune", "B2", "B3", "tune_b"}};
  b.back_arcs = {{"b_slip", "B3", "B2"}};

  Scenario sc;
  sc.id = "two_level";
  sc.diagrams = {root, a, b};
  sc.hierarchy = Hierarchy({{"plant", ""}, {"shop_a", "plant"}, {"shop_b", "plant"}});
  sc.assignment = {{"plant", "root_plan"}, {"shop_a", "a_plan"}, {"shop_b", "b_plan"}};
  sc.time_diagram = std::move(c);
  auto& ae = sc.after_effect;
  ae.isolated = {{"plant", "p_certify"}, {"shop_a", "a_tune"}, {"shop_b", "b_tune"}};
  ae.coupled = {{"plant", "p_launch"}, {"plant", "p_expand"}, {"shop_a", "a_start"},
                {"shop_a", "a_grow"},  {"shop_b", "b_start"}, {"shop_b", "b_grow"}};
  ae.individual_symbols = {"certify", "tune_a", "tune_b"};
  ae.general_symbols = {"launch", "expand"};
  ae.parent_links = {{{"plant", "p_launch"}, {{"shop_a", "a_start"}, {"shop_b", "b_start"}}},
                     {{"plant", "p_expand"}, {{"shop_a", "a_grow"}, {"shop_b", "b_grow"}}}};
  ae.upward_threshold = threshold;
  sc.backstep_timeout = timeout;
  return sc;
}

/// Random valid scenario over a random tree. Each subsystem has a chain of
/// states with isolated arcs on individual symbols; each non-root subsystem
/// has one coupled arc on a general symbol shared with its parent's coupled
/// arc, and the parent arc links the children's coupled arcs.
inline scenario::Scenario random_scenario(std::mt19937_64& rng, int index) {
  using namespace scenario;
  std::uniform_int_distribution<int> nsubs(2, 5);
  const int n = nsubs(rng);
  Scenario sc;
  sc.id = "random_" + std::to_string(index);
  std::vector<Subsystem> nodes{{"s0", ""}};
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    nodes.push_back({"s" + std::to_string(i), "s" + std::to_string(parent(rng))});
  }
  sc.hierarchy = Hierarchy(nodes);

  std::uniform_int_distribution<int> nstates(3, 5);
  std::bernoulli_distribution coin(0.5);
  std::map<std::string, std::vector<std::string>> kids;
  for (const auto& node : nodes) {
    if (!node.parent.empty()) kids[node.parent].push_back(node.id);
  }
  for (const auto& node : nodes) {
    HypothesisDiagram d;
    d.id = "d_" + node.id;
    const int k = nstates(rng);
    for (int s = 0; s < k; ++s) d.states.push_back(node.id + "_q" + std::to_string(s));
    d.initial = d.states.front();
    d.final = d.states.back();
    // Coupled step q0 -> q1 when the subsystem takes part in a link.
    const bool has_kids = kids.count(node.id) > 0;
    const bool coupled = has_kids || !node.parent.empty();
    std::size_t first_isolated = 0;
    if (coupled) {
      // A child whose parent also has children of its own still shares the
      // parent's symbol; its own link uses its own symbol on the next step.
      if (!node.parent.empty()) {
        d.labeled_arcs.push_back({"c_up", d.states[0], d.states[1], "g_" + node.parent});
        d.alphabet.push_back("g_" + node.parent);
        sc.after_effect.coupled.insert({node.id, "c_up"});
        sc.after_effect.general_symbols.insert("g_" + node.parent);
        first_isolated = 1;
      }
      if (has_kids) {
        const std::size_t from = first_isolated;
        d.labeled_arcs.push_back({"c_down", d.states[from], d.states[from + 1], "g_" + node.id});
        d.alphabet.push_back("g_" + node.id);
        sc.after_effect.coupled.insert({node.id, "c_down"});
        sc.after_effect.general_symbols.insert("g_" + node.id);
        first_isolated = from + 1;
      }
    }
    for (std::size_t s = first_isolated; s + 1 < d.states.size(); ++s) {
      const std::string sym = "x_" + node.id + "_" + std::to_string(s);
      d.labeled_arcs.push_back({"i" + std::to_string(s), d.states[s], d.states[s + 1], sym});
      d.alphabet.push_back(sym);
      sc.after_effect.isolated.insert({node.id, "i" + std::to_string(s)});
      sc.after_effect.individual_symbols.insert(sym);
    }
    // Some alternative isolated jumps and backsteps.
    if (d.states.size() > 3 && coin(rng)) {
      const std::string sym = "j_" + node.id;
      d.labeled_arcs.push_back({"jump", d.states[d.states.size() - 3], d.states.back(), sym});
      d.alphabet.push_back(sym);
      sc.after_effect.isolated.insert({node.id, "jump"});
      sc.after_effect.individual_symbols.insert(sym);
    }
    for (std::size_t s = 2; s < d.states.size(); ++s) {
      if (coin(rng)) d.back_arcs.push_back({"b" + std::to_string(s), d.states[s], d.states[s - 1 - (s > 2 && coin(rng))]});
    }
    sc.diagrams.push_back(d);
    sc.assignment[node.id] = d.id;
  }
  for (const auto& [parent, children] : kids) {
    ParentLink link;
    link.parent = {parent, "c_down"};
    for (const auto& c : children) link.children.push_back({c, "c_up"});
    sc.after_effect.parent_links.push_back(link);
  }
  std::uniform_int_distribution<int> thr(0, 1);
  if (thr(rng) == 1) sc.after_effect.upward_threshold = 1;
  std::uniform_int_distribution<Tick> timeout(1, 4);
  sc.backstep_timeout = timeout(rng);

  // Time diagram over 12 ticks: random symbols of random targets.
  std::uniform_int_distribution<Tick> tick(0, 11);
  std::uniform_int_distribution<int> count(3, 14);
  std::uniform_int_distribution<int> who(0, n - 1);
  const int deliveries = count(rng);
  for (int k = 0; k < deliveries; ++k) {
    const auto& d = sc.diagrams[static_cast<std::size_t>(who(rng))];
    std::uniform_int_distribution<std::size_t> sym(0, d.alphabet.size() - 1);
    const std::string target = d.id.substr(2);
    sc.time_diagram.push_back({tick(rng), coin(rng) && k % 5 == 0 ? std::string(kBroadcast) : target,
                               d.alphabet[sym(rng)]});
  }
  std::stable_sort(sc.time_diagram.begin(), sc.time_diagram.end(),
                   [](const Delivery& a, const Delivery& b) { return a.tick < b.tick; });
  sc.horizon = 12;
  return sc;
}

}  // namespace testsupport

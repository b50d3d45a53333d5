#include <doctest.h>

#include <random>

#include "devmodel/scenario.hpp"
#include "support.hpp"

using namespace devmodel;
using namespace devmodel::scenario;
using testsupport::code_of;
using testsupport::two_level;

namespace {

bool has_code(const ValidationReport& r, const std::string& code) {
  for (const auto& i : r.issues) {
    if (i.code == code && i.severity == Severity::Error) return true;
  }
  return false;
}

std::vector<Event> firings_at(const Trajectory& tr, Tick t) {
  std::vector<Event> out;
  for (const auto& e : tr.events) {
    if (e.tick == t && e.kind == EventKind::Firing) out.push_back(e);
  }
  return out;
}

// Parent with one child. The general symbol moves both; only the child can
// step back (C1 -> C0) after `timeout` quiet ticks.
Scenario pair_with_backstep(Tick timeout) {
  HypothesisDiagram p{"pd", {"P0", "P1", "P2"}, "P0", "P2", {"go", "done"},
                      {{"p_go", "P0", "P1", "go"}, {"p_done", "P1", "P2", "done"}}, {}};
  HypothesisDiagram c{"cd", {"C0", "C1"}, "C0", "C1", {"go"}, {{"c_go", "C0", "C1", "go"}},
                      {{"c_back", "C1", "C0"}}};
  Scenario sc;
  sc.id = "pair";
  sc.diagrams = {p, c};
  sc.hierarchy = Hierarchy({{"top", ""}, {"low", "top"}});
  sc.assignment = {{"top", "pd"}, {"low", "cd"}};
  sc.time_diagram = {{1, "top", "go"}};
  sc.after_effect.isolated = {{"top", "p_done"}};
  sc.after_effect.coupled = {{"top", "p_go"}, {"low", "c_go"}};
  sc.after_effect.individual_symbols = {"done"};
  sc.after_effect.general_symbols = {"go"};
  sc.after_effect.parent_links = {{{"top", "p_go"}, {{"low", "c_go"}}}};
  sc.backstep_timeout = timeout;
  return sc;
}

}  // namespace

TEST_CASE("validation of the two-level scenario") {
  auto sc = two_level({{1, "plant", "launch"}});
  CHECK(validate_scenario(sc).pass());

  auto bad_symbol = sc;
  bad_symbol.time_diagram.push_back({2, "shop_a", "tune_b"});
  CHECK(has_code(validate_scenario(bad_symbol), "time_diagram"));

  auto misplaced = sc;
  misplaced.after_effect.coupled.erase({"shop_a", "a_start"});
  misplaced.after_effect.isolated.insert({"shop_a", "a_start"});
  CHECK(has_code(validate_scenario(misplaced), "partition_violation"));

  auto no_root = sc;
  no_root.hierarchy = Hierarchy({{"plant", "shop_a"}, {"shop_a", "plant"}, {"shop_b", "plant"}});
  CHECK_FALSE(validate_scenario(no_root).pass());

  auto arity = sc;
  arity.after_effect.parent_links[0].children.push_back({"shop_a", "a_grow"});
  CHECK(has_code(validate_scenario(arity), "parent_link_arity"));

  auto stranded = sc;
  stranded.diagrams[1].labeled_arcs[1].from = "A2";
  stranded.diagrams[1].labeled_arcs[1].to = "A3";
  stranded.diagrams[1].labeled_arcs[2].from = "A1";
  stranded.diagrams[1].labeled_arcs[2].to = "A2";
  stranded.diagrams[1].labeled_arcs.erase(stranded.diagrams[1].labeled_arcs.begin());
  stranded.diagrams[1].back_arcs.clear();
  CHECK(has_code(validate_scenario(stranded), "unreachable_coupled_arc"));

  auto overlap = sc;
  overlap.diagrams[0].back_arcs.push_back({"p_back", "P1", "P0"});
  overlap.diagrams[0].back_arcs.push_back({"p_fwd", "P0", "P1"});
  CHECK(has_code(validate_scenario(overlap), "p1_p2_overlap"));

  CHECK(code_of([&] { Engine{bad_symbol}; }) == ErrorCode::ValidationFailed);
}

TEST_CASE("general symbol: parent and matching children in one tick") {
  auto tr = run_scenario(two_level({{1, "plant", "launch"}}), 3);
  auto f = firings_at(tr, 1);
  REQUIRE(f.size() == 3);
  std::size_t direct = 0;
  std::size_t downward = 0;
  for (const auto& e : f) {
    direct += e.cause == Cause::Direct;
    downward += e.cause == Cause::Downward;
    CHECK(e.coupled);
  }
  CHECK(direct == 1);
  CHECK(downward == 2);
  CHECK(tr.per_tick[1][1].state == "A1");
  CHECK(tr.per_tick[1][2].state == "B1");
}

TEST_CASE("mismatched child is skipped, not fired") {
  // shop_b takes launch on its own first, so it no longer sits in B0 when the
  // plant's launch propagates down.
  auto tr = run_scenario(two_level({{1, "shop_b", "launch"}, {2, "plant", "launch"}}), 3);
  auto f = firings_at(tr, 2);
  REQUIRE(f.size() == 2);
  CHECK(f[1].subsystem == "shop_a");
  CHECK(f[1].cause == Cause::Downward);
  bool skipped = false;
  for (const auto& e : tr.events) {
    if (e.tick == 2 && e.kind == EventKind::Skipped) skipped = e.subsystem == "shop_b" && e.arc == "b_start";
  }
  CHECK(skipped);

  auto again = run_scenario(two_level({{1, "plant", "launch"}, {2, "shop_a", "launch"}}), 3);
  CHECK(firings_at(again, 2).empty());
  for (const auto& e : again.events) {
    if (e.tick == 2 && e.kind == EventKind::Delivery) CHECK_FALSE(e.effective);
  }
}

TEST_CASE("children completing a tuple fire the parent upward") {
  auto sc = two_level({{1, "plant", "launch"}, {3, "shop_a", "expand"}, {3, "shop_b", "expand"}});
  auto tr = run_scenario(sc, 5);
  auto f = firings_at(tr, 3);
  REQUIRE(f.size() == 3);
  CHECK(f.back().subsystem == "plant");
  CHECK(f.back().cause == Cause::Upward);
  CHECK(tr.per_tick[3][0].state == "P2");

  // Only one child: threshold "all" is not met, threshold 1 is.
  auto half = two_level({{1, "plant", "launch"}, {3, "shop_a", "expand"}});
  CHECK(firings_at(run_scenario(half, 5), 3).size() == 1);
  auto lenient = two_level({{1, "plant", "launch"}, {3, "shop_a", "expand"}}, 3, 1);
  auto lf = firings_at(run_scenario(lenient, 5), 3);
  REQUIRE(lf.size() == 2);
  CHECK(lf[1].cause == Cause::Upward);
}

TEST_CASE("backstep after the timeout") {
  // Hand simulation: low enters C1 at tick 0, is quiet at ticks 1 and 2, so
  // with timeout 2 the backstep fires at tick 2.
  auto sc = pair_with_backstep(2);
  sc.time_diagram = {{0, "top", "go"}};
  sc.diagrams[0].back_arcs = {};
  auto tr = run_scenario(sc, 3);
  std::vector<Event> backs;
  for (const auto& e : tr.events) {
    if (e.kind == EventKind::Firing && e.backstep) backs.push_back(e);
  }
  REQUIRE(backs.size() == 1);
  CHECK(backs[0].tick == 2);
  CHECK(backs[0].subsystem == "low");
  CHECK(backs[0].arc == "c_back");
  CHECK(tr.per_tick[1][1].state == "C1");
  CHECK(tr.per_tick[2][1].state == "C0");

  // Same thing through step from a hand-made configuration.
  Engine eng(sc);
  Configuration cfg{{"P0", 0, 0}, {"C1", 0, 0}};
  auto r1 = eng.step(cfg, {}, 1);
  CHECK(r1.events.empty());
  CHECK(r1.configuration == cfg);
  auto r2 = eng.step(r1.configuration, {}, 2);
  REQUIRE(r2.events.size() == 1);
  CHECK(r2.events[0].cause == Cause::Backstep);
}

TEST_CASE("smallest drop wins among backsteps") {
  auto sc = two_level({{1, "plant", "launch"}, {2, "plant", "expand"}}, 2);
  sc.diagrams[1].back_arcs = {{"a_far", "A2", "A0"}, {"a_near", "A2", "A1"}};
  auto tr = run_scenario(sc, 5);
  std::vector<std::string> arcs;
  for (const auto& e : tr.events) {
    if (e.backstep && e.subsystem == "shop_a") arcs.push_back(e.arc);
  }
  REQUIRE_FALSE(arcs.empty());
  CHECK(arcs[0] == "a_near");
}

TEST_CASE("step examples and fold") {
  auto sc = two_level({{1, "plant", "launch"},
                       {3, "shop_a", "expand"},
                       {3, "shop_b", "expand"},
                       {4, "shop_a", "tune_a"},
                       {5, "shop_b", "tune_b"},
                       {6, "plant", "certify"}});
  Engine eng(sc);
  auto quiet = eng.step(eng.initial(), {}, 0);
  CHECK(quiet.events.empty());
  CHECK(quiet.configuration == eng.initial());

  Configuration at_a2{{"P2", 0, 0}, {"A2", 0, 0}, {"B1", 0, 0}};
  auto single = eng.step(at_a2, {{0, "shop_a", "tune_a"}}, 0);
  std::size_t firings = 0;
  for (const auto& e : single.events) firings += e.kind == EventKind::Firing;
  CHECK(firings == 1);

  // Fold step over the horizon and compare with run.
  auto tr = eng.run(7);
  auto cfg = eng.initial();
  std::vector<Event> events;
  for (Tick t = 0; t < 7; ++t) {
    std::vector<Delivery> due;
    for (const auto& d : sc.time_diagram) {
      if (d.tick == t) due.push_back(d);
    }
    auto r = eng.step(cfg, due, t);
    cfg = r.configuration;
    CHECK(cfg == tr.per_tick[static_cast<std::size_t>(t)]);
    events.insert(events.end(), r.events.begin(), r.events.end());
  }
  CHECK(events == tr.events);
  CHECK(run_scenario(sc, 7) == tr);

  CHECK(code_of([&] { eng.run(5); }) == ErrorCode::HorizonExceeded);
  CHECK(code_of([&] { eng.step(cfg, {{0, "nowhere", "launch"}}, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("replaying firings reproduces every configuration") {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 50; ++k) {
    auto sc = testsupport::random_scenario(rng, k);
    REQUIRE(validate_scenario(sc).pass());
    auto tr = run_scenario(sc, 12);
    std::map<std::string, std::string> state;
    for (std::size_t i = 0; i < tr.subsystems.size(); ++i) state[tr.subsystems[i]] = tr.initial[i].state;
    std::size_t e = 0;
    for (Tick t = 0; t < 12; ++t) {
      for (; e < tr.events.size() && tr.events[e].tick == t; ++e) {
        const auto& ev = tr.events[e];
        if (ev.kind != EventKind::Firing) continue;
        CHECK(state[ev.subsystem] == ev.from);
        const auto* d = sc.diagram_of(ev.subsystem);
        // Direction property.
        if (ev.backstep) {
          CHECK(*d->order(ev.to) < *d->order(ev.from));
        } else {
          CHECK(*d->order(ev.to) > *d->order(ev.from));
        }
        state[ev.subsystem] = ev.to;
      }
      for (std::size_t i = 0; i < tr.subsystems.size(); ++i) {
        CHECK(tr.per_tick[static_cast<std::size_t>(t)][i].state == state[tr.subsystems[i]]);
      }
    }
  }
}

TEST_CASE("analysis tallies on a small fixture") {
  auto sc = pair_with_backstep(5);
  auto tr = run_scenario(sc, 10);
  std::size_t coupled = 0;
  std::size_t backsteps = 0;
  for (const auto& e : tr.events) {
    if (e.kind != EventKind::Firing) continue;
    if (e.backstep) {
      ++backsteps;
    } else if (sc.after_effect.coupled.count({e.subsystem, e.arc})) {
      ++coupled;
    }
  }
  REQUIRE(coupled == 2);
  REQUIRE(backsteps == 1);
  auto rep = analyze_trajectory(tr, sc);
  CHECK(rep.coupled_total == 2);
  CHECK(rep.complexness_frequency == doctest::Approx(0.2));
  CHECK(rep.backstep_total == 1);
  CHECK(rep.omitted_frequency == doctest::Approx(0.1));
  CHECK(rep.backsteps.at("low") == 1);
  CHECK_FALSE(rep.complete);
  CHECK(rep.non_final == std::vector<std::string>{"top", "low"});
  CHECK(rep.propagated_firings.at("low") == 1);
}

TEST_CASE("completeness and zero backsteps") {
  auto sc = two_level({{1, "plant", "launch"},
                       {3, "shop_a", "expand"},
                       {3, "shop_b", "expand"},
                       {4, "shop_a", "tune_a"},
                       {5, "shop_b", "tune_b"},
                       {6, "plant", "certify"}});
  auto tr = run_scenario(sc, 7);
  auto rep = analyze_trajectory(tr, sc);
  CHECK(rep.complete);
  CHECK(rep.non_final.empty());
  CHECK(rep.backstep_total == 0);
  CHECK(rep.omitted_frequency == 0);
  // Every subsystem got both a general and an individual symbol.
  CHECK(rep.redundancy.size() == 3);
  CHECK(rep.redundancy[0].ticks == std::vector<Tick>{1, 6});

  auto other = two_level({{1, "plant", "launch"}});
  CHECK(code_of([&] { analyze_trajectory(run_scenario(other, 7), pair_with_backstep(1)); }) ==
        ErrorCode::TrajectoryScenarioMismatch);
}

TEST_CASE("efficiency process") {
  auto sc = two_level({{1, "plant", "launch"},
                       {3, "shop_a", "expand"},
                       {3, "shop_b", "expand"},
                       {4, "shop_a", "tune_a"},
                       {5, "shop_b", "tune_b"},
                       {6, "plant", "certify"}});
  auto tr = run_scenario(sc, 7);

  EfficiencyCriterion ones;
  for (const auto& [sub, did] : sc.assignment) {
    for (const auto& s : sc.diagram_of(sub)->states) ones.scores[sub][s] = 1;
  }
  auto flat = efficiency_process(run_scenario(two_level({}), 7), ones);
  for (double w : flat.aggregate) CHECK(w == 3);

  EfficiencyCriterion prog;
  prog.scores["plant"] = {{"P0", 0}, {"P1", 2}, {"P2", 4}, {"P3", 6}};
  prog.scores["shop_a"] = {{"A0", 0}, {"A1", 1}, {"A2", 2}, {"A3", 3}};
  prog.scores["shop_b"] = {{"B0", 0}, {"B1", 1}, {"B2", 2}, {"B3", 3}};
  // Manual fold over the event log.
  std::map<std::string, std::string> state{{"plant", "P0"}, {"shop_a", "A0"}, {"shop_b", "B0"}};
  std::vector<double> expected;
  std::size_t e = 0;
  for (Tick t = 0; t < 7; ++t) {
    for (; e < tr.events.size() && tr.events[e].tick == t; ++e) {
      if (tr.events[e].kind == EventKind::Firing) state[tr.events[e].subsystem] = tr.events[e].to;
    }
    double sum = 0;
    for (const auto& [sub, s] : state) sum += prog.scores[sub][s];
    expected.push_back(sum);
  }
  auto w = efficiency_process(tr, prog);
  CHECK(w.aggregate == expected);
  CHECK(w.aggregate == std::vector<double>{0, 4, 4, 8, 9, 10, 12});

  // A single 0 -> 5 step at t = 3.
  EfficiencyCriterion step_score = ones;
  for (auto& [sub, m] : step_score.scores) {
    for (auto& [s, v] : m) v = 0;
  }
  step_score.scores["shop_a"]["A1"] = 5;
  auto one_move = two_level({{3, "shop_a", "launch"}});
  auto ws = efficiency_process(run_scenario(one_move, 6), step_score);
  CHECK(ws.aggregate[2] == 0);
  CHECK(ws.aggregate[3] == 5);

  auto missing = prog;
  missing.scores["shop_b"].erase("B3");
  CHECK(code_of([&] { efficiency_process(tr, missing); }) == ErrorCode::MissingScore);
}

TEST_CASE("ranking") {
  ScenarioReport base;
  base.subsystems = {"a", "b"};
  base.complete = true;

  auto incomplete = base;
  incomplete.complete = false;
  auto r = compare_scenarios({incomplete, base});
  REQUIRE(r.tiers.size() == 2);
  CHECK(r.tiers[0] == std::vector<std::size_t>{1});

  auto tie = compare_scenarios({base, base});
  REQUIRE(tie.tiers.size() == 1);
  CHECK(tie.tiers[0].size() == 2);

  auto one = base;
  one.backstep_total = 1;
  auto three = base;
  three.backstep_total = 3;
  CHECK(compare_scenarios({three, one}).tiers[0] == std::vector<std::size_t>{1});

  auto redundant = base;
  redundant.redundancy = {{"a", {1}}};
  CHECK(compare_scenarios({redundant, base}).tiers[0] == std::vector<std::size_t>{1});

  auto richer = base;
  auto poorer = base;
  richer.efficiency = EfficiencySeries{{"a", "b"}, {{1}, {1}}, {5}};
  poorer.efficiency = EfficiencySeries{{"a", "b"}, {{1}, {1}}, {2}};
  poorer.backstep_total = 0;
  richer.backstep_total = 4;
  CHECK(compare_scenarios({poorer, richer}).tiers[0] == std::vector<std::size_t>{1});

  auto alien = base;
  alien.subsystems = {"a", "c"};
  CHECK(code_of([&] { compare_scenarios({base, alien}); }) == ErrorCode::IncomparableReports);
  CHECK(code_of([&] { compare_scenarios({base}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("individual symbols never fire other subsystems") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 60; ++k) {
    auto sc = testsupport::random_scenario(rng, k);
    auto tr = run_scenario(sc, 12);
    // Each firing's origin chain must end at a delivery to the same subsystem
    // whenever the delivered symbol is individual.
    std::size_t start = 0;
    for (std::size_t i = 0; i < tr.events.size(); ++i) {
      if (i > 0 && tr.events[i].tick != tr.events[i - 1].tick) start = i;
      const auto& ev = tr.events[i];
      if (ev.kind != EventKind::Firing || !ev.origin) continue;
      std::size_t j = start + *ev.origin;
      while (tr.events[j].kind == EventKind::Firing && tr.events[j].origin) j = start + *tr.events[j].origin;
      const auto& root = tr.events[j];
      if (root.kind == EventKind::Delivery && sc.after_effect.individual_symbols.count(root.symbol)) {
        CHECK(root.subsystem == ev.subsystem);
      }
    }
  }
}

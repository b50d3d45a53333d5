// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "devmodel/cli.hpp"
#include "devmodel/composition.hpp"
#include "devmodel/dynamics.hpp"
#include "devmodel/model_file.hpp"
#include "devmodel/report.hpp"
#include "devmodel/scenario.hpp"
#include "devmodel/statespace.hpp"
#include "support.hpp"

using namespace devmodel;
using testsupport::code_of;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string run_cli(const std::vector<std::string>& args, int& code) {
  std::ostringstream out;
  std::ostringstream err;
  code = cli::cli_dispatch(args, out, err);
  return out.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- 1 ------------------------------------------------------------------------

Outcome determinism() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto model = testsupport::fixture("two_level.json");
  const auto dir = std::filesystem::temp_directory_path() / "devmodel_acceptance";
  std::filesystem::create_directories(dir);
  std::string first_report;
  std::string first_csv;
  for (int i = 0; i < 5; ++i) {
    const auto csv = (dir / ("events_" + std::to_string(i) + ".csv")).string();
    int code = 0;
    auto out = run_cli({"simulate", model, "--scenario", "two_level", "--events-out", csv}, code);
    o.require(code == 0, "simulate exited " + std::to_string(code));
    // The events-out path is part of the recorded command; drop it before comparing.
    auto j = nlohmann::json::parse(out);
    j["provenance"]["command"] = nullptr;
    const auto stable = j.dump(2);
    const auto bytes = slurp(csv);
    if (i == 0) {
      first_report = stable;
      first_csv = bytes;
    }
    o.require(stable == first_report, "trajectory report differs on run " + std::to_string(i + 1));
    o.require(bytes == first_csv, "event CSV differs on run " + std::to_string(i + 1));
  }
  int c1 = 0;
  int c2 = 0;
  o.require(run_cli({"simulate", model, "--scenario", "two_level"}, c1) ==
                run_cli({"simulate", model, "--scenario", "two_level"}, c2),
            "machine-json output not byte-identical");

  auto m = model::parse_model(model);
  for (const auto& [id, entry] : m.scenarios) {
    scenario::Engine eng(entry.scenario);
    const Tick h = *entry.scenario.horizon;
    auto tr = eng.run(h);
    auto cfg = eng.initial();
    std::vector<scenario::Event> events;
    bool same = true;
    for (Tick t = 0; t < h; ++t) {
      std::vector<scenario::Delivery> due;
      for (const auto& d : entry.scenario.time_diagram) {
        if (d.tick == t) due.push_back(d);
      }
      auto r = eng.step(cfg, due, t);
      cfg = r.configuration;
      same = same && cfg == tr.per_tick[static_cast<std::size_t>(t)];
      events.insert(events.end(), r.events.begin(), r.events.end());
    }
    o.require(same && events == tr.events, "step fold differs from run for " + id);
  }
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail = "5 runs identical, fold == run, " + std::to_string(secs) + " s";
  return o;
}

// ---- 2 ------------------------------------------------------------------------

Outcome conservation() {
  using namespace canonical;
  Outcome o;
  const auto t0 = Clock::now();
  Diagram d = testsupport::chain("plant", 5, 1, 2000);
  d.back_arcs = {{"s2", "s1", 0}, {"s3", "s2", 1}, {"s4", "s2", 2}, {"s5", "s3", 0}};
  auto init = ObjectDistribution::from_counts({{"s1", 60}, {"s2", 25}, {"s3", 15}});
  std::mt19937_64 rng(2024);

  // Script 1000 legal transitions, mirroring placements locally.
  std::map<std::string, Placement> where = init.objects;
  std::vector<std::string> names;
  for (const auto& [n, p] : where) names.push_back(n);
  std::vector<TransitionEvent> script;
  Tick t = 0;
  while (script.size() < 1000) {
    const auto& name = names[rng() % names.size()];
    auto& p = where[name];
    std::vector<ArcKey> legal;
    for (auto kind : {ArcKind::Development, ArcKind::Backstep}) {
      for (const auto& a : d.arcs(kind)) {
        if (a.from == p.state && t >= p.entry + a.delay) legal.push_back({kind, a.from, a.to});
      }
    }
    if (legal.empty() || rng() % 4 == 0) {
      ++t;
      continue;
    }
    const auto arc = legal[rng() % legal.size()];
    script.push_back({name, arc, t});
    p = {arc.to, t};
  }
  auto r = intensity_report(script, d, 0, t, init);
  bool conserved = true;
  for (std::size_t k = 0; k < r.occupancy[0].size(); ++k) {
    std::size_t sum = 0;
    for (const auto& row : r.occupancy) sum += row[k];
    conserved = conserved && sum == 100;
  }
  o.require(conserved, "occupancy sum drifted from 100");
  o.require(r.development + r.degradation == 1000, "eta total != 1000");
  auto rep = replay(d, init, script);
  std::uint64_t eta = 0;
  for (const auto& [k, n] : rep.counters.counts) eta += n;
  o.require(eta == 1000 && rep.counters.history.size() == 1000, "counter totals != 1000");

  // Illegal scripts: wrong source and early firing.
  const std::string obj = "s1#1";
  auto wrong = script;
  wrong.push_back({obj, {ArcKind::Development, where[obj].state == "s4" ? "s3" : "s4",
                         where[obj].state == "s4" ? "s4" : "s5"},
                   t + 5});
  o.require(code_of([&] { replay(d, init, wrong); }) == ErrorCode::ObjectNotInFromState,
            "wrong-source transition not rejected");
  ObjectDistribution fresh = init;
  ArcCounters counters;
  apply_transition_in_place(fresh, counters, d, obj, {ArcKind::Development, "s1", "s2"}, 3);
  o.require(code_of([&] {
              apply_transition_in_place(fresh, counters, d, obj, {ArcKind::Development, "s2", "s3"}, 3);
            }) == ErrorCode::TooEarly,
            "early transition not rejected");
  auto early = std::vector<TransitionEvent>{{obj, {ArcKind::Development, "s1", "s2"}, 3},
                                            {obj, {ArcKind::Development, "s2", "s3"}, 3}};
  o.require(code_of([&] { replay(d, init, early); }) == ErrorCode::TooEarly, "early replay not rejected");

  const double secs = seconds_since(t0);
  o.require(secs < 1.0, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail = "sum N_i = 100 over " + std::to_string(r.occupancy[0].size()) + " ticks, eta = 1000, " +
                         std::to_string(secs) + " s";
  return o;
}

// ---- 3 and 4 --------------------------------------------------------------------

struct Corpus {
  std::vector<composition::TimedDiagramSet> sets;
  std::vector<composition::AttainableExecutions> oracles;
};

Corpus build_corpus(std::uint64_t seed, std::size_t count) {
  Corpus c;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    composition::TimedDiagramSet set;
    const std::size_t nd = 1 + rng() % 2;
    for (std::size_t k = 0; k < nd; ++k) {
      const std::size_t ns = 2 + rng() % 4;
      const std::size_t na = 1 + rng() % 8;
      set.diagrams.push_back(testsupport::random_diagram(rng, std::string(1, char('a' + k)), ns, na, 0, 3, 6, 1));
      set.intervals.push_back(static_cast<Tick>(3 + rng() % 4));
    }
    c.oracles.push_back(composition::enumerate_attainable_sequences(set, 6));
    c.sets.push_back(std::move(set));
  }
  return c;
}

composition::PrescribedSequence random_sequence(std::mt19937_64& rng, const composition::TimedDiagramSet& set) {
  composition::PrescribedSequence seq;
  const std::size_t len = 1 + rng() % 4;
  Tick deadline = static_cast<Tick>(rng() % 3);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t di = rng() % set.diagrams.size();
    const auto& states = set.diagrams[di].states;
    seq.push_back({di, states[rng() % states.size()], deadline});
    deadline = std::min<Tick>(6, deadline + static_cast<Tick>(rng() % 3));
  }
  return seq;
}

Outcome oracle_equivalence(const Corpus& corpus, std::size_t& checks) {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::size_t agree = 0;
  std::size_t consistent = 0;
  checks = 0;
  for (std::size_t i = 0; i < corpus.sets.size(); ++i) {
    for (int k = 0; k < 200; ++k) {
      auto seq = random_sequence(rng, corpus.sets[i]);
      const bool expected = corpus.oracles[i].satisfies(seq);
      const auto v = composition::check_consistency(corpus.sets[i], seq);
      ++checks;
      agree += v.consistent == expected;
      consistent += expected;
      if (v.consistent != expected && o.pass) {
        o.require(false, "disagreement on set " + std::to_string(i) + " sequence " + std::to_string(k));
      }
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, "took " + std::to_string(secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(agree) + "/" + std::to_string(checks) + " verdicts agree (" +
               std::to_string(consistent) + " consistent) over " + std::to_string(corpus.sets.size()) +
               " diagram sets, " + std::to_string(secs) + " s";
  }
  return o;
}

Outcome deadline_monotonicity(const Corpus& corpus) {
  Outcome o;
  std::mt19937_64 rng(78);
  std::size_t relaxed = 0;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < corpus.sets.size(); ++i) {
    for (int k = 0; k < 200; ++k) {
      auto seq = random_sequence(rng, corpus.sets[i]);
      if (!composition::check_consistency(corpus.sets[i], seq).consistent) continue;
      for (std::size_t j = 0; j < seq.size(); ++j) {
        const Tick cap = j + 1 < seq.size() ? seq[j + 1].deadline : 8;
        for (Tick d = seq[j].deadline + 1; d <= cap; ++d) {
          auto looser = seq;
          looser[j].deadline = d;
          ++relaxed;
          if (!composition::check_consistency(corpus.sets[i], looser).consistent) ++violations;
        }
      }
    }
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  o.require(relaxed > 0, "no relaxations exercised");
  if (o.pass) o.detail = "0 violations over " + std::to_string(relaxed) + " single-deadline relaxations";
  return o;
}

// ---- 5 ------------------------------------------------------------------------

Outcome classification() {
  using namespace statespace;
  Outcome o;
  const auto m = model::parse_model(testsupport::fixture("two_level.json"));
  std::size_t samples = 0;

  // Fixture classificator: root is a partition; the refinement partitions the
  // root's "strong" state.
  const auto& c = m.classificators.at("capacity");
  auto spec = sample_spec_for({"output", "quality"}, m.parameters, 10000, 5);
  for (const auto& a : sample_points(spec, {"output", "quality"}, m.parameters)) {
    ++samples;
    std::size_t hits = 0;
    for (const auto& p : c.root().predicates()) hits += p.evaluate(a);
    o.require(hits == 1, "root scale not a partition at a sample");
    auto path = classify_hierarchical(c, a);
    o.require(path.front().scale == c.root_id(), "path does not start at the root");
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const Scale* child = c.refinement_of(path[k].scale, path[k].predicate);
      o.require(child != nullptr && child->id() == path[k + 1].scale, "path leaves the refinement tree");
    }
    o.require(c.refinement_of(path.back().scale, path.back().predicate) == nullptr, "path stops early");
    // Independent expectation from the raw parameter values.
    const double out = a.at("output");
    const std::size_t expect_root = out < 30 ? 0 : (out < 70 ? 1 : 2);
    o.require(path[0].predicate == expect_root, "wrong root state");
    if (expect_root == 2) {
      o.require(path.size() == 2 && path[1].predicate == (a.at("quality") == 2 ? 1u : 0u), "wrong refined state");
    }
  }

  // Random partition scales built from sorted cut points.
  std::mt19937_64 rng(55);
  auto ps = testsupport::numeric_params({"x"}, 0, 100);
  for (int f = 0; f < 4; ++f) {
    std::vector<double> cuts;
    for (int k = 0; k < 2 + f; ++k) cuts.push_back(std::round(std::uniform_real_distribution<>(1, 99)(rng)));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<std::string> exprs{"x < " + std::to_string(cuts[0])};
    for (std::size_t k = 1; k < cuts.size(); ++k) {
      exprs.push_back("x >= " + std::to_string(cuts[k - 1]) + " and x < " + std::to_string(cuts[k]));
    }
    exprs.push_back("x >= " + std::to_string(cuts.back()));
    auto scale = testsupport::make_scale("p" + std::to_string(f), exprs, ps);
    SampleSpec s;
    s.samples = 10000;
    s.seed = static_cast<std::uint64_t>(f);
    s.ranges["x"] = {0, 100};
    for (const auto& a : sample_points(s, {"x"}, ps)) {
      ++samples;
      const auto expect = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), a.at("x")) - cuts.begin());
      o.require(evaluate_scale(scale, a).index == expect, "partition scale picked the wrong state");
    }
    o.require(validate_scale_disjointness(scale, s, ps).pass(), "partition reported as overlapping");
  }

  // Engineered overlap: both predicates hold exactly on x < 5.
  auto overlap = testsupport::make_scale("overlap", {"x < 5", "x < 10"}, testsupport::numeric_params({"x"}, 0, 10));
  SampleSpec s;
  s.samples = 10000;
  s.seed = 9;
  s.ranges["x"] = {0, 10};
  std::size_t overlap_points = 0;
  for (const auto& a : sample_points(s, {"x"}, {})) {
    ++samples;
    if (a.at("x") >= 5) continue;
    ++overlap_points;
    try {
      evaluate_scale(overlap, a);
      o.require(false, "overlap sample classified silently");
    } catch (const ModelError& e) {
      o.require(e.code() == ErrorCode::MultipleMatch && e.indices() == std::vector<std::size_t>{1, 2},
                "overlap sample gave the wrong error");
    }
  }
  o.require(validate_scale_disjointness(overlap, s).overlaps.size() == overlap_points,
            "disjointness report missed overlap samples");
  if (o.pass) {
    o.detail = std::to_string(samples) + " samples, " + std::to_string(overlap_points) +
               " overlap samples all MultipleMatch";
  }
  return o;
}

// ---- 6 ------------------------------------------------------------------------

Outcome dynamics_suite() {
  using namespace dynamics;
  Outcome o;
  std::size_t cases = 0;
  std::size_t cycles = 0;
  auto sound = [&](const std::vector<double>& v, const TrendClass& tc) {
    if (!tc.cycle_period) return;
    ++cycles;
    const auto p = *tc.cycle_period;
    for (std::size_t t = p; t < v.size(); ++t) o.require(std::fabs(v[t] - v[t - p]) <= 0.0, "cycle inequality broken");
  };
  for (int n = 3; n <= 40; ++n) {
    for (double slope : {0.25, 1.0, 3.0, 17.5}) {
      std::vector<double> up;
      std::vector<double> down;
      for (int t = 0; t < n; ++t) {
        up.push_back(2.0 + slope * t);
        down.push_back(100.0 - slope * t);
      }
      auto a = classify_series(up, 0);
      auto b = classify_series(down, 0);
      cases += 2;
      o.require(a.monotone == Monotone::Increasing && a.critical_points.empty() && !a.cycle_period,
                "linear increasing misclassified");
      o.require(b.monotone == Monotone::Decreasing && b.critical_points.empty() && !b.cycle_period,
                "linear decreasing misclassified");
      sound(up, a);
      sound(down, b);
    }
  }
  for (int amp = 1; amp <= 6; ++amp) {
    const int period = 2 * amp;
    for (int reps = 2; reps <= 4; ++reps) {
      std::vector<double> v;
      for (int t = 0; t < period * reps; ++t) {
        const int ph = t % period;
        v.push_back(ph <= amp ? ph : period - ph);
      }
      auto tc = classify_series(v, 0);
      ++cases;
      o.require(tc.cycle_period == std::optional<std::size_t>(static_cast<std::size_t>(period)),
                "triangle wave period wrong (amp " + std::to_string(amp) + ")");
      sound(v, tc);
    }
  }
  for (int n = 5; n <= 30; ++n) {
    for (double frac : {0.3, 0.5, 0.62}) {
      const double c = frac * (n - 1);
      std::vector<double> v;
      for (int t = 0; t < n; ++t) v.push_back(-(t - c) * (t - c) + 50);
      auto tc = classify_series(v, 0);
      ++cases;
      o.require(tc.critical_points.size() == 1, "parabola critical points != 1");
      sound(v, tc);
    }
  }
  if (o.pass) o.detail = std::to_string(cases) + "/" + std::to_string(cases) + " correct, " +
                         std::to_string(cycles) + " cycles sound";
  return o;
}

// ---- 7 ------------------------------------------------------------------------

Outcome after_effect() {
  using namespace scenario;
  Outcome o;
  const auto m = model::parse_model(testsupport::fixture("two_level.json"));
  const auto& sc = m.scenarios.at("two_level").scenario;
  auto tr = run_scenario(sc, *sc.horizon);

  std::vector<Event> t1;
  std::vector<Event> t3;
  for (const auto& e : tr.events) {
    if (e.kind != EventKind::Firing) continue;
    if (e.tick == 1) t1.push_back(e);
    if (e.tick == 3) t3.push_back(e);
  }
  o.require(t1.size() == 3, "general symbol did not fire parent and both children");
  if (t1.size() == 3) {
    o.require(t1[0].subsystem == "plant" && t1[0].cause == Cause::Direct, "parent firing label");
    for (int k = 1; k < 3; ++k) {
      o.require(t1[k].cause == Cause::Downward && t1[k].origin && t1[k].origin == std::optional<std::size_t>(1),
                "child firing label");
    }
  }
  o.require(t3.size() == 3 && t3.back().subsystem == "plant" && t3.back().cause == Cause::Upward,
            "completed tuple did not fire the parent upward");

  // Isolation: an individual delivery, applied alone to the pre-tick
  // configuration, changes nobody but its target.
  std::mt19937_64 rng(4242);
  std::size_t probes = 0;
  for (int k = 0; k < 100; ++k) {
    auto rs = testsupport::random_scenario(rng, k);
    Engine eng(rs);
    auto rt = eng.run(*rs.horizon);
    for (Tick t = 0; t < *rs.horizon; ++t) {
      const auto& before = t == 0 ? rt.initial : rt.per_tick[static_cast<std::size_t>(t - 1)];
      for (const auto& d : rs.time_diagram) {
        if (d.tick != t || !rs.after_effect.individual_symbols.count(d.symbol)) continue;
        ++probes;
        auto with = eng.step(before, {d}, t);
        auto without = eng.step(before, {}, t);
        for (std::size_t i = 0; i < rt.subsystems.size(); ++i) {
          const bool target = d.target == kBroadcast || rt.subsystems[i] == d.target;
          if (!target) o.require(with.configuration[i] == without.configuration[i], "individual symbol leaked");
        }
        for (const auto& e : with.events) {
          if (e.kind == EventKind::Firing && !e.backstep && d.target != kBroadcast) {
            o.require(e.subsystem == d.target, "cross-subsystem firing from an individual symbol");
          }
        }
      }
    }
  }
  o.require(probes > 0, "no individual deliveries probed");
  if (o.pass) o.detail = "fixture causes correct; " + std::to_string(probes) + " isolation probes over 100 scenarios";
  return o;
}

// ---- 8 ------------------------------------------------------------------------

Outcome composition_preconditions() {
  using namespace composition;
  Outcome o;
  auto a = testsupport::chain("a", 2, 1, 10);
  auto b = testsupport::chain("b", 2, 1, 10);
  o.require(code_of([&] { compose_sequential({{a, b}, {5, 5}}); }) == ErrorCode::IntervalOrderViolation, "(5,5) accepted");
  o.require(code_of([&] { compose_sequential({{a, b}, {6, 4}}); }) == ErrorCode::IntervalOrderViolation, "(6,4) accepted");
  o.require(code_of([&] { compose_parallel({{a, b}, {3, 4}}); }) == ErrorCode::IntervalMismatch, "(3,4) accepted");

  std::mt19937_64 rng(808);
  std::size_t products = 0;
  for (std::size_t n1 = 1; n1 <= 4; ++n1) {
    for (std::size_t n2 = 1; n2 <= 4; ++n2) {
      auto d1 = testsupport::random_diagram(rng, "x", n1, 4, 0, 2, 8, 1);
      auto d2 = testsupport::random_diagram(rng, "y", n2, 4, 0, 2, 8, 1);
      auto p = compose_parallel({{d1, d2}, {8, 8}});
      ++products;
      o.require(p.states.size() == n1 * n2, "product state count");
      const std::size_t arcs1 = d1.dev_arcs.size() + d1.back_arcs.size();
      const std::size_t arcs2 = d2.dev_arcs.size() + d2.back_arcs.size();
      o.require(p.arcs.size() == arcs1 * n2 + arcs2 * n1, "product arc count");
    }
  }

  // Random product executions, projected onto each component.
  std::size_t walks = 0;
  std::size_t firings = 0;
  while (walks < 50) {
    auto d1 = testsupport::random_diagram(rng, "x", 2 + rng() % 3, 6, 0, 2, 12, 1);
    auto d2 = testsupport::random_diagram(rng, "y", 2 + rng() % 3, 6, 0, 2, 12, 1);
    TimedDiagramSet set{{d1, d2}, {12, 12}};
    auto p = compose_parallel(set);
    std::size_t at = p.initial;
    std::vector<Tick> entry(2, 0);
    std::vector<ScheduledFiring> exec;
    for (Tick t = 0; t <= 12; ++t) {
      for (int tries = 0; tries < 2; ++tries) {
        std::vector<const ProductArc*> enabled;
        for (const auto& arc : p.arcs) {
          if (arc.from == at && t >= entry[arc.component] + arc.delay) enabled.push_back(&arc);
        }
        if (enabled.empty() || rng() % 2 == 0) break;
        const auto* arc = enabled[rng() % enabled.size()];
        exec.push_back({arc->component, arc->arc, t});
        entry[arc->component] = t;
        at = arc->to;
      }
    }
    ++walks;
    for (std::size_t comp = 0; comp < 2; ++comp) {
      canonical::ObjectDistribution dist;
      dist.objects["o"] = {set.diagrams[comp].initial, 0};
      canonical::ArcCounters counters;
      for (const auto& f : exec) {
        if (f.diagram != comp) continue;
        ++firings;
        o.require(!code_of([&] {
                    canonical::apply_transition_in_place(dist, counters, set.diagrams[comp], "o", f.arc, f.tick);
                  }),
                  "projection is not a legal component execution");
      }
      o.require(dist.objects["o"].state == p.component_states[comp][p.states[at][comp]],
                "projection ends in the wrong state");
    }
  }
  if (o.pass) {
    o.detail = "preconditions enforced; " + std::to_string(products) + " products up to 4x4; " +
               std::to_string(walks) + " walks (" + std::to_string(firings) + " firings) project legally";
  }
  return o;
}

// ---- 9 ------------------------------------------------------------------------

struct Recount {
  bool complete = true;
  std::map<std::string, std::set<Tick>> redundancy;
  std::map<std::string, std::size_t> backsteps;
  std::map<std::string, std::size_t> coupled;
};

// Reads the exported CSV with nothing but string splitting, and classifies
// symbols and arcs from the scenario definition rather than the CSV flags.
Recount recount(const std::string& csv, const scenario::Scenario& sc) {
  Recount r;
  std::map<std::string, std::string> state;
  for (const auto& [sub, did] : sc.assignment) state[sub] = sc.diagram_of(sub)->initial;
  std::map<std::string, std::set<Tick>> ind;
  std::map<std::string, std::set<Tick>> gen;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    const Tick tick = std::stoll(f[0]);
    const std::string& kind = f[2];
    const std::string& sub = f[3];
    if (kind == "delivery") {
      if (sc.after_effect.individual_symbols.count(f[4])) ind[sub].insert(tick);
      if (sc.after_effect.general_symbols.count(f[4])) gen[sub].insert(tick);
    } else if (kind == "firing") {
      state[sub] = f[9];
      if (f[10] == "backstep") {
        ++r.backsteps[sub];
      } else if (sc.after_effect.coupled.count({sub, f[7]})) {
        ++r.coupled[sub];
      }
    }
  }
  for (const auto& [sub, s] : state) r.complete = r.complete && s == sc.diagram_of(sub)->final;
  for (const auto& [sub, ticks] : ind) {
    if (!gen.count(sub)) continue;
    auto all = ticks;
    all.insert(gen[sub].begin(), gen[sub].end());
    r.redundancy[sub] = all;
  }
  return r;
}

Outcome report_agreement() {
  Outcome o;
  std::mt19937_64 rng(9090);
  for (int k = 0; k < 100; ++k) {
    auto sc = testsupport::random_scenario(rng, k);
    auto tr = scenario::run_scenario(sc, *sc.horizon);
    auto rep = scenario::analyze_trajectory(tr, sc);
    std::ostringstream csv;
    report::write_trajectory_csv(csv, tr);
    auto rc = recount(csv.str(), sc);

    o.require(rep.complete == rc.complete, "completeness differs in " + sc.id);
    std::map<std::string, std::set<Tick>> red;
    for (const auto& inc : rep.redundancy) red[inc.subsystem] = {inc.ticks.begin(), inc.ticks.end()};
    o.require(red == rc.redundancy, "redundancy differs in " + sc.id);
    std::size_t backs = 0;
    std::size_t coupled = 0;
    for (const auto& [sub, n] : rc.backsteps) {
      backs += n;
      o.require(rep.backsteps.count(sub) && rep.backsteps.at(sub) == n, "backsteps differ in " + sc.id);
    }
    for (const auto& [sub, n] : rc.coupled) {
      coupled += n;
      o.require(rep.coupled_firings.count(sub) && rep.coupled_firings.at(sub) == n, "coupled firings differ in " + sc.id);
    }
    o.require(rep.backstep_total == backs, "omitted total differs in " + sc.id);
    o.require(rep.coupled_total == coupled, "complexness total differs in " + sc.id);
    const double h = static_cast<double>(*sc.horizon);
    o.require(std::fabs(rep.omitted_frequency - backs / h) < 1e-12, "omitted frequency differs in " + sc.id);
    o.require(std::fabs(rep.complexness_frequency - coupled / h) < 1e-12, "complexness frequency differs in " + sc.id);
  }
  if (o.pass) o.detail = "100 scenarios, all four tallies match the CSV recount";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const std::string& name, const Outcome& o) {
    std::cout << "criterion " << n << " (" << name << "): " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
              << std::endl;
    failures += !o.pass;
  };
  auto guarded = [&](int n, const std::string& name, const std::function<Outcome()>& f) {
    try {
      report(n, name, f());
    } catch (const std::exception& e) {
      Outcome o;
      o.require(false, std::string("exception: ") + e.what());
      report(n, name, o);
    }
  };

  guarded(1, "determinism and replay", determinism);
  guarded(2, "conservation and counters", conservation);
  Corpus corpus;
  guarded(3, "consistency oracle equivalence", [&] {
    corpus = build_corpus(31337, 40);
    std::size_t checks = 0;
    return oracle_equivalence(corpus, checks);
  });
  guarded(4, "deadline monotonicity", [&] { return deadline_monotonicity(corpus); });
  guarded(5, "classification", classification);
  guarded(6, "dynamics estimator", dynamics_suite);
  guarded(7, "after-effect semantics", after_effect);
  guarded(8, "composition preconditions", composition_preconditions);
  guarded(9, "report/log agreement", report_agreement);
  std::cout << (failures == 0 ? "all criteria PASS" : std::to_string(failures) + " criteria FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <random>

#include "devmodel/canonical.hpp"
#include "support.hpp"

using namespace devmodel;
using namespace devmodel::canonical;
using testsupport::chain;
using testsupport::code_of;

namespace {

bool has_code(const ValidationReport& r, const std::string& code) {
  for (const auto& i : r.issues) {
    if (i.code == code) return true;
  }
  return false;
}

ArcKey dev(const std::string& a, const std::string& b) { return {ArcKind::Development, a, b}; }
ArcKey back(const std::string& a, const std::string& b) { return {ArcKind::Backstep, a, b}; }

}  // namespace

TEST_CASE("validate_canonical") {
  auto d = chain("d", 3, 1, 10);
  auto v = validate_canonical(d);
  CHECK(v.pass());
  CHECK(v.unreachable.empty());
  CHECK(v.final_reachable);

  auto down = d;
  down.dev_arcs.push_back({"s3", "s1", 0});
  CHECK(has_code(validate_canonical(down).report, "order_violation"));

  auto up = d;
  up.back_arcs.push_back({"s1", "s3", 0});
  CHECK(has_code(validate_canonical(up).report, "order_violation"));

  auto slow = d;
  slow.dev_arcs[0].delay = 11;
  CHECK(has_code(validate_canonical(slow).report, "delay_range"));

  auto island = d;
  island.states.push_back("s4");
  auto vi = validate_canonical(island);
  CHECK(vi.unreachable == std::vector<std::string>{"s4"});
}

TEST_CASE("apply_transition respects the residence delay") {
  Diagram d = chain("d", 2, 3, 10);
  auto dist = ObjectDistribution::from_counts({{"s1", 1}});
  const std::string o = dist.objects.begin()->first;
  auto r = apply_transition(dist, {}, d, o, dev("s1", "s2"), 3);
  CHECK(r.distribution.objects.at(o).state == "s2");
  CHECK(r.distribution.objects.at(o).entry == 3);
  CHECK(r.counters.at(dev("s1", "s2")) == 1);

  CHECK(code_of([&] { apply_transition(dist, {}, d, o, dev("s1", "s2"), 2); }) == ErrorCode::TooEarly);
  CHECK(code_of([&] { apply_transition(dist, {}, d, o, dev("s1", "s2"), 11); }) == ErrorCode::BeyondHorizon);
  CHECK(code_of([&] { apply_transition(dist, {}, d, o, dev("s2", "s1"), 5); }) == ErrorCode::UnknownArc);
  CHECK(code_of([&] { apply_transition(r.distribution, r.counters, d, o, dev("s1", "s2"), 5); }) ==
        ErrorCode::ObjectNotInFromState);
  CHECK(code_of([&] { apply_transition(dist, {}, d, "ghost", dev("s1", "s2"), 5); }) ==
        ErrorCode::ObjectNotInFromState);
}

TEST_CASE("failed in-place transition leaves state untouched") {
  Diagram d = chain("d", 2, 3, 10);
  auto dist = ObjectDistribution::from_counts({{"s1", 2}});
  ArcCounters counters;
  const auto before = dist;
  CHECK_THROWS_AS(apply_transition_in_place(dist, counters, d, "s1#1", dev("s1", "s2"), 1), ModelError);
  CHECK(dist == before);
  CHECK(counters.history.empty());
}

TEST_CASE("two objects on the same arc give eta 2") {
  Diagram d = chain("d", 2, 1, 10);
  auto init = ObjectDistribution::from_counts({{"s1", 2}});
  std::vector<TransitionEvent> events;
  for (const auto& [name, p] : init.objects) events.push_back({name, dev("s1", "s2"), 4});
  auto rep = replay(d, init, events);
  // Recount the script directly.
  CHECK(rep.counters.at(dev("s1", "s2")) == events.size());
  CHECK(rep.counters.history == events);
}

TEST_CASE("intensity report examples") {
  Diagram d = chain("d", 3, 1, 10);
  d.back_arcs = {{"s2", "s1", 0}, {"s3", "s2", 0}};

  auto ten = ObjectDistribution::from_counts({{"s1", 10}});
  auto idle = intensity_report({}, d, 0, 10, ten);
  for (auto n : idle.occupancy[0]) CHECK(n == 10);
  CHECK(idle.development == 0);
  CHECK(idle.degradation == 0);
  CHECK_FALSE(idle.ratio);

  auto one = ObjectDistribution::from_counts({{"s1", 1}});
  auto single = intensity_report({{"s1#1", dev("s1", "s2"), 3}}, d, 0, 5, one);
  CHECK(single.occupancy[0][2] == 1);
  CHECK(single.occupancy[0][3] == 0);
  CHECK(single.occupancy[1][2] == 0);
  CHECK(single.occupancy[1][3] == 1);

  // Scripted replay: 5 development and 2 backstep moves.
  auto five = ObjectDistribution::from_counts({{"s1", 5}});
  std::vector<TransitionEvent> h;
  for (int i = 0; i < 5; ++i) h.push_back({"s1#" + std::to_string(i + 1), dev("s1", "s2"), 1});
  h.push_back({"s1#1", back("s2", "s1"), 2});
  h.push_back({"s1#2", back("s2", "s1"), 3});
  std::uint64_t devs = 0;
  std::uint64_t backs = 0;
  for (const auto& e : h) (e.arc.kind == ArcKind::Development ? devs : backs)++;
  auto r = intensity_report(h, d, 0, 10, five);
  CHECK(r.development == devs);
  CHECK(r.degradation == backs);
  REQUIRE(r.ratio);
  CHECK(*r.ratio == doctest::Approx(2.5));
  CHECK(r.development_series.back() == 5);
  CHECK(r.arc_series.at(back("s2", "s1"))[3] == 2);

  CHECK(code_of([&] { intensity_report(h, d, 4, 2, five); }) == ErrorCode::WindowOutOfRange);
  CHECK(code_of([&] { intensity_report(h, d, 0, 11, five); }) == ErrorCode::WindowOutOfRange);
}

TEST_CASE("window excludes events before it") {
  Diagram d = chain("d", 3, 0, 10);
  auto init = ObjectDistribution::from_counts({{"s1", 1}});
  std::vector<TransitionEvent> h{{"s1#1", dev("s1", "s2"), 1}, {"s1#1", dev("s2", "s3"), 6}};
  auto r = intensity_report(h, d, 4, 8, init);
  CHECK(r.development == 1);
  CHECK(r.occupancy[1][0] == 1);
  CHECK(r.occupancy[2][2] == 1);
}

TEST_CASE("goal gap against the declared final distribution") {
  Diagram d = chain("d", 2, 0, 4);
  d.goal_counts = {{"s2", 3}};
  auto init = ObjectDistribution::from_counts({{"s1", 3}});
  auto r = intensity_report({{"s1#1", dev("s1", "s2"), 1}}, d, 0, 4, init);
  REQUIRE(r.goal_gap);
  CHECK(r.goal_gap->at("s2") == -2);
}

TEST_CASE("random legal walks conserve objects and counters") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto d = testsupport::random_diagram(rng, "r", 5, 7, 0, 2, 40);
    auto init = ObjectDistribution::from_counts({{d.states[0], 6}, {d.states[2], 3}});
    auto dist = init;
    ArcCounters counters;
    std::vector<TransitionEvent> history;
    for (Tick t = 0; t <= d.horizon; ++t) {
      for (const auto& [name, place] : std::map(dist.objects)) {
        std::vector<ArcKey> legal;
        for (auto kind : {ArcKind::Development, ArcKind::Backstep}) {
          for (const auto& a : d.arcs(kind)) {
            if (a.from == place.state && t >= place.entry + a.delay) legal.push_back({kind, a.from, a.to});
          }
        }
        if (legal.empty() || rng() % 3 != 0) continue;
        const auto& arc = legal[rng() % legal.size()];
        history.push_back(apply_transition_in_place(dist, counters, d, name, arc, t));
        if (arc.kind == ArcKind::Development) CHECK(*d.order(arc.to) > *d.order(arc.from));
      }
    }
    auto r = intensity_report(history, d, 0, d.horizon, init);
    for (std::size_t t = 0; t < r.occupancy[0].size(); ++t) {
      std::size_t sum = 0;
      for (const auto& row : r.occupancy) sum += row[t];
      CHECK(sum == 9);
    }
    std::uint64_t total = 0;
    for (const auto& [k, n] : counters.counts) total += n;
    CHECK(total == history.size());
    CHECK(replay(d, init, history).distribution == dist);
  }
}

#include "devmodel/composition.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <unordered_set>

namespace devmodel::composition {

using canonical::Arc;
using canonical::ArcKey;
using canonical::ArcKind;

void TimedDiagramSet::check() const {
  if (diagrams.size() != intervals.size()) {
    throw ModelError(ErrorCode::InvalidArgument, "need exactly one interval per diagram");
  }
  for (std::size_t i = 0; i < diagrams.size(); ++i) {
    if (intervals[i] < 0 || intervals[i] > diagrams[i].horizon) {
      throw ModelError(ErrorCode::InvalidArgument,
                       "interval " + std::to_string(intervals[i]) + " of diagram '" +
                           diagrams[i].id + "' is outside [0, " +
                           std::to_string(diagrams[i].horizon) + "]",
                       diagrams[i].id, {i + 1});
    }
  }
}

namespace {

std::string joined_ids(const std::string& op, const TimedDiagramSet& set) {
  std::string s = op + "(";
  for (std::size_t i = 0; i < set.diagrams.size(); ++i) s += (i ? "," : "") + set.diagrams[i].id;
  return s + ")";
}

std::vector<Arc> all_arcs(const Diagram& d, std::vector<ArcKey>& keys) {
  std::vector<Arc> out;
  for (ArcKind kind : {ArcKind::Development, ArcKind::Backstep}) {
    for (const auto& a : d.arcs(kind)) {
      out.push_back(a);
      keys.push_back({kind, a.from, a.to});
    }
  }
  return out;
}

}  // namespace

Diagram compose_sequential(const TimedDiagramSet& set) {
  set.check();
  if (set.diagrams.empty()) throw ModelError(ErrorCode::InvalidArgument, "nothing to compose");
  for (std::size_t i = 0; i + 1 < set.intervals.size(); ++i) {
    if (!(set.intervals[i] < set.intervals[i + 1])) {
      throw ModelError(ErrorCode::IntervalOrderViolation,
                       "tau_" + std::to_string(i + 1) + " = " + std::to_string(set.intervals[i]) +
                           " is not below tau_" + std::to_string(i + 2) + " = " +
                           std::to_string(set.intervals[i + 1]),
                       set.diagrams[i].id, {i + 1, i + 2});
    }
  }
  if (set.diagrams.size() == 1) return set.diagrams.front();

  std::set<std::string> ids;
  for (const auto& d : set.diagrams) {
    if (!ids.insert(d.id).second) {
      throw ModelError(ErrorCode::InvalidArgument, "diagram '" + d.id + "' appears twice", d.id);
    }
  }
  auto q = [](const Diagram& d, const std::string& s) { return d.id + "/" + s; };

  Diagram out;
  out.id = joined_ids("seq", set);
  const Diagram& head = set.diagrams.front();
  const Diagram& tail = set.diagrams.back();
  out.initial = q(head, head.initial);
  out.final = q(tail, tail.final);
  out.horizon = set.intervals.back();
  for (std::size_t i = 0; i < set.diagrams.size(); ++i) {
    const Diagram& d = set.diagrams[i];
    for (const auto& s : d.states) out.states.push_back(q(d, s));
    for (const auto& a : d.dev_arcs) out.dev_arcs.push_back({q(d, a.from), q(d, a.to), a.delay});
    for (const auto& a : d.back_arcs) out.back_arcs.push_back({q(d, a.from), q(d, a.to), a.delay});
    if (i + 1 < set.diagrams.size()) {
      const Diagram& next = set.diagrams[i + 1];
      out.dev_arcs.push_back({q(d, d.final), q(next, next.initial),
                              set.intervals[i + 1] - set.intervals[i]});
    }
  }
  for (const auto& [obj, p] : head.initial_distribution.objects) {
    out.initial_distribution.objects[obj] = {q(head, p.state), p.entry};
  }
  for (const auto& [state, n] : tail.goal_counts) out.goal_counts[q(tail, state)] = n;
  return out;
}

std::string ParallelFragment::state_name(std::size_t index) const {
  std::string s = "(";
  for (std::size_t c = 0; c < components.size(); ++c) {
    s += (c ? "," : "") + component_states[c][states[index][c]];
  }
  return s + ")";
}

std::optional<std::size_t> ParallelFragment::index_of(const std::vector<std::size_t>& tuple) const {
  if (tuple.size() != components.size()) return std::nullopt;
  std::size_t idx = 0;
  for (std::size_t c = 0; c < tuple.size(); ++c) {
    if (tuple[c] >= component_states[c].size()) return std::nullopt;
    idx = idx * component_states[c].size() + tuple[c];
  }
  return idx;
}

bool ParallelFragment::precedes(std::size_t a, std::size_t b) const {
  if (a == b) return false;
  for (std::size_t c = 0; c < components.size(); ++c) {
    if (states[a][c] > states[b][c]) return false;
  }
  return true;
}

ParallelFragment compose_parallel(const TimedDiagramSet& set) {
  set.check();
  if (set.diagrams.empty()) throw ModelError(ErrorCode::InvalidArgument, "nothing to compose");
  for (std::size_t i = 1; i < set.intervals.size(); ++i) {
    if (set.intervals[i] != set.intervals[0]) {
      throw ModelError(ErrorCode::IntervalMismatch,
                       "diagram '" + set.diagrams[i].id + "' has interval " +
                           std::to_string(set.intervals[i]) + ", expected " +
                           std::to_string(set.intervals[0]),
                       set.diagrams[i].id, {1, i + 1});
    }
  }
  ParallelFragment f;
  f.interval = set.intervals[0];
  std::size_t total = 1;
  for (const auto& d : set.diagrams) {
    f.components.push_back(d.id);
    f.component_states.push_back(d.states);
    total *= d.states.size();
  }
  const std::size_t n = set.diagrams.size();
  f.states.reserve(total);
  std::vector<std::size_t> tuple(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    f.states.push_back(tuple);
    for (std::size_t c = n; c-- > 0;) {
      if (++tuple[c] < set.diagrams[c].states.size()) break;
      tuple[c] = 0;
    }
  }
  auto state_index = [&](std::size_t c, const std::string& s) {
    return *set.diagrams[c].order(s) - 1;
  };
  std::vector<std::size_t> init(n);
  std::vector<std::size_t> fin(n);
  for (std::size_t c = 0; c < n; ++c) {
    const Diagram& d = set.diagrams[c];
    if (!d.order(d.initial) || !d.order(d.final)) {
      throw ModelError(ErrorCode::UnknownState, "diagram '" + d.id + "' has undeclared initial/final state", d.id);
    }
    init[c] = state_index(c, d.initial);
    fin[c] = state_index(c, d.final);
  }
  f.initial = *f.index_of(init);
  f.final = *f.index_of(fin);

  for (std::size_t k = 0; k < f.states.size(); ++k) {
    for (std::size_t c = 0; c < n; ++c) {
      std::vector<ArcKey> keys;
      auto arcs = all_arcs(set.diagrams[c], keys);
      for (std::size_t a = 0; a < arcs.size(); ++a) {
        auto from = set.diagrams[c].order(arcs[a].from);
        auto to = set.diagrams[c].order(arcs[a].to);
        if (!from || !to) {
          throw ModelError(ErrorCode::UnknownState, "arc " + keys[a].str() + " names an unknown state",
                           set.diagrams[c].id);
        }
        if (*from - 1 != f.states[k][c]) continue;
        auto target = f.states[k];
        target[c] = *to - 1;
        f.arcs.push_back({k, *f.index_of(target), c, keys[a], arcs[a].delay});
      }
    }
  }
  return f;
}

std::string tuple_name(const StateTuple& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + t[i];
  return s + ")";
}

Diagram generalize(const TimedDiagramSet& children, const std::vector<StateTuple>& selection,
                   const OrderRelationSpec& order) {
  children.check();
  const std::size_t n = children.diagrams.size();
  const std::size_t k = selection.size();
  if (k == 0) throw ModelError(ErrorCode::InvalidArgument, "empty selection");

  // Child state orders per selected tuple, for validation and tie-breaking.
  std::vector<std::vector<std::size_t>> orders(k);
  std::map<StateTuple, std::size_t> index;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& t = selection[i];
    if (t.size() != n) {
      throw ModelError(ErrorCode::TupleOutOfProduct,
                       tuple_name(t) + " has " + std::to_string(t.size()) + " components, expected " +
                           std::to_string(n),
                       {}, {i + 1});
    }
    for (std::size_t c = 0; c < n; ++c) {
      auto o = children.diagrams[c].order(t[c]);
      if (!o) {
        throw ModelError(ErrorCode::TupleOutOfProduct,
                         tuple_name(t) + ": '" + t[c] + "' is not a state of '" +
                             children.diagrams[c].id + "'",
                         {}, {i + 1});
      }
      orders[i].push_back(*o);
    }
    if (!index.emplace(t, i).second) {
      throw ModelError(ErrorCode::InvalidArgument, tuple_name(t) + " is selected twice", {}, {i + 1});
    }
  }

  std::vector<std::vector<bool>> less(k, std::vector<bool>(k, false));
  for (const auto& [a, b] : order.pairs) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end() || ib == index.end()) {
      throw ModelError(ErrorCode::TupleOutOfProduct,
                       "order pair " + tuple_name(a) + " < " + tuple_name(b) +
                           " names a tuple outside the selection");
    }
    less[ia->second][ib->second] = true;
  }
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t i = 0; i < k; ++i) {
      if (!less[i][m]) continue;
      for (std::size_t j = 0; j < k; ++j) {
        if (less[m][j]) less[i][j] = true;
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (less[i][i]) {
      throw ModelError(ErrorCode::OrderCycle,
                       "order relation has a cycle through " + tuple_name(selection[i]), {}, {i + 1});
    }
  }

  // Linear extension: among currently minimal tuples take the
  // lexicographically smallest child-order vector.
  std::vector<std::size_t> ext;
  std::vector<bool> placed(k, false);
  while (ext.size() < k) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < k; ++i) {
      if (placed[i]) continue;
      bool minimal = true;
      for (std::size_t j = 0; j < k && minimal; ++j) minimal = placed[j] || !less[j][i];
      if (minimal && (!best || orders[i] < orders[*best])) best = i;
    }
    placed[*best] = true;
    ext.push_back(*best);
  }

  std::size_t minimal_count = 0;
  std::size_t maximal_count = 0;
  for (std::size_t i = 0; i < k; ++i) {
    bool has_pred = false;
    bool has_succ = false;
    for (std::size_t j = 0; j < k; ++j) {
      has_pred |= less[j][i];
      has_succ |= less[i][j];
    }
    minimal_count += has_pred ? 0 : 1;
    maximal_count += has_succ ? 0 : 1;
  }
  if (minimal_count != 1 || maximal_count != 1) {
    throw ModelError(ErrorCode::NoUniqueExtremes,
                     std::to_string(minimal_count) + " minimal and " + std::to_string(maximal_count) +
                         " maximal tuples; the parent needs exactly one of each");
  }

  Diagram out;
  out.id = joined_ids("gen", children);
  for (std::size_t i : ext) out.states.push_back(tuple_name(selection[i]));
  out.initial = out.states.front();
  out.final = out.states.back();
  out.horizon = children.intervals.empty()
                    ? 0
                    : *std::max_element(children.intervals.begin(), children.intervals.end());
  for (std::size_t x = 0; x < k; ++x) {
    for (std::size_t y = 0; y < k; ++y) {
      const std::size_t a = ext[x];
      const std::size_t b = ext[y];
      if (!less[a][b]) continue;
      bool covered = true;
      for (std::size_t c = 0; c < k && covered; ++c) covered = !(less[a][c] && less[c][b]);
      if (covered) out.dev_arcs.push_back({out.states[x], out.states[y], 0});
    }
  }
  return out;
}

namespace {

struct Compiled {
  // Per diagram: arcs in tie-break order, as (from idx, to idx, delay).
  struct CArc {
    std::size_t from;
    std::size_t to;
    Tick delay;
  };
  std::vector<std::vector<CArc>> arcs;
  std::vector<std::vector<ArcKey>> keys;
  std::vector<std::size_t> initial;
  std::vector<Tick> last_fire;  // min(tau_i, horizon_i)
};

Compiled compile(const TimedDiagramSet& set) {
  Compiled c;
  for (std::size_t i = 0; i < set.diagrams.size(); ++i) {
    const Diagram& d = set.diagrams[i];
    std::vector<ArcKey> keys;
    auto arcs = all_arcs(d, keys);
    std::vector<Compiled::CArc> carcs;
    for (std::size_t a = 0; a < arcs.size(); ++a) {
      auto from = d.order(arcs[a].from);
      auto to = d.order(arcs[a].to);
      if (!from || !to) {
        throw ModelError(ErrorCode::UnknownState, "arc " + keys[a].str() + " names an unknown state", d.id);
      }
      carcs.push_back({*from - 1, *to - 1, arcs[a].delay});
    }
    auto init = d.order(d.initial);
    if (!init) throw ModelError(ErrorCode::UnknownState, "initial state of '" + d.id + "' is undeclared", d.id);
    if (d.states.size() > 255) {
      throw ModelError(ErrorCode::InvalidArgument, "diagram '" + d.id + "' has more than 255 states", d.id);
    }
    c.arcs.push_back(std::move(carcs));
    c.keys.push_back(std::move(keys));
    c.initial.push_back(*init - 1);
    c.last_fire.push_back(std::min(set.intervals[i], d.horizon));
  }
  return c;
}

struct Step {
  std::size_t diagram;
  std::size_t state;
  Tick deadline;
};

std::vector<Step> resolve(const TimedDiagramSet& set, const PrescribedSequence& seq) {
  std::vector<Step> out;
  for (std::size_t j = 0; j < seq.size(); ++j) {
    const auto& p = seq[j];
    if (p.diagram >= set.diagrams.size()) {
      throw ModelError(ErrorCode::UnknownDiagram,
                       "step " + std::to_string(j + 1) + " names diagram " + std::to_string(p.diagram + 1) +
                           " of " + std::to_string(set.diagrams.size()),
                       {}, {j + 1});
    }
    auto o = set.diagrams[p.diagram].order(p.state);
    if (!o) {
      throw ModelError(ErrorCode::UnknownState,
                       "step " + std::to_string(j + 1) + ": '" + p.state + "' is not a state of '" +
                           set.diagrams[p.diagram].id + "'",
                       set.diagrams[p.diagram].id, {j + 1});
    }
    if (j > 0 && p.deadline < seq[j - 1].deadline) {
      throw ModelError(ErrorCode::InvalidArgument, "deadlines must be non-decreasing", {}, {j, j + 1});
    }
    out.push_back({p.diagram, *o - 1, p.deadline});
  }
  return out;
}

struct KeyHash {
  std::size_t operator()(const std::vector<std::int64_t>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto x : v) {
      h ^= static_cast<std::uint64_t>(x);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

ConsistencyVerdict check_consistency(const TimedDiagramSet& set, const PrescribedSequence& seq,
                                     std::size_t state_bound) {
  set.check();
  const auto steps = resolve(set, seq);
  const Compiled cd = compile(set);
  const std::size_t n = set.diagrams.size();
  const std::size_t m = steps.size();

  // Residence beyond the largest outgoing delay changes nothing.
  std::vector<std::vector<Tick>> cap(n);
  for (std::size_t i = 0; i < n; ++i) {
    cap[i].assign(set.diagrams[i].states.size(), 0);
    for (const auto& a : cd.arcs[i]) cap[i][a.from] = std::max(cap[i][a.from], a.delay);
  }

  struct Node {
    Tick tick;
    std::size_t progress;
    std::vector<std::size_t> state;
    std::vector<Tick> residence;
    std::int64_t parent;
    std::int64_t diagram;  // -1: wait
    std::size_t arc;
    std::vector<Tick> met;
  };

  auto advance = [&](Node& node) {
    while (node.progress < m) {
      const Step& s = steps[node.progress];
      if (node.tick > s.deadline || node.state[s.diagram] != s.state) break;
      node.met.push_back(node.tick);
      ++node.progress;
    }
  };
  auto key_of = [&](const Node& node) {
    std::vector<std::int64_t> k{node.tick, static_cast<std::int64_t>(node.progress)};
    for (std::size_t i = 0; i < n; ++i) {
      k.push_back(static_cast<std::int64_t>(node.state[i]));
      k.push_back(std::min(node.residence[i], cap[i][node.state[i]]));
    }
    return k;
  };

  ConsistencyVerdict v;
  std::vector<Node> nodes;
  Node root{0, 0, cd.initial, std::vector<Tick>(n, 0), -1, -1, 0, {}};
  advance(root);
  std::unordered_set<std::vector<std::int64_t>, KeyHash> visited;
  visited.insert(key_of(root));
  nodes.push_back(std::move(root));

  // Depth-first; children are pushed in reverse so the preferred action is
  // expanded first.
  std::vector<std::size_t> stack{0};
  std::optional<std::size_t> goal;
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    v.satisfiable_prefix = std::max(v.satisfiable_prefix, nodes[cur].progress);
    if (nodes[cur].progress == m) {
      goal = cur;
      break;
    }
    std::vector<Node> children;
    const Node& here = nodes[cur];
    for (std::size_t i = 0; i < n; ++i) {
      if (here.tick > cd.last_fire[i]) continue;
      for (std::size_t a = 0; a < cd.arcs[i].size(); ++a) {
        const auto& arc = cd.arcs[i][a];
        if (arc.from != here.state[i] || here.residence[i] < arc.delay) continue;
        Node child = here;
        child.state[i] = arc.to;
        child.residence[i] = 0;
        child.parent = static_cast<std::int64_t>(cur);
        child.diagram = static_cast<std::int64_t>(i);
        child.arc = a;
        advance(child);
        children.push_back(std::move(child));
      }
    }
    if (here.tick < steps[here.progress].deadline) {
      Node child = here;
      ++child.tick;
      for (auto& r : child.residence) ++r;
      child.parent = static_cast<std::int64_t>(cur);
      child.diagram = -1;
      children.push_back(std::move(child));
    }
    for (auto it = children.rbegin(); it != children.rend(); ++it) {
      if (!visited.insert(key_of(*it)).second) continue;
      if (visited.size() > state_bound) {
        throw ModelError(ErrorCode::SpaceBoundExceeded,
                         "consistency search exceeded " + std::to_string(state_bound) + " states");
      }
      nodes.push_back(std::move(*it));
      stack.push_back(nodes.size() - 1);
    }
  }
  v.explored_states = visited.size();
  if (!goal) return v;

  v.consistent = true;
  v.met_at = nodes[*goal].met;
  for (std::int64_t i = static_cast<std::int64_t>(*goal); nodes[i].parent >= 0; i = nodes[i].parent) {
    const Node& node = nodes[i];
    if (node.diagram < 0) continue;
    const auto d = static_cast<std::size_t>(node.diagram);
    v.witness.push_back({d, cd.keys[d][node.arc], node.tick});
  }
  std::reverse(v.witness.begin(), v.witness.end());
  return v;
}

AttainableExecutions enumerate_attainable_sequences(const TimedDiagramSet& set, Tick horizon,
                                                    std::size_t bound) {
  set.check();
  const Compiled cd = compile(set);
  const std::size_t n = set.diagrams.size();

  // Zero-delay cycles would make the execution set infinite.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = set.diagrams[i].states.size();
    std::vector<std::vector<bool>> reach(s, std::vector<bool>(s, false));
    for (const auto& a : cd.arcs[i]) {
      if (a.delay == 0) reach[a.from][a.to] = true;
    }
    for (std::size_t k = 0; k < s; ++k) {
      for (std::size_t x = 0; x < s; ++x) {
        if (!reach[x][k]) continue;
        for (std::size_t y = 0; y < s; ++y) {
          if (reach[k][y]) reach[x][y] = true;
        }
      }
    }
    for (std::size_t x = 0; x < s; ++x) {
      if (reach[x][x]) {
        throw ModelError(ErrorCode::InvalidArgument,
                         "diagram '" + set.diagrams[i].id + "' has a cycle of zero-delay arcs",
                         set.diagrams[i].id);
      }
    }
  }

  AttainableExecutions out;
  out.arity_ = n;
  out.horizon_ = horizon;
  for (const auto& d : set.diagrams) out.state_names_.push_back(d.states);
  out.arc_keys_ = cd.keys;

  std::vector<std::uint8_t> config(cd.initial.begin(), cd.initial.end());
  std::vector<Tick> entry(n, 0);

  auto push_node = [&](std::int32_t parent, Tick tick, std::int16_t diagram, std::int16_t arc) {
    if (out.tick_.size() >= bound) {
      throw ModelError(ErrorCode::SpaceBoundExceeded,
                       "more than " + std::to_string(bound) + " executions up to horizon " +
                           std::to_string(horizon));
    }
    out.parent_.push_back(parent);
    out.tick_.push_back(tick);
    out.diagram_.push_back(diagram);
    out.arc_.push_back(arc);
    out.config_.insert(out.config_.end(), config.begin(), config.end());
    return static_cast<std::int32_t>(out.tick_.size() - 1);
  };

  // Children of a node: every legal firing at a tick >= the node's tick,
  // ordered by tick, then diagram, then arc.
  std::function<void(std::int32_t, Tick)> expand = [&](std::int32_t node, Tick now) {
    for (Tick t = now; t <= horizon; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        if (t > cd.last_fire[i]) continue;
        for (std::size_t a = 0; a < cd.arcs[i].size(); ++a) {
          const auto& arc = cd.arcs[i][a];
          if (arc.from != config[i] || t < entry[i] + arc.delay) continue;
          const std::uint8_t saved_state = config[i];
          const Tick saved_entry = entry[i];
          config[i] = static_cast<std::uint8_t>(arc.to);
          entry[i] = t;
          auto child = push_node(node, t, static_cast<std::int16_t>(i), static_cast<std::int16_t>(a));
          expand(child, t);
          config[i] = saved_state;
          entry[i] = saved_entry;
        }
      }
    }
  };
  auto root = push_node(-1, 0, -1, -1);
  expand(root, 0);
  return out;
}

bool AttainableExecutions::satisfies(const PrescribedSequence& seq) const {
  const std::size_t m = seq.size();
  std::vector<std::pair<std::size_t, std::size_t>> want;  // (diagram, state index)
  for (const auto& p : seq) {
    if (p.diagram >= arity_) return false;
    const auto& names = state_names_[p.diagram];
    auto it = std::find(names.begin(), names.end(), p.state);
    if (it == names.end()) return false;
    want.emplace_back(p.diagram, static_cast<std::size_t>(it - names.begin()));
  }
  // progress[i]: steps met along the path root..i, matching greedily.
  std::vector<std::uint16_t> progress(tick_.size(), 0);
  for (std::size_t i = 0; i < tick_.size(); ++i) {
    std::size_t j = parent_[i] < 0 ? 0 : progress[static_cast<std::size_t>(parent_[i])];
    const std::uint8_t* cfg = &config_[i * arity_];
    while (j < m && tick_[i] <= seq[j].deadline && cfg[want[j].first] == want[j].second) ++j;
    if (j == m) return true;
    progress[i] = static_cast<std::uint16_t>(j);
  }
  return m == 0;
}

std::vector<ScheduledFiring> AttainableExecutions::execution(std::size_t index) const {
  std::vector<ScheduledFiring> out;
  for (auto i = static_cast<std::int32_t>(index); i >= 0 && parent_[static_cast<std::size_t>(i)] >= 0;
       i = parent_[static_cast<std::size_t>(i)]) {
    const auto k = static_cast<std::size_t>(i);
    const auto d = static_cast<std::size_t>(diagram_[k]);
    out.push_back({d, arc_keys_[d][static_cast<std::size_t>(arc_[k])], tick_[k]});
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace devmodel::composition

#include "devmodel/model_file.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace devmodel::model {

using nlohmann::json;

std::string_view to_string(Operation op) {
  switch (op) {
    case Operation::Sequential: return "sequential";
    case Operation::Parallel: return "parallel";
    case Operation::Generalize: return "generalize";
    case Operation::Consistency: return "consistency";
  }
  return "consistency";
}

std::optional<Operation> operation_from_string(std::string_view s) {
  for (auto op : {Operation::Sequential, Operation::Parallel, Operation::Generalize, Operation::Consistency}) {
    if (to_string(op) == s) return op;
  }
  return std::nullopt;
}

composition::TimedDiagramSet ModelFile::diagram_set(const CompositionRequest& r) const {
  composition::TimedDiagramSet set;
  for (const auto& id : r.diagrams) {
    auto it = canonical_diagrams.find(id);
    if (it == canonical_diagrams.end()) {
      throw ModelError(ErrorCode::UnresolvedReference, "request '" + r.id + "' names unknown diagram '" + id + "'", r.id);
    }
    set.diagrams.push_back(it->second);
  }
  set.intervals = r.intervals;
  return set;
}

std::string Diagnostic::str() const {
  std::string out(to_string(code));
  if (line > 0) out += " at line " + std::to_string(line) + ", column " + std::to_string(column);
  if (!path.empty()) out += " [" + path + "]";
  return out + ": " + message;
}

namespace {

// Reads typed fields and records every problem instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& errors) : errors_(errors) {}

  void fail(ErrorCode code, const std::string& path, const std::string& message) {
    errors_.push_back({code, path, message, 0, 0});
  }
  void unresolved(const std::string& path, const std::string& message) {
    fail(ErrorCode::UnresolvedReference, path, message);
  }
  std::size_t error_count() const { return errors_.size(); }

  bool expect_object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(ErrorCode::ParseError, path, "expected an object");
    return false;
  }
  bool expect_array(const json& j, const std::string& path) {
    if (j.is_array()) return true;
    fail(ErrorCode::ParseError, path, "expected an array");
    return false;
  }

  void allow_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
    if (!obj.is_object()) return;
    for (const auto& [k, _] : obj.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
        fail(ErrorCode::ParseError, join(path, k), "unknown key '" + k + "'");
      }
    }
  }

  const json* field(const json& obj, const std::string& key, const std::string& path, bool required) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
      if (required) fail(ErrorCode::ParseError, join(path, key), "missing required field '" + key + "'");
      return nullptr;
    }
    return &*it;
  }

  std::optional<std::string> str(const json& obj, const std::string& key, const std::string& path,
                                 bool required = true) {
    const json* v = field(obj, key, path, required);
    if (v == nullptr) return std::nullopt;
    return as_string(*v, join(path, key));
  }
  std::optional<std::string> as_string(const json& v, const std::string& path) {
    if (!v.is_string()) {
      fail(ErrorCode::ParseError, path, "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& key, const std::string& path,
                                      bool required = true) {
    const json* v = field(obj, key, path, required);
    if (v == nullptr) return std::nullopt;
    return as_integer(*v, join(path, key));
  }
  std::optional<std::int64_t> as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) {
      fail(ErrorCode::ParseError, path, "expected an integer");
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }
  std::optional<double> as_number(const json& v, const std::string& path) {
    if (!v.is_number()) {
      fail(ErrorCode::ParseError, path, "expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::vector<std::string> strings(const json& obj, const std::string& key, const std::string& path,
                                   bool required = true) {
    const json* v = field(obj, key, path, required);
    if (v == nullptr) return {};
    return as_strings(*v, join(path, key));
  }
  std::vector<std::string> as_strings(const json& v, const std::string& path) {
    std::vector<std::string> out;
    if (!expect_array(v, path)) return out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (auto s = as_string(v[i], index(path, i))) out.push_back(*s);
    }
    return out;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }

  // Library constructors report through ModelError; fold them in.
  template <typename F>
  bool guard(const std::string& path, F&& f) {
    try {
      f();
      return true;
    } catch (const ModelError& e) {
      ErrorCode code = e.code();
      if (code == ErrorCode::UnknownIdentifier) code = ErrorCode::UnresolvedReference;
      if (code != ErrorCode::UnresolvedReference) code = ErrorCode::ParseError;
      fail(code, path, e.what());
      return false;
    }
  }

 private:
  std::vector<Diagnostic>& errors_;
};

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// ---- parameters -----------------------------------------------------------

ParameterSet read_parameters(const json& j, Reader& r) {
  ParameterSet out;
  const std::string base = "parameters";
  if (!r.expect_object(j, base)) return out;
  for (const auto& [name, spec] : j.items()) {
    const std::string path = Reader::join(base, name);
    if (!r.expect_object(spec, path)) continue;
    r.allow_keys(spec, path, {"kind", "levels", "range"});
    ParameterDecl d;
    d.name = name;
    auto kind = r.str(spec, "kind", path, false).value_or("numeric");
    if (kind == "ordinal") {
      d.kind = ParameterKind::Ordinal;
      d.levels = r.strings(spec, "levels", path);
    } else if (kind != "numeric") {
      r.fail(ErrorCode::ParseError, Reader::join(path, "kind"), "kind must be 'numeric' or 'ordinal'");
      continue;
    }
    if (const json* range = r.field(spec, "range", path, false)) {
      if (range->is_array() && range->size() == 2 && (*range)[0].is_number() && (*range)[1].is_number()) {
        d.range = ValueRange{(*range)[0].get<double>(), (*range)[1].get<double>()};
      } else {
        r.fail(ErrorCode::ParseError, Reader::join(path, "range"), "range must be [lo, hi]");
      }
    }
    r.guard(path, [&] { out.add(std::move(d)); });
  }
  return out;
}

json write_parameters(const ParameterSet& ps) {
  json out = json::object();
  for (const auto& d : ps.decls()) {
    json p;
    p["kind"] = d.kind == ParameterKind::Ordinal ? "ordinal" : "numeric";
    if (d.kind == ParameterKind::Ordinal) p["levels"] = d.levels;
    if (d.range) p["range"] = {d.range->lo, d.range->hi};
    out[d.name] = p;
  }
  return out;
}

// ---- scales and classificators ---------------------------------------------

std::optional<statespace::Scale> read_scale(const std::string& id, const json& spec, const ParameterSet& params,
                                            Reader& r) {
  const std::string path = "scales." + id;
  if (!r.expect_object(spec, path)) return std::nullopt;
  r.allow_keys(spec, path, {"states"});
  const json* states = r.field(spec, "states", path, true);
  if (states == nullptr || !r.expect_array(*states, path + ".states")) return std::nullopt;
  std::vector<Predicate> preds;
  std::vector<statespace::State> st;
  bool ok = true;
  for (std::size_t i = 0; i < states->size(); ++i) {
    const std::string sp = Reader::index(path + ".states", i);
    const json& s = (*states)[i];
    if (!r.expect_object(s, sp)) {
      ok = false;
      continue;
    }
    r.allow_keys(s, sp, {"id", "predicate", "label"});
    auto sid = r.str(s, "id", sp);
    auto expr = r.str(s, "predicate", sp);
    auto label = r.str(s, "label", sp, false);
    if (!sid || !expr) {
      ok = false;
      continue;
    }
    ok &= r.guard(sp + ".predicate", [&] { preds.emplace_back(*sid, *expr, params); });
    st.push_back({*sid, i + 1, label.value_or("")});
  }
  if (!ok) return std::nullopt;
  std::optional<statespace::Scale> out;
  r.guard(path, [&] { out.emplace(id, std::move(preds), std::move(st)); });
  return out;
}

json write_scale(const statespace::Scale& s) {
  json states = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    json e{{"id", s.states()[i].id}, {"predicate", s.predicates()[i].expression()}};
    if (!s.states()[i].label.empty()) e["label"] = s.states()[i].label;
    states.push_back(e);
  }
  return {{"states", states}};
}

std::optional<statespace::Classificator> read_classificator(
    const std::string& id, const json& spec, const std::map<std::string, statespace::Scale>& scales,
    const std::set<std::string>& declared_scales, Reader& r) {
  const std::string path = "classificators." + id;
  if (!r.expect_object(spec, path)) return std::nullopt;
  r.allow_keys(spec, path, {"root", "scales", "refinements", "window"});
  const std::size_t before = r.error_count();
  auto root = r.str(spec, "root", path);
  std::vector<std::string> members;
  if (root) members.push_back(*root);
  std::map<statespace::RefinementKey, std::string> refinements;

  auto resolve = [&](const std::string& sid, const std::string& where) -> const statespace::Scale* {
    auto it = scales.find(sid);
    if (it != scales.end()) return &it->second;
    // A declared scale that failed to parse has already been reported.
    if (!declared_scales.count(sid)) r.unresolved(where, "unknown scale '" + sid + "'");
    return nullptr;
  };
  if (root) resolve(*root, path + ".root");

  if (const json* refs = r.field(spec, "refinements", path, false); refs && r.expect_array(*refs, path + ".refinements")) {
    for (std::size_t i = 0; i < refs->size(); ++i) {
      const std::string rp = Reader::index(path + ".refinements", i);
      const json& e = (*refs)[i];
      if (!r.expect_object(e, rp)) continue;
      r.allow_keys(e, rp, {"scale", "state", "child"});
      auto sc = r.str(e, "scale", rp);
      auto state = r.str(e, "state", rp);
      auto child = r.str(e, "child", rp);
      if (!sc || !state || !child) continue;
      const auto* parent = resolve(*sc, rp + ".scale");
      resolve(*child, rp + ".child");
      if (!contains(members, *child)) members.push_back(*child);
      if (parent == nullptr) continue;
      const auto& st = parent->states();
      auto pos = std::find_if(st.begin(), st.end(), [&](const statespace::State& s) { return s.id == *state; });
      if (pos == st.end()) {
        r.unresolved(rp + ".state", "scale '" + *sc + "' has no state '" + *state + "'");
        continue;
      }
      refinements[{*sc, static_cast<std::size_t>(pos - st.begin())}] = *child;
    }
  }
  if (const json* listed = r.field(spec, "scales", path, false)) {
    for (const auto& sid : r.as_strings(*listed, path + ".scales")) {
      resolve(sid, path + ".scales");
      if (!contains(members, sid)) members.push_back(sid);
    }
  }
  std::optional<statespace::TimeWindow> window;
  if (const json* w = r.field(spec, "window", path, false)) {
    if (w->is_array() && w->size() == 2 && (*w)[0].is_number_integer() && (*w)[1].is_number_integer()) {
      window = statespace::TimeWindow{(*w)[0].get<Tick>(), (*w)[1].get<Tick>()};
    } else {
      r.fail(ErrorCode::ParseError, path + ".window", "window must be [first, last] ticks");
    }
  }
  if (r.error_count() != before || !root) return std::nullopt;
  std::map<std::string, statespace::Scale> owned;
  for (const auto& sid : members) owned[sid] = scales.at(sid);
  std::optional<statespace::Classificator> out;
  r.guard(path, [&] { out.emplace(id, *root, std::move(owned), std::move(refinements), window); });
  return out;
}

json write_classificator(const statespace::Classificator& c) {
  json refs = json::array();
  for (const auto& [key, child] : c.refinements()) {
    refs.push_back({{"scale", key.scale}, {"state", c.scale(key.scale).states().at(key.predicate).id}, {"child", child}});
  }
  json scales = json::array();
  for (const auto& [sid, _] : c.scales()) scales.push_back(sid);
  json out{{"root", c.root_id()}, {"refinements", refs}, {"scales", scales}};
  if (c.window()) out["window"] = {c.window()->first, c.window()->last};
  return out;
}

// ---- rule matrices and series ------------------------------------------------

std::optional<statespace::RuleMatrix> read_rule_matrix(const std::string& id, const json& spec,
                                                       const std::set<std::string>& known_parameters,
                                                       Reader& r) {
  const std::string path = "rule_matrices." + id;
  if (!r.expect_object(spec, path)) return std::nullopt;
  r.allow_keys(spec, path, {"parameters", "classes", "cells"});
  auto params = r.strings(spec, "parameters", path);
  auto classes = r.strings(spec, "classes", path);
  for (const auto& p : params) {
    if (!known_parameters.count(p)) r.unresolved(path + ".parameters", "unknown parameter '" + p + "'");
  }
  std::vector<std::vector<std::string>> cells;
  const json* cj = r.field(spec, "cells", path, true);
  if (cj == nullptr || !r.expect_array(*cj, path + ".cells")) return std::nullopt;
  for (std::size_t i = 0; i < cj->size(); ++i) cells.push_back(r.as_strings((*cj)[i], Reader::index(path + ".cells", i)));
  std::optional<statespace::RuleMatrix> out;
  r.guard(path, [&] { out.emplace(id, params, classes, cells); });
  return out;
}

json write_rule_matrix(const statespace::RuleMatrix& m) {
  json cells = json::array();
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < m.classes().size(); ++k) row.push_back(m.cell(i, k).expression());
    cells.push_back(row);
  }
  return {{"parameters", m.parameters()}, {"classes", m.classes()}, {"cells", cells}};
}

std::optional<dynamics::Series> read_series(const std::string& name, const json& spec, Reader& r) {
  const std::string path = "series." + name;
  if (!r.expect_object(spec, path)) return std::nullopt;
  r.allow_keys(spec, path, {"ticks", "values"});
  dynamics::Series s;
  s.parameter = name;
  const json* ticks = r.field(spec, "ticks", path, true);
  const json* values = r.field(spec, "values", path, true);
  if (ticks == nullptr || values == nullptr) return std::nullopt;
  if (!r.expect_array(*ticks, path + ".ticks") || !r.expect_array(*values, path + ".values")) return std::nullopt;
  for (std::size_t i = 0; i < ticks->size(); ++i) {
    if (auto t = r.as_integer((*ticks)[i], Reader::index(path + ".ticks", i))) s.ticks.push_back(*t);
  }
  for (std::size_t i = 0; i < values->size(); ++i) {
    if (auto v = r.as_number((*values)[i], Reader::index(path + ".values", i))) s.values.push_back(*v);
  }
  if (!r.guard(path, [&] { s.check(); })) return std::nullopt;
  return s;
}

// ---- canonical diagrams ------------------------------------------------------

std::optional<canonical::Diagram> read_diagram(const std::string& id, const json& spec,
                                               const std::map<std::string, statespace::Scale>& scales,
                                               const std::set<std::string>& declared_scales, Reader& r) {
  using canonical::Arc;
  const std::string path = "canonical_diagrams." + id;
  if (!r.expect_object(spec, path)) return std::nullopt;
  r.allow_keys(spec, path,
               {"scale", "states", "dev_arcs", "back_arcs", "initial", "final", "horizon", "initial_distribution", "goal"});
  canonical::Diagram d;
  d.id = id;
  d.scale = r.str(spec, "scale", path, false);
  if (d.scale) {
    auto it = scales.find(*d.scale);
    if (it != scales.end()) {
      for (const auto& s : it->second.states()) d.states.push_back(s.id);
    } else if (!declared_scales.count(*d.scale)) {
      r.unresolved(path + ".scale", "unknown scale '" + *d.scale + "'");
    }
  }
  if (const json* st = r.field(spec, "states", path, !d.scale)) {
    auto listed = r.as_strings(*st, path + ".states");
    if (d.scale && !d.states.empty() && listed != d.states) {
      r.fail(ErrorCode::ParseError, path + ".states", "states differ from the states of scale '" + *d.scale + "'");
    }
    d.states = listed;
  }
  auto check_state = [&](const std::string& s, const std::string& where) {
    if (!contains(d.states, s)) r.unresolved(where, "diagram '" + id + "' has no state '" + s + "'");
  };
  if (auto v = r.str(spec, "initial", path)) {
    d.initial = *v;
    check_state(d.initial, path + ".initial");
  }
  if (auto v = r.str(spec, "final", path)) {
    d.final = *v;
    check_state(d.final, path + ".final");
  }
  if (auto h = r.integer(spec, "horizon", path)) d.horizon = *h;
  for (const auto* key : {"dev_arcs", "back_arcs"}) {
    auto& list = std::string_view(key) == "dev_arcs" ? d.dev_arcs : d.back_arcs;
    const json* arcs = r.field(spec, key, path, false);
    if (arcs == nullptr || !r.expect_array(*arcs, path + "." + key)) continue;
    for (std::size_t i = 0; i < arcs->size(); ++i) {
      const std::string ap = Reader::index(path + "." + key, i);
      const json& a = (*arcs)[i];
      if (!r.expect_object(a, ap)) continue;
      r.allow_keys(a, ap, {"from", "to", "delay"});
      auto from = r.str(a, "from", ap);
      auto to = r.str(a, "to", ap);
      auto delay = r.integer(a, "delay", ap, false);
      if (!from || !to) continue;
      check_state(*from, ap + ".from");
      check_state(*to, ap + ".to");
      list.push_back(Arc{*from, *to, delay.value_or(0)});
    }
  }
  if (const json* dist = r.field(spec, "initial_distribution", path, false); dist && r.expect_object(*dist, path + ".initial_distribution")) {
    const std::string dp = path + ".initial_distribution";
    r.allow_keys(*dist, dp, {"counts", "objects"});
    if (const json* counts = r.field(*dist, "counts", dp, false); counts && r.expect_object(*counts, dp + ".counts")) {
      std::map<std::string, std::size_t> per_state;
      for (const auto& [state, n] : counts->items()) {
        check_state(state, dp + ".counts." + state);
        auto v = r.as_integer(n, dp + ".counts." + state);
        if (v && *v >= 0) per_state[state] = static_cast<std::size_t>(*v);
        else if (v) r.fail(ErrorCode::ParseError, dp + ".counts." + state, "count must be non-negative");
      }
      d.initial_distribution = canonical::ObjectDistribution::from_counts(per_state);
    }
    if (const json* objs = r.field(*dist, "objects", dp, false); objs && r.expect_object(*objs, dp + ".objects")) {
      for (const auto& [name, p] : objs->items()) {
        const std::string op = dp + ".objects." + name;
        if (!r.expect_object(p, op)) continue;
        auto state = r.str(p, "state", op);
        auto entry = r.integer(p, "entry", op, false);
        if (!state) continue;
        check_state(*state, op + ".state");
        if (d.initial_distribution.objects.count(name)) {
          r.fail(ErrorCode::ParseError, op, "object '" + name + "' is placed twice");
        }
        d.initial_distribution.objects[name] = {*state, entry.value_or(0)};
      }
    }
  }
  if (const json* goal = r.field(spec, "goal", path, false); goal && r.expect_object(*goal, path + ".goal")) {
    for (const auto& [state, n] : goal->items()) {
      check_state(state, path + ".goal." + state);
      auto v = r.as_integer(n, path + ".goal." + state);
      if (v && *v >= 0) d.goal_counts[state] = static_cast<std::size_t>(*v);
    }
  }
  return d;
}

// ---- composition requests ----------------------------------------------------

std::optional<CompositionRequest> read_request(const std::string& id, const json& spec,
                                               const std::map<std::string, canonical::Diagram>& diagrams,
                                               const std::set<std::string>& declared, Reader& r) {
  const std::string path = "composition_requests." + id;
  if (!r.expect_object(spec, path)) return std::nullopt;
  r.allow_keys(spec, path, {"operation", "diagrams", "intervals", "sequence", "selection", "order"});
  CompositionRequest q;
  q.id = id;
  if (auto op = r.str(spec, "operation", path)) {
    if (auto parsed = operation_from_string(*op)) q.operation = *parsed;
    else r.fail(ErrorCode::ParseError, path + ".operation", "unknown operation '" + *op + "'");
  }
  q.diagrams = r.strings(spec, "diagrams", path);
  std::vector<const canonical::Diagram*> resolved;
  for (const auto& d : q.diagrams) {
    auto it = diagrams.find(d);
    if (it == diagrams.end() && !declared.count(d)) r.unresolved(path + ".diagrams", "unknown diagram '" + d + "'");
    resolved.push_back(it == diagrams.end() ? nullptr : &it->second);
  }
  if (const json* iv = r.field(spec, "intervals", path, true); iv && r.expect_array(*iv, path + ".intervals")) {
    for (std::size_t i = 0; i < iv->size(); ++i) {
      if (auto t = r.as_integer((*iv)[i], Reader::index(path + ".intervals", i))) q.intervals.push_back(*t);
    }
    if (q.intervals.size() != q.diagrams.size()) {
      r.fail(ErrorCode::ParseError, path + ".intervals", "need one interval per diagram");
    }
  }
  auto check_state = [&](std::size_t k, const std::string& state, const std::string& where) {
    if (k < resolved.size() && resolved[k] != nullptr && !contains(resolved[k]->states, state)) {
      r.unresolved(where, "diagram '" + q.diagrams[k] + "' has no state '" + state + "'");
    }
  };
  if (const json* seq = r.field(spec, "sequence", path, q.operation == Operation::Consistency);
      seq && r.expect_array(*seq, path + ".sequence")) {
    for (std::size_t i = 0; i < seq->size(); ++i) {
      const std::string sp = Reader::index(path + ".sequence", i);
      const json& e = (*seq)[i];
      if (!r.expect_object(e, sp)) continue;
      r.allow_keys(e, sp, {"diagram", "state", "deadline"});
      auto d = r.str(e, "diagram", sp);
      auto state = r.str(e, "state", sp);
      auto deadline = r.integer(e, "deadline", sp);
      if (!d || !state || !deadline) continue;
      auto pos = std::find(q.diagrams.begin(), q.diagrams.end(), *d);
      if (pos == q.diagrams.end()) {
        r.unresolved(sp + ".diagram", "diagram '" + *d + "' is not part of the request");
        continue;
      }
      const auto k = static_cast<std::size_t>(pos - q.diagrams.begin());
      check_state(k, *state, sp + ".state");
      q.sequence.push_back({k, *state, *deadline});
    }
  }
  auto read_tuple = [&](const json& t, const std::string& tp) {
    auto tuple = r.as_strings(t, tp);
    if (tuple.size() != q.diagrams.size()) {
      r.fail(ErrorCode::ParseError, tp, "tuple needs one state per diagram");
      return tuple;
    }
    for (std::size_t k = 0; k < tuple.size(); ++k) check_state(k, tuple[k], Reader::index(tp, k));
    return tuple;
  };
  const bool gen = q.operation == Operation::Generalize;
  if (const json* sel = r.field(spec, "selection", path, gen); sel && r.expect_array(*sel, path + ".selection")) {
    for (std::size_t i = 0; i < sel->size(); ++i) q.selection.push_back(read_tuple((*sel)[i], Reader::index(path + ".selection", i)));
  }
  if (const json* ord = r.field(spec, "order", path, gen); ord && r.expect_array(*ord, path + ".order")) {
    for (std::size_t i = 0; i < ord->size(); ++i) {
      const std::string op = Reader::index(path + ".order", i);
      const json& pr = (*ord)[i];
      if (!pr.is_array() || pr.size() != 2) {
        r.fail(ErrorCode::ParseError, op, "order entry must be [lower tuple, upper tuple]");
        continue;
      }
      q.order.pairs.emplace_back(read_tuple(pr[0], op + "[0]"), read_tuple(pr[1], op + "[1]"));
    }
  }
  return q;
}

json write_request(const CompositionRequest& q) {
  json out{{"operation", to_string(q.operation)}, {"diagrams", q.diagrams}, {"intervals", q.intervals}};
  if (q.operation == Operation::Consistency || !q.sequence.empty()) {
    json seq = json::array();
    for (const auto& s : q.sequence) seq.push_back({{"diagram", q.diagrams.at(s.diagram)}, {"state", s.state}, {"deadline", s.deadline}});
    out["sequence"] = seq;
  }
  if (q.operation == Operation::Generalize || !q.selection.empty()) out["selection"] = q.selection;
  if (q.operation == Operation::Generalize || !q.order.pairs.empty()) {
    json ord = json::array();
    for (const auto& [a, b] : q.order.pairs) ord.push_back(json::array({json(a), json(b)}));
    out["order"] = ord;
  }
  return out;
}

// ---- scenarios ----------------------------------------------------------------

std::optional<scenario::ArcRef> parse_arc_ref(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) return std::nullopt;
  return scenario::ArcRef{text.substr(0, colon), text.substr(colon + 1)};
}

std::optional<scenario::HypothesisDiagram> read_hypothesis(const json& spec, const std::string& path, Reader& r) {
  if (!r.expect_object(spec, path)) return std::nullopt;
  r.allow_keys(spec, path, {"id", "states", "initial", "final", "alphabet", "arcs", "back_arcs"});
  scenario::HypothesisDiagram d;
  auto id = r.str(spec, "id", path);
  if (!id) return std::nullopt;
  d.id = *id;
  d.states = r.strings(spec, "states", path);
  d.alphabet = r.strings(spec, "alphabet", path, false);
  auto check_state = [&](const std::string& s, const std::string& where) {
    if (!contains(d.states, s)) r.unresolved(where, "diagram '" + d.id + "' has no state '" + s + "'");
  };
  if (auto v = r.str(spec, "initial", path)) {
    d.initial = *v;
    check_state(*v, path + ".initial");
  }
  if (auto v = r.str(spec, "final", path)) {
    d.final = *v;
    check_state(*v, path + ".final");
  }
  if (const json* arcs = r.field(spec, "arcs", path, false); arcs && r.expect_array(*arcs, path + ".arcs")) {
    for (std::size_t i = 0; i < arcs->size(); ++i) {
      const std::string ap = Reader::index(path + ".arcs", i);
      const json& a = (*arcs)[i];
      if (!r.expect_object(a, ap)) continue;
      r.allow_keys(a, ap, {"id", "from", "to", "symbol"});
      auto aid = r.str(a, "id", ap);
      auto from = r.str(a, "from", ap);
      auto to = r.str(a, "to", ap);
      auto sym = r.str(a, "symbol", ap);
      if (!aid || !from || !to || !sym) continue;
      check_state(*from, ap + ".from");
      check_state(*to, ap + ".to");
      if (!contains(d.alphabet, *sym)) r.unresolved(ap + ".symbol", "symbol '" + *sym + "' is not in the alphabet of '" + d.id + "'");
      d.labeled_arcs.push_back({*aid, *from, *to, *sym});
    }
  }
  if (const json* arcs = r.field(spec, "back_arcs", path, false); arcs && r.expect_array(*arcs, path + ".back_arcs")) {
    for (std::size_t i = 0; i < arcs->size(); ++i) {
      const std::string ap = Reader::index(path + ".back_arcs", i);
      const json& a = (*arcs)[i];
      if (!r.expect_object(a, ap)) continue;
      r.allow_keys(a, ap, {"id", "from", "to"});
      auto aid = r.str(a, "id", ap);
      auto from = r.str(a, "from", ap);
      auto to = r.str(a, "to", ap);
      if (!aid || !from || !to) continue;
      check_state(*from, ap + ".from");
      check_state(*to, ap + ".to");
      d.back_arcs.push_back({*aid, *from, *to});
    }
  }
  return d;
}

json write_hypothesis(const scenario::HypothesisDiagram& d) {
  json arcs = json::array();
  for (const auto& a : d.labeled_arcs) arcs.push_back({{"id", a.id}, {"from", a.from}, {"to", a.to}, {"symbol", a.symbol}});
  json back = json::array();
  for (const auto& a : d.back_arcs) back.push_back({{"id", a.id}, {"from", a.from}, {"to", a.to}});
  return {{"id", d.id}, {"states", d.states}, {"initial", d.initial}, {"final", d.final},
          {"alphabet", d.alphabet}, {"arcs", arcs}, {"back_arcs", back}};
}

std::optional<ScenarioEntry> read_scenario(const std::string& id, const json& spec, const std::string& path,
                                           const std::set<std::string>* score_tables, Reader& r) {
  using namespace scenario;
  if (!r.expect_object(spec, path)) return std::nullopt;
  r.allow_keys(spec, path, {"diagrams", "hierarchy", "assignment", "time_diagram", "after_effect",
                            "backstep_timeout", "horizon", "score_table"});
  ScenarioEntry entry;
  Scenario& sc = entry.scenario;
  sc.id = id;

  std::map<std::string, const HypothesisDiagram*> by_id;
  if (const json* ds = r.field(spec, "diagrams", path, true); ds && r.expect_array(*ds, path + ".diagrams")) {
    for (std::size_t i = 0; i < ds->size(); ++i) {
      if (auto d = read_hypothesis((*ds)[i], Reader::index(path + ".diagrams", i), r)) sc.diagrams.push_back(std::move(*d));
    }
  }
  for (const auto& d : sc.diagrams) by_id[d.id] = &d;

  std::vector<Subsystem> nodes;
  if (const json* hs = r.field(spec, "hierarchy", path, true); hs && r.expect_array(*hs, path + ".hierarchy")) {
    for (std::size_t i = 0; i < hs->size(); ++i) {
      const std::string hp = Reader::index(path + ".hierarchy", i);
      const json& h = (*hs)[i];
      if (!r.expect_object(h, hp)) continue;
      r.allow_keys(h, hp, {"id", "parent"});
      auto sid = r.str(h, "id", hp);
      auto parent = r.str(h, "parent", hp, false);
      if (sid) nodes.push_back({*sid, parent.value_or("")});
    }
  }
  sc.hierarchy = Hierarchy(nodes);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].parent.empty() && !sc.hierarchy.contains(nodes[i].parent)) {
      r.unresolved(Reader::index(path + ".hierarchy", i) + ".parent", "unknown subsystem '" + nodes[i].parent + "'");
    }
  }

  if (const json* as = r.field(spec, "assignment", path, true); as && r.expect_object(*as, path + ".assignment")) {
    for (const auto& [sub, d] : as->items()) {
      const std::string ap = path + ".assignment." + sub;
      auto did = r.as_string(d, ap);
      if (!did) continue;
      if (!sc.hierarchy.contains(sub)) r.unresolved(ap, "unknown subsystem '" + sub + "'");
      if (!by_id.count(*did)) r.unresolved(ap, "unknown diagram '" + *did + "'");
      sc.assignment[sub] = *did;
    }
  }

  auto alphabet_of = [&](const std::string& sub) -> const std::vector<std::string>* {
    const auto* d = sc.diagram_of(sub);
    return d == nullptr ? nullptr : &d->alphabet;
  };
  std::set<std::string> all_symbols;
  for (const auto& d : sc.diagrams) all_symbols.insert(d.alphabet.begin(), d.alphabet.end());

  if (const json* td = r.field(spec, "time_diagram", path, false); td && r.expect_array(*td, path + ".time_diagram")) {
    for (std::size_t i = 0; i < td->size(); ++i) {
      const std::string tp = Reader::index(path + ".time_diagram", i);
      const json& c = (*td)[i];
      if (!r.expect_object(c, tp)) continue;
      r.allow_keys(c, tp, {"tick", "target", "symbol"});
      auto tick = r.integer(c, "tick", tp);
      auto target = r.str(c, "target", tp);
      auto sym = r.str(c, "symbol", tp);
      if (!tick || !target || !sym) continue;
      if (*target == kBroadcast) {
        if (!all_symbols.count(*sym)) r.unresolved(tp + ".symbol", "no alphabet has symbol '" + *sym + "'");
      } else if (!sc.hierarchy.contains(*target)) {
        r.unresolved(tp + ".target", "unknown subsystem '" + *target + "'");
      } else if (const auto* alpha = alphabet_of(*target); alpha && !contains(*alpha, *sym)) {
        r.unresolved(tp + ".symbol", "symbol '" + *sym + "' is not in the alphabet of '" + *target + "'");
      }
      sc.time_diagram.push_back({*tick, *target, *sym});
    }
  }

  auto resolve_ref = [&](const std::string& text, const std::string& where) -> std::optional<ArcRef> {
    auto ref = parse_arc_ref(text);
    if (!ref) {
      r.fail(ErrorCode::ParseError, where, "arc reference '" + text + "' is not 'subsystem:arc'");
      return std::nullopt;
    }
    if (!sc.hierarchy.contains(ref->subsystem)) {
      r.unresolved(where, "unknown subsystem '" + ref->subsystem + "'");
    } else if (const auto* d = sc.diagram_of(ref->subsystem); d && d->find_arc(ref->arc) == nullptr) {
      r.unresolved(where, "subsystem '" + ref->subsystem + "' has no arc '" + ref->arc + "'");
    }
    return ref;
  };

  if (const json* ae = r.field(spec, "after_effect", path, true); ae && r.expect_object(*ae, path + ".after_effect")) {
    const std::string ep = path + ".after_effect";
    r.allow_keys(*ae, ep, {"isolated", "coupled", "individual_symbols", "general_symbols", "parent_links", "upward_threshold"});
    auto& scheme = sc.after_effect;
    for (const auto& [key, target] : {std::pair{"isolated", &scheme.isolated}, std::pair{"coupled", &scheme.coupled}}) {
      for (const auto& s : r.strings(*ae, key, ep, false)) {
        if (auto ref = resolve_ref(s, ep + "." + key)) target->insert(*ref);
      }
    }
    for (const auto& [key, target] : {std::pair{"individual_symbols", &scheme.individual_symbols},
                                      std::pair{"general_symbols", &scheme.general_symbols}}) {
      for (const auto& s : r.strings(*ae, key, ep, false)) {
        if (!all_symbols.count(s)) r.unresolved(ep + "." + key, "no alphabet has symbol '" + s + "'");
        target->insert(s);
      }
    }
    if (const json* links = r.field(*ae, "parent_links", ep, false); links && r.expect_array(*links, ep + ".parent_links")) {
      for (std::size_t i = 0; i < links->size(); ++i) {
        const std::string lp = Reader::index(ep + ".parent_links", i);
        const json& l = (*links)[i];
        if (!r.expect_object(l, lp)) continue;
        r.allow_keys(l, lp, {"parent", "children"});
        ParentLink link;
        auto parent = r.str(l, "parent", lp);
        if (!parent) continue;
        auto pref = resolve_ref(*parent, lp + ".parent");
        if (!pref) continue;
        link.parent = *pref;
        for (const auto& c : r.strings(l, "children", lp)) {
          if (auto cref = resolve_ref(c, lp + ".children")) link.children.push_back(*cref);
        }
        scheme.parent_links.push_back(std::move(link));
      }
    }
    if (const json* th = r.field(*ae, "upward_threshold", ep, false)) {
      if (th->is_string() && th->get<std::string>() == "all") {
        scheme.upward_threshold.reset();
      } else if (auto k = r.as_integer(*th, ep + ".upward_threshold"); k && *k >= 0) {
        scheme.upward_threshold = static_cast<std::size_t>(*k);
      } else if (k) {
        r.fail(ErrorCode::ParseError, ep + ".upward_threshold", "threshold must be non-negative or \"all\"");
      }
    }
  }
  if (auto t = r.integer(spec, "backstep_timeout", path, false)) sc.backstep_timeout = *t;
  if (auto h = r.integer(spec, "horizon", path, false)) sc.horizon = *h;
  if (auto st = r.str(spec, "score_table", path, false)) {
    if (score_tables != nullptr && !score_tables->count(*st)) {
      r.unresolved(path + ".score_table", "unknown score table '" + *st + "'");
    }
    entry.score_table = *st;
  }
  return entry;
}

json write_scenario(const scenario::Scenario& sc) {
  json diagrams = json::array();
  for (const auto& d : sc.diagrams) diagrams.push_back(write_hypothesis(d));
  json hierarchy = json::array();
  for (const auto& n : sc.hierarchy.nodes()) {
    json h{{"id", n.id}};
    if (!n.parent.empty()) h["parent"] = n.parent;
    hierarchy.push_back(h);
  }
  json td = json::array();
  for (const auto& c : sc.time_diagram) td.push_back({{"tick", c.tick}, {"target", c.target}, {"symbol", c.symbol}});
  const auto& ae = sc.after_effect;
  auto refs = [](const auto& set) {
    json a = json::array();
    for (const auto& r : set) a.push_back(r.str());
    return a;
  };
  json links = json::array();
  for (const auto& l : ae.parent_links) links.push_back({{"parent", l.parent.str()}, {"children", refs(l.children)}});
  json after{{"isolated", refs(ae.isolated)},
             {"coupled", refs(ae.coupled)},
             {"individual_symbols", ae.individual_symbols},
             {"general_symbols", ae.general_symbols},
             {"parent_links", links}};
  if (ae.upward_threshold) after["upward_threshold"] = *ae.upward_threshold;
  else after["upward_threshold"] = "all";
  json out{{"diagrams", diagrams},
           {"hierarchy", hierarchy},
           {"assignment", sc.assignment},
           {"time_diagram", td},
           {"after_effect", after},
           {"backstep_timeout", sc.backstep_timeout}};
  if (sc.horizon) out["horizon"] = *sc.horizon;
  return out;
}

std::optional<scenario::EfficiencyCriterion> read_criterion(const json& spec, const std::string& path, Reader& r) {
  if (!r.expect_object(spec, path)) return std::nullopt;
  scenario::EfficiencyCriterion c;
  for (const auto& [sub, states] : spec.items()) {
    if (!r.expect_object(states, path + "." + sub)) continue;
    for (const auto& [state, w] : states.items()) {
      if (auto v = r.as_number(w, path + "." + sub + "." + state)) c.scores[sub][state] = *v;
    }
  }
  return c;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

template <typename F>
void read_section(const json& root, const char* key, Reader& r, F&& f) {
  auto it = root.find(key);
  if (it == root.end() || it->is_null()) return;
  if (!r.expect_object(*it, key)) return;
  for (const auto& [id, spec] : it->items()) f(id, spec);
}

std::set<std::string> keys_of(const json& root, const char* key) {
  std::set<std::string> out;
  auto it = root.find(key);
  if (it != root.end() && it->is_object()) {
    for (const auto& [k, _] : it->items()) out.insert(k);
  }
  return out;
}

}  // namespace

ParseOutcome parse_model_text(std::string_view text) {
  ParseOutcome out;
  Reader r(out.errors);
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    auto [line, col] = line_column(text, e.byte);
    std::string msg = e.what();
    if (auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    out.errors.push_back({ErrorCode::ParseError, "", msg, line, col});
    return out;
  }
  if (!r.expect_object(root, "")) return out;
  auto version = r.integer(root, "format_version", "");
  if (!version) return out;
  if (*version != kFormatVersion) {
    r.fail(ErrorCode::UnknownVersion, "format_version",
           "format version " + std::to_string(*version) + " is not supported (expected " +
               std::to_string(kFormatVersion) + ")");
    return out;
  }
  r.allow_keys(root, "", {"format_version", "parameters", "scales", "classificators", "rule_matrices", "series",
                          "canonical_diagrams", "composition_requests", "scenarios", "score_tables"});
  ModelFile& m = out.model;
  m.format_version = static_cast<int>(*version);
  if (const json* p = r.field(root, "parameters", "", false)) m.parameters = read_parameters(*p, r);

  const auto declared_scales = keys_of(root, "scales");
  read_section(root, "scales", r, [&](const std::string& id, const json& spec) {
    if (auto s = read_scale(id, spec, m.parameters, r)) m.scales.emplace(id, std::move(*s));
  });
  read_section(root, "classificators", r, [&](const std::string& id, const json& spec) {
    if (auto c = read_classificator(id, spec, m.scales, declared_scales, r)) m.classificators.emplace(id, std::move(*c));
  });
  read_section(root, "series", r, [&](const std::string& id, const json& spec) {
    if (auto s = read_series(id, spec, r)) m.series.emplace(id, std::move(*s));
  });
  std::set<std::string> known_parameters = keys_of(root, "series");
  for (const auto& d : m.parameters.decls()) known_parameters.insert(d.name);
  read_section(root, "rule_matrices", r, [&](const std::string& id, const json& spec) {
    if (auto rm = read_rule_matrix(id, spec, known_parameters, r)) m.rule_matrices.emplace(id, std::move(*rm));
  });
  read_section(root, "canonical_diagrams", r, [&](const std::string& id, const json& spec) {
    if (auto d = read_diagram(id, spec, m.scales, declared_scales, r)) m.canonical_diagrams.emplace(id, std::move(*d));
  });
  const auto declared_diagrams = keys_of(root, "canonical_diagrams");
  read_section(root, "composition_requests", r, [&](const std::string& id, const json& spec) {
    if (auto q = read_request(id, spec, m.canonical_diagrams, declared_diagrams, r)) {
      m.composition_requests.emplace(id, std::move(*q));
    }
  });
  read_section(root, "score_tables", r, [&](const std::string& id, const json& spec) {
    if (auto c = read_criterion(spec, "score_tables." + id, r)) m.score_tables.emplace(id, std::move(*c));
  });
  const auto declared_tables = keys_of(root, "score_tables");
  read_section(root, "scenarios", r, [&](const std::string& id, const json& spec) {
    if (auto s = read_scenario(id, spec, "scenarios." + id, &declared_tables, r)) m.scenarios.emplace(id, std::move(*s));
  });
  return out;
}

ModelFile parse_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(ErrorCode::ParseError, "cannot read '" + path + "'", path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto outcome = parse_model_text(buf.str());
  if (!outcome.ok()) {
    std::string msg = std::to_string(outcome.errors.size()) + " problem(s) in '" + path + "':";
    for (const auto& d : outcome.errors) msg += "\n  " + d.str();
    throw ModelError(outcome.errors.front().code, msg, path);
  }
  return std::move(outcome.model);
}

json to_json(const scenario::Scenario& sc) { return write_scenario(sc); }

json to_json(const scenario::EfficiencyCriterion& c) { return c.scores; }

json to_json(const canonical::Diagram& d) {
  auto arcs = [](const std::vector<canonical::Arc>& list) {
    json a = json::array();
    for (const auto& x : list) a.push_back({{"from", x.from}, {"to", x.to}, {"delay", x.delay}});
    return a;
  };
  json out{{"states", d.states},       {"initial", d.initial},         {"final", d.final},
           {"horizon", d.horizon},     {"dev_arcs", arcs(d.dev_arcs)}, {"back_arcs", arcs(d.back_arcs)}};
  if (d.scale) out["scale"] = *d.scale;
  if (!d.initial_distribution.objects.empty()) {
    json objs = json::object();
    for (const auto& [name, p] : d.initial_distribution.objects) objs[name] = {{"state", p.state}, {"entry", p.entry}};
    out["initial_distribution"] = {{"objects", objs}};
  }
  if (!d.goal_counts.empty()) out["goal"] = d.goal_counts;
  return out;
}

scenario::Scenario scenario_from_json(const json& j, const std::string& id) {
  std::vector<Diagnostic> errors;
  Reader r(errors);
  auto entry = read_scenario(id, j, "scenario", nullptr, r);
  if (!errors.empty() || !entry) {
    std::string msg = "scenario '" + id + "' cannot be read:";
    for (const auto& d : errors) msg += "\n  " + d.str();
    throw ModelError(errors.empty() ? ErrorCode::ParseError : errors.front().code, msg, id);
  }
  return std::move(entry->scenario);
}

scenario::EfficiencyCriterion criterion_from_json(const json& j) {
  std::vector<Diagnostic> errors;
  Reader r(errors);
  auto c = read_criterion(j, "score_table", r);
  if (!errors.empty() || !c) {
    throw ModelError(ErrorCode::ParseError, errors.empty() ? "bad score table" : errors.front().str());
  }
  return std::move(*c);
}

json serialize_model(const ModelFile& m) {
  json out;
  out["format_version"] = m.format_version;
  out["parameters"] = write_parameters(m.parameters);
  json scales = json::object();
  for (const auto& [id, s] : m.scales) scales[id] = write_scale(s);
  out["scales"] = scales;
  json cls = json::object();
  for (const auto& [id, c] : m.classificators) cls[id] = write_classificator(c);
  out["classificators"] = cls;
  json rms = json::object();
  for (const auto& [id, rm] : m.rule_matrices) rms[id] = write_rule_matrix(rm);
  out["rule_matrices"] = rms;
  json series = json::object();
  for (const auto& [id, s] : m.series) series[id] = {{"ticks", s.ticks}, {"values", s.values}};
  out["series"] = series;
  json diagrams = json::object();
  for (const auto& [id, d] : m.canonical_diagrams) diagrams[id] = to_json(d);
  out["canonical_diagrams"] = diagrams;
  json reqs = json::object();
  for (const auto& [id, q] : m.composition_requests) reqs[id] = write_request(q);
  out["composition_requests"] = reqs;
  json scs = json::object();
  for (const auto& [id, e] : m.scenarios) {
    json s = write_scenario(e.scenario);
    if (e.score_table) s["score_table"] = *e.score_table;
    scs[id] = s;
  }
  out["scenarios"] = scs;
  json tables = json::object();
  for (const auto& [id, c] : m.score_tables) tables[id] = to_json(c);
  out["score_tables"] = tables;
  return out;
}

}  // namespace devmodel::model

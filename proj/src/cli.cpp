#include "devmodel/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <sstream>

#include "devmodel/model_file.hpp"
#include "devmodel/report.hpp"

namespace devmodel::cli {

using nlohmann::json;
using report::Kind;
using report::Report;

namespace {

struct Options {
  std::string format = "json";
  std::string out_path;
  std::vector<std::string> args;
};

// Failure that has already been rendered into a report.
struct Failed {
  Report report;
};

Report make_report(Kind kind, const Options& o) {
  Report r;
  r.kind = kind;
  r.provenance.command = o.args;
  return r;
}

Report error_report(const Options& o, std::vector<json> errors) {
  Report r = make_report(Kind::Validation, o);
  r.body = {{"errors", errors}, {"warnings", json::array()}};
  r.pass = false;
  return r;
}

json error_entry(const ModelError& e) {
  json j{{"code", to_string(e.code())}, {"path", e.where()}, {"message", e.what()}};
  if (!e.indices().empty()) j["indices"] = e.indices();
  return j;
}

void add_input(Report& r, const std::string& path) { r.provenance.inputs.push_back(report::digest_file(path)); }

struct LoadedModel {
  model::ModelFile model;
  report::InputDigest digest;
};

LoadedModel load(const std::string& path, const Options& o) {
  const std::string text = report::read_file(path);
  auto outcome = model::parse_model_text(text);
  if (!outcome.ok()) {
    std::vector<json> errors;
    for (const auto& d : outcome.errors) {
      json e{{"code", to_string(d.code)}, {"path", d.path}, {"message", d.message}};
      if (d.line > 0) {
        e["line"] = d.line;
        e["column"] = d.column;
      }
      errors.push_back(e);
    }
    Failed f{error_report(o, errors)};
    f.report.provenance.inputs.push_back({path, report::sha256_hex(text)});
    throw f;
  }
  return {std::move(outcome.model), {path, report::sha256_hex(text)}};
}

std::pair<Tick, Tick> parse_interval(const std::string& text) {
  auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const Tick a = std::stoll(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(text);
    const Tick b = std::stoll(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument(text);
    return {a, b};
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--interval/--window", "expected a:b with integer ticks, got '" + text + "'");
  }
}

template <typename Map>
const typename Map::mapped_type& lookup(const Map& m, const std::string& id, const char* what) {
  auto it = m.find(id);
  if (it == m.end()) throw ModelError(ErrorCode::UnresolvedReference, std::string("no ") + what + " '" + id + "'", id);
  return it->second;
}

template <typename Map>
std::string only_key(const Map& m, const char* what, const char* flag) {
  if (m.size() != 1) {
    throw ModelError(ErrorCode::InvalidArgument,
                     std::string("the model has ") + std::to_string(m.size()) + " " + what + "; pick one with " + flag);
  }
  return m.begin()->first;
}

// ---- validate ---------------------------------------------------------------

std::string point_text(const Assignment& a) {
  std::string s;
  for (const auto& [k, v] : a) {
    std::ostringstream o;
    o << v;
    s += (s.empty() ? "" : ",") + k + "=" + o.str();
  }
  return s;
}

Report cmd_validate(const std::string& path, std::size_t samples, std::uint64_t seed, const Options& o) {
  auto [m, digest] = load(path, o);
  ValidationReport v;
  for (const auto& [id, scale] : m.scales) {
    const std::string where = "scales." + id;
    try {
      auto spec = statespace::sample_spec_for(scale.parameters(), m.parameters, samples, seed);
      auto d = statespace::validate_scale_disjointness(scale, spec, m.parameters);
      for (std::size_t i = 0; i < d.overlaps.size() && i < 5; ++i) {
        std::string preds;
        for (auto p : d.overlaps[i].predicates) preds += (preds.empty() ? "" : ",") + std::to_string(p);
        v.error("overlap", where, "predicates " + preds + " all hold at " + point_text(d.overlaps[i].point));
      }
      if (d.overlaps.size() > 5) {
        v.error("overlap", where, std::to_string(d.overlaps.size() - 5) + " further overlapping samples");
      }
      if (!d.uncovered.empty()) {
        v.warn("uncovered", where,
               std::to_string(d.uncovered.size()) + " of " + std::to_string(d.samples_tested) +
                   " samples satisfy no predicate, e.g. " + point_text(d.uncovered.front()));
      }
    } catch (const ModelError& e) {
      if (e.code() != ErrorCode::MissingParameterRange) throw;
      v.warn("sampling_skipped", where, e.what());
    }
  }
  for (const auto& [id, c] : m.classificators) {
    const std::string where = "classificators." + id;
    std::set<std::string, std::less<>> params;
    for (const auto& [_, s] : c.scales()) {
      auto p = s.parameters();
      params.insert(p.begin(), p.end());
    }
    try {
      auto spec = statespace::sample_spec_for(params, m.parameters, samples, seed);
      auto sub = statespace::validate_sub_predicates(c, spec, m.parameters);
      for (std::size_t i = 0; i < sub.violations.size() && i < 5; ++i) {
        const auto& x = sub.violations[i];
        v.error("sub_predicate", where,
                x.child_scale + " predicate " + std::to_string(x.child_predicate) + " holds outside " + x.parent_scale +
                    " predicate " + std::to_string(x.parent_predicate) + " at " + point_text(x.point));
      }
    } catch (const ModelError& e) {
      if (e.code() != ErrorCode::MissingParameterRange) throw;
      v.warn("sampling_skipped", where, e.what());
    }
  }
  for (const auto& [id, d] : m.canonical_diagrams) v.merge(canonical::validate_canonical(d).report, "canonical_diagrams." + id);
  for (const auto& [id, q] : m.composition_requests) {
    const std::string where = "composition_requests." + id;
    try {
      auto set = m.diagram_set(q);
      switch (q.operation) {
        case model::Operation::Sequential: composition::compose_sequential(set); break;
        case model::Operation::Parallel: composition::compose_parallel(set); break;
        case model::Operation::Generalize: composition::generalize(set, q.selection, q.order); break;
        case model::Operation::Consistency: set.check(); break;
      }
    } catch (const ModelError& e) {
      v.error(std::string(to_string(e.code())), where, e.what());
    }
  }
  for (const auto& [id, entry] : m.scenarios) {
    const std::string where = "scenarios." + id;
    auto sv = scenario::validate_scenario(entry.scenario);
    v.merge(sv, where);
    if (entry.score_table && sv.pass()) {
      for (const auto& sub : entry.scenario.hierarchy.preorder()) {
        const auto& scores = m.score_tables.at(*entry.score_table).scores;
        auto it = scores.find(sub);
        for (const auto& s : entry.scenario.diagram_of(sub)->states) {
          if (it == scores.end() || !it->second.count(s)) {
            v.error("MissingScore", where + ".score_table", "no score for state '" + s + "' of '" + sub + "'");
          }
        }
      }
    }
  }
  Report r = make_report(Kind::Validation, o);
  r.provenance.inputs.push_back(digest);
  r.provenance.seed = seed;
  r.body = report::to_json(v);
  r.body["checked"] = {{"scales", m.scales.size()},
                       {"classificators", m.classificators.size()},
                       {"canonical_diagrams", m.canonical_diagrams.size()},
                       {"composition_requests", m.composition_requests.size()},
                       {"scenarios", m.scenarios.size()},
                       {"samples", samples}};
  r.pass = v.pass();
  return r;
}

// ---- classify ---------------------------------------------------------------

json path_json(const std::vector<statespace::PathStep>& path) {
  json steps = json::array();
  for (const auto& s : path) steps.push_back({{"scale", s.scale}, {"predicate", s.predicate + 1}, {"state", s.state.id}});
  return steps;
}

Report cmd_classify(const std::string& path, const std::string& object, const std::string& classificator,
                    const std::string& scale, const std::string& matrix, const std::string& states, bool lenient,
                    const Options& o) {
  auto [m, digest] = load(path, o);
  Report r = make_report(Kind::Classification, o);
  r.provenance.inputs.push_back(digest);
  json results = json::array();
  const auto mode = lenient ? statespace::MatchMode::FirstMatch : statespace::MatchMode::Strict;
  bool pass = true;
  auto attempt = [&](json base, auto&& f) {
    try {
      f(base);
    } catch (const ModelError& e) {
      if (e.code() != ErrorCode::NoMatch && e.code() != ErrorCode::MultipleMatch &&
          e.code() != ErrorCode::MissingParameter) {
        throw;
      }
      base["error"] = error_entry(e);
      pass = false;
    }
    results.push_back(base);
  };

  if (!matrix.empty()) {
    const auto& rm = lookup(m.rule_matrices, matrix, "rule matrix");
    std::map<std::string, std::string, std::less<>> dyn;
    std::stringstream in(states);
    std::string item;
    while (std::getline(in, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--states", "expected param=Kind pairs, got '" + item + "'");
      dyn[item.substr(0, eq)] = item.substr(eq + 1);
    }
    attempt(json{{"matrix", matrix}, {"states", states}}, [&](json& base) {
      base["classes"] = statespace::apply_rule_matrix(rm, dyn);
    });
  } else {
    const Assignment a = m.parameters.parse_assignment(object);
    std::vector<std::string> cls;
    std::vector<std::string> scales;
    if (!classificator.empty()) cls.push_back(classificator);
    else if (!scale.empty()) scales.push_back(scale);
    else {
      for (const auto& [id, _] : m.classificators) cls.push_back(id);
      if (cls.empty()) {
        for (const auto& [id, _] : m.scales) scales.push_back(id);
      }
    }
    for (const auto& id : cls) {
      const auto& c = lookup(m.classificators, id, "classificator");
      attempt(json{{"classificator", id}}, [&](json& base) {
        auto p = statespace::classify_hierarchical(c, a, mode);
        base["path"] = path_json(p);
        base["state"] = p.back().state.id;
      });
    }
    for (const auto& id : scales) {
      const auto& s = lookup(m.scales, id, "scale");
      attempt(json{{"scale", id}}, [&](json& base) {
        auto hit = statespace::evaluate_scale(s, a, mode);
        base["state"] = hit.state.id;
        base["predicate"] = hit.index + 1;
      });
    }
  }
  r.body = {{"object", matrix.empty() ? object : states}, {"mode", lenient ? "first-match" : "strict"},
            {"results", results}};
  r.pass = pass;
  return r;
}

// ---- profile ----------------------------------------------------------------

Report cmd_profile(const std::string& path, const std::string& series_csv, const std::string& interval, double eps,
                   const std::string& matrix, const Options& o) {
  auto [m, digest] = load(path, o);
  Report r = make_report(Kind::Profile, o);
  r.provenance.inputs.push_back(digest);
  std::vector<dynamics::Series> series;
  if (!series_csv.empty()) {
    std::ifstream in(series_csv);
    if (!in) throw ModelError(ErrorCode::ParseError, "cannot read '" + series_csv + "'", series_csv);
    series = report::read_series_csv(in);
    add_input(r, series_csv);
  } else {
    for (const auto& [_, s] : m.series) series.push_back(s);
  }
  if (series.empty()) throw ModelError(ErrorCode::InvalidArgument, "no series given (model has none; use --series)");
  Tick first = 0;
  Tick last = 0;
  if (!interval.empty()) {
    std::tie(first, last) = parse_interval(interval);
  } else {
    first = series.front().ticks.empty() ? 0 : series.front().ticks.front();
    last = first;
    for (const auto& s : series) {
      if (s.ticks.empty()) continue;
      first = std::min(first, s.ticks.front());
      last = std::max(last, s.ticks.back());
    }
  }
  const auto profile = dynamics::parallel_profile(series, first, last, eps);
  json rows = json::object();
  json trends = json::object();
  std::map<std::string, std::string, std::less<>> last_kinds;
  for (std::size_t p = 0; p < profile.parameters.size(); ++p) {
    json row = json::array();
    for (const auto& cell : profile.cells[p]) row.push_back(dynamics::to_string(cell.kind));
    rows[profile.parameters[p]] = row;
    last_kinds[profile.parameters[p]] = std::string(dynamics::to_string(profile.cells[p].back().kind));

    dynamics::Series window{series[p].parameter, {}, {}};
    for (std::size_t i = 0; i < series[p].ticks.size(); ++i) {
      if (series[p].ticks[i] >= first && series[p].ticks[i] <= last) {
        window.ticks.push_back(series[p].ticks[i]);
        window.values.push_back(series[p].values[i]);
      }
    }
    if (window.values.size() < 2) {
      trends[window.parameter] = {{"note", "fewer than two observations in the interval"}};
      continue;
    }
    const auto a = dynamics::analyze_series(window, eps);
    json crit = json::array();
    for (auto i : a.trend.critical_points) crit.push_back(window.ticks[i]);
    json infl = json::array();
    for (auto i : a.trend.inflexions) infl.push_back(window.ticks[i]);
    trends[window.parameter] = {
        {"monotone", dynamics::to_string(a.trend.monotone)},
        {"critical_ticks", crit},
        {"inflexion_ticks", infl},
        {"bounded", a.trend.bounded},
        {"observed_min", a.trend.observed_min},
        {"observed_max", a.trend.observed_max},
        {"cycle_period", a.trend.cycle_period ? json(*a.trend.cycle_period) : json(nullptr)},
        {"last_state", {{"kind", dynamics::to_string(a.last_state.kind)}, {"streak", a.last_state.streak}}},
        {"forecast", dynamics::to_string(a.forecast.kind)}};
  }
  r.body = {{"parameters", profile.parameters}, {"first", first}, {"last", last}, {"epsilon", eps},
            {"rows", rows}, {"trends", trends}};
  if (!matrix.empty()) {
    const auto& rm = lookup(m.rule_matrices, matrix, "rule matrix");
    r.body["classes"] = {{"matrix", matrix}, {"at", last}, {"classes", statespace::apply_rule_matrix(rm, last_kinds)}};
  }
  return r;
}

// ---- replay -----------------------------------------------------------------

Report cmd_replay(const std::string& path, const std::string& events_csv, std::string diagram,
                  const std::string& window, const Options& o) {
  auto [m, digest] = load(path, o);
  Report r = make_report(Kind::Intensity, o);
  r.provenance.inputs.push_back(digest);
  if (diagram.empty()) diagram = only_key(m.canonical_diagrams, "canonical diagrams", "--diagram");
  const auto& d = lookup(m.canonical_diagrams, diagram, "canonical diagram");
  std::ifstream in(events_csv);
  if (!in) throw ModelError(ErrorCode::ParseError, "cannot read '" + events_csv + "'", events_csv);
  const auto events = report::read_events_csv(in);
  add_input(r, events_csv);
  Tick first = 0;
  Tick last = d.horizon;
  if (!window.empty()) std::tie(first, last) = parse_interval(window);
  auto rep = canonical::intensity_report(events, d, first, last, d.initial_distribution);
  r.body = report::to_json(rep);
  r.body["events"] = events.size();
  return r;
}

// ---- consist ----------------------------------------------------------------

Report cmd_consist(const std::string& path, const std::string& request, std::size_t bound, const Options& o) {
  auto [m, digest] = load(path, o);
  Report r = make_report(Kind::Consistency, o);
  r.provenance.inputs.push_back(digest);
  const auto& q = lookup(m.composition_requests, request, "composition request");
  const auto set = m.diagram_set(q);
  r.body = {{"request", request}, {"operation", model::to_string(q.operation)}, {"diagrams", q.diagrams}};
  switch (q.operation) {
    case model::Operation::Consistency: {
      const auto v = composition::check_consistency(set, q.sequence, bound);
      json witness = json::array();
      for (const auto& f : v.witness) {
        witness.push_back({{"diagram", q.diagrams.at(f.diagram)}, {"arc", f.arc.str()}, {"tick", f.tick}});
      }
      r.body["consistent"] = v.consistent;
      r.body["witness"] = witness;
      r.body["met_at"] = v.met_at;
      r.body["satisfiable_prefix"] = v.satisfiable_prefix;
      r.body["explored_states"] = v.explored_states;
      if (!v.consistent && v.satisfiable_prefix < q.sequence.size()) {
        const auto& s = q.sequence[v.satisfiable_prefix];
        r.body["first_unmet"] = {{"index", v.satisfiable_prefix + 1}, {"diagram", q.diagrams.at(s.diagram)},
                                 {"state", s.state}, {"deadline", s.deadline}};
      }
      r.pass = v.consistent;
      break;
    }
    case model::Operation::Sequential: {
      auto d = composition::compose_sequential(set);
      json j = model::to_json(d);
      j["id"] = d.id;
      r.body["composite"] = j;
      r.body["consistent"] = true;
      break;
    }
    case model::Operation::Generalize: {
      auto d = composition::generalize(set, q.selection, q.order);
      json j = model::to_json(d);
      j["id"] = d.id;
      r.body["composite"] = j;
      r.body["consistent"] = true;
      break;
    }
    case model::Operation::Parallel: {
      auto f = composition::compose_parallel(set);
      json states = json::array();
      for (std::size_t i = 0; i < f.states.size(); ++i) states.push_back(f.state_name(i));
      json arcs = json::array();
      for (const auto& a : f.arcs) {
        arcs.push_back({{"from", f.state_name(a.from)}, {"to", f.state_name(a.to)},
                        {"component", f.components.at(a.component)}, {"arc", a.arc.str()}, {"delay", a.delay}});
      }
      r.body["product"] = {{"components", f.components}, {"states", states}, {"arcs", arcs},
                           {"initial", f.state_name(f.initial)}, {"final", f.state_name(f.final)},
                           {"interval", f.interval}};
      r.body["consistent"] = true;
      break;
    }
  }
  return r;
}

// ---- simulate / analyze / compare --------------------------------------------

json trajectory_body(const scenario::Scenario& sc, const scenario::Trajectory& tr,
                     const std::optional<scenario::EfficiencyCriterion>& crit, const scenario::ScenarioReport& rep) {
  json def{{"id", sc.id}, {"scenario", model::to_json(sc)},
           {"score_table", crit ? model::to_json(*crit) : json(nullptr)}};
  return {{"scenario", sc.id}, {"subsystems", tr.subsystems}, {"horizon", tr.horizon},
          {"trajectory", report::to_json(tr)}, {"report", report::to_json(rep)}, {"definition", def}};
}

scenario::ScenarioReport full_report(const scenario::Trajectory& tr, const scenario::Scenario& sc,
                                     const std::optional<scenario::EfficiencyCriterion>& crit) {
  auto rep = scenario::analyze_trajectory(tr, sc);
  if (crit) rep.efficiency = scenario::efficiency_process(tr, *crit);
  return rep;
}

Report cmd_simulate(const std::string& path, const std::string& id, std::optional<Tick> horizon,
                    std::optional<std::uint64_t> seed, const std::string& events_out, const Options& o) {
  auto [m, digest] = load(path, o);
  Report r = make_report(Kind::Trajectory, o);
  r.provenance.inputs.push_back(digest);
  r.provenance.seed = seed;
  const auto& entry = lookup(m.scenarios, id, "scenario");
  if (!horizon) horizon = entry.scenario.horizon;
  if (!horizon) throw CLI::ValidationError("--horizon", "scenario '" + id + "' declares no horizon; pass --horizon");
  std::optional<scenario::EfficiencyCriterion> crit;
  if (entry.score_table) crit = lookup(m.score_tables, *entry.score_table, "score table");
  const auto tr = scenario::run_scenario(entry.scenario, *horizon);
  const auto rep = full_report(tr, entry.scenario, crit);
  if (!events_out.empty()) {
    std::ofstream csv(events_out, std::ios::binary);
    if (!csv) throw ModelError(ErrorCode::InvalidArgument, "cannot write '" + events_out + "'", events_out);
    report::write_trajectory_csv(csv, tr);
  }
  r.body = trajectory_body(entry.scenario, tr, crit, rep);
  return r;
}

Report cmd_analyze(const std::string& path, const Options& o) {
  const auto in = report::read_report(report::read_file(path));
  if (in.kind != Kind::Trajectory) {
    throw ModelError(ErrorCode::SchemaViolation, "'" + path + "' is a " + std::string(to_string(in.kind)) +
                                                     " report, not a trajectory report", path);
  }
  if (!in.body.contains("definition")) {
    throw ModelError(ErrorCode::SchemaViolation, "'" + path + "' carries no scenario definition", path);
  }
  const auto& def = in.body["definition"];
  const auto sc = model::scenario_from_json(def.at("scenario"), def.at("id").get<std::string>());
  std::optional<scenario::EfficiencyCriterion> crit;
  if (!def.at("score_table").is_null()) crit = model::criterion_from_json(def["score_table"]);
  const auto tr = report::trajectory_from_json(in.body.at("trajectory"));
  Report r = make_report(Kind::Trajectory, o);
  add_input(r, path);
  r.body = trajectory_body(sc, tr, crit, full_report(tr, sc, crit));
  return r;
}

Report cmd_compare(const std::vector<std::string>& files, const Options& o) {
  Report r = make_report(Kind::Comparison, o);
  std::vector<scenario::ScenarioReport> reports;
  for (const auto& f : files) {
    const auto in = report::read_report(report::read_file(f));
    if (in.kind != Kind::Trajectory) {
      throw ModelError(ErrorCode::SchemaViolation, "'" + f + "' is not a trajectory report", f);
    }
    reports.push_back(report::scenario_report_from_json(in.body.at("report")));
    add_input(r, f);
  }
  const auto ranking = scenario::compare_scenarios(reports);
  json listed = json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& x = reports[i];
    listed.push_back({{"file", files[i]},
                      {"scenario", x.scenario},
                      {"complete", x.complete},
                      {"final_efficiency", x.efficiency ? json(x.efficiency->final_aggregate()) : json(nullptr)},
                      {"backstep_total", x.backstep_total},
                      {"redundancy", x.redundancy.size()},
                      {"coupled_total", x.coupled_total}});
  }
  json tiers = json::array();
  for (const auto& tier : ranking.tiers) {
    json t = json::array();
    for (auto i : tier) t.push_back({{"file", files[i]}, {"scenario", reports[i].scenario}});
    tiers.push_back(t);
  }
  r.body = {{"reports", listed}, {"ranking", tiers},
            {"key", {"complete desc", "final_efficiency desc", "backstep_total asc", "redundancy asc"}}};
  return r;
}

int emit(const Report& r, const Options& o, std::ostream& out, std::ostream& err) {
  const auto text = report::emit_report(r, o.format == "text" ? report::Format::Text : report::Format::Json);
  if (o.out_path.empty()) {
    out << text;
  } else {
    std::ofstream f(o.out_path, std::ios::binary);
    if (!f) {
      err << "error: cannot write '" << o.out_path << "'\n";
      return kModelFailure;
    }
    f << text;
  }
  return r.pass || r.kind != Kind::Validation ? kOk : kModelFailure;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  o.args = args;
  CLI::App app{"Developing-system state modelling: classification, dynamics, canonical diagrams, composition "
               "and scenario simulation.",
               "devmodel"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--out", o.out_path, "Write the report to this file instead of stdout");

  std::string model_path;
  auto* validate = app.add_subcommand("validate", "Check a model file and every invariant it can be checked for");
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  validate->add_option("model", model_path, "Model JSON")->required();
  validate->add_option("--samples", samples, "Samples per scale for sampling checks");
  validate->add_option("--seed", seed, "Seed for sampling checks");

  auto* classify = app.add_subcommand("classify", "Classify one object by a classificator, scale or rule matrix");
  std::string object, classificator, scale_id, matrix, states;
  bool lenient = false;
  classify->add_option("model", model_path, "Model JSON")->required();
  auto* obj_opt = classify->add_option("--object", object, "Parameter values, e.g. 'x=5,grade=high'");
  auto* cls_opt = classify->add_option("--classificator", classificator, "Classificator id");
  classify->add_option("--scale", scale_id, "Scale id")->excludes(cls_opt);
  auto* matrix_opt = classify->add_option("--matrix", matrix, "Rule matrix id");
  auto* states_opt = classify->add_option("--states", states, "Dynamics states, e.g. 'x=Growth,y=Steady'");
  matrix_opt->needs(states_opt);
  states_opt->needs(matrix_opt);
  obj_opt->excludes(matrix_opt);
  classify->add_flag("--lenient", lenient, "Take the first true predicate instead of failing on overlaps");

  auto* profile = app.add_subcommand("profile", "Dynamics states and trends of parameter series");
  std::string series_csv, interval, profile_matrix;
  double eps = 0.0;
  profile->add_option("model", model_path, "Model JSON")->required();
  profile->add_option("--series", series_csv, "Series CSV (tick,<param>...)");
  profile->add_option("--interval", interval, "Tick window a:b");
  profile->add_option("--epsilon", eps, "Steady tolerance")->check(CLI::NonNegativeNumber);
  profile->add_option("--matrix", profile_matrix, "Apply a rule matrix to the states at the last tick");

  auto* replay = app.add_subcommand("replay", "Replay an event CSV against a canonical diagram");
  std::string events_csv, diagram, window;
  replay->add_option("model", model_path, "Model JSON")->required();
  replay->add_option("--events", events_csv, "Event CSV (tick,object,from,to,arc_kind)")->required();
  replay->add_option("--diagram", diagram, "Canonical diagram id");
  replay->add_option("--window", window, "Report window a:b (default 0:horizon)");

  auto* consist = app.add_subcommand("consist", "Answer a composition or consistency request");
  std::string request;
  std::size_t bound = 10'000'000;
  consist->add_option("model", model_path, "Model JSON")->required();
  consist->add_option("--request", request, "Composition request id")->required();
  consist->add_option("--state-bound", bound, "Search state bound");

  auto* simulate = app.add_subcommand("simulate", "Run a control scenario tick by tick");
  std::string scenario_id, events_out;
  std::optional<Tick> horizon;
  std::optional<std::uint64_t> sim_seed;
  simulate->add_option("model", model_path, "Model JSON")->required();
  simulate->add_option("--scenario", scenario_id, "Scenario id")->required();
  simulate->add_option("--horizon", horizon, "Number of ticks")->check(CLI::NonNegativeNumber);
  simulate->add_option("--seed", sim_seed, "Recorded in provenance; simulation is deterministic");
  simulate->add_option("--events-out", events_out, "Also write the event log as CSV");

  auto* analyze = app.add_subcommand("analyze", "Recompute the analysis of a trajectory report");
  std::string trajectory;
  analyze->add_option("trajectory", trajectory, "Trajectory report JSON")->required();

  auto* compare = app.add_subcommand("compare", "Rank scenarios from their trajectory reports");
  std::vector<std::string> files;
  compare->add_option("reports", files, "Trajectory report files (two or more)")->required()->expected(2, 1 << 20);

  CLI::App* active = &app;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());  // CLI11 pops from the back
    app.parse(reversed);
    for (auto* sub : app.get_subcommands()) active = sub;
    Report r;
    if (*validate) r = cmd_validate(model_path, samples, seed, o);
    else if (*classify) {
      if (object.empty() && matrix.empty()) throw CLI::RequiredError("--object or --matrix with --states");
      r = cmd_classify(model_path, object, classificator, scale_id, matrix, states, lenient, o);
    } else if (*profile) r = cmd_profile(model_path, series_csv, interval, eps, profile_matrix, o);
    else if (*replay) r = cmd_replay(model_path, events_csv, diagram, window, o);
    else if (*consist) r = cmd_consist(model_path, request, bound, o);
    else if (*simulate) r = cmd_simulate(model_path, scenario_id, horizon, sim_seed, events_out, o);
    else if (*analyze) r = cmd_analyze(trajectory, o);
    else r = cmd_compare(files, o);
    const int rc = emit(r, o, out, err);
    return rc == kOk && !r.pass && r.kind == Kind::Classification ? kModelFailure : rc;
  } catch (const CLI::CallForHelp&) {
    out << active->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (active == &app) {
      for (auto* sub : app.get_subcommands()) active = sub;
    }
    err << "error: " << e.what() << "\n\n" << active->help();
    return kUsage;
  } catch (const Failed& f) {
    emit(f.report, o, out, err);
    err << "error: the model file has " << f.report.body["errors"].size() << " problem(s)\n";
    return kModelFailure;
  } catch (const ModelError& e) {
    emit(error_report(o, {error_entry(e)}), o, out, err);
    err << "error: " << e.what() << "\n";
    return kModelFailure;
  }
}

}  // namespace devmodel::cli

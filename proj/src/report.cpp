#include "devmodel/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace devmodel::report {

using nlohmann::json;

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::Validation: return "validation";
    case Kind::Classification: return "classification";
    case Kind::Profile: return "profile";
    case Kind::Intensity: return "intensity";
    case Kind::Consistency: return "consistency";
    case Kind::Trajectory: return "trajectory";
    case Kind::Comparison: return "comparison";
  }
  return "validation";
}

std::optional<Kind> kind_from_string(std::string_view s) {
  for (auto k : {Kind::Validation, Kind::Classification, Kind::Profile, Kind::Intensity, Kind::Consistency,
                 Kind::Trajectory, Kind::Comparison}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

const std::vector<std::string>& required_keys(Kind k) {
  static const std::map<Kind, std::vector<std::string>> keys{
      {Kind::Validation, {"errors", "warnings"}},
      {Kind::Classification, {"results"}},
      {Kind::Profile, {"parameters", "first", "last", "rows", "trends"}},
      {Kind::Intensity, {"diagram", "window", "occupancy", "arcs", "development", "degradation", "total_objects"}},
      {Kind::Consistency, {"request", "operation", "consistent"}},
      {Kind::Trajectory,
       {"scenario", "horizon", "trajectory", "report.complete", "report.redundancy", "report.omitted_frequency",
        "report.complexness_frequency"}},
      {Kind::Comparison, {"ranking", "reports"}},
  };
  return keys.at(k);
}

void check_schema(const Report& r) {
  if (!r.body.is_object()) {
    throw ModelError(ErrorCode::SchemaViolation, std::string(to_string(r.kind)) + " report body is not an object");
  }
  for (const auto& key : required_keys(r.kind)) {
    const json* cur = &r.body;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      auto it = cur->is_object() ? cur->find(part) : cur->end();
      if (!cur->is_object() || it == cur->end()) {
        throw ModelError(ErrorCode::SchemaViolation,
                         std::string(to_string(r.kind)) + " report lacks required key '" + key + "'");
      }
      cur = &*it;
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
  }
}

namespace {

json provenance_json(const Provenance& p) {
  json inputs = json::array();
  for (const auto& i : p.inputs) inputs.push_back({{"path", i.path}, {"sha256", i.sha256}});
  return {{"inputs", inputs},
          {"seed", p.seed ? json(*p.seed) : json(nullptr)},
          {"tool_version", p.tool_version},
          {"command", p.command}};
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "-";
  return v.dump();
}

bool is_flat(const json& v) {
  if (!v.is_array()) return !v.is_object();
  return std::all_of(v.begin(), v.end(), [](const json& x) { return !x.is_array() && !x.is_object(); });
}

void render(std::ostringstream& out, const json& v, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (v.is_object()) {
    for (const auto& [k, x] : v.items()) {
      if (is_flat(x)) {
        out << pad << k << ": ";
        if (x.is_array()) {
          for (std::size_t i = 0; i < x.size(); ++i) out << (i ? " " : "") << scalar_text(x[i]);
        } else {
          out << scalar_text(x);
        }
        out << "\n";
      } else {
        out << pad << k << ":\n";
        render(out, x, indent + 1);
      }
    }
    return;
  }
  if (v.is_array()) {
    for (const auto& x : v) {
      if (is_flat(x)) {
        out << pad << "- ";
        if (x.is_array()) {
          for (std::size_t i = 0; i < x.size(); ++i) out << (i ? " " : "") << scalar_text(x[i]);
        } else {
          out << scalar_text(x);
        }
        out << "\n";
      } else {
        out << pad << "-\n";
        render(out, x, indent + 1);
      }
    }
    return;
  }
  out << pad << scalar_text(v) << "\n";
}

}  // namespace

std::string emit_report(const Report& r, Format format) {
  check_schema(r);
  json doc{{"kind", to_string(r.kind)},
           {"pass", r.pass},
           {"body", r.body},
           {"provenance", provenance_json(r.provenance)}};
  if (format == Format::Json) return doc.dump(2) + "\n";
  std::ostringstream out;
  out << to_string(r.kind) << " report: " << (r.pass ? "PASS" : "FAIL") << "\n";
  render(out, r.body, 1);
  out << "provenance:\n";
  render(out, doc["provenance"], 1);
  return out.str();
}

Report read_report(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ModelError(ErrorCode::ParseError, std::string("report is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string() || !doc.contains("body")) {
    throw ModelError(ErrorCode::SchemaViolation, "report needs 'kind' and 'body'");
  }
  auto kind = kind_from_string(doc["kind"].get<std::string>());
  if (!kind) throw ModelError(ErrorCode::SchemaViolation, "unknown report kind '" + doc["kind"].get<std::string>() + "'");
  Report r;
  r.kind = *kind;
  r.body = doc["body"];
  r.pass = doc.value("pass", true);
  if (doc.contains("provenance") && doc["provenance"].is_object()) {
    const auto& p = doc["provenance"];
    for (const auto& i : p.value("inputs", json::array())) {
      r.provenance.inputs.push_back({i.value("path", ""), i.value("sha256", "")});
    }
    if (p.contains("seed") && p["seed"].is_number_unsigned()) r.provenance.seed = p["seed"].get<std::uint64_t>();
    r.provenance.tool_version = p.value("tool_version", std::string(kToolVersion));
    r.provenance.command = p.value("command", std::vector<std::string>{});
  }
  check_schema(r);
  return r;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw ModelError(ErrorCode::InvalidArgument, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(ErrorCode::ParseError, "cannot read '" + path + "'", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

InputDigest digest_file(const std::string& path) { return {path, sha256_hex(read_file(path))}; }

// ---- structured conversions ------------------------------------------------

namespace {

json config_json(const scenario::Configuration& c) {
  json a = json::array();
  for (const auto& s : c) a.push_back({{"state", s.state}, {"entry", s.entry}, {"quiet_since", s.quiet_since}});
  return a;
}

scenario::Configuration config_from_json(const json& j) {
  scenario::Configuration c;
  for (const auto& s : j) c.push_back({s.at("state").get<std::string>(), s.at("entry").get<Tick>(), s.at("quiet_since").get<Tick>()});
  return c;
}

json event_json(const scenario::Event& e) {
  return {{"tick", e.tick},
          {"kind", scenario::to_string(e.kind)},
          {"subsystem", e.subsystem},
          {"symbol", e.symbol},
          {"symbol_class", scenario::to_string(e.symbol_class)},
          {"effective", e.effective},
          {"arc", e.arc},
          {"from", e.from},
          {"to", e.to},
          {"cause", scenario::to_string(e.cause)},
          {"coupled", e.coupled},
          {"backstep", e.backstep},
          {"origin", e.origin ? json(*e.origin) : json(nullptr)},
          {"note", e.note}};
}

template <typename T>
T parse_enum(std::optional<T> v, const std::string& text, const char* what) {
  if (!v) throw ModelError(ErrorCode::ParseError, std::string("unknown ") + what + " '" + text + "'");
  return *v;
}

scenario::Event event_from_json(const json& j) {
  scenario::Event e;
  e.tick = j.at("tick").get<Tick>();
  const auto kind = j.at("kind").get<std::string>();
  e.kind = parse_enum(scenario::event_kind_from_string(kind), kind, "event kind");
  e.subsystem = j.at("subsystem").get<std::string>();
  e.symbol = j.value("symbol", "");
  const auto cls = j.value("symbol_class", "unclassified");
  e.symbol_class = parse_enum(scenario::symbol_class_from_string(cls), cls, "symbol class");
  e.effective = j.value("effective", false);
  e.arc = j.value("arc", "");
  e.from = j.value("from", "");
  e.to = j.value("to", "");
  const auto cause = j.value("cause", "direct");
  e.cause = parse_enum(scenario::cause_from_string(cause), cause, "cause");
  e.coupled = j.value("coupled", false);
  e.backstep = j.value("backstep", false);
  if (j.contains("origin") && !j["origin"].is_null()) e.origin = j["origin"].get<std::size_t>();
  e.note = j.value("note", "");
  return e;
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ModelError(ErrorCode::SchemaViolation, std::string(what) + " is malformed: " + e.what());
  }
}

}  // namespace

json to_json(const scenario::Trajectory& tr) {
  json per_tick = json::array();
  for (const auto& c : tr.per_tick) per_tick.push_back(config_json(c));
  json events = json::array();
  for (const auto& e : tr.events) events.push_back(event_json(e));
  return {{"scenario", tr.scenario}, {"subsystems", tr.subsystems}, {"states", tr.states},
          {"horizon", tr.horizon},   {"initial", config_json(tr.initial)}, {"per_tick", per_tick},
          {"events", events}};
}

scenario::Trajectory trajectory_from_json(const json& j) {
  return guarded("trajectory", [&] {
    scenario::Trajectory tr;
    tr.scenario = j.at("scenario").get<std::string>();
    tr.subsystems = j.at("subsystems").get<std::vector<std::string>>();
    tr.states = j.at("states").get<std::vector<std::vector<std::string>>>();
    tr.horizon = j.at("horizon").get<Tick>();
    tr.initial = config_from_json(j.at("initial"));
    for (const auto& c : j.at("per_tick")) tr.per_tick.push_back(config_from_json(c));
    for (const auto& e : j.at("events")) tr.events.push_back(event_from_json(e));
    return tr;
  });
}

json to_json(const scenario::EfficiencySeries& e) {
  return {{"subsystems", e.subsystems},
          {"per_subsystem", e.per_subsystem},
          {"aggregate", e.aggregate},
          {"final", e.final_aggregate()}};
}

json to_json(const scenario::ScenarioReport& r) {
  json red = json::array();
  for (const auto& i : r.redundancy) red.push_back({{"subsystem", i.subsystem}, {"ticks", i.ticks}});
  json out{{"scenario", r.scenario},
           {"subsystems", r.subsystems},
           {"ticks", r.ticks},
           {"complete", r.complete},
           {"non_final", r.non_final},
           {"redundancy", red},
           {"backsteps", r.backsteps},
           {"backstep_total", r.backstep_total},
           {"omitted_frequency", r.omitted_frequency},
           {"coupled_firings", r.coupled_firings},
           {"coupled_total", r.coupled_total},
           {"complexness_frequency", r.complexness_frequency},
           {"propagated_firings", r.propagated_firings}};
  out["efficiency"] = r.efficiency ? to_json(*r.efficiency) : json(nullptr);
  return out;
}

scenario::ScenarioReport scenario_report_from_json(const json& j) {
  return guarded("scenario report", [&] {
    scenario::ScenarioReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.subsystems = j.at("subsystems").get<std::vector<std::string>>();
    r.ticks = j.at("ticks").get<Tick>();
    r.complete = j.at("complete").get<bool>();
    r.non_final = j.at("non_final").get<std::vector<std::string>>();
    for (const auto& i : j.at("redundancy")) {
      r.redundancy.push_back({i.at("subsystem").get<std::string>(), i.at("ticks").get<std::vector<Tick>>()});
    }
    r.backsteps = j.at("backsteps").get<std::map<std::string, std::size_t>>();
    r.backstep_total = j.at("backstep_total").get<std::size_t>();
    r.omitted_frequency = j.at("omitted_frequency").get<double>();
    r.coupled_firings = j.at("coupled_firings").get<std::map<std::string, std::size_t>>();
    r.coupled_total = j.at("coupled_total").get<std::size_t>();
    r.complexness_frequency = j.at("complexness_frequency").get<double>();
    r.propagated_firings = j.at("propagated_firings").get<std::map<std::string, std::size_t>>();
    if (j.contains("efficiency") && !j["efficiency"].is_null()) {
      const auto& e = j["efficiency"];
      scenario::EfficiencySeries s;
      s.subsystems = e.at("subsystems").get<std::vector<std::string>>();
      s.per_subsystem = e.at("per_subsystem").get<std::vector<std::vector<double>>>();
      s.aggregate = e.at("aggregate").get<std::vector<double>>();
      r.efficiency = std::move(s);
    }
    return r;
  });
}

json to_json(const canonical::IntensityReport& r) {
  json occupancy = json::object();
  for (std::size_t i = 0; i < r.states.size(); ++i) occupancy[r.states[i]] = r.occupancy[i];
  json arcs = json::object();
  for (const auto& [key, series] : r.arc_series) {
    arcs[key.str()] = {{"series", series}, {"total", series.empty() ? 0 : series.back()}};
  }
  json out{{"diagram", r.diagram},
           {"window", {r.first, r.last}},
           {"states", r.states},
           {"occupancy", occupancy},
           {"arcs", arcs},
           {"development_series", r.development_series},
           {"degradation_series", r.degradation_series},
           {"development", r.development},
           {"degradation", r.degradation},
           {"ratio", r.ratio ? json(*r.ratio) : json(nullptr)},
           {"total_objects", r.total_objects}};
  if (r.goal_gap) out["goal_gap"] = *r.goal_gap;
  return out;
}

json to_json(const ValidationReport& r) {
  json errors = json::array();
  json warnings = json::array();
  for (const auto& i : r.issues) {
    json e{{"code", i.code}, {"path", i.path}, {"message", i.message}};
    (i.severity == Severity::Error ? errors : warnings).push_back(e);
  }
  return {{"errors", errors}, {"warnings", warnings}};
}

// ---- CSV ---------------------------------------------------------------------

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

namespace {

[[noreturn]] void csv_error(std::size_t line, const std::string& msg) {
  throw ModelError(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg, {}, {line});
}

template <typename T>
T parse_number(const std::string& s, std::size_t line, const char* what) {
  std::istringstream in(s);
  T v{};
  in >> v;
  if (in.fail() || !(in >> std::ws).eof()) csv_error(line, std::string("bad ") + what + " '" + s + "'");
  return v;
}

bool skip(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::vector<std::string> header(std::istream& in, std::size_t& line_no, const char* expected) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!skip(line)) return split_csv_line(line);
  }
  csv_error(line_no, std::string("missing header, expected '") + expected + "'");
}

}  // namespace

std::vector<dynamics::Series> read_series_csv(std::istream& in) {
  std::size_t line_no = 0;
  auto cols = header(in, line_no, "tick,<parameter>...");
  if (cols.size() < 2 || cols[0] != "tick") csv_error(line_no, "header must start with 'tick' and name a parameter");
  std::vector<dynamics::Series> out(cols.size() - 1);
  for (std::size_t k = 1; k < cols.size(); ++k) out[k - 1].parameter = cols[k];
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip(line)) continue;
    auto f = split_csv_line(line);
    if (f.size() != cols.size()) csv_error(line_no, "expected " + std::to_string(cols.size()) + " fields");
    const Tick t = parse_number<Tick>(f[0], line_no, "tick");
    for (std::size_t k = 1; k < f.size(); ++k) {
      if (f[k].empty()) continue;
      auto& s = out[k - 1];
      if (!s.ticks.empty() && t <= s.ticks.back()) csv_error(line_no, "ticks must increase");
      s.ticks.push_back(t);
      s.values.push_back(parse_number<double>(f[k], line_no, "value"));
    }
  }
  return out;
}

std::vector<canonical::TransitionEvent> read_events_csv(std::istream& in) {
  std::size_t line_no = 0;
  auto cols = header(in, line_no, "tick,object,from,to,arc_kind");
  if (cols != std::vector<std::string>{"tick", "object", "from", "to", "arc_kind"}) {
    csv_error(line_no, "header must be 'tick,object,from,to,arc_kind'");
  }
  std::vector<canonical::TransitionEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip(line)) continue;
    auto f = split_csv_line(line);
    if (f.size() != 5) csv_error(line_no, "expected 5 fields");
    canonical::ArcKind kind;
    if (f[4] == "dev") kind = canonical::ArcKind::Development;
    else if (f[4] == "back") kind = canonical::ArcKind::Backstep;
    else csv_error(line_no, "arc_kind must be 'dev' or 'back'");
    out.push_back({f[1], {kind, f[2], f[3]}, parse_number<Tick>(f[0], line_no, "tick")});
  }
  return out;
}

void write_events_csv(std::ostream& out, const std::vector<canonical::TransitionEvent>& events) {
  out << "tick,object,from,to,arc_kind\n";
  for (const auto& e : events) {
    out << e.tick << ',' << csv_field(e.object) << ',' << csv_field(e.arc.from) << ',' << csv_field(e.arc.to) << ','
        << canonical::to_string(e.arc.kind) << '\n';
  }
}

void write_trajectory_csv(std::ostream& out, const scenario::Trajectory& tr) {
  out << kTrajectoryCsvHeader << '\n';
  Tick tick = -1;
  std::size_t seq = 0;
  for (const auto& e : tr.events) {
    seq = e.tick == tick ? seq + 1 : 0;
    tick = e.tick;
    out << e.tick << ',' << seq << ',' << scenario::to_string(e.kind) << ',' << csv_field(e.subsystem) << ','
        << csv_field(e.symbol) << ',' << scenario::to_string(e.symbol_class) << ',' << (e.effective ? "true" : "false")
        << ',' << csv_field(e.arc) << ',' << csv_field(e.from) << ',' << csv_field(e.to) << ','
        << scenario::to_string(e.cause) << ',' << (e.coupled ? "true" : "false") << ','
        << (e.origin ? std::to_string(*e.origin) : "") << ',' << csv_field(e.note) << '\n';
  }
}

std::vector<scenario::Event> read_trajectory_csv(std::istream& in) {
  std::size_t line_no = 0;
  auto cols = header(in, line_no, kTrajectoryCsvHeader);
  if (cols != split_csv_line(kTrajectoryCsvHeader)) {
    csv_error(line_no, std::string("header must be '") + kTrajectoryCsvHeader + "'");
  }
  auto flag = [&](const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    csv_error(line_no, "expected true/false, got '" + s + "'");
  };
  std::vector<scenario::Event> out;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip(line)) continue;
    auto f = split_csv_line(line);
    if (f.size() != cols.size()) csv_error(line_no, "expected " + std::to_string(cols.size()) + " fields");
    scenario::Event e;
    e.tick = parse_number<Tick>(f[0], line_no, "tick");
    auto kind = scenario::event_kind_from_string(f[2]);
    auto cls = scenario::symbol_class_from_string(f[5]);
    auto cause = scenario::cause_from_string(f[10]);
    if (!kind || !cls || !cause) csv_error(line_no, "unknown kind, symbol class or cause");
    e.kind = *kind;
    e.subsystem = f[3];
    e.symbol = f[4];
    e.symbol_class = *cls;
    e.effective = flag(f[6]);
    e.arc = f[7];
    e.from = f[8];
    e.to = f[9];
    e.cause = *cause;
    e.coupled = flag(f[11]);
    e.backstep = e.kind == scenario::EventKind::Firing && e.cause == scenario::Cause::Backstep;
    if (!f[12].empty()) e.origin = parse_number<std::size_t>(f[12], line_no, "origin");
    e.note = f[13];
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace devmodel::report

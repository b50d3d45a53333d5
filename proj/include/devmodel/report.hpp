#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "devmodel/canonical.hpp"
#include "devmodel/dynamics.hpp"
#include "devmodel/scenario.hpp"

namespace devmodel::report {

inline constexpr const char* kToolVersion = "1.0.0";

enum class Kind { Validation, Classification, Profile, Intensity, Consistency, Trajectory, Comparison };
std::string_view to_string(Kind k);
std::optional<Kind> kind_from_string(std::string_view s);

struct InputDigest {
  std::string path;
  std::string sha256;  // lowercase hex
};

struct Provenance {
  std::vector<InputDigest> inputs;
  std::optional<std::uint64_t> seed;
  std::string tool_version = kToolVersion;
  std::vector<std::string> command;  // argv without the program name
};

struct Report {
  Kind kind = Kind::Validation;
  nlohmann::json body = nlohmann::json::object();
  Provenance provenance;
  /// Explicit verdict; every report carries one.
  bool pass = true;
};

enum class Format { Json, Text };

/// Keys of `body` every report of the kind must carry.
const std::vector<std::string>& required_keys(Kind k);

/// Throws ModelError{SchemaViolation} when the body misses a required key.
void check_schema(const Report& r);

/// JSON output has sorted keys and shortest round-trip numbers, so equal
/// reports give equal bytes. Throws ModelError{SchemaViolation}.
std::string emit_report(const Report& r, Format format);

/// Inverse of the JSON form. Throws ModelError{ParseError | SchemaViolation}.
Report read_report(std::string_view text);

std::string sha256_hex(std::string_view data);
/// Throws ModelError{ParseError} if the file cannot be read.
std::string read_file(const std::string& path);
InputDigest digest_file(const std::string& path);

// ---- structured conversions ----------------------------------------------

nlohmann::json to_json(const scenario::Trajectory& tr);
scenario::Trajectory trajectory_from_json(const nlohmann::json& j);
nlohmann::json to_json(const scenario::ScenarioReport& r);
scenario::ScenarioReport scenario_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const scenario::EfficiencySeries& e);
nlohmann::json to_json(const canonical::IntensityReport& r);
nlohmann::json to_json(const ValidationReport& r);

// ---- CSV ----------------------------------------------------------------------

/// Splits one CSV line; fields may be double-quoted with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_field(std::string_view s);

/// `tick,<param>,<param>...`; empty cells mean "not observed". Throws
/// ModelError{ParseError} with the line number.
std::vector<dynamics::Series> read_series_csv(std::istream& in);

/// `tick,object,from,to,arc_kind` with arc_kind dev|back.
std::vector<canonical::TransitionEvent> read_events_csv(std::istream& in);
void write_events_csv(std::ostream& out, const std::vector<canonical::TransitionEvent>& events);

inline constexpr const char* kTrajectoryCsvHeader =
    "tick,seq,kind,subsystem,symbol,symbol_class,effective,arc,from,to,cause,coupled,origin,note";
/// One row per engine event; `seq` is the index within the tick.
void write_trajectory_csv(std::ostream& out, const scenario::Trajectory& tr);
std::vector<scenario::Event> read_trajectory_csv(std::istream& in);

}  // namespace devmodel::report

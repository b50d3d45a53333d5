#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "devmodel/error.hpp"

namespace devmodel::dynamics {

enum class Kind { Growth, Decline, Steady, TurnMax, TurnMin, CycleSuspect, Unknown };

inline constexpr std::array<Kind, 7> kAllKinds = {Kind::Growth,  Kind::Decline,      Kind::Steady,
                                                  Kind::TurnMax, Kind::TurnMin,      Kind::CycleSuspect,
                                                  Kind::Unknown};

std::string_view to_string(Kind k);
std::optional<Kind> kind_from_string(std::string_view s);
/// Level names in declaration order; this is the ordinal vocabulary used by
/// rule-matrix cells.
std::vector<std::string> kind_vocabulary();

/// Running estimate of a parameter's dynamics. `direction` remembers the sign
/// of the last non-steady move (+1 up, -1 down, 0 none yet); it lets an
/// oscillation keep its CycleSuspect streak.
struct State {
  Kind kind = Kind::Unknown;
  int streak = 0;
  int direction = 0;

  bool operator==(const State&) const = default;
};

/// One estimator step from (prev, x_prev, x_curr).
///
/// A move within epsilon is Steady. Otherwise a move up after a falling run
/// (Decline) is TurnMin, a move up right after TurnMax (two reversals in a
/// row) is CycleSuspect, which persists while moves keep alternating. Any
/// other move up is Growth; moves down are symmetric. Streaks count
/// consecutive steps of the same kind.
///
/// Throws ModelError{IncomparableValues} on NaN inputs and
/// ModelError{InvalidArgument} on negative epsilon.
State estimate_state(const State& prev, double x_prev, double x_curr, double epsilon);

struct Series {
  std::string parameter;
  std::vector<Tick> ticks;
  std::vector<double> values;

  /// Throws ModelError{InvalidArgument} on length mismatch, empty series or
  /// non-increasing ticks.
  void check() const;
  bool operator==(const Series&) const = default;
};

/// Folds estimate_state over the values, starting from Unknown. Element i is
/// the state after observing values[i] (element 0 is always Unknown).
std::vector<State> fold_states(std::span<const double> values, double epsilon);

enum class Monotone { Increasing, Decreasing, None };
std::string_view to_string(Monotone m);

struct TrendClass {
  Monotone monotone = Monotone::None;
  std::vector<std::size_t> critical_points;  // indices of local extrema
  bool bounded = true;  // finite window: always bounded by the observed extremes
  double observed_min = 0.0;
  double observed_max = 0.0;
  std::vector<std::size_t> inflexions;  // first point past the old curvature's last centre
  std::optional<std::size_t> cycle_period;

  bool operator==(const TrendClass&) const = default;
};

/// Difference-sign analysis under epsilon. Needs at least 2 values; inflexion
/// and cycle analysis need at least 3 and are left empty otherwise.
/// Throws ModelError{SeriesTooShort}.
TrendClass classify_series(std::span<const double> values, double epsilon);

/// Whole-series analysis: trend class plus the one-step-ahead qualitative
/// forecast (the last estimated state, repeated).
struct SeriesAnalysis {
  std::string parameter;
  TrendClass trend;
  State last_state;
  State forecast;
};
SeriesAnalysis analyze_series(const Series& series, double epsilon);

struct Profile {
  std::vector<std::string> parameters;
  Tick first = 0;
  Tick last = 0;
  /// cells[p][t - first]
  std::vector<std::vector<State>> cells;

  const State& at(std::size_t parameter, Tick t) const {
    return cells.at(parameter).at(static_cast<std::size_t>(t - first));
  }
};

/// Aligns the series on the tick grid [first, last]. A cell holds the state
/// folded over every value of that series up to and including the tick, or
/// Unknown where the series has no value at that tick.
/// Throws ModelError{EmptyOverlap} if some series has no tick inside the
/// interval, ModelError{InvalidArgument} if first > last.
Profile parallel_profile(std::span<const Series> series, Tick first, Tick last, double epsilon);

}  // namespace devmodel::dynamics

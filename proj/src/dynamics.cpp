#include "devmodel/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace devmodel::dynamics {

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::Growth: return "Growth";
    case Kind::Decline: return "Decline";
    case Kind::Steady: return "Steady";
    case Kind::TurnMax: return "TurnMax";
    case Kind::TurnMin: return "TurnMin";
    case Kind::CycleSuspect: return "CycleSuspect";
    case Kind::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::optional<Kind> kind_from_string(std::string_view s) {
  for (Kind k : kAllKinds) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::vector<std::string> kind_vocabulary() {
  std::vector<std::string> out;
  for (Kind k : kAllKinds) out.emplace_back(to_string(k));
  return out;
}

std::string_view to_string(Monotone m) {
  switch (m) {
    case Monotone::Increasing: return "increasing";
    case Monotone::Decreasing: return "decreasing";
    case Monotone::None: return "none";
  }
  return "none";
}

namespace {

int sign_under(double d, double epsilon) {
  if (d > epsilon) return 1;
  if (d < -epsilon) return -1;
  return 0;
}

State continue_or_start(const State& prev, Kind kind, int direction) {
  int streak = prev.kind == kind ? prev.streak + 1 : 1;
  return {kind, streak, direction};
}

}  // namespace

State estimate_state(const State& prev, double x_prev, double x_curr, double epsilon) {
  if (std::isnan(x_prev) || std::isnan(x_curr)) {
    throw ModelError(ErrorCode::IncomparableValues, "NaN value in series");
  }
  if (!(epsilon >= 0.0)) {
    throw ModelError(ErrorCode::InvalidArgument, "epsilon must be non-negative");
  }
  const int s = sign_under(x_curr - x_prev, epsilon);
  if (s == 0) return continue_or_start(prev, Kind::Steady, prev.direction);

  const Kind forward = s > 0 ? Kind::Growth : Kind::Decline;
  const Kind reverse = s > 0 ? Kind::Decline : Kind::Growth;
  const Kind turn = s > 0 ? Kind::TurnMin : Kind::TurnMax;
  const Kind opposite_turn = s > 0 ? Kind::TurnMax : Kind::TurnMin;

  if (prev.kind == reverse) return {turn, 1, s};
  if (prev.kind == opposite_turn) return {Kind::CycleSuspect, 1, s};
  if (prev.kind == Kind::CycleSuspect && prev.direction == -s) {
    return {Kind::CycleSuspect, prev.streak + 1, s};
  }
  return continue_or_start(prev, forward, s);
}

void Series::check() const {
  if (ticks.size() != values.size()) {
    throw ModelError(ErrorCode::InvalidArgument,
                     "series '" + parameter + "' has mismatched tick/value counts", parameter);
  }
  if (ticks.empty()) {
    throw ModelError(ErrorCode::InvalidArgument, "series '" + parameter + "' is empty", parameter);
  }
  for (std::size_t i = 1; i < ticks.size(); ++i) {
    if (ticks[i] <= ticks[i - 1]) {
      throw ModelError(ErrorCode::InvalidArgument,
                       "series '" + parameter + "' ticks are not strictly increasing", parameter);
    }
  }
}

std::vector<State> fold_states(std::span<const double> values, double epsilon) {
  std::vector<State> out;
  out.reserve(values.size());
  State s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) s = estimate_state(s, values[i - 1], values[i], epsilon);
    out.push_back(s);
  }
  return out;
}

TrendClass classify_series(std::span<const double> values, double epsilon) {
  const std::size_t n = values.size();
  if (n < 2) {
    throw ModelError(ErrorCode::SeriesTooShort, "need at least 2 values, got " + std::to_string(n));
  }
  if (!(epsilon >= 0.0)) throw ModelError(ErrorCode::InvalidArgument, "epsilon must be non-negative");
  for (double v : values) {
    if (std::isnan(v)) throw ModelError(ErrorCode::IncomparableValues, "NaN value in series");
  }

  TrendClass tc;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  tc.observed_min = *lo;
  tc.observed_max = *hi;

  bool any_up = false;
  bool any_down = false;
  std::optional<std::size_t> last_nonzero;
  int last_sign = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    int s = sign_under(values[i + 1] - values[i], epsilon);
    if (s == 0) continue;
    any_up |= s > 0;
    any_down |= s < 0;
    if (last_nonzero && s != last_sign) tc.critical_points.push_back(*last_nonzero + 1);
    last_nonzero = i;
    last_sign = s;
  }
  if (any_up && !any_down) tc.monotone = Monotone::Increasing;
  if (any_down && !any_up) tc.monotone = Monotone::Decreasing;

  if (n < 3) return tc;

  std::optional<std::size_t> last_curv;
  int last_curv_sign = 0;
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double dd = values[k + 2] - 2.0 * values[k + 1] + values[k];
    int s = sign_under(dd, epsilon);
    if (s == 0) continue;
    if (last_curv && s != last_curv_sign) tc.inflexions.push_back(*last_curv + 2);
    last_curv = k;
    last_curv_sign = s;
  }

  if (any_up || any_down) {
    for (std::size_t p = 2; p <= n / 2; ++p) {
      bool ok = true;
      for (std::size_t t = p; t < n && ok; ++t) ok = std::fabs(values[t] - values[t - p]) <= epsilon;
      if (ok) {
        tc.cycle_period = p;
        break;
      }
    }
  }
  return tc;
}

SeriesAnalysis analyze_series(const Series& series, double epsilon) {
  series.check();
  SeriesAnalysis out;
  out.parameter = series.parameter;
  out.trend = classify_series(series.values, epsilon);
  out.last_state = fold_states(series.values, epsilon).back();
  out.forecast = out.last_state;
  return out;
}

Profile parallel_profile(std::span<const Series> series, Tick first, Tick last, double epsilon) {
  if (first > last) {
    throw ModelError(ErrorCode::InvalidArgument, "profile interval is empty (first > last)");
  }
  Profile out;
  out.first = first;
  out.last = last;
  const auto width = static_cast<std::size_t>(last - first + 1);
  for (const auto& s : series) {
    s.check();
    auto inside = std::find_if(s.ticks.begin(), s.ticks.end(),
                               [&](Tick t) { return t >= first && t <= last; });
    if (inside == s.ticks.end()) {
      throw ModelError(ErrorCode::EmptyOverlap,
                       "series '" + s.parameter + "' has no tick in [" + std::to_string(first) +
                           ", " + std::to_string(last) + "]",
                       s.parameter);
    }
    auto folded = fold_states(s.values, epsilon);
    std::vector<State> row(width);
    for (std::size_t i = 0; i < s.ticks.size(); ++i) {
      if (s.ticks[i] < first || s.ticks[i] > last) continue;
      row[static_cast<std::size_t>(s.ticks[i] - first)] = folded[i];
    }
    out.parameters.push_back(s.parameter);
    out.cells.push_back(std::move(row));
  }
  return out;
}

}  // namespace devmodel::dynamics

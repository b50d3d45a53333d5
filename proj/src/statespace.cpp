#include "devmodel/statespace.hpp"

#include <algorithm>
#include <random>

#include "devmodel/dynamics.hpp"

namespace devmodel::statespace {

Scale::Scale(std::string id, std::vector<Predicate> predicates, std::vector<State> states)
    : id_(std::move(id)), predicates_(std::move(predicates)), states_(std::move(states)) {
  if (predicates_.size() != states_.size()) {
    throw ModelError(ErrorCode::InvalidArgument,
                     "scale '" + id_ + "' has " + std::to_string(predicates_.size()) +
                         " predicates but " + std::to_string(states_.size()) + " states",
                     id_);
  }
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].position != i + 1) {
      throw ModelError(ErrorCode::InvalidArgument,
                       "scale '" + id_ + "': state '" + states_[i].id + "' has position " +
                           std::to_string(states_[i].position) + ", expected " +
                           std::to_string(i + 1),
                       id_);
    }
    if (!seen.insert(states_[i].id).second) {
      throw ModelError(ErrorCode::InvalidArgument,
                       "scale '" + id_ + "': duplicate state id '" + states_[i].id + "'", id_);
    }
  }
}

std::set<std::string, std::less<>> Scale::parameters() const {
  std::set<std::string, std::less<>> out;
  for (const auto& p : predicates_) out.insert(p.parameters().begin(), p.parameters().end());
  return out;
}

ScaleMatch evaluate_scale(const Scale& scale, const Assignment& assignment, MatchMode mode) {
  for (const auto& p : scale.parameters()) {
    if (assignment.find(p) == assignment.end()) {
      throw ModelError(ErrorCode::MissingParameter,
                       "scale '" + scale.id() + "' needs parameter '" + p + "'", scale.id());
    }
  }
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < scale.size(); ++i) {
    if (scale.predicates()[i].evaluate(assignment)) {
      if (mode == MatchMode::FirstMatch) return {i, scale.states()[i]};
      hits.push_back(i + 1);
    }
  }
  if (hits.empty()) {
    throw ModelError(ErrorCode::NoMatch, "no predicate of scale '" + scale.id() + "' holds",
                     scale.id());
  }
  if (hits.size() > 1) {
    std::string list;
    for (auto h : hits) list += (list.empty() ? "" : ",") + std::to_string(h);
    throw ModelError(ErrorCode::MultipleMatch,
                     "predicates {" + list + "} of scale '" + scale.id() + "' hold together",
                     scale.id(), hits);
  }
  return {hits.front() - 1, scale.states()[hits.front() - 1]};
}

Classificator::Classificator(std::string id, std::string root, std::map<std::string, Scale> scales,
                             std::map<RefinementKey, std::string> refinements,
                             std::optional<TimeWindow> window)
    : id_(std::move(id)),
      root_(std::move(root)),
      scales_(std::move(scales)),
      refinements_(std::move(refinements)),
      window_(window) {
  auto fail = [&](const std::string& msg) {
    throw ModelError(ErrorCode::InvalidArgument, "classificator '" + id_ + "': " + msg, id_);
  };
  if (!scales_.count(root_)) fail("root scale '" + root_ + "' is not part of the classificator");
  std::map<std::string, std::string> parent_of;
  for (const auto& [key, child] : refinements_) {
    auto it = scales_.find(key.scale);
    if (it == scales_.end()) fail("refinement of unknown scale '" + key.scale + "'");
    if (key.predicate >= it->second.size()) {
      fail("scale '" + key.scale + "' has no predicate " + std::to_string(key.predicate + 1));
    }
    if (!scales_.count(child)) fail("unknown refinement scale '" + child + "'");
    if (child == root_) fail("root scale '" + root_ + "' cannot refine another scale");
    if (!parent_of.emplace(child, key.scale).second) {
      fail("scale '" + child + "' refines more than one predicate");
    }
  }
  // Every scale must reach the root by parent links without revisiting.
  for (const auto& [sid, _] : scales_) {
    std::set<std::string> seen{sid};
    std::string cur = sid;
    while (cur != root_) {
      auto p = parent_of.find(cur);
      if (p == parent_of.end()) fail("scale '" + sid + "' is not connected to the root");
      cur = p->second;
      if (!seen.insert(cur).second) fail("refinement cycle through scale '" + cur + "'");
    }
  }
}

const Scale* Classificator::refinement_of(const std::string& scale, std::size_t predicate) const {
  auto it = refinements_.find({scale, predicate});
  if (it == refinements_.end()) return nullptr;
  return &scales_.at(it->second);
}

std::vector<PathStep> classify_hierarchical(const Classificator& c, const Assignment& assignment,
                                            MatchMode mode) {
  std::vector<PathStep> path;
  const Scale* cur = &c.root();
  while (cur != nullptr) {
    ScaleMatch m = evaluate_scale(*cur, assignment, mode);
    path.push_back({cur->id(), m.index, m.state});
    cur = c.refinement_of(cur->id(), m.index);
  }
  return path;
}

namespace {

double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Axis {
  std::string name;
  ValueRange range;
  bool integral = false;
};

std::vector<Axis> axes_for(const SampleSpec& spec, const std::set<std::string, std::less<>>& params,
                           const ParameterSet& decls) {
  std::vector<Axis> axes;
  for (const auto& p : params) {
    const ParameterDecl* d = decls.find(p);
    Axis a{p, {}, d != nullptr && d->kind == ParameterKind::Ordinal};
    if (auto it = spec.ranges.find(p); it != spec.ranges.end()) {
      a.range = it->second;
    } else if (a.integral) {
      a.range = {0.0, static_cast<double>(d->levels.size() - 1)};
    } else if (d != nullptr && d->range) {
      a.range = *d->range;
    } else {
      throw ModelError(ErrorCode::MissingParameterRange, "no sampling range for parameter '" + p + "'",
                       p);
    }
    if (a.range.lo > a.range.hi) {
      throw ModelError(ErrorCode::InvalidArgument, "empty sampling range for parameter '" + p + "'",
                       p);
    }
    axes.push_back(std::move(a));
  }
  return axes;
}

}  // namespace

SampleSpec sample_spec_for(const std::set<std::string, std::less<>>& parameters,
                           const ParameterSet& decls, std::size_t samples, std::uint64_t seed) {
  SampleSpec spec;
  spec.samples = samples;
  spec.seed = seed;
  for (const auto& p : parameters) {
    const ParameterDecl* d = decls.find(p);
    if (d != nullptr && d->kind == ParameterKind::Ordinal) continue;
    if (d == nullptr || !d->range) {
      throw ModelError(ErrorCode::MissingParameterRange,
                       "parameter '" + p + "' declares no sampling range", p);
    }
    spec.ranges[p] = *d->range;
  }
  return spec;
}

std::vector<Assignment> sample_points(const SampleSpec& spec,
                                      const std::set<std::string, std::less<>>& parameters,
                                      const ParameterSet& decls) {
  const auto axes = axes_for(spec, parameters, decls);
  std::vector<Assignment> out;
  if (!axes.empty()) {
    if (spec.mode == SampleSpec::Mode::Random) {
      std::mt19937_64 rng(spec.seed);
      out.reserve(spec.samples);
      for (std::size_t i = 0; i < spec.samples; ++i) {
        Assignment a;
        for (const auto& ax : axes) {
          if (ax.integral) {
            auto span = static_cast<std::uint64_t>(ax.range.hi - ax.range.lo) + 1;
            a[ax.name] = ax.range.lo + static_cast<double>(rng() % span);
          } else {
            a[ax.name] = ax.range.lo + (ax.range.hi - ax.range.lo) * unit_interval(rng);
          }
        }
        out.push_back(std::move(a));
      }
    } else {
      std::vector<std::vector<double>> ticks;
      for (const auto& ax : axes) {
        std::vector<double> v;
        if (ax.integral) {
          for (double x = ax.range.lo; x <= ax.range.hi; x += 1.0) v.push_back(x);
        } else if (spec.samples <= 1 || ax.range.lo == ax.range.hi) {
          v.push_back(ax.range.lo);
        } else {
          for (std::size_t i = 0; i < spec.samples; ++i) {
            v.push_back(ax.range.lo + (ax.range.hi - ax.range.lo) * static_cast<double>(i) /
                                          static_cast<double>(spec.samples - 1));
          }
        }
        ticks.push_back(std::move(v));
      }
      std::vector<std::size_t> idx(axes.size(), 0);
      while (true) {
        Assignment a;
        for (std::size_t k = 0; k < axes.size(); ++k) a[axes[k].name] = ticks[k][idx[k]];
        out.push_back(std::move(a));
        std::size_t k = 0;
        while (k < axes.size() && ++idx[k] == ticks[k].size()) idx[k++] = 0;
        if (k == axes.size()) break;
      }
    }
  }
  out.insert(out.end(), spec.extra_points.begin(), spec.extra_points.end());
  return out;
}

DisjointnessReport validate_scale_disjointness(const Scale& scale, const SampleSpec& spec,
                                               const ParameterSet& decls) {
  DisjointnessReport r;
  r.scale = scale.id();
  if (scale.size() == 0) return r;
  for (const auto& point : sample_points(spec, scale.parameters(), decls)) {
    ++r.samples_tested;
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < scale.size(); ++i) {
      if (scale.predicates()[i].evaluate(point)) hits.push_back(i + 1);
    }
    if (hits.size() > 1) {
      r.overlaps.push_back({point, std::move(hits)});
    } else if (hits.empty()) {
      r.uncovered.push_back(point);
    }
  }
  return r;
}

SubPredicateReport validate_sub_predicates(const Classificator& c, const SampleSpec& spec,
                                           const ParameterSet& decls) {
  SubPredicateReport r;
  for (const auto& [key, child_id] : c.refinements()) {
    const Scale& parent = c.scale(key.scale);
    const Scale& child = c.scale(child_id);
    const Predicate& refined = parent.predicates()[key.predicate];
    auto params = child.parameters();
    params.insert(refined.parameters().begin(), refined.parameters().end());
    for (const auto& point : sample_points(spec, params, decls)) {
      ++r.samples_tested;
      if (refined.evaluate(point)) continue;
      for (std::size_t j = 0; j < child.size(); ++j) {
        if (child.predicates()[j].evaluate(point)) {
          r.violations.push_back({parent.id(), key.predicate + 1, child.id(), j + 1, point});
        }
      }
    }
  }
  return r;
}

const ParameterSet& RuleMatrix::cell_parameters() {
  static const ParameterSet params = [] {
    ParameterSet p;
    p.add({kStateVariable, ParameterKind::Ordinal, dynamics::kind_vocabulary(), std::nullopt});
    return p;
  }();
  return params;
}

RuleMatrix::RuleMatrix(std::string id, std::vector<std::string> parameters,
                       std::vector<std::string> classes,
                       const std::vector<std::vector<std::string>>& cells)
    : id_(std::move(id)), parameters_(std::move(parameters)), classes_(std::move(classes)) {
  if (cells.size() != parameters_.size()) {
    throw ModelError(ErrorCode::InvalidArgument,
                     "rule matrix '" + id_ + "' needs one cell row per parameter", id_);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].size() != classes_.size()) {
      throw ModelError(ErrorCode::InvalidArgument,
                       "rule matrix '" + id_ + "' row '" + parameters_[i] +
                           "' needs one cell per class",
                       id_);
    }
    std::vector<Predicate> row;
    for (std::size_t j = 0; j < cells[i].size(); ++j) {
      row.emplace_back(parameters_[i] + "/" + classes_[j], cells[i][j], cell_parameters());
    }
    cells_.push_back(std::move(row));
  }
}

std::set<std::string> apply_rule_matrix(
    const RuleMatrix& m, const std::map<std::string, std::string, std::less<>>& dyn_states) {
  const ParameterDecl& vocab = *RuleMatrix::cell_parameters().find(RuleMatrix::kStateVariable);
  std::vector<Assignment> rows;
  for (const auto& p : m.parameters()) {
    auto it = dyn_states.find(p);
    if (it == dyn_states.end()) {
      throw ModelError(ErrorCode::MissingParameter,
                       "rule matrix '" + m.id() + "' needs a dynamics state for '" + p + "'", p);
    }
    auto rank = vocab.level_rank(it->second);
    if (!rank) {
      throw ModelError(ErrorCode::UnknownIdentifier,
                       "'" + it->second + "' is not a dynamics state (parameter '" + p + "')", p);
    }
    rows.push_back({{RuleMatrix::kStateVariable, *rank}});
  }
  std::set<std::string> out;
  for (std::size_t j = 0; j < m.classes().size(); ++j) {
    bool all = true;
    for (std::size_t i = 0; i < rows.size() && all; ++i) all = m.cell(i, j).evaluate(rows[i]);
    if (all) out.insert(m.classes()[j]);
  }
  return out;
}

}  // namespace devmodel::statespace

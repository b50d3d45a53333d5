#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace devmodel {

/// Values of every parameter are carried as doubles. Ordinal parameters are
/// encoded by the 0-based rank of their level, so comparison is the declared
/// total order.
using Assignment = std::map<std::string, double, std::less<>>;

enum class ParameterKind { Numeric, Ordinal };

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const ValueRange&) const = default;
};

struct ParameterDecl {
  std::string name;
  ParameterKind kind = ParameterKind::Numeric;
  std::vector<std::string> levels;  // ordinal only, ascending
  std::optional<ValueRange> range;  // sampling domain for validation

  std::optional<double> level_rank(std::string_view level) const;
  bool operator==(const ParameterDecl&) const = default;
};

class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::vector<ParameterDecl> decls);

  const ParameterDecl* find(std::string_view name) const;
  const std::vector<ParameterDecl>& decls() const { return decls_; }
  void add(ParameterDecl decl);

  /// Parses "x=5,grade=high" style text; ordinal levels are resolved to
  /// ranks. Throws ModelError{UnknownIdentifier|InvalidArgument}.
  Assignment parse_assignment(std::string_view text) const;

  bool operator==(const ParameterSet&) const = default;

 private:
  std::vector<ParameterDecl> decls_;
};

namespace detail {
struct ExprNode;
}

/// A named boolean formula in the comparison grammar:
///
///   expr    := or
///   or      := and ( ("||" | "or") and )*
///   and     := unary ( ("&&" | "and") unary )*
///   unary   := ("!" | "not") unary | "(" expr ")" | "true" | "false" | cmp
///   cmp     := operand op operand        op: < <= ≤ = == != ≠ >= ≥ >
///   operand := number | parameter | ordinal level | 'quoted level'
///
/// Identifiers that are not declared parameters are read as ordinal levels of
/// the parameter on the other side of the comparison.
class Predicate {
 public:
  Predicate() = default;
  /// Throws ModelError{ParseError|UnknownIdentifier|InvalidArgument}.
  Predicate(std::string name, std::string expression, const ParameterSet& params);

  const std::string& name() const { return name_; }
  const std::string& expression() const { return expression_; }
  const std::set<std::string, std::less<>>& parameters() const { return referenced_; }

  /// Throws ModelError{MissingParameter} when the assignment lacks a
  /// referenced parameter.
  bool evaluate(const Assignment& assignment) const;

  bool operator==(const Predicate& other) const {
    return name_ == other.name_ && expression_ == other.expression_;
  }

 private:
  std::string name_;
  std::string expression_;
  std::shared_ptr<const detail::ExprNode> root_;
  std::set<std::string, std::less<>> referenced_;
};

}  // namespace devmodel

#include "devmodel/predicate.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <variant>

#include "devmodel/error.hpp"

namespace devmodel {

std::optional<double> ParameterDecl::level_rank(std::string_view level) const {
  auto it = std::find(levels.begin(), levels.end(), level);
  if (it == levels.end()) return std::nullopt;
  return static_cast<double>(it - levels.begin());
}

ParameterSet::ParameterSet(std::vector<ParameterDecl> decls) {
  for (auto& d : decls) add(std::move(d));
}

const ParameterDecl* ParameterSet::find(std::string_view name) const {
  for (const auto& d : decls_) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

void ParameterSet::add(ParameterDecl decl) {
  if (decl.name.empty()) throw ModelError(ErrorCode::InvalidArgument, "parameter name is empty");
  if (find(decl.name) != nullptr) {
    throw ModelError(ErrorCode::InvalidArgument, "duplicate parameter '" + decl.name + "'");
  }
  if (decl.kind == ParameterKind::Ordinal && decl.levels.empty()) {
    throw ModelError(ErrorCode::InvalidArgument,
                     "ordinal parameter '" + decl.name + "' declares no levels");
  }
  decls_.push_back(std::move(decl));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

Assignment ParameterSet::parse_assignment(std::string_view text) const {
  Assignment out;
  while (!text.empty()) {
    auto comma = text.find(',');
    std::string_view item = trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ModelError(ErrorCode::InvalidArgument,
                       "expected name=value, got '" + std::string(item) + "'");
    }
    std::string name(trim(item.substr(0, eq)));
    std::string_view raw = trim(item.substr(eq + 1));
    const ParameterDecl* decl = find(name);
    if (decl == nullptr) {
      throw ModelError(ErrorCode::UnknownIdentifier, "undeclared parameter '" + name + "'");
    }
    if (decl->kind == ParameterKind::Ordinal) {
      if (auto rank = decl->level_rank(raw)) {
        out[name] = *rank;
        continue;
      }
      throw ModelError(ErrorCode::UnknownIdentifier,
                       "'" + std::string(raw) + "' is not a level of '" + name + "'");
    }
    auto v = parse_number(raw);
    if (!v) {
      throw ModelError(ErrorCode::InvalidArgument,
                       "value for '" + name + "' is not a number: '" + std::string(raw) + "'");
    }
    out[name] = *v;
  }
  return out;
}

namespace detail {

enum class CmpOp { Lt, Le, Eq, Ne, Ge, Gt };

struct Operand {
  std::variant<double, std::string> value;  // constant or parameter name
};

struct ExprNode {
  enum class Kind { Const, Compare, Not, And, Or } kind = Kind::Const;
  bool constant = false;
  CmpOp op = CmpOp::Eq;
  Operand lhs;
  Operand rhs;
  std::shared_ptr<const ExprNode> a;
  std::shared_ptr<const ExprNode> b;
};

}  // namespace detail

namespace {

using detail::CmpOp;
using detail::ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

enum class Tok { Number, Ident, Quoted, Op, LParen, RParen, And, Or, Not, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  CmpOp op = CmpOp::Eq;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      Token t;
      t.pos = i_;
      if (i_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      char c = src_[i_];
      if (c == '(') {
        t.kind = Tok::LParen;
        ++i_;
      } else if (c == ')') {
        t.kind = Tok::RParen;
        ++i_;
      } else if (starts("&&")) {
        t.kind = Tok::And;
        i_ += 2;
      } else if (starts("||")) {
        t.kind = Tok::Or;
        i_ += 2;
      } else if (starts("<=") || starts("\xE2\x89\xA4")) {  // ≤
        op(t, CmpOp::Le, src_[i_] == '<' ? 2 : 3);
      } else if (starts(">=") || starts("\xE2\x89\xA5")) {  // ≥
        op(t, CmpOp::Ge, src_[i_] == '>' ? 2 : 3);
      } else if (starts("!=") || starts("\xE2\x89\xA0")) {  // ≠
        op(t, CmpOp::Ne, src_[i_] == '!' ? 2 : 3);
      } else if (starts("==")) {
        op(t, CmpOp::Eq, 2);
      } else if (c == '=') {
        op(t, CmpOp::Eq, 1);
      } else if (c == '<') {
        op(t, CmpOp::Lt, 1);
      } else if (c == '>') {
        op(t, CmpOp::Gt, 1);
      } else if (c == '!') {
        t.kind = Tok::Not;
        ++i_;
      } else if (c == '\'' || c == '"') {
        auto close = src_.find(c, i_ + 1);
        if (close == std::string_view::npos) fail("unterminated quoted level", i_);
        t.kind = Tok::Quoted;
        t.text = std::string(src_.substr(i_ + 1, close - i_ - 1));
        i_ = close + 1;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                 (c == '-' && i_ + 1 < src_.size() &&
                  (std::isdigit(static_cast<unsigned char>(src_[i_ + 1])) ||
                   src_[i_ + 1] == '.'))) {
        std::size_t j = i_ + 1;
        while (j < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '.' ||
                ((src_[j] == '-' || src_[j] == '+') && (src_[j - 1] == 'e' || src_[j - 1] == 'E')))) {
          ++j;
        }
        t.kind = Tok::Number;
        t.text = std::string(src_.substr(i_, j - i_));
        if (!parse_number(t.text)) fail("malformed number '" + t.text + "'", i_);
        i_ = j;
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i_ + 1;
        while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) ||
                                   src_[j] == '_' || src_[j] == '.')) {
          ++j;
        }
        t.text = std::string(src_.substr(i_, j - i_));
        if (t.text == "and") {
          t.kind = Tok::And;
        } else if (t.text == "or") {
          t.kind = Tok::Or;
        } else if (t.text == "not") {
          t.kind = Tok::Not;
        } else {
          t.kind = Tok::Ident;
        }
        i_ = j;
      } else {
        fail(std::string("unexpected character '") + c + "'", i_);
      }
      out.push_back(std::move(t));
    }
  }

  [[noreturn]] static void fail(const std::string& msg, std::size_t pos) {
    throw ModelError(ErrorCode::ParseError, msg + " at position " + std::to_string(pos + 1));
  }

 private:
  void skip_ws() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
  }
  bool starts(std::string_view s) const { return src_.substr(i_, s.size()) == s; }
  void op(Token& t, CmpOp o, std::size_t len) {
    t.kind = Tok::Op;
    t.op = o;
    i_ += len;
  }

  std::string_view src_;
  std::size_t i_ = 0;
};

/// Raw operand before identifier resolution.
struct RawOperand {
  Tok kind = Tok::Number;
  std::string text;
  std::size_t pos = 0;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, const ParameterSet& params, std::set<std::string, std::less<>>& refs)
      : toks_(std::move(toks)), params_(params), refs_(refs) {}

  NodePtr parse() {
    auto n = parse_or();
    if (peek().kind != Tok::End) Lexer::fail("unexpected trailing input", peek().pos);
    return n;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  const Token& next() { return toks_[i_++]; }

  NodePtr binary(ExprNode::Kind kind, NodePtr a, NodePtr b) {
    auto n = std::make_shared<ExprNode>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  NodePtr parse_or() {
    auto lhs = parse_and();
    while (peek().kind == Tok::Or) {
      next();
      lhs = binary(ExprNode::Kind::Or, lhs, parse_and());
    }
    return lhs;
  }

  NodePtr parse_and() {
    auto lhs = parse_unary();
    while (peek().kind == Tok::And) {
      next();
      lhs = binary(ExprNode::Kind::And, lhs, parse_unary());
    }
    return lhs;
  }

  NodePtr parse_unary() {
    const Token& t = peek();
    if (t.kind == Tok::Not) {
      next();
      return binary(ExprNode::Kind::Not, parse_unary(), nullptr);
    }
    if (t.kind == Tok::LParen) {
      next();
      auto inner = parse_or();
      if (peek().kind != Tok::RParen) Lexer::fail("expected ')'", peek().pos);
      next();
      return inner;
    }
    if (t.kind == Tok::Ident && (t.text == "true" || t.text == "false")) {
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Const;
      n->constant = t.text == "true";
      next();
      return n;
    }
    return parse_compare();
  }

  RawOperand raw_operand() {
    const Token& t = peek();
    if (t.kind != Tok::Number && t.kind != Tok::Ident && t.kind != Tok::Quoted) {
      Lexer::fail("expected operand", t.pos);
    }
    next();
    return {t.kind, t.text, t.pos};
  }

  NodePtr parse_compare() {
    RawOperand l = raw_operand();
    if (peek().kind != Tok::Op) Lexer::fail("expected comparison operator", peek().pos);
    CmpOp op = next().op;
    RawOperand r = raw_operand();

    const ParameterDecl* lp = as_param(l);
    const ParameterDecl* rp = as_param(r);
    if (lp == nullptr && rp == nullptr) {
      if (l.kind == Tok::Ident || l.kind == Tok::Quoted) unknown(l);
      if (r.kind == Tok::Ident || r.kind == Tok::Quoted) unknown(r);
      Lexer::fail("comparison between two constants", l.pos);
    }
    if (lp != nullptr && rp != nullptr && lp->kind != rp->kind) {
      throw ModelError(ErrorCode::InvalidArgument,
                       "cannot compare numeric and ordinal parameters '" + lp->name + "' and '" +
                           rp->name + "'");
    }
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Compare;
    n->op = op;
    n->lhs = resolve(l, lp, rp);
    n->rhs = resolve(r, rp, lp);
    return n;
  }

  const ParameterDecl* as_param(const RawOperand& o) const {
    if (o.kind != Tok::Ident) return nullptr;
    return params_.find(o.text);
  }

  [[noreturn]] void unknown(const RawOperand& o) const {
    throw ModelError(ErrorCode::UnknownIdentifier,
                     "'" + o.text + "' is neither a declared parameter nor an ordinal level (position " +
                         std::to_string(o.pos + 1) + ")");
  }

  detail::Operand resolve(const RawOperand& o, const ParameterDecl* self,
                          const ParameterDecl* other) {
    if (self != nullptr) {
      refs_.insert(self->name);
      return {self->name};
    }
    if (o.kind == Tok::Number) return {*parse_number(o.text)};
    // Ordinal level of the opposite parameter.
    if (other != nullptr && other->kind == ParameterKind::Ordinal) {
      if (auto rank = other->level_rank(o.text)) return {*rank};
    }
    unknown(o);
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  const ParameterSet& params_;
  std::set<std::string, std::less<>>& refs_;
};

double operand_value(const detail::Operand& o, const Assignment& a) {
  if (const double* c = std::get_if<double>(&o.value)) return *c;
  const auto& name = std::get<std::string>(o.value);
  auto it = a.find(name);
  if (it == a.end()) {
    throw ModelError(ErrorCode::MissingParameter, "assignment lacks parameter '" + name + "'", name);
  }
  return it->second;
}

bool eval(const ExprNode& n, const Assignment& a) {
  switch (n.kind) {
    case ExprNode::Kind::Const:
      return n.constant;
    case ExprNode::Kind::Not:
      return !eval(*n.a, a);
    case ExprNode::Kind::And:
      return eval(*n.a, a) && eval(*n.b, a);
    case ExprNode::Kind::Or:
      return eval(*n.a, a) || eval(*n.b, a);
    case ExprNode::Kind::Compare: {
      double l = operand_value(n.lhs, a);
      double r = operand_value(n.rhs, a);
      switch (n.op) {
        case CmpOp::Lt: return l < r;
        case CmpOp::Le: return l <= r;
        case CmpOp::Eq: return l == r;
        case CmpOp::Ne: return l != r;
        case CmpOp::Ge: return l >= r;
        case CmpOp::Gt: return l > r;
      }
    }
  }
  return false;
}

}  // namespace

Predicate::Predicate(std::string name, std::string expression, const ParameterSet& params)
    : name_(std::move(name)), expression_(std::move(expression)) {
  Parser parser(Lexer(expression_).run(), params, referenced_);
  root_ = parser.parse();
}

bool Predicate::evaluate(const Assignment& assignment) const {
  if (!root_) return false;
  for (const auto& p : referenced_) {
    if (assignment.find(p) == assignment.end()) {
      throw ModelError(ErrorCode::MissingParameter,
                       "predicate '" + name_ + "' needs parameter '" + p + "'", p);
    }
  }
  return eval(*root_, assignment);
}

}  // namespace devmodel

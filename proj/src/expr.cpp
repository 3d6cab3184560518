#include "tsctl/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace tsctl {

class ExprParser {
 public:
  ExprParser(const std::string& text, const std::vector<std::string>& symbols)
      : text_(text), symbols_(symbols) {}

  Expr run() {
    Expr e;
    e.source_ = text_;
    out_ = &e;
    at_ = 0;
    e.root_ = parse_expression();
    skip_ws();
    if (at_ != text_.size()) fail("unexpected trailing input");
    if (e.root_ < 0) fail("empty expression");
    return e;
  }

 private:
  using Op = Expr::Op;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression error at offset " + std::to_string(at_) + " in \"" + text_ +
                         "\": " + what,
                     at_);
  }

  void skip_ws() {
    while (at_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[at_]))) ++at_;
  }

  char peek() {
    skip_ws();
    return at_ < text_.size() ? text_[at_] : '\0';
  }

  bool consume(char c) {
    if (peek() == c) {
      ++at_;
      return true;
    }
    return false;
  }

  int add_node(Expr::Node n) {
    out_->nodes_.push_back(n);
    return static_cast<int>(out_->nodes_.size()) - 1;
  }

  int parse_expression() {
    int lhs = parse_term();
    while (true) {
      char c = peek();
      if (c == '+' || c == '-') {
        ++at_;
        int rhs = parse_term();
        lhs = add_node({c == '+' ? Op::kAdd : Op::kSub, 0.0, -1, lhs, rhs});
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    while (true) {
      char c = peek();
      if (c == '*' || c == '/') {
        ++at_;
        int rhs = parse_unary();
        lhs = add_node({c == '*' ? Op::kMul : Op::kDiv, 0.0, -1, lhs, rhs});
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    if (consume('-')) return add_node({Op::kNeg, 0.0, -1, parse_unary(), -1});
    return parse_primary();
  }

  int parse_primary() {
    char c = peek();
    if (c == '(') {
      ++at_;
      int inner = parse_expression();
      if (!consume(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(c == '\0' ? "unexpected end of input" : std::string("unexpected character '") + c + "'");
  }

  int parse_number() {
    const char* begin = text_.c_str() + at_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    at_ += static_cast<std::size_t>(end - begin);
    return add_node({Op::kConstant, v, -1, -1, -1});
  }

  int parse_identifier() {
    std::size_t start = at_;
    while (at_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[at_])) || text_[at_] == '_'))
      ++at_;
    std::string name = text_.substr(start, at_ - start);

    if (peek() == '(') {
      Op op;
      int arity;
      if (name == "sin") { op = Op::kSin; arity = 1; }
      else if (name == "cos") { op = Op::kCos; arity = 1; }
      else if (name == "exp") { op = Op::kExp; arity = 1; }
      else if (name == "abs") { op = Op::kAbs; arity = 1; }
      else if (name == "min") { op = Op::kMin; arity = 2; }
      else if (name == "max") { op = Op::kMax; arity = 2; }
      else {
        at_ = start;
        fail("unknown function '" + name + "'");
      }
      ++at_;  // '('
      int a = parse_expression();
      int b = -1;
      if (arity == 2) {
        if (!consume(',')) fail("expected ',' in two-argument function");
        b = parse_expression();
      }
      if (!consume(')')) fail("expected ')'");
      return add_node({op, 0.0, -1, a, b});
    }

    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (symbols_[i] == name)
        return add_node({Op::kSymbol, 0.0, static_cast<int>(i), -1, -1});
    }
    at_ = start;
    fail("unknown symbol '" + name + "'");
  }

  const std::string& text_;
  const std::vector<std::string>& symbols_;
  std::size_t at_ = 0;
  Expr* out_ = nullptr;
};

Expr Expr::parse(const std::string& text, const std::vector<std::string>& symbols) {
  return ExprParser(text, symbols).run();
}

Expr Expr::constant(double value) {
  Expr e;
  Node node;
  node.op = Op::kConstant;
  node.value = value;
  e.nodes_.push_back(node);
  e.root_ = 0;
  e.source_ = "<constant>";
  return e;
}

double Expr::eval(std::span<const double> values) const {
  if (root_ < 0) throw SolverError("eval of empty expression");
  return eval_node(root_, values);
}

double Expr::eval_node(int idx, std::span<const double> values) const {
  const Node& n = nodes_[static_cast<std::size_t>(idx)];
  switch (n.op) {
    case Op::kConstant:
      return n.value;
    case Op::kSymbol:
      return values[static_cast<std::size_t>(n.symbol)];
    case Op::kAdd:
      return eval_node(n.lhs, values) + eval_node(n.rhs, values);
    case Op::kSub:
      return eval_node(n.lhs, values) - eval_node(n.rhs, values);
    case Op::kMul:
      return eval_node(n.lhs, values) * eval_node(n.rhs, values);
    case Op::kDiv: {
      double denom = eval_node(n.rhs, values);
      double num = eval_node(n.lhs, values);
      double q = num / denom;
      if (!std::isfinite(q))
        throw SolverError("expression \"" + source_ + "\": division produced a non-finite value");
      return q;
    }
    case Op::kNeg:
      return -eval_node(n.lhs, values);
    case Op::kSin:
      return std::sin(eval_node(n.lhs, values));
    case Op::kCos:
      return std::cos(eval_node(n.lhs, values));
    case Op::kExp: {
      double v = std::exp(eval_node(n.lhs, values));
      if (!std::isfinite(v))
        throw SolverError("expression \"" + source_ + "\": exp overflow");
      return v;
    }
    case Op::kAbs:
      return std::abs(eval_node(n.lhs, values));
    case Op::kMin:
      return std::min(eval_node(n.lhs, values), eval_node(n.rhs, values));
    case Op::kMax:
      return std::max(eval_node(n.lhs, values), eval_node(n.rhs, values));
  }
  throw SolverError("corrupt expression node");
}

}  // namespace tsctl

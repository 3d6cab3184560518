#pragma once

#include "tsctl/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace tsctl {

/* Arithmetic expression over named scalar symbols.
 *
 *   expression ::= term { ("+" | "-") term }
 *   term       ::= unary { ("*" | "/") unary }
 *   unary      ::= "-" unary | primary
 *   primary    ::= number | symbol | function "(" expression {"," expression} ")"
 *                | "(" expression ")"
 *   function   ::= "sin" | "cos" | "exp" | "abs" | "min" | "max"
 *
 * Numbers are decimal literals (strtod syntax). Symbols must come from the
 * table supplied at parse time; anything else is a position-annotated error.
 */
class Expr {
 public:
  Expr() = default;

  static Expr parse(const std::string& text, const std::vector<std::string>& symbols);

  // Expression that evaluates to a fixed value regardless of the symbols.
  static Expr constant(double value);

  // Evaluates with values[i] bound to symbols[i]. Throws SolverError on
  // division by (near) zero or a non-finite intermediate.
  double eval(std::span<const double> values) const;

  bool empty() const { return nodes_.empty(); }
  const std::string& source() const { return source_; }

 private:
  enum class Op : std::uint8_t {
    kConstant,
    kSymbol,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kSin,
    kCos,
    kExp,
    kAbs,
    kMin,
    kMax,
  };
  struct Node {
    Op op;
    double value = 0.0;  // kConstant
    int symbol = -1;     // kSymbol
    int lhs = -1;
    int rhs = -1;
  };

  double eval_node(int idx, std::span<const double> values) const;

  std::vector<Node> nodes_;
  int root_ = -1;
  std::string source_;

  friend class ExprParser;
};

}  // namespace tsctl

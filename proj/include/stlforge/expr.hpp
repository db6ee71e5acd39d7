#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stlforge/error.hpp"
#include "stlforge/tape.hpp"

namespace stlforge::lang {

enum class UnaryOp { neg, exp, ln, sqrt, sin, cos, tan, tanh, sigmoid };
enum class BinaryOp { add, sub, mul, div, pow };

// Name of the reserved time variable available in every expression.
inline constexpr std::string_view kTimeSymbol = "t";

class Expr;

struct ExprNode;

// Immutable arithmetic expression over named variables. Variables are
// resolved to indices into the variable list given at parse time; the time
// symbol resolves to kTimeIndex.
class Expr {
 public:
  static constexpr int kTimeIndex = -1;

  Expr() = default;

  static Expr constant(double value);
  static Expr variable(std::string name, int index);
  static Expr unary(UnaryOp op, Expr child);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

  const ExprNode& node() const { return *node_; }
  bool empty() const noexcept { return node_ == nullptr; }

  bool is_constant_valued() const;  // no variable leaves
  std::vector<std::string> variables() const;  // distinct, in first-use order

  std::string to_string() const;

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

struct ConstantNode {
  double value;
};

struct VariableNode {
  std::string name;
  int index;
};

struct UnaryNode {
  UnaryOp op;
  Expr child;
};

struct BinaryNode {
  BinaryOp op;
  Expr lhs;
  Expr rhs;  // constant-valued when op == pow
};

struct ExprNode {
  std::variant<ConstantNode, VariableNode, UnaryNode, BinaryNode> v;
};

// Named subexpressions that may be referenced by name from other expressions
// (e.g. barrier functions referenced from a formula).
using Definitions = std::map<std::string, Expr, std::less<>>;

// Grammar: standard precedence ^ > unary minus > * / > + -, left associative
// except ^ (right associative, constant exponent). Function calls:
// exp ln log sqrt sin cos tan tanh sigmoid.
Expr parse_expr(std::string_view text, std::span<const std::string> vars,
                const Definitions& defs = {});

// Evaluation with variables bound by index.
template <class T>
T evaluate(const Expr& e, std::span<const T> vars, const T& time);

extern template double evaluate<double>(const Expr&, std::span<const double>, const double&);
extern template ad::Scalar evaluate<ad::Scalar>(const Expr&, std::span<const ad::Scalar>,
                                                const ad::Scalar&);

// Evaluation with variables bound by name; the time symbol defaults to 0
// unless present in env.
double eval_expr(const Expr& e, const std::map<std::string, double, std::less<>>& env);

}  // namespace stlforge::lang

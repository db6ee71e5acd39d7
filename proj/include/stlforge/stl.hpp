#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stlforge/expr.hpp"

namespace stlforge::stl {

struct Interval {
  int lo;
  int hi;

  int length() const noexcept { return hi - lo + 1; }
};

class Formula;
struct FormulaNode;

// Atomic predicate, normalized to h(x, t) >= 0 (or > 0 when strict).
struct Predicate {
  lang::Expr h;
  bool strict = false;
};

struct And {
  std::shared_ptr<const FormulaNode> lhs, rhs;
};

struct Or {
  std::shared_ptr<const FormulaNode> lhs, rhs;
  int node_id = -1;
};

struct Always {
  Interval window;
  std::shared_ptr<const FormulaNode> child;
};

struct Eventually {
  Interval window;
  std::shared_ptr<const FormulaNode> child;
  int node_id = -1;
};

struct Until {
  Interval window;
  std::shared_ptr<const FormulaNode> lhs, rhs;
  int node_id = -1;
};

struct FormulaNode {
  std::variant<Predicate, And, Or, Always, Eventually, Until> v;
};

enum class DisjunctionKind { or_, eventually, until };

// One trainable weight vector of the smooth semantics: every Or, Eventually
// and Until node owns one, numbered in pre-order.
struct DisjunctionSlot {
  int node_id;
  DisjunctionKind kind;
  int weight_count;  // 2 for Or, window length for Eventually/Until
  std::string subformula;
};

// Immutable, validated STL formula.
class Formula {
 public:
  Formula() = default;
  explicit Formula(std::shared_ptr<const FormulaNode> root);

  const FormulaNode& root() const { return *root_; }
  std::shared_ptr<const FormulaNode> root_ptr() const { return root_; }
  bool empty() const noexcept { return root_ == nullptr; }

  const std::vector<DisjunctionSlot>& disjunctions() const noexcept { return slots_; }
  // Number of time steps past the evaluation time the formula looks at.
  int reach() const noexcept { return reach_; }

  std::string to_string() const;

 private:
  std::shared_ptr<const FormulaNode> root_;
  std::vector<DisjunctionSlot> slots_;
  int reach_ = 0;
};

std::string to_string(const FormulaNode& node);
int reach(const FormulaNode& node);

// Grammar:
//   phi  := disj
//   disj := conj ("||" conj)*
//   conj := until ("&&" until)*
//   until := unary ("U[" int "," int "]" unary)*
//   unary := ("G" | "F") "[" int "," int "]" unary | "(" phi ")" | pred
//   pred := expr cmp expr, cmp in {>=, >, <=, <}
// Intervals must satisfy 0 <= a <= b <= horizon.
Formula parse_stl(std::string_view text, std::span<const std::string> vars, int horizon,
                  const lang::Definitions& defs = {});

}  // namespace stlforge::stl

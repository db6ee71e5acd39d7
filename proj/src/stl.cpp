#include "stlforge/stl.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "parser_detail.hpp"

namespace stlforge::stl {

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

using NodePtr = std::shared_ptr<const FormulaNode>;

NodePtr make(FormulaNode node) { return std::make_shared<const FormulaNode>(std::move(node)); }

std::string window_text(const Interval& w) {
  return "[" + std::to_string(w.lo) + "," + std::to_string(w.hi) + "]";
}

// Rebuilds the tree assigning pre-order ids to disjunctive nodes.
NodePtr renumber(const NodePtr& node, int& next_id, std::vector<DisjunctionSlot>& slots) {
  return std::visit(
      overloaded{
          [&](const Predicate&) { return node; },
          [&](const And& n) {
            auto lhs = renumber(n.lhs, next_id, slots);
            auto rhs = renumber(n.rhs, next_id, slots);
            return make({And{lhs, rhs}});
          },
          [&](const Or& n) {
            const int id = next_id++;
            const auto slot = slots.size();
            slots.push_back({id, DisjunctionKind::or_, 2, to_string(*node)});
            auto lhs = renumber(n.lhs, next_id, slots);
            auto rhs = renumber(n.rhs, next_id, slots);
            NodePtr out = make({Or{lhs, rhs, id}});
            slots[slot].subformula = to_string(*out);
            return out;
          },
          [&](const Always& n) {
            return make({Always{n.window, renumber(n.child, next_id, slots)}});
          },
          [&](const Eventually& n) {
            const int id = next_id++;
            const auto slot = slots.size();
            slots.push_back({id, DisjunctionKind::eventually, n.window.length(), {}});
            NodePtr out = make({Eventually{n.window, renumber(n.child, next_id, slots), id}});
            slots[slot].subformula = to_string(*out);
            return out;
          },
          [&](const Until& n) {
            const int id = next_id++;
            const auto slot = slots.size();
            slots.push_back({id, DisjunctionKind::until, n.window.length(), {}});
            auto lhs = renumber(n.lhs, next_id, slots);
            auto rhs = renumber(n.rhs, next_id, slots);
            NodePtr out = make({Until{n.window, lhs, rhs, id}});
            slots[slot].subformula = to_string(*out);
            return out;
          },
      },
      node->v);
}

}  // namespace

Formula::Formula(std::shared_ptr<const FormulaNode> root) {
  if (!root) throw ValidationError("empty formula");
  int next_id = 0;
  root_ = renumber(root, next_id, slots_);
  reach_ = stl::reach(*root_);
}

std::string Formula::to_string() const { return root_ ? stl::to_string(*root_) : std::string(); }

std::string to_string(const FormulaNode& node) {
  return std::visit(
      overloaded{
          [](const Predicate& p) { return p.h.to_string() + (p.strict ? " > 0" : " >= 0"); },
          [](const And& n) { return "(" + to_string(*n.lhs) + " && " + to_string(*n.rhs) + ")"; },
          [](const Or& n) { return "(" + to_string(*n.lhs) + " || " + to_string(*n.rhs) + ")"; },
          [](const Always& n) { return "G" + window_text(n.window) + "(" + to_string(*n.child) + ")"; },
          [](const Eventually& n) {
            return "F" + window_text(n.window) + "(" + to_string(*n.child) + ")";
          },
          [](const Until& n) {
            return "(" + to_string(*n.lhs) + " U" + window_text(n.window) + " " + to_string(*n.rhs) +
                   ")";
          },
      },
      node.v);
}

int reach(const FormulaNode& node) {
  return std::visit(overloaded{
                        [](const Predicate&) { return 0; },
                        [](const And& n) { return std::max(reach(*n.lhs), reach(*n.rhs)); },
                        [](const Or& n) { return std::max(reach(*n.lhs), reach(*n.rhs)); },
                        [](const Always& n) { return n.window.hi + reach(*n.child); },
                        [](const Eventually& n) { return n.window.hi + reach(*n.child); },
                        [](const Until& n) {
                          return n.window.hi + std::max(reach(*n.lhs), reach(*n.rhs));
                        },
                    },
                    node.v);
}

namespace {

class StlParser {
 public:
  StlParser(const std::vector<lang::detail::Token>& tokens, std::span<const std::string> vars,
            int horizon, const lang::Definitions& defs)
      : p_(tokens, vars, defs), horizon_(horizon) {}

  NodePtr parse() {
    NodePtr root = parse_disjunction();
    if (!p_.at_end()) p_.fail("unexpected '" + p_.peek().text + "'");
    return root;
  }

 private:
  NodePtr parse_disjunction() {
    NodePtr lhs = parse_conjunction();
    while (p_.accept("||")) lhs = make({Or{lhs, parse_conjunction(), -1}});
    return lhs;
  }

  NodePtr parse_conjunction() {
    NodePtr lhs = parse_until();
    while (p_.accept("&&")) lhs = make({And{lhs, parse_until()}});
    return lhs;
  }

  bool at_temporal(std::string_view keyword) const {
    const auto& tok = p_.peek();
    const auto& after = p_.peek(1);
    return tok.kind == lang::detail::TokenKind::identifier && tok.text == keyword &&
           after.kind == lang::detail::TokenKind::symbol && after.text == "[";
  }

  NodePtr parse_until() {
    NodePtr lhs = parse_unary();
    while (at_temporal("U")) {
      p_.next();
      const Interval w = parse_interval();
      lhs = make({Until{w, lhs, parse_unary(), -1}});
    }
    return lhs;
  }

  Interval parse_interval() {
    p_.expect("[");
    const std::size_t pos = p_.peek().position;
    const int lo = parse_int();
    p_.expect(",");
    const int hi = parse_int();
    p_.expect("]");
    if (lo > hi) {
      throw ParseError("interval [" + std::to_string(lo) + "," + std::to_string(hi) +
                           "] has lower bound above upper bound",
                       pos);
    }
    if (hi > horizon_) {
      throw ParseError("interval [" + std::to_string(lo) + "," + std::to_string(hi) +
                           "] exceeds horizon " + std::to_string(horizon_),
                       pos);
    }
    return {lo, hi};
  }

  int parse_int() {
    const auto& tok = p_.peek();
    if (tok.kind != lang::detail::TokenKind::number || tok.number != std::floor(tok.number) ||
        tok.number < 0 || tok.number > 1e9) {
      p_.fail("expected a non-negative integer time bound");
    }
    p_.next();
    return static_cast<int>(tok.number);
  }

  NodePtr parse_unary() {
    if (at_temporal("G")) {
      p_.next();
      const Interval w = parse_interval();
      return make({Always{w, parse_unary()}});
    }
    if (at_temporal("F")) {
      p_.next();
      const Interval w = parse_interval();
      return make({Eventually{w, parse_unary(), -1}});
    }
    if (p_.peek().kind == lang::detail::TokenKind::symbol && p_.peek().text == "(") {
      // "(" opens either an arithmetic group inside a predicate or a nested
      // formula. Try the predicate first and keep whichever error got furthest.
      const std::size_t start = p_.cursor();
      std::optional<ParseError> pred_error;
      try {
        return parse_predicate();
      } catch (const ParseError& e) {
        pred_error = e;
      }
      p_.rewind(start);
      try {
        p_.expect("(");
        NodePtr inner = parse_disjunction();
        p_.expect(")");
        return inner;
      } catch (const ParseError& e) {
        if (pred_error->position() > e.position()) throw *pred_error;
        throw;
      }
    }
    return parse_predicate();
  }

  NodePtr parse_predicate() {
    lang::Expr lhs = p_.parse_expression();
    const auto& tok = p_.peek();
    bool flip = false;
    bool strict = false;
    if (p_.accept(">=")) {
    } else if (p_.accept(">")) {
      strict = true;
    } else if (p_.accept("<=")) {
      flip = true;
    } else if (p_.accept("<")) {
      flip = true;
      strict = true;
    } else {
      p_.fail(tok.kind == lang::detail::TokenKind::end
                  ? std::string("expected comparison but found end of input")
                  : "expected comparison but found '" + tok.text + "'");
    }
    lang::Expr rhs = p_.parse_expression();
    const bool rhs_zero = std::holds_alternative<lang::ConstantNode>(rhs.node().v) &&
                          std::get<lang::ConstantNode>(rhs.node().v).value == 0.0;
    lang::Expr h;
    if (rhs_zero) {
      h = flip ? lang::Expr::unary(lang::UnaryOp::neg, lhs) : lhs;
    } else {
      h = flip ? lang::Expr::binary(lang::BinaryOp::sub, rhs, lhs)
               : lang::Expr::binary(lang::BinaryOp::sub, lhs, rhs);
    }
    return make({Predicate{h, strict}});
  }

  lang::detail::ExprParser p_;
  int horizon_;
};

}  // namespace

Formula parse_stl(std::string_view text, std::span<const std::string> vars, int horizon,
                  const lang::Definitions& defs) {
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  const auto tokens = lang::detail::tokenize(text);
  if (tokens.size() == 1) throw ParseError("empty formula", 0);
  StlParser parser(tokens, vars, horizon, defs);
  return Formula(parser.parse());
}

}  // namespace stlforge::stl

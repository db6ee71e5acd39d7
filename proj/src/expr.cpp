#include "stlforge/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "parser_detail.hpp"

namespace stlforge::lang {

Expr Expr::constant(double value) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{ConstantNode{value}}));
}

Expr Expr::variable(std::string name, int index) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{VariableNode{std::move(name), index}}));
}

Expr Expr::unary(UnaryOp op, Expr child) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{UnaryNode{op, std::move(child)}}));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  return Expr(std::make_shared<const ExprNode>(
      ExprNode{BinaryNode{op, std::move(lhs), std::move(rhs)}}));
}

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

void collect_variables(const Expr& e, std::vector<std::string>& out) {
  std::visit(overloaded{
                 [](const ConstantNode&) {},
                 [&](const VariableNode& v) {
                   if (std::find(out.begin(), out.end(), v.name) == out.end()) {
                     out.push_back(v.name);
                   }
                 },
                 [&](const UnaryNode& u) { collect_variables(u.child, out); },
                 [&](const BinaryNode& b) {
                   collect_variables(b.lhs, out);
                   collect_variables(b.rhs, out);
                 },
             },
             e.node().v);
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (v < 0) return "(" + s + ")";
  return s;
}

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::neg: return "-";
    case UnaryOp::exp: return "exp";
    case UnaryOp::ln: return "ln";
    case UnaryOp::sqrt: return "sqrt";
    case UnaryOp::sin: return "sin";
    case UnaryOp::cos: return "cos";
    case UnaryOp::tan: return "tan";
    case UnaryOp::tanh: return "tanh";
    case UnaryOp::sigmoid: return "sigmoid";
  }
  return "?";
}

const char* binary_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return " + ";
    case BinaryOp::sub: return " - ";
    case BinaryOp::mul: return " * ";
    case BinaryOp::div: return " / ";
    case BinaryOp::pow: return " ^ ";
  }
  return "?";
}

void print(const Expr& e, std::string& out) {
  std::visit(overloaded{
                 [&](const ConstantNode& c) { out += format_number(c.value); },
                 [&](const VariableNode& v) { out += v.name; },
                 [&](const UnaryNode& u) {
                   if (u.op == UnaryOp::neg) {
                     out += "(-";
                     print(u.child, out);
                     out += ")";
                   } else {
                     out += unary_name(u.op);
                     out += "(";
                     print(u.child, out);
                     out += ")";
                   }
                 },
                 [&](const BinaryNode& b) {
                   out += "(";
                   print(b.lhs, out);
                   out += binary_symbol(b.op);
                   print(b.rhs, out);
                   out += ")";
                 },
             },
             e.node().v);
}

}  // namespace

bool Expr::is_constant_valued() const { return variables().empty(); }

std::vector<std::string> Expr::variables() const {
  std::vector<std::string> out;
  collect_variables(*this, out);
  return out;
}

std::string Expr::to_string() const {
  std::string out;
  print(*this, out);
  return out;
}

namespace detail {

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  auto is_ident_start = [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  };
  auto is_ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  };
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
      if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
        if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
          i = j;
          while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        }
      }
      Token tok{TokenKind::number, std::string(text.substr(start, i - start)), 0.0, start};
      const auto [ptr, ec] =
          std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), tok.number);
      if (ec != std::errc() || ptr != tok.text.data() + tok.text.size()) {
        throw ParseError("malformed number '" + tok.text + "'", start);
      }
      tokens.push_back(std::move(tok));
      continue;
    }
    if (is_ident_start(c)) {
      while (i < text.size() && is_ident_char(text[i])) ++i;
      tokens.push_back({TokenKind::identifier, std::string(text.substr(start, i - start)), 0.0, start});
      continue;
    }
    static constexpr std::string_view two_char[] = {"&&", "||", ">=", "<="};
    bool matched = false;
    for (auto sym : two_char) {
      if (text.substr(i, 2) == sym) {
        tokens.push_back({TokenKind::symbol, std::string(sym), 0.0, start});
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    static constexpr std::string_view one_char = "+-*/^()[],<>";
    if (one_char.find(c) != std::string_view::npos) {
      tokens.push_back({TokenKind::symbol, std::string(1, c), 0.0, start});
      ++i;
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", start);
  }
  tokens.push_back({TokenKind::end, "", 0.0, text.size()});
  return tokens;
}

const Token& ExprParser::peek(std::size_t ahead) const {
  const std::size_t k = std::min(cursor_ + ahead, tokens_.size() - 1);
  return tokens_[k];
}

const Token& ExprParser::next() {
  const Token& tok = peek();
  if (tok.kind != TokenKind::end) ++cursor_;
  return tok;
}

bool ExprParser::accept(std::string_view symbol) {
  if (peek().kind == TokenKind::symbol && peek().text == symbol) {
    ++cursor_;
    return true;
  }
  return false;
}

void ExprParser::expect(std::string_view symbol) {
  if (!accept(symbol)) {
    const Token& tok = peek();
    fail("expected '" + std::string(symbol) + "' but found " +
         (tok.kind == TokenKind::end ? std::string("end of input") : "'" + tok.text + "'"));
  }
}

void ExprParser::fail(const std::string& message) const {
  throw ParseError(message, peek().position);
}

Expr ExprParser::parse_expression() {
  Expr lhs = parse_term();
  for (;;) {
    if (accept("+")) {
      lhs = Expr::binary(BinaryOp::add, lhs, parse_term());
    } else if (accept("-")) {
      lhs = Expr::binary(BinaryOp::sub, lhs, parse_term());
    } else {
      return lhs;
    }
  }
}

Expr ExprParser::parse_term() {
  Expr lhs = parse_unary();
  for (;;) {
    if (accept("*")) {
      lhs = Expr::binary(BinaryOp::mul, lhs, parse_unary());
    } else if (accept("/")) {
      lhs = Expr::binary(BinaryOp::div, lhs, parse_unary());
    } else {
      return lhs;
    }
  }
}

Expr ExprParser::parse_unary() {
  if (accept("-")) return Expr::unary(UnaryOp::neg, parse_unary());
  if (accept("+")) return parse_unary();
  return parse_power();
}

Expr ExprParser::parse_power() {
  Expr base = parse_primary();
  if (peek().kind == TokenKind::symbol && peek().text == "^") {
    const std::size_t pos = peek().position;
    next();
    // Right operand binds like a unary so that x^-1 and x^2^3 parse.
    Expr exponent = parse_unary();
    if (!exponent.is_constant_valued()) {
      throw ParseError("non-constant exponent", pos);
    }
    return Expr::binary(BinaryOp::pow, base, Expr::constant(fold_constant(exponent)));
  }
  return base;
}

Expr ExprParser::parse_primary() {
  const Token& tok = peek();
  if (tok.kind == TokenKind::number) {
    next();
    return Expr::constant(tok.number);
  }
  if (tok.kind == TokenKind::symbol && tok.text == "(") {
    next();
    Expr inner = parse_expression();
    expect(")");
    return inner;
  }
  if (tok.kind == TokenKind::identifier) {
    next();
    static const std::pair<std::string_view, UnaryOp> functions[] = {
        {"exp", UnaryOp::exp},   {"ln", UnaryOp::ln},     {"log", UnaryOp::ln},
        {"sqrt", UnaryOp::sqrt}, {"sin", UnaryOp::sin},   {"cos", UnaryOp::cos},
        {"tan", UnaryOp::tan},   {"tanh", UnaryOp::tanh}, {"sigmoid", UnaryOp::sigmoid},
    };
    if (peek().kind == TokenKind::symbol && peek().text == "(") {
      for (const auto& [name, op] : functions) {
        if (tok.text == name) {
          next();
          Expr arg = parse_expression();
          expect(")");
          return Expr::unary(op, arg);
        }
      }
      throw ParseError("unknown function '" + tok.text + "'", tok.position);
    }
    return resolve(tok);
  }
  if (tok.kind == TokenKind::end) fail("unexpected end of input");
  fail("unexpected '" + tok.text + "'");
}

Expr ExprParser::resolve(const Token& ident) {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i] == ident.text) return Expr::variable(ident.text, static_cast<int>(i));
  }
  if (ident.text == kTimeSymbol) return Expr::variable(ident.text, Expr::kTimeIndex);
  if (auto it = defs_.find(ident.text); it != defs_.end()) return it->second;
  throw ParseError("unknown variable '" + ident.text + "'", ident.position);
}

double fold_constant(const Expr& e) {
  const double zero = 0.0;
  return evaluate<double>(e, std::span<const double>(), zero);
}

}  // namespace detail

Expr parse_expr(std::string_view text, std::span<const std::string> vars, const Definitions& defs) {
  const auto tokens = detail::tokenize(text);
  detail::ExprParser parser(tokens, vars, defs);
  Expr e = parser.parse_expression();
  if (!parser.at_end()) parser.fail("unexpected '" + parser.peek().text + "'");
  return e;
}

template <class T>
T evaluate(const Expr& e, std::span<const T> vars, const T& time) {
  return std::visit(
      overloaded{
          [](const ConstantNode& c) -> T { return T(c.value); },
          [&](const VariableNode& v) -> T {
            if (v.index == Expr::kTimeIndex) return time;
            if (v.index < 0 || static_cast<std::size_t>(v.index) >= vars.size()) {
              throw ValidationError("variable '" + v.name + "' is not bound");
            }
            return vars[static_cast<std::size_t>(v.index)];
          },
          [&](const UnaryNode& u) -> T {
            const T x = evaluate<T>(u.child, vars, time);
            switch (u.op) {
              case UnaryOp::neg: return -x;
              case UnaryOp::exp: return ad::exp(x);
              case UnaryOp::ln: return ad::ln(x);
              case UnaryOp::sqrt: return ad::sqrt(x);
              case UnaryOp::sin: return ad::sin(x);
              case UnaryOp::cos: return ad::cos(x);
              case UnaryOp::tan: return ad::tan(x);
              case UnaryOp::tanh: return ad::tanh(x);
              case UnaryOp::sigmoid: return ad::sigmoid(x);
            }
            throw ValidationError("bad unary op");
          },
          [&](const BinaryNode& b) -> T {
            const T lhs = evaluate<T>(b.lhs, vars, time);
            if (b.op == BinaryOp::pow) {
              const auto& c = std::get<ConstantNode>(b.rhs.node().v);
              return ad::pow(lhs, c.value);
            }
            const T rhs = evaluate<T>(b.rhs, vars, time);
            switch (b.op) {
              case BinaryOp::add: return lhs + rhs;
              case BinaryOp::sub: return lhs - rhs;
              case BinaryOp::mul: return lhs * rhs;
              case BinaryOp::div:
                if constexpr (std::is_same_v<T, double>) {
                  return ad::divide(lhs, rhs);
                } else {
                  return lhs / rhs;
                }
              case BinaryOp::pow: break;
            }
            throw ValidationError("bad binary op");
          },
      },
      e.node().v);
}

template double evaluate<double>(const Expr&, std::span<const double>, const double&);
template ad::Scalar evaluate<ad::Scalar>(const Expr&, std::span<const ad::Scalar>,
                                         const ad::Scalar&);

double eval_expr(const Expr& e, const std::map<std::string, double, std::less<>>& env) {
  // Re-bind by name: collect names in the order the expression indexes them.
  std::vector<double> values;
  double time = 0.0;
  if (auto it = env.find(kTimeSymbol); it != env.end()) time = it->second;

  std::function<void(const Expr&)> bind = [&](const Expr& node) {
    std::visit(overloaded{
                   [](const ConstantNode&) {},
                   [&](const VariableNode& v) {
                     if (v.index == Expr::kTimeIndex) return;
                     auto it = env.find(v.name);
                     if (it == env.end()) {
                       throw ValidationError("no value bound for variable '" + v.name + "'");
                     }
                     const auto idx = static_cast<std::size_t>(v.index);
                     if (values.size() <= idx) values.resize(idx + 1, 0.0);
                     values[idx] = it->second;
                   },
                   [&](const UnaryNode& u) { bind(u.child); },
                   [&](const BinaryNode& b) {
                     bind(b.lhs);
                     bind(b.rhs);
                   },
               },
               node.node().v);
  };
  bind(e);
  return evaluate<double>(e, values, time);
}

}  // namespace stlforge::lang

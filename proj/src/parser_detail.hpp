#pragma once

// Shared tokenizer and recursive-descent expression parser used by both the
// expression and the formula front ends.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stlforge/expr.hpp"

namespace stlforge::lang::detail {

enum class TokenKind { number, identifier, symbol, end };

struct Token {
  TokenKind kind;
  std::string text;
  double number = 0.0;
  std::size_t position = 0;
};

std::vector<Token> tokenize(std::string_view text);

class ExprParser {
 public:
  ExprParser(const std::vector<Token>& tokens, std::span<const std::string> vars,
             const Definitions& defs)
      : tokens_(tokens), vars_(vars), defs_(defs) {}

  Expr parse_expression();  // additive level

  const Token& peek(std::size_t ahead = 0) const;
  const Token& next();
  bool accept(std::string_view symbol);
  void expect(std::string_view symbol);
  bool at_end() const { return peek().kind == TokenKind::end; }

  std::size_t cursor() const { return cursor_; }
  void rewind(std::size_t cursor) { cursor_ = cursor; }

  [[noreturn]] void fail(const std::string& message) const;

 private:
  Expr parse_term();
  Expr parse_unary();
  Expr parse_power();
  Expr parse_primary();
  Expr resolve(const Token& ident);

  const std::vector<Token>& tokens_;
  std::span<const std::string> vars_;
  const Definitions& defs_;
  std::size_t cursor_ = 0;
};

double fold_constant(const Expr& e);

}  // namespace stlforge::lang::detail

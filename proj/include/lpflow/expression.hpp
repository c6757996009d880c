#pragma once

// Arithmetic expressions over x, y, z and named constants, used for
// user-defined vector field components.
//
// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | sqrt
// The Unicode operators U+2212, U+00D7 and U+00F7 are accepted as -, * and /.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lpflow/error.hpp"
#include "lpflow/types.hpp"

namespace lpflow {

class ExpressionError : public Error {
 public:
  ExpressionError(std::size_t column, const std::string& message)
      : Error(ErrorCode::ParseError, "column " + std::to_string(column) + ": " + message),
        column_(column) {}

  /// 1-based column within the expression text.
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class Expression {
 public:
  static Expression parse(std::string_view text,
                          const std::map<std::string, double>& constants = {});

  double eval(const Vec3& p) const;
  const std::string& text() const { return text_; }

 private:
  enum class Op { Push, X, Y, Z, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt };
  struct Instr {
    Op op;
    double value = 0.0;
  };

  friend class ExpressionParser;
  std::string text_;
  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
};

}  // namespace lpflow

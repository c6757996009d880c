#include "lpflow/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace lpflow {

class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, const std::map<std::string, double>& constants)
      : src_(text), constants_(constants) {}

  Expression run() {
    Expression e;
    e.text_ = std::string(src_);
    out_ = &e.code_;
    skip_space();
    if (pos_ >= src_.size()) fail("empty expression");
    expr();
    skip_space();
    if (pos_ < src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    e.max_depth_ = max_depth_;
    return e;
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& msg) const { throw ExpressionError(pos_ + 1, msg); }

  void emit(Op op, double v = 0.0) {
    out_->push_back({op, v});
    switch (op) {
      case Op::Push:
      case Op::X:
      case Op::Y:
      case Op::Z:
        ++depth_;
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow:
        --depth_;
        break;
      default:
        break;
    }
    max_depth_ = std::max(max_depth_, depth_);
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  // Returns the ASCII operator for the token at pos_ (handling the UTF-8
  // minus, times and division signs) and its byte length, or 0.
  std::pair<char, std::size_t> peek_operator() const {
    if (pos_ >= src_.size()) return {0, 0};
    const char c = src_[pos_];
    if (std::string_view("+-*/^()").find(c) != std::string_view::npos) return {c, 1};
    const std::string_view rest = src_.substr(pos_);
    if (rest.starts_with("\xE2\x88\x92")) return {'-', 3};
    if (rest.starts_with("\xC3\x97")) return {'*', 2};
    if (rest.starts_with("\xC3\xB7")) return {'/', 2};
    return {0, 0};
  }

  bool accept(char want) {
    skip_space();
    auto [c, len] = peek_operator();
    if (c == want) {
      pos_ += len;
      return true;
    }
    return false;
  }

  void expr() {
    term();
    for (;;) {
      if (accept('+')) {
        term();
        emit(Op::Add);
      } else if (accept('-')) {
        term();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void term() {
    unary();
    for (;;) {
      if (accept('*')) {
        unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  void unary() {
    if (accept('-')) {
      unary();
      emit(Op::Neg);
      return;
    }
    if (accept('+')) {
      unary();
      return;
    }
    power();
  }

  void power() {
    primary();
    if (accept('^')) {
      unary();
      emit(Op::Pow);
    }
  }

  void primary() {
    skip_space();
    if (pos_ >= src_.size()) fail("unexpected end of expression");
    if (accept('(')) {
      expr();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      name();
      return;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  void number() {
    double v = 0.0;
    const char* first = src_.data() + pos_;
    const char* last = src_.data() + src_.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    emit(Op::Push, v);
  }

  void name() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string id(src_.substr(start, pos_ - start));
    static const std::map<std::string, Op> functions = {
        {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"sqrt", Op::Sqrt}};
    if (auto f = functions.find(id); f != functions.end()) {
      if (!accept('(')) fail("expected '(' after " + id);
      expr();
      if (!accept(')')) fail("expected ')'");
      emit(f->second);
      return;
    }
    if (id == "x") return emit(Op::X);
    if (id == "y") return emit(Op::Y);
    if (id == "z") return emit(Op::Z);
    if (auto k = constants_.find(id); k != constants_.end()) return emit(Op::Push, k->second);
    if (id == "pi") return emit(Op::Push, std::numbers::pi);
    pos_ = start;
    fail("unknown name '" + id + "'");
  }

  std::string_view src_;
  const std::map<std::string, double>& constants_;
  std::vector<Expression::Instr>* out_ = nullptr;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
  std::size_t max_depth_ = 0;
};

Expression Expression::parse(std::string_view text, const std::map<std::string, double>& constants) {
  return ExpressionParser(text, constants).run();
}

double Expression::eval(const Vec3& p) const {
  // Stack depth is bounded at parse time; small expressions stay on the stack.
  double small[32] = {};
  std::vector<double> big;
  double* st = small;
  if (max_depth_ > 32) {
    big.resize(max_depth_);
    st = big.data();
  }
  std::size_t sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Push: st[sp++] = in.value; break;
      case Op::X: st[sp++] = p.x(); break;
      case Op::Y: st[sp++] = p.y(); break;
      case Op::Z: st[sp++] = p.z(); break;
      case Op::Add: --sp; st[sp - 1] += st[sp]; break;
      case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
      case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
      case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
      case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Sin: st[sp - 1] = std::sin(st[sp - 1]); break;
      case Op::Cos: st[sp - 1] = std::cos(st[sp - 1]); break;
      case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
      case Op::Sqrt: st[sp - 1] = std::sqrt(st[sp - 1]); break;
    }
  }
  return st[0];
}

}  // namespace lpflow

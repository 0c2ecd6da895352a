#include "nape/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <variant>

#include "nape/errors.hpp"

namespace nape {

struct NumberNode {
  double value;
};
struct PiNode {};
struct VariableNode {
  Var var;
};
struct NegateNode {
  Expr operand;
};
struct BinaryNode {
  BinOp op;
  Expr lhs;
  Expr rhs;
};
struct CallNode {
  Func func;
  Expr arg;
};

struct ExprNode {
  std::variant<NumberNode, PiNode, VariableNode, NegateNode, BinaryNode, CallNode> data;
};

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::array<std::string_view, 8> kFuncNames = {"sin",  "cos",  "exp", "log",
                                                         "sqrt", "tanh", "abs", "sign"};
constexpr std::array<std::string_view, 3> kVarNames = {"t", "x1", "x2"};

std::string describe(const Point& p) {
  std::ostringstream os;
  os.precision(17);
  os << "(t=" << p.t << ", x1=" << p.x1 << ", x2=" << p.x2 << ")";
  return os.str();
}

double checked(double v, const char* what, const Point& p) {
  if (!std::isfinite(v)) throw EvalError(std::string("non-finite result (overflow) in ") + what + " at " + describe(p));
  return v;
}

double apply_func(Func f, double u) {
  switch (f) {
    case Func::sin: return std::sin(u);
    case Func::cos: return std::cos(u);
    case Func::exp: return std::exp(u);
    case Func::log: return std::log(u);
    case Func::sqrt: return std::sqrt(u);
    case Func::tanh: return std::tanh(u);
    case Func::abs: return std::abs(u);
    case Func::sign: return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
  }
  return 0.0;
}

double apply_binary(BinOp op, double a, double b) {
  switch (op) {
    case BinOp::add: return a + b;
    case BinOp::sub: return a - b;
    case BinOp::mul: return a * b;
    case BinOp::div: return a / b;
    case BinOp::pow: return std::pow(a, b);
  }
  return 0.0;
}

int precedence(const Expr& e) {
  return std::visit(overloaded{[](const NumberNode& n) { return n.value < 0.0 ? 3 : 5; },
                               [](const PiNode&) { return 5; }, [](const VariableNode&) { return 5; },
                               [](const NegateNode&) { return 3; },
                               [](const BinaryNode& b) {
                                 switch (b.op) {
                                   case BinOp::add:
                                   case BinOp::sub: return 1;
                                   case BinOp::mul:
                                   case BinOp::div: return 2;
                                   case BinOp::pow: return 4;
                                 }
                                 return 0;
                               },
                               [](const CallNode&) { return 5; }},
                    e.node().data);
}

void format_number(std::string& out, double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

void print(std::string& out, const Expr& e) {
  auto child = [&](const Expr& c, bool parens) {
    if (parens) out += '(';
    print(out, c);
    if (parens) out += ')';
  };
  std::visit(overloaded{[&](const NumberNode& n) { format_number(out, n.value); },
                        [&](const PiNode&) { out += "pi"; },
                        [&](const VariableNode& v) { out += kVarNames[static_cast<int>(v.var)]; },
                        [&](const NegateNode& n) {
                          out += '-';
                          child(n.operand, precedence(n.operand) < 3);
                        },
                        [&](const BinaryNode& b) {
                          const int p = precedence(e);
                          if (b.op == BinOp::pow) {
                            child(b.lhs, precedence(b.lhs) <= 4);
                            out += '^';
                            child(b.rhs, precedence(b.rhs) < 4);
                            return;
                          }
                          child(b.lhs, precedence(b.lhs) < p);
                          static constexpr std::array<char, 4> ops = {'+', '-', '*', '/'};
                          out += ops[static_cast<int>(b.op)];
                          child(b.rhs, precedence(b.rhs) <= p);
                        },
                        [&](const CallNode& c) {
                          out += kFuncNames[static_cast<int>(c.func)];
                          out += '(';
                          print(out, c.arg);
                          out += ')';
                        }},
             e.node().data);
}

// Recursive-descent parser over the byte string.
class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expr run() {
    if (src_.find_first_not_of(" \t\r\n") == std::string_view::npos) throw ParseError(0, "empty expression");
    Expr e = expr();
    skip();
    if (pos_ != src_.size()) throw ParseError(pos_, "unexpected trailing input");
    return e;
  }

 private:
  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    skip();
    if (pos_ >= src_.size()) throw ParseError(pos_, std::string("unexpected end of input, expected '") + c + "'");
    if (src_[pos_] == ',') throw ParseError(pos_, "arity mismatch: functions take exactly one argument");
    if (src_[pos_] != c) throw ParseError(pos_, std::string("expected '") + c + "'");
    ++pos_;
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = Expr::binary(BinOp::add, lhs, term());
      else if (accept('-'))
        lhs = Expr::binary(BinOp::sub, lhs, term());
      else
        return lhs;
    }
  }
  Expr term() {
    Expr lhs = factor();
    for (;;) {
      if (accept('*'))
        lhs = Expr::binary(BinOp::mul, lhs, factor());
      else if (accept('/'))
        lhs = Expr::binary(BinOp::div, lhs, factor());
      else
        return lhs;
    }
  }
  Expr factor() {
    if (accept('-')) return Expr::negate(factor());
    Expr base = atom();
    if (accept('^')) return Expr::binary(BinOp::pow, base, factor());
    return base;
  }
  Expr atom() {
    skip();
    if (pos_ >= src_.size()) throw ParseError(pos_, "unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw ParseError(pos_, std::string("unexpected character '") + c + "'");
  }
  Expr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
      return n;
    };
    std::size_t n = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) throw ParseError(start, "malformed number");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) throw ParseError(save, "malformed exponent");
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (ec != std::errc() || ptr != src_.data() + pos_) throw ParseError(start, "malformed number");
    return Expr::number(v);
  }
  Expr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string_view id = src_.substr(start, pos_ - start);
    for (std::size_t i = 0; i < kVarNames.size(); ++i)
      if (id == kVarNames[i]) return Expr::variable(static_cast<Var>(i));
    if (id == "pi") return Expr::pi();
    for (std::size_t i = 0; i < kFuncNames.size(); ++i) {
      if (id != kFuncNames[i]) continue;
      skip();
      if (pos_ >= src_.size() || src_[pos_] != '(')
        throw ParseError(pos_, "expected '(' after function " + std::string(id));
      ++pos_;
      skip();
      if (pos_ < src_.size() && src_[pos_] == ')') throw ParseError(pos_, "arity mismatch: " + std::string(id) + " takes one argument");
      Expr arg = expr();
      expect(')');
      return Expr::call(static_cast<Func>(i), arg);
    }
    throw ParseError(start, "unknown identifier '" + std::string(id) + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------

Expr::Expr() : node_(std::make_shared<const ExprNode>(ExprNode{NumberNode{0.0}})) {}

Expr Expr::number(double value) { return Expr(std::make_shared<const ExprNode>(ExprNode{NumberNode{value}})); }
Expr Expr::pi() { return Expr(std::make_shared<const ExprNode>(ExprNode{PiNode{}})); }
Expr Expr::variable(Var v) { return Expr(std::make_shared<const ExprNode>(ExprNode{VariableNode{v}})); }
Expr Expr::negate(Expr operand) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{NegateNode{std::move(operand)}}));
}
Expr Expr::binary(BinOp op, Expr lhs, Expr rhs) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{BinaryNode{op, std::move(lhs), std::move(rhs)}}));
}
Expr Expr::call(Func f, Expr arg) {
  return Expr(std::make_shared<const ExprNode>(ExprNode{CallNode{f, std::move(arg)}}));
}

bool Expr::is_number() const { return std::holds_alternative<NumberNode>(node_->data); }
double Expr::number_value() const { return is_number() ? std::get<NumberNode>(node_->data).value : 0.0; }
bool Expr::is_zero() const { return is_number() && number_value() == 0.0; }
bool Expr::is_one() const { return is_number() && number_value() == 1.0; }

bool Expr::depends_on(Var v) const {
  return std::visit(overloaded{[](const NumberNode&) { return false; }, [](const PiNode&) { return false; },
                               [v](const VariableNode& n) { return n.var == v; },
                               [v](const NegateNode& n) { return n.operand.depends_on(v); },
                               [v](const BinaryNode& b) { return b.lhs.depends_on(v) || b.rhs.depends_on(v); },
                               [v](const CallNode& c) { return c.arg.depends_on(v); }},
                    node_->data);
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = a.node_->data;
  const auto& y = b.node_->data;
  if (x.index() != y.index()) return false;
  return std::visit(
      overloaded{[&](const NumberNode& n) { return n.value == std::get<NumberNode>(y).value; },
                 [&](const PiNode&) { return true; },
                 [&](const VariableNode& n) { return n.var == std::get<VariableNode>(y).var; },
                 [&](const NegateNode& n) { return n.operand == std::get<NegateNode>(y).operand; },
                 [&](const BinaryNode& n) {
                   const auto& m = std::get<BinaryNode>(y);
                   return n.op == m.op && n.lhs == m.lhs && n.rhs == m.rhs;
                 },
                 [&](const CallNode& n) {
                   const auto& m = std::get<CallNode>(y);
                   return n.func == m.func && n.arg == m.arg;
                 }},
      x);
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_number() && b.is_number()) return constant(a.number_value() + b.number_value());
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return Expr::binary(BinOp::add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_number() && b.is_number()) return constant(a.number_value() - b.number_value());
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  return Expr::binary(BinOp::sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_number() && b.is_number()) return constant(a.number_value() * b.number_value());
  if (a.is_zero() || b.is_zero()) return constant(0.0);
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  if (a.is_number() && a.number_value() == -1.0) return -b;
  if (b.is_number() && b.number_value() == -1.0) return -a;
  return Expr::binary(BinOp::mul, a, b);
}

Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_number() && b.is_number() && b.number_value() != 0.0) return constant(a.number_value() / b.number_value());
  if (a.is_zero() && !(b.is_zero())) return constant(0.0);
  if (b.is_one()) return a;
  return Expr::binary(BinOp::div, a, b);
}

Expr operator-(const Expr& a) {
  if (a.is_number()) return constant(-a.number_value());
  if (const auto* n = std::get_if<NegateNode>(&a.node().data)) return n->operand;
  return Expr::negate(a);
}

Expr pow(const Expr& base, const Expr& exponent) {
  if (exponent.is_zero()) return constant(1.0);
  if (exponent.is_one()) return base;
  if (base.is_number() && exponent.is_number()) {
    const double v = std::pow(base.number_value(), exponent.number_value());
    if (std::isfinite(v)) return constant(v);
  }
  return Expr::binary(BinOp::pow, base, exponent);
}

Expr apply(Func f, const Expr& arg) {
  if (arg.is_number()) {
    const double u = arg.number_value();
    const bool domain_ok = !((f == Func::log || f == Func::sqrt) && u <= 0.0);
    const double v = apply_func(f, u);
    if (domain_ok && std::isfinite(v)) return constant(v);
  }
  return Expr::call(f, arg);
}

Expr parse_expr(std::string_view source) { return Parser(source).run(); }

std::string to_string(const Expr& e) {
  std::string out;
  print(out, e);
  return out;
}

std::string_view name(Func f) { return kFuncNames[static_cast<int>(f)]; }
std::string_view name(Var v) { return kVarNames[static_cast<int>(v)]; }

double evaluate(const Expr& e, const Point& p) {
  return std::visit(
      overloaded{[](const NumberNode& n) { return n.value; }, [](const PiNode&) { return std::numbers::pi; },
                 [&](const VariableNode& v) {
                   switch (v.var) {
                     case Var::t: return p.t;
                     case Var::x1: return p.x1;
                     case Var::x2: return p.x2;
                   }
                   return 0.0;
                 },
                 [&](const NegateNode& n) { return -evaluate(n.operand, p); },
                 [&](const BinaryNode& b) {
                   const double l = evaluate(b.lhs, p);
                   const double r = evaluate(b.rhs, p);
                   if (b.op == BinOp::div && r == 0.0) throw EvalError("division by zero at " + describe(p));
                   if (b.op == BinOp::pow && l < 0.0 && r != std::floor(r))
                     throw EvalError("negative base with non-integer exponent at " + describe(p));
                   return checked(apply_binary(b.op, l, r), "arithmetic", p);
                 },
                 [&](const CallNode& c) {
                   const double u = evaluate(c.arg, p);
                   if ((c.func == Func::log || c.func == Func::sqrt) && u <= 0.0)
                     throw EvalError(std::string(name(c.func)) + " of nonpositive argument at " + describe(p));
                   return checked(apply_func(c.func, u), kFuncNames[static_cast<int>(c.func)].data(), p);
                 }},
      e.node().data);
}

Expr differentiate(const Expr& e, Var v) {
  if (!e.depends_on(v)) return constant(0.0);
  return std::visit(
      overloaded{[](const NumberNode&) { return constant(0.0); }, [](const PiNode&) { return constant(0.0); },
                 [&](const VariableNode& n) { return constant(n.var == v ? 1.0 : 0.0); },
                 [&](const NegateNode& n) { return -differentiate(n.operand, v); },
                 [&](const BinaryNode& b) {
                   const Expr& f = b.lhs;
                   const Expr& g = b.rhs;
                   switch (b.op) {
                     case BinOp::add: return differentiate(f, v) + differentiate(g, v);
                     case BinOp::sub: return differentiate(f, v) - differentiate(g, v);
                     case BinOp::mul: return differentiate(f, v) * g + f * differentiate(g, v);
                     case BinOp::div:
                       return (differentiate(f, v) * g - f * differentiate(g, v)) / pow(g, constant(2.0));
                     case BinOp::pow:
                       if (!g.depends_on(v)) return g * pow(f, g - constant(1.0)) * differentiate(f, v);
                       // f^g (g' log f + g f'/f)
                       return e * (differentiate(g, v) * apply(Func::log, f) + g * differentiate(f, v) / f);
                   }
                   return constant(0.0);
                 },
                 [&](const CallNode& c) {
                   const Expr& u = c.arg;
                   const Expr du = differentiate(u, v);
                   switch (c.func) {
                     case Func::sin: return apply(Func::cos, u) * du;
                     case Func::cos: return -(apply(Func::sin, u) * du);
                     case Func::exp: return e * du;
                     case Func::log: return du / u;
                     case Func::sqrt: return du / (constant(2.0) * e);
                     case Func::tanh: return (constant(1.0) - pow(e, constant(2.0))) * du;
                     case Func::abs: return apply(Func::sign, u) * du;
                     case Func::sign: return constant(0.0);
                   }
                   return constant(0.0);
                 }},
      e.node().data);
}

// ---------------------------------------------------------------------------

void compile_into(const Expr& e, CompiledExpr& out, int& depth) {
  using Instr = CompiledExpr::Instr;
  auto push = [&](Instr i) {
    out.program_.push_back(i);
  };
  std::visit(overloaded{[&](const NumberNode& n) {
                          push({Instr::Kind::constant, 0, false, n.value});
                          ++depth;
                        },
                        [&](const PiNode&) {
                          push({Instr::Kind::constant, 0, false, std::numbers::pi});
                          ++depth;
                        },
                        [&](const VariableNode& n) {
                          push({Instr::Kind::var, static_cast<std::uint8_t>(n.var), n.var != Var::t, 0.0});
                          ++depth;
                        },
                        [&](const NegateNode& n) {
                          compile_into(n.operand, out, depth);
                          push({Instr::Kind::neg, 0, out.program_.back().lanes, 0.0});
                        },
                        [&](const BinaryNode& b) {
                          compile_into(b.lhs, out, depth);
                          const bool l = out.program_.back().lanes;
                          compile_into(b.rhs, out, depth);
                          const bool r = out.program_.back().lanes;
                          push({Instr::Kind::bin, static_cast<std::uint8_t>(b.op), l || r, 0.0});
                          --depth;
                        },
                        [&](const CallNode& c) {
                          compile_into(c.arg, out, depth);
                          push({Instr::Kind::call, static_cast<std::uint8_t>(c.func), out.program_.back().lanes, 0.0});
                        }},
             e.node().data);
  out.depth_ = std::max(out.depth_, depth);
}

CompiledExpr::CompiledExpr(const Expr& e) : source_(e) {
  int depth = 0;
  compile_into(e, *this, depth);
  space_dependent_ = e.depends_on(Var::x1) || e.depends_on(Var::x2);
}

double CompiledExpr::operator()(const Point& p) const { return evaluate(source_, p); }

void CompiledExpr::evaluate_batch(double t, std::span<const double> x1, std::span<const double> x2,
                                  std::span<double> out) const {
  const std::size_t n = out.size();
  struct Slot {
    bool lanes;
    double scalar;
    double* data;
  };
  thread_local std::vector<double> pool;
  thread_local std::vector<Slot> stack;
  pool.resize(static_cast<std::size_t>(depth_ + 1) * n);
  stack.clear();

  auto lane_buffer = [&](std::size_t slot) { return pool.data() + slot * n; };
  for (const Instr& in : program_) {
    switch (in.kind) {
      case Instr::Kind::constant: stack.push_back({false, in.value, nullptr}); break;
      case Instr::Kind::var: {
        const Var v = static_cast<Var>(in.code);
        if (v == Var::t) {
          stack.push_back({false, t, nullptr});
        } else {
          double* dst = lane_buffer(stack.size());
          const auto& src = v == Var::x1 ? x1 : x2;
          if (src.empty())
            std::fill(dst, dst + n, 0.0);
          else
            std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n), dst);
          stack.push_back({true, 0.0, dst});
        }
        break;
      }
      case Instr::Kind::neg: {
        Slot& s = stack.back();
        if (!s.lanes)
          s.scalar = -s.scalar;
        else
          for (std::size_t i = 0; i < n; ++i) s.data[i] = -s.data[i];
        break;
      }
      case Instr::Kind::call: {
        Slot& s = stack.back();
        const Func f = static_cast<Func>(in.code);
        if (!s.lanes)
          s.scalar = apply_func(f, s.scalar);
        else
          for (std::size_t i = 0; i < n; ++i) s.data[i] = apply_func(f, s.data[i]);
        break;
      }
      case Instr::Kind::bin: {
        const Slot r = stack.back();
        stack.pop_back();
        Slot& l = stack.back();
        const BinOp op = static_cast<BinOp>(in.code);
        if (!l.lanes && !r.lanes) {
          l.scalar = apply_binary(op, l.scalar, r.scalar);
        } else {
          double* dst = lane_buffer(stack.size() - 1);
          for (std::size_t i = 0; i < n; ++i) {
            const double a = l.lanes ? l.data[i] : l.scalar;
            const double b = r.lanes ? r.data[i] : r.scalar;
            dst[i] = apply_binary(op, a, b);
          }
          l = {true, 0.0, dst};
        }
        break;
      }
    }
  }
  const Slot& top = stack.back();
  if (top.lanes)
    std::copy(top.data, top.data + n, out.begin());
  else
    std::fill(out.begin(), out.end(), top.scalar);
}

}  // namespace nape

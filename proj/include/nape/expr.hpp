#pragma once

// Closed-form expressions over (t, x1, x2): parsing, printing, evaluation and
// symbolic differentiation. Coefficients, Lyapunov functions and test
// functions are all carried as Expr.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nape {

enum class Var : std::uint8_t { t, x1, x2 };
enum class Func : std::uint8_t { sin, cos, exp, log, sqrt, tanh, abs, sign };
enum class BinOp : std::uint8_t { add, sub, mul, div, pow };

/// Evaluation point.
struct Point {
  double t = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
};

struct ExprNode;

/// Immutable expression tree with shared subtrees.
class Expr {
 public:
  /// The literal 0.
  Expr();

  static Expr number(double value);
  static Expr pi();
  static Expr variable(Var v);
  static Expr negate(Expr operand);
  static Expr binary(BinOp op, Expr lhs, Expr rhs);
  static Expr call(Func f, Expr arg);

  const ExprNode& node() const { return *node_; }

  bool is_number() const;
  /// Value of a literal; only meaningful when is_number().
  double number_value() const;
  bool is_zero() const;
  bool is_one() const;

  /// True when the tree mentions `v`.
  bool depends_on(Var v) const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

/// Builders with light simplification (constant folding, 0/1 identities).
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, const Expr& exponent);
Expr apply(Func f, const Expr& arg);
inline Expr constant(double v) { return Expr::number(v); }

/// Grammar (precedence ^ > unary minus > * / > + -, ^ right-associative):
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | atom ['^' factor]
///   atom   := number | ident | '(' expr ')' | func '(' expr ')'
/// Identifiers: t, x1, x2, pi. Functions: sin cos exp log sqrt tanh abs sign.
/// Throws ParseError carrying the byte offset of the failure.
Expr parse_expr(std::string_view source);

/// Minimal-parenthesis rendering; parse_expr(to_string(e)) == e for every e
/// produced by parse_expr. Literals print in shortest round-trip form.
std::string to_string(const Expr& e);

/// Throws EvalError on log/sqrt of a nonpositive argument, division by zero,
/// or a non-finite result. The message names the evaluation point.
double evaluate(const Expr& e, const Point& p);

/// Symbolic derivative. abs'(u) is sign(u) u' with sign(0) = 0; sign' = 0.
Expr differentiate(const Expr& e, Var v);

std::string_view name(Func f);
std::string_view name(Var v);

/// Postfix program for repeated evaluation. The batch entry point evaluates
/// many spatial points at one time, computing space-independent subtrees
/// once; it does not throw, callers check the output for non-finite values.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);

  /// Scalar evaluation with the same domain checks as evaluate().
  double operator()(const Point& p) const;

  void evaluate_batch(double t, std::span<const double> x1, std::span<const double> x2,
                      std::span<double> out) const;

  bool depends_on_space() const { return space_dependent_; }

 private:
  struct Instr {
    enum class Kind : std::uint8_t { constant, var, neg, bin, call } kind;
    std::uint8_t code = 0;  // Var, BinOp or Func
    bool lanes = false;     // result varies with x
    double value = 0.0;
  };
  std::vector<Instr> program_;
  int depth_ = 0;
  bool space_dependent_ = false;
  Expr source_;

  friend void compile_into(const Expr&, CompiledExpr&, int&);
};

}  // namespace nape

#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nape/expr.hpp"
#include "nape/grid.hpp"

namespace nape {

/// Time-periodic operator data for A(t) = Tr(Q D^2) + <b, D>.
/// d is 1 or 2; in d = 2 the diffusion matrix must be diagonal.
struct CoefficientField {
  int dim = 1;
  double period = 1.0;
  std::vector<std::vector<Expr>> diffusion;  // d x d
  std::vector<Expr> drift;                   // d
  double eta0 = 0.0;                         // filled by validate_field

  const Expr& q(int i, int j) const { return diffusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
  const Expr& b(int i) const { return drift[static_cast<std::size_t>(i)]; }
};

/// Parses the entries and enforces the structural rules (dimension, shape,
/// symmetry, zero off-diagonal in d = 2, no x2 in d = 1). Throws ModelError
/// or ParseError.
CoefficientField make_field(int dim, double period, const std::vector<std::vector<std::string>>& diffusion,
                            const std::vector<std::string>& drift);

/// Ornstein-Uhlenbeck benchmark: Q = 1, b = -x + cos(2 pi t), T = 1.
CoefficientField ou_benchmark();
/// Cubic benchmark: Q = 1, b = -x^3 (1 + 0.5 sin(2 pi t)), T = 1.
CoefficientField cubic_benchmark();

struct FieldValidation {
  bool accepted = false;
  double eta0 = 0.0;
  Point eta0_witness;
  double periodicity_violation = 0.0;
  Point periodicity_witness;
  std::vector<std::string> errors;
  std::optional<Point> rejection_witness;
  CoefficientField field;  // copy with eta0 set
};

/// Samples 64 phases per period and n_samples points per axis of
/// [-sample_R, sample_R]^d. Accepts iff eta0 > 0, every entry is periodic to
/// relative 1e-12, and no evaluation failed.
FieldValidation validate_field(const CoefficientField& c, double sample_R, int n_samples);

/// (A(t) f)(x) with symbolic derivatives of f.
double apply_operator(const CoefficientField& c, const Expr& f, const Point& p);

/// A(t) applied to a fixed f, with the derivatives of f prepared once.
class OperatorImage {
 public:
  OperatorImage(const CoefficientField& c, const Expr& f);
  double operator()(const Point& p) const;

 private:
  CoefficientField field_;
  std::vector<Expr> grad_;
  std::vector<std::vector<Expr>> hessian_;
};

/// A test function given either in closed form or by node values on a grid.
struct TestFunction {
  struct Nodes {
    Grid grid;
    Eigen::VectorXd values;
  };
  std::variant<Expr, Nodes> data;
  bool bounded = true;
  bool compact_support = false;

  static TestFunction expr(const Expr& e, bool bounded = true, bool compact = false) {
    return TestFunction{e, bounded, compact};
  }
  static TestFunction nodes(const Grid& g, Eigen::VectorXd v) { return TestFunction{Nodes{g, std::move(v)}}; }

  /// Node values on `g`. Node-valued functions must live on the same grid.
  Eigen::VectorXd on(const Grid& g) const;
};

}  // namespace nape

#pragma once

// Structural checks on the discrete evolution operator: composition law,
// expanding-domain limit and the derivative in the initial time.

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "nape/evolution.hpp"

namespace nape {

struct NamedFunction {
  std::string name;
  Expr expr;
};

/// {1, x, x^2, sin x, smoothed indicator of |x| <= 1}.
std::vector<NamedFunction> standard_battery();
/// Smooth, numerically compactly supported functions for the derivative relation.
std::vector<NamedFunction> compact_battery();

std::vector<Eigen::VectorXd> sample_battery(const std::vector<NamedFunction>& battery, const Grid& g);

struct CompositionReport {
  double residual = 0.0;  // max over battery and nodes
  std::vector<double> per_function;
};

/// |G(t,s) phi - G(t,r) G(r,s) phi| over the battery; s <= r <= t on the time grid.
CompositionReport chapman_kolmogorov_check(std::shared_ptr<const StepCache> steps, double s, double r, double t,
                                           const std::vector<Eigen::VectorXd>& battery);

struct ExpandingDomainReport {
  std::vector<double> radii;
  double core_radius = 0.0;                // R_min / 2
  std::vector<Eigen::VectorXd> core_values;  // u_R on the common core, one per R
  Eigen::VectorXd core_x;                   // first coordinate of the core nodes
  std::vector<double> monotonicity_violation;  // max (u_R - u_R') per consecutive pair
  std::vector<double> increments;              // sup |u_R' - u_R| per consecutive pair
  bool monotone = true;                        // violations <= 1e-12
  bool increments_decreasing = true;           // strictly
};

/// Same h on every R of the ladder, so the grids are nested. Throws ModelError
/// for a non-increasing ladder, R not a multiple of h, or phi < 0 somewhere.
ExpandingDomainReport expanding_domain_study(const CoefficientField& c, int dim, double h, double s, double t,
                                             double dt, const Expr& phi, const std::vector<double>& ladder);

struct DerivativeRelationReport {
  double delta = 0.0;
  double residual = 0.0;  // max over battery and core nodes
  std::vector<double> per_function;
  double constant = 0.0;  // residual / (delta + h^2)
};

/// Central difference in s with step delta = dt of G(t,s) phi plus
/// G(t,s) A(s) phi, with A(s) phi evaluated symbolically. Needs s - dt >= 0 on
/// the time grid. Throws ModelError when some |phi| exceeds 1e-10 max|phi|
/// outside |x| <= R/2.
DerivativeRelationReport derivative_relation_check(std::shared_ptr<const StepCache> steps, double s, double t,
                                                   const std::vector<NamedFunction>& battery);

}  // namespace nape

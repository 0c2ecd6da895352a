#pragma once

// Sampled falsifiers for the Lyapunov-type conditions, the comparison ODE
// zeta' = -g(zeta) with g(s) = c s^gamma, and the discrete supersolution
// inequalities satisfied by G(t, .)W.

#include <Eigen/Core>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nape/coefficients.hpp"
#include "nape/evolution.hpp"
#include "nape/expr.hpp"
#include "nape/grid.hpp"

namespace nape {

/// g(s) = c max(s, 0)^gamma.
struct PowerG {
  double c = 1.0;
  double gamma = 2.0;
  double operator()(double s) const;
};

struct LyapunovData {
  Expr W;
  PowerG g;
  double R0 = 0.0;      // tail conditions are asserted for |x| >= R0
  double lambda = 0.0;  // drift bound A W < lambda W
  double a = 0.0;       // dissipativity A W <= a - cc W
  double cc = 0.0;
};

/// Sample set: `phases` uniform times per period; x on a uniform grid of
/// [-R_domain, R_domain]^d plus geometric radial ladders out to 4 R_domain.
/// Non-empty `points` replaces the generated set.
struct SampleSpec {
  double R_domain = 8.0;
  int phases = 64;
  int grid_points = 161;  // per axis; d = 2 uses min(grid_points, 41)
  int ladder_points = 48;
  int directions = 16;    // rays in d = 2
  std::vector<Point> points;

  double R_check() const { return 4.0 * R_domain; }
};

/// sup over samples of a margin that must be negative (strict conditions) or
/// nonpositive. Witness ties break toward the lexicographically smallest (t, x).
struct MarginReport {
  std::string condition;
  bool accepted = false;
  double sup_margin = 0.0;
  Point witness;
  std::size_t samples = 0;
  double tolerance = 0.0;
  std::string note;
};

/// sup A(s)W - lambda W; accepted iff sup < -1e-9 scale.
MarginReport check_drift_bound(const CoefficientField& c, const LyapunovData& L, const SampleSpec& spec);

struct DriftScan {
  std::optional<int> lambda_star;
  MarginReport report;  // at lambda_star, or at lambda_max when none is accepted
};

/// Smallest integer lambda in [0, lambda_max] accepted by check_drift_bound.
DriftScan scan_drift_lambda(const CoefficientField& c, LyapunovData L, const SampleSpec& spec, int lambda_max = 64);

struct DissipativityReport : MarginReport {
  double a_over_c = 0.0;
  double min_W = 0.0;          // sampled
  double measure_bound = 0.0;  // min W + a / cc
};

/// sup A(s)W - a + cc W; accepted iff <= 1e-9 scale.
DissipativityReport check_dissipativity(const CoefficientField& c, const LyapunovData& L, const SampleSpec& spec);

/// sup A(s)W + g(W) over |x| in [R0, R_check]; gamma <= 1 is rejected before
/// sampling (1/g not integrable at infinity).
MarginReport check_superlinear(const CoefficientField& c, const LyapunovData& L, const SampleSpec& spec);

/// sup over |x| >= R0 of Tr Q + <b,x> - 2<Qx,x>/|x|^2 + cL |x|^2 (log|x|)^gamma.
MarginReport check_log_drift(const CoefficientField& c, double cL, double gamma, double R0, const SampleSpec& spec);

/// Is W positive and nondecreasing along the radial ladders on [R0, R_check]?
MarginReport check_lyapunov_function(const LyapunovData& L, int dim, const SampleSpec& spec);

struct ComparisonSolution {
  double c = 1.0, gamma = 2.0, zeta0 = 1.0;
  std::vector<double> times, values;
  std::vector<double> closed_form;

  /// [zeta0^{1-gamma} + c(gamma-1)s]^{-1/(gamma-1)}; zeta0 e^{-cs} for gamma = 1.
  static double exact(double zeta0, double c, double gamma, double s);
  /// [c(gamma-1) delta]^{-1/(gamma-1)}, independent of zeta0; +inf for gamma = 1.
  static double bound(double c, double gamma, double delta);
  double bound(double delta) const { return bound(c, gamma, delta); }
  double max_relative_error() const;
};

/// RK4 on zeta' = -c zeta^gamma, sampled every dt up to horizon.
ComparisonSolution solve_comparison(double zeta0, double c, double gamma, double horizon, double dt);

/// Node values of W, with W replaced inside |x| < R0 by the constant
/// c0 = W(R0/2, 0) joined to W over R0/2 <= |x| <= R0 by a smoothstep.
/// W is only evaluated where |x| >= R0/2. R0 = 0 samples W everywhere.
Eigen::VectorXd blended_lyapunov_nodes(const Expr& W, double R0, const Grid& g, double t = 0.0);

struct SupersolutionReport {
  bool super_holds = true;
  bool beta_holds = true;
  double super_worst = 0.0;  // largest violation, compared with tolerance
  double beta_worst = 0.0;
  double tolerance = 0.0;
  double g_shift = 0.0;       // max(0, sup_nodes A W + g(W))
  std::size_t nodes = 0;
  std::size_t beta_pairs = 0;
};

/// On every interior node with |x| <= R/2, with trapezoidal quadrature in
/// sigma and W given by blended_lyapunov_nodes:
///   G(t,s')W - G(t,r)W >= -int_r^{s'} G(t,sigma) A(sigma)W dsigma - tol,  r <= s' <= s,
///   beta(b) - beta(a) <= -int_a^b (g(beta) - g_shift) dsigma + tol,
/// beta(u) = G(t,t-u)W, for checkpoint pairs 0 <= a < b <= t - r.
/// tol = 1e-3 (1 + max |W| on the core).
SupersolutionReport supersolution_check(std::shared_ptr<const StepCache> steps, double r, double s, double t,
                                        const LyapunovData& L, int checkpoints = 16);

}  // namespace nape

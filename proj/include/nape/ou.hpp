#pragma once

// Closed-form reference for one-dimensional time-dependent Ornstein-Uhlenbeck
// operators A(t) phi = q(t) phi'' + (a(t) x + f(t)) phi'. With
// U(r,s) = exp(int_s^r a), the solution G(t,s) phi(x) is the Gaussian
// expectation E phi(mean + sqrt(var) Z) with
//   mean = U(t,s) x + int_s^t f(r) U(r,s) dr,   var = 2 int_s^t q(r) U(r,s)^2 dr.

#include <functional>
#include <string>

#include "nape/coefficients.hpp"
#include "nape/expr.hpp"

namespace nape {

/// a, f, q are expressions in t only.
struct OUParams {
  Expr a, f, q;
  double period = 1.0;

  static OUParams parse(const std::string& a, const std::string& f, const std::string& q, double period = 1.0);
  /// a = -1, f = cos(2 pi t), q = 1.
  static OUParams benchmark();

  CoefficientField field() const;
};

struct GaussianMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Requires s <= t. Integrals by adaptive Gauss-Kronrod to 1e-10.
GaussianMoments ou_exact_moments(const OUParams& p, double s, double t, double x);

/// Moments of the periodic evolution system of measures at phase s:
///   mean = int_s^inf f U(r,s) dr,   var = 2 int_s^inf q U(r,s)^2 dr,
/// summed exactly over periods as geometric series in rho = U(s+T,s).
/// Throws ModelError when the period mean of a is not negative.
GaussianMoments ou_exact_measure(const OUParams& p, double s);

/// E phi(m + sqrt(v) Z) by Gauss-Hermite quadrature; phi(m) when v = 0.
double gaussian_expectation(const std::function<double(double)>& phi, const GaussianMoments& g, int nodes = 64);

/// The same expectation by adaptive Gauss-Kronrod on +-12 standard
/// deviations; robust for steep phi where Gauss-Hermite converges slowly.
double gaussian_expectation_adaptive(const std::function<double(double)>& phi, const GaussianMoments& g);

/// Closed-form node values of G(t,s) phi for an Expr phi(x1).
double ou_exact_value(const OUParams& p, double s, double t, double x, const Expr& phi);

}  // namespace nape

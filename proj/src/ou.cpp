#include "nape/ou.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "nape/errors.hpp"

namespace nape {

namespace {

using boost::math::quadrature::gauss_kronrod;
constexpr double kQuadTol = 1e-12;
constexpr unsigned kMaxDepth = 15;

template <class F>
double integrate(F&& f, double lo, double hi) {
  if (hi == lo) return 0.0;
  double err = 0.0;
  const double v = gauss_kronrod<double, 31>::integrate(f, lo, hi, kMaxDepth, kQuadTol, &err);
  if (!(err <= 1e-10 * std::max(1.0, std::abs(v)))) throw NumericalError("OU quadrature did not converge");
  return v;
}

double at_time(const Expr& e, double t) { return evaluate(e, {t, 0.0, 0.0}); }

// log U(r,s) = int_s^r a.
double log_growth(const OUParams& p, double s, double r) {
  if (p.a.is_number()) return p.a.number_value() * (r - s);
  return integrate([&](double u) { return at_time(p.a, u); }, s, r);
}

struct Integrals {
  double drift = 0.0;   // int f U
  double noise = 0.0;   // int q U^2
};

Integrals transport_integrals(const OUParams& p, double s, double t) {
  Integrals out;
  if (!(t > s)) return out;
  out.drift = integrate([&](double r) { return at_time(p.f, r) * std::exp(log_growth(p, s, r)); }, s, t);
  out.noise = integrate([&](double r) { return at_time(p.q, r) * std::exp(2.0 * log_growth(p, s, r)); }, s, t);
  return out;
}

void require_time_only(const Expr& e, const char* what) {
  if (e.depends_on(Var::x1) || e.depends_on(Var::x2))
    throw ModelError(std::string("OU coefficient ") + what + " must depend on t only");
}

// Golub-Welsch nodes and weights for the weight exp(-x^2), normalized so that
// the weights sum to 1.
struct HermiteRule {
  std::vector<double> x, w;
};

const HermiteRule& hermite_rule(int n) {
  static std::mutex mu;
  static std::map<int, HermiteRule> cache;
  const std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(0.5 * k);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  HermiteRule rule;
  for (int k = 0; k < n; ++k) {
    rule.x.push_back(es.eigenvalues()[k]);
    rule.w.push_back(es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

}  // namespace

OUParams OUParams::parse(const std::string& a, const std::string& f, const std::string& q, double period) {
  OUParams p{parse_expr(a), parse_expr(f), parse_expr(q), period};
  require_time_only(p.a, "a");
  require_time_only(p.f, "f");
  require_time_only(p.q, "q");
  return p;
}

OUParams OUParams::benchmark() { return parse("-1", "cos(2*pi*t)", "1", 1.0); }

CoefficientField OUParams::field() const {
  CoefficientField c;
  c.dim = 1;
  c.period = period;
  c.diffusion = {{q}};
  c.drift = {a * Expr::variable(Var::x1) + f};
  return c;
}

GaussianMoments ou_exact_moments(const OUParams& p, double s, double t, double x) {
  if (t < s) throw ModelError("ou_exact_moments needs s <= t");
  const Integrals I = transport_integrals(p, s, t);
  return {std::exp(log_growth(p, s, t)) * x + I.drift, 2.0 * I.noise};
}

GaussianMoments ou_exact_measure(const OUParams& p, double s) {
  const double T = p.period;
  const double log_rho = log_growth(p, s, s + T);
  if (!(log_rho < 0.0)) throw ModelError("OU measure diverges: the period mean of a is not negative");
  const double rho = std::exp(log_rho);
  // Over [s+kT, s+(k+1)T] the integrands are rho^k and rho^{2k} times their
  // first-period values.
  const Integrals I = transport_integrals(p, s, s + T);
  return {I.drift / (1.0 - rho), 2.0 * I.noise / (1.0 - rho * rho)};
}

double gaussian_expectation(const std::function<double(double)>& phi, const GaussianMoments& g, int nodes) {
  if (g.variance < 0.0) throw ModelError("negative variance");
  if (g.variance == 0.0) return phi(g.mean);
  const HermiteRule& rule = hermite_rule(nodes);
  const double scale = std::sqrt(2.0 * g.variance);
  double sum = 0.0;
  for (std::size_t k = 0; k < rule.x.size(); ++k) sum += rule.w[k] * phi(g.mean + scale * rule.x[k]);
  return sum;
}

double gaussian_expectation_adaptive(const std::function<double(double)>& phi, const GaussianMoments& g) {
  if (g.variance < 0.0) throw ModelError("negative variance");
  if (g.variance == 0.0) return phi(g.mean);
  const double sd = std::sqrt(g.variance);
  // Beyond 12 standard deviations the Gaussian weight is below 1e-31.
  auto f = [&](double z) { return phi(g.mean + sd * z) * std::exp(-0.5 * z * z); };
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, -12.0, 12.0, 20, 1e-13);
  return v / std::sqrt(2.0 * std::numbers::pi);
}

double ou_exact_value(const OUParams& p, double s, double t, double x, const Expr& phi) {
  const GaussianMoments g = ou_exact_moments(p, s, t, x);
  return gaussian_expectation_adaptive([&](double y) { return evaluate(phi, {t, y, 0.0}); }, g);
}

}  // namespace nape

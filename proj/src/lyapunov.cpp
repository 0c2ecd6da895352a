#include "nape/lyapunov.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <tuple>

#include "nape/errors.hpp"

namespace nape {

double PowerG::operator()(double s) const { return s > 0.0 ? c * std::pow(s, gamma) : 0.0; }

namespace {

using XY = std::array<double, 2>;

double norm(const XY& x) { return std::hypot(x[0], x[1]); }

std::vector<double> geometric_ladder(double lo, double hi, int n) {
  std::vector<double> r;
  if (n <= 1 || hi <= lo) return {std::max(lo, hi)};
  const double q = std::log(hi / lo) / (n - 1);
  for (int k = 0; k < n; ++k) r.push_back(lo * std::exp(q * k));
  r.back() = hi;
  return r;
}

std::vector<XY> directions(int dim, const SampleSpec& spec) {
  if (dim == 1) return {XY{1.0, 0.0}, XY{-1.0, 0.0}};
  std::vector<XY> out;
  for (int k = 0; k < spec.directions; ++k) {
    const double a = 2.0 * std::numbers::pi * k / spec.directions;
    out.push_back({std::cos(a), std::sin(a)});
  }
  return out;
}

// Spatial samples with |x| >= r_min: uniform grid plus radial ladders.
std::vector<XY> spatial_samples(int dim, const SampleSpec& spec, double r_min) {
  std::vector<XY> out;
  const double Rd = spec.R_domain;
  const int n = dim == 1 ? spec.grid_points : std::min(spec.grid_points, 41);
  auto axis = [&](int i) { return n == 1 ? 0.0 : -Rd + 2.0 * Rd * i / (n - 1); };
  const double tol = 1e-12 * std::max(1.0, r_min);
  for (int j = 0; j < (dim == 1 ? 1 : n); ++j)
    for (int i = 0; i < n; ++i) {
      const XY x{axis(i), dim == 1 ? 0.0 : axis(j)};
      if (norm(x) >= r_min - tol) out.push_back(x);
    }
  const double lo = r_min > 0.0 ? r_min : Rd / 256.0;
  for (const XY& e : directions(dim, spec))
    for (double r : geometric_ladder(lo, spec.R_check(), spec.ladder_points)) out.push_back({r * e[0], r * e[1]});
  return out;
}

bool lex_less(const Point& a, const Point& b) {
  return std::tie(a.t, a.x1, a.x2) < std::tie(b.t, b.x1, b.x2);
}

// margin(p) returns {margin, magnitude}; the acceptance tolerance is
// 1e-9 max(1, largest magnitude).
MarginReport sweep(std::string condition, int dim, double period, const SampleSpec& spec, double r_min, bool strict,
                   const std::function<std::pair<double, double>(const Point&)>& margin) {
  MarginReport rep;
  rep.condition = std::move(condition);
  rep.sup_margin = -std::numeric_limits<double>::infinity();
  double scale = 1.0;
  auto visit = [&](const Point& p) {
    const auto [m, mag] = margin(p);
    scale = std::max(scale, mag);
    ++rep.samples;
    if (m > rep.sup_margin || (m == rep.sup_margin && lex_less(p, rep.witness))) {
      rep.sup_margin = m;
      rep.witness = p;
    }
  };
  if (!spec.points.empty()) {
    for (const Point& p : spec.points)
      if (std::hypot(p.x1, p.x2) >= r_min - 1e-12 * std::max(1.0, r_min)) visit(p);
  } else {
    const std::vector<XY> xs = spatial_samples(dim, spec, r_min);
    for (int k = 0; k < spec.phases; ++k) {
      const double t = period * k / spec.phases;
      for (const XY& x : xs) visit({t, x[0], x[1]});
    }
  }
  if (rep.samples == 0) throw ModelError(rep.condition + ": no sample points");
  rep.tolerance = 1e-9 * scale;
  rep.accepted = strict ? rep.sup_margin < -rep.tolerance : rep.sup_margin <= rep.tolerance;
  return rep;
}

void require_dim(const CoefficientField& c, const Expr& W) {
  if (c.dim == 1 && W.depends_on(Var::x2)) throw ModelError("W mentions x2 in a one-dimensional problem");
}

}  // namespace

MarginReport check_drift_bound(const CoefficientField& c, const LyapunovData& L, const SampleSpec& spec) {
  require_dim(c, L.W);
  const OperatorImage AW(c, L.W);
  return sweep("drift bound: A W - lambda W < 0", c.dim, c.period, spec, 0.0, true, [&](const Point& p) {
    const double aw = AW(p), w = evaluate(L.W, p);
    return std::pair{aw - L.lambda * w, std::abs(aw) + std::abs(L.lambda * w)};
  });
}

DriftScan scan_drift_lambda(const CoefficientField& c, LyapunovData L, const SampleSpec& spec, int lambda_max) {
  DriftScan out;
  for (int lam = 0; lam <= lambda_max; ++lam) {
    L.lambda = lam;
    out.report = check_drift_bound(c, L, spec);
    if (out.report.accepted) {
      out.lambda_star = lam;
      break;
    }
  }
  return out;
}

DissipativityReport check_dissipativity(const CoefficientField& c, const LyapunovData& L, const SampleSpec& spec) {
  require_dim(c, L.W);
  if (!(L.cc > 0.0)) throw ModelError("dissipativity needs cc > 0");
  const OperatorImage AW(c, L.W);
  double min_w = std::numeric_limits<double>::infinity();
  DissipativityReport out;
  static_cast<MarginReport&>(out) =
      sweep("dissipativity: A W <= a - cc W", c.dim, c.period, spec, 0.0, false, [&](const Point& p) {
        const double aw = AW(p), w = evaluate(L.W, p);
        min_w = std::min(min_w, w);
        return std::pair{aw - L.a + L.cc * w, std::abs(aw) + std::abs(L.a) + std::abs(L.cc * w)};
      });
  out.a_over_c = L.a / L.cc;
  out.min_W = min_w;
  out.measure_bound = min_w + out.a_over_c;
  return out;
}

MarginReport check_superlinear(const CoefficientField& c, const LyapunovData& L, const SampleSpec& spec) {
  require_dim(c, L.W);
  const std::string condition = "superlinear: A W <= -g(W) for |x| >= R0";
  if (!(L.g.gamma > 1.0)) {
    MarginReport rep;
    rep.condition = condition;
    rep.sup_margin = std::numeric_limits<double>::infinity();
    rep.note = "gamma <= 1: 1/g is not integrable at infinity";
    return rep;
  }
  if (!(L.g.c > 0.0)) throw ModelError("g needs c > 0");
  const OperatorImage AW(c, L.W);
  return sweep(condition, c.dim, c.period, spec, L.R0, false, [&](const Point& p) {
    const double aw = AW(p), gw = L.g(evaluate(L.W, p));
    return std::pair{aw + gw, std::abs(aw) + gw};
  });
}

MarginReport check_log_drift(const CoefficientField& c, double cL, double gamma, double R0, const SampleSpec& spec) {
  const std::string condition = "log drift: Tr Q + <b,x> - 2<Qx,x>/|x|^2 <= -c |x|^2 (log|x|)^gamma";
  if (!(cL > 0.0)) throw ModelError("log drift needs c > 0");
  if (!(R0 > 1.0)) throw ModelError("log drift needs R0 > 1");
  if (!(gamma > 1.0)) {
    MarginReport rep;
    rep.condition = condition;
    rep.sup_margin = std::numeric_limits<double>::infinity();
    rep.note = "gamma <= 1: 1/g is not integrable at infinity";
    return rep;
  }
  return sweep(condition, c.dim, c.period, spec, R0, false, [&](const Point& p) {
    const double x[2] = {p.x1, p.x2};
    double trace = 0.0, bx = 0.0, qxx = 0.0, r2 = 0.0;
    for (int i = 0; i < c.dim; ++i) {
      trace += evaluate(c.q(i, i), p);
      bx += evaluate(c.b(i), p) * x[i];
      r2 += x[i] * x[i];
      for (int j = 0; j < c.dim; ++j)
        if (!c.q(i, j).is_zero()) qxx += evaluate(c.q(i, j), p) * x[i] * x[j];
    }
    const double lhs = trace + bx - 2.0 * qxx / r2;
    const double rhs = -cL * r2 * std::pow(0.5 * std::log(r2), gamma);
    return std::pair{lhs - rhs, std::abs(lhs) + std::abs(rhs)};
  });
}

MarginReport check_lyapunov_function(const LyapunovData& L, int dim, const SampleSpec& spec) {
  MarginReport rep;
  rep.condition = "W positive and radially nondecreasing on [R0, R_check]";
  rep.sup_margin = -std::numeric_limits<double>::infinity();
  const double lo = L.R0 > 0.0 ? L.R0 : spec.R_domain / 256.0;
  double scale = 1.0;
  bool positive = true;
  for (const XY& e : directions(dim, spec)) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double r : geometric_ladder(lo, spec.R_check(), spec.ladder_points)) {
      const Point p{0.0, r * e[0], r * e[1]};
      const double w = evaluate(L.W, p);
      scale = std::max(scale, std::abs(w));
      positive = positive && w > 0.0;
      // margin: decrease along the ray, or -W where W is not positive
      const double m = std::max(-w, prev - w);
      ++rep.samples;
      if (m > rep.sup_margin || (m == rep.sup_margin && lex_less(p, rep.witness))) {
        rep.sup_margin = m;
        rep.witness = p;
      }
      prev = w;
    }
  }
  rep.tolerance = 1e-12 * scale;
  rep.accepted = positive && rep.sup_margin <= rep.tolerance;
  return rep;
}

double ComparisonSolution::exact(double zeta0, double c, double gamma, double s) {
  if (gamma == 1.0) return zeta0 * std::exp(-c * s);
  return std::pow(std::pow(zeta0, 1.0 - gamma) + c * (gamma - 1.0) * s, -1.0 / (gamma - 1.0));
}

double ComparisonSolution::bound(double c, double gamma, double delta) {
  if (gamma == 1.0) return std::numeric_limits<double>::infinity();
  return std::pow(c * (gamma - 1.0) * delta, -1.0 / (gamma - 1.0));
}

double ComparisonSolution::max_relative_error() const {
  double e = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    e = std::max(e, std::abs(values[k] - closed_form[k]) / std::abs(closed_form[k]));
  return e;
}

ComparisonSolution solve_comparison(double zeta0, double c, double gamma, double horizon, double dt) {
  if (!(zeta0 > 0.0)) throw ModelError("comparison ODE needs zeta0 > 0");
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw ModelError("comparison ODE needs dt > 0 and horizon >= 0");
  if (!(c > 0.0) || !(gamma >= 1.0)) throw ModelError("comparison ODE needs c > 0 and gamma >= 1");
  ComparisonSolution out{c, gamma, zeta0, {}, {}, {}};
  const auto n = static_cast<long>(std::ceil(horizon / dt - 1e-9));
  auto f = [&](double z) { return -c * std::pow(z, gamma); };
  double z = zeta0, s = 0.0;
  out.times.push_back(0.0);
  out.values.push_back(z);
  for (long k = 1; k <= n; ++k) {
    const double next = std::min(horizon, static_cast<double>(k) * dt);
    // Local step keeps h |f'(z)| <= 0.02 so RK4 stays far inside its
    // stability region while z is large.
    while (s < next) {
      const double stiff = c * gamma * std::pow(z, gamma - 1.0);
      const double h_max = std::min(dt, 0.02 / stiff);
      const double remaining = next - s;
      const double h = remaining <= h_max ? remaining : remaining / std::ceil(remaining / h_max);
      const double k1 = f(z), k2 = f(z + 0.5 * h * k1), k3 = f(z + 0.5 * h * k2), k4 = f(z + h * k3);
      z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      s = remaining <= h_max ? next : s + h;
    }
    out.times.push_back(next);
    out.values.push_back(z);
  }
  for (double t : out.times) out.closed_form.push_back(ComparisonSolution::exact(zeta0, c, gamma, t));
  return out;
}

Eigen::VectorXd blended_lyapunov_nodes(const Expr& W, double R0, const Grid& g, double t) {
  Eigen::VectorXd v(g.size());
  if (!(R0 > 0.0)) return g.sample(W, t);
  const double inner = 0.5 * R0;
  const double c0 = evaluate(W, {t, inner, 0.0});
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const auto x = g.node(k);
    const double r = std::hypot(x[0], x[1]);
    if (r <= inner) {
      v[k] = c0;
      continue;
    }
    const double w = evaluate(W, {t, x[0], x[1]});
    if (r >= R0) {
      v[k] = w;
      continue;
    }
    const double tau = (r - inner) / inner;
    const double S = tau * tau * (3.0 - 2.0 * tau);
    v[k] = c0 + S * (w - c0);
  }
  return v;
}

SupersolutionReport supersolution_check(std::shared_ptr<const StepCache> steps, double r, double s, double t,
                                        const LyapunovData& L, int checkpoints) {
  if (!steps) throw ModelError("supersolution_check needs a step cache");
  if (!(r <= s && s <= t)) throw ModelError("supersolution_check needs r <= s <= t");
  if (checkpoints < 2) throw ModelError("supersolution_check needs at least 2 checkpoints");
  const Grid& g = steps->grid();
  const std::int64_t kr = steps->time_index(r), ks = steps->time_index(s), kt = steps->time_index(t);
  const auto K = static_cast<Eigen::Index>(kt - kr);
  const double dt = steps->dt();

  const std::vector<Eigen::Index> core = g.core(0.5 * g.half_width());
  const auto nc = static_cast<Eigen::Index>(core.size());
  const Eigen::VectorXd W = blended_lyapunov_nodes(L.W, L.R0, g);

  SupersolutionReport rep;
  rep.nodes = core.size();
  double wscale = 0.0;
  for (auto k : core) wscale = std::max(wscale, std::abs(W[k]));
  rep.tolerance = 1e-3 * (1.0 + wscale);

  // Column j of Y is G(t,sigma)^T e_{core[j]}; walking sigma down from t.
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(g.size(), nc);
  for (Eigen::Index j = 0; j < nc; ++j) Y(core[static_cast<std::size_t>(j)], j) = 1.0;
  Eigen::MatrixXd GW(nc, K + 1), GAW(nc, K + 1);  // column m <-> sigma = r + m dt
  double shift = 0.0;
  for (Eigen::Index m = K;; --m) {
    const double sigma = static_cast<double>(kr + m) * dt;
    const Eigen::VectorXd AW = assemble_generator(steps->field(), g, sigma, steps->convection()) * W;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (!g.is_boundary(i)) shift = std::max(shift, AW[i] + L.g(W[i]));
    GW.col(m) = Y.transpose() * W;
    GAW.col(m) = Y.transpose() * AW;
    if (m == 0) break;
    steps->step_transpose(kr + m - 1, Y);
  }
  rep.g_shift = shift;

  // Supersolution inequality for every s' in [r, s].
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(nc);
  const auto Ms = static_cast<Eigen::Index>(ks - kr);
  for (Eigen::Index m = 1; m <= Ms; ++m) {
    integral += 0.5 * dt * (GAW.col(m - 1) + GAW.col(m));
    const Eigen::VectorXd viol = -((GW.col(m) - GW.col(0)) + integral);
    rep.super_worst = std::max(rep.super_worst, viol.maxCoeff());
  }

  // beta(u) = G(t, t-u)W is column K - u/dt; cumulative trapezoid of g(beta) - shift.
  Eigen::MatrixXd cum = Eigen::MatrixXd::Zero(nc, K + 1);
  auto gb = [&](Eigen::Index u) {
    Eigen::VectorXd v(nc);
    for (Eigen::Index j = 0; j < nc; ++j) v[j] = L.g(GW(j, K - u)) - shift;
    return v;
  };
  Eigen::VectorXd prev = gb(0);
  for (Eigen::Index u = 1; u <= K; ++u) {
    const Eigen::VectorXd cur = gb(u);
    cum.col(u) = cum.col(u - 1) + 0.5 * dt * (prev + cur);
    prev = cur;
  }
  rep.beta_worst = K > 0 ? -std::numeric_limits<double>::infinity() : 0.0;
  std::vector<Eigen::Index> marks;
  for (int q = 0; q < checkpoints; ++q) {
    const auto u = static_cast<Eigen::Index>(std::llround(static_cast<double>(K) * q / (checkpoints - 1)));
    if (marks.empty() || u != marks.back()) marks.push_back(u);
  }
  for (std::size_t a = 0; a < marks.size(); ++a)
    for (std::size_t b = a + 1; b < marks.size(); ++b) {
      const Eigen::Index ua = marks[a], ub = marks[b];
      const Eigen::VectorXd viol = (GW.col(K - ub) - GW.col(K - ua)) + (cum.col(ub) - cum.col(ua));
      rep.beta_worst = std::max(rep.beta_worst, viol.maxCoeff());
      ++rep.beta_pairs;
    }
  rep.super_holds = rep.super_worst <= rep.tolerance;
  rep.beta_holds = rep.beta_worst <= rep.tolerance;
  return rep;
}

}  // namespace nape

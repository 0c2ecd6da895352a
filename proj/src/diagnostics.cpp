#include "nape/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "nape/errors.hpp"

namespace nape {

std::vector<NamedFunction> standard_battery() {
  return {{"one", parse_expr("1")},
          {"x", parse_expr("x1")},
          {"x2", parse_expr("x1^2")},
          {"sin", parse_expr("sin(x1)")},
          {"indicator", parse_expr("0.5*(1-tanh(8*(x1^2-1)))")}};
}

std::vector<NamedFunction> compact_battery() {
  return {{"gauss", parse_expr("exp(-2*x1^2)")},
          {"x_gauss", parse_expr("x1*exp(-2*x1^2)")},
          {"shifted_gauss", parse_expr("exp(-3*(x1-0.5)^2)")}};
}

std::vector<Eigen::VectorXd> sample_battery(const std::vector<NamedFunction>& battery, const Grid& g) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(battery.size());
  for (const auto& f : battery) out.push_back(g.sample(f.expr));
  return out;
}

CompositionReport chapman_kolmogorov_check(std::shared_ptr<const StepCache> steps, double s, double r, double t,
                                           const std::vector<Eigen::VectorXd>& battery) {
  if (!(s <= r && r <= t)) throw ModelError("composition check needs s <= r <= t");
  const Propagator Gts(steps, s, t), Gtr(steps, r, t), Grs(steps, s, r);
  CompositionReport out;
  for (const auto& phi : battery) {
    const double res = (Gts.apply(phi) - Gtr.apply(Grs.apply(phi))).lpNorm<Eigen::Infinity>();
    out.per_function.push_back(res);
    out.residual = std::max(out.residual, res);
  }
  return out;
}

ExpandingDomainReport expanding_domain_study(const CoefficientField& c, int dim, double h, double s, double t,
                                             double dt, const Expr& phi, const std::vector<double>& ladder) {
  if (ladder.size() < 2) throw ModelError("expanding-domain study needs at least two radii");
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (k > 0 && !(ladder[k] > ladder[k - 1])) throw ModelError("radius ladder must increase");
    const double m = ladder[k] / h;
    if (std::abs(m - std::round(m)) > 1e-9 * m) throw ModelError("radius is not a multiple of h: grids are not nested");
  }
  ExpandingDomainReport out;
  out.radii = ladder;
  out.core_radius = 0.5 * ladder.front();

  std::vector<std::array<double, 2>> core_pts;
  {
    const Grid g0(dim, ladder.front(), h);
    for (auto k : g0.core(out.core_radius)) core_pts.push_back(g0.node(k));
  }
  out.core_x.resize(static_cast<Eigen::Index>(core_pts.size()));
  for (std::size_t j = 0; j < core_pts.size(); ++j) out.core_x[static_cast<Eigen::Index>(j)] = core_pts[j][0];

  for (double R : ladder) {
    const Grid g(dim, R, h);
    const Eigen::VectorXd phi_nodes = g.sample(phi);
    for (auto k : g.interior())
      if (phi_nodes[k] < 0.0) throw ModelError("expanding-domain study needs phi >= 0");
    const Eigen::VectorXd u =
        propagate(c, g, s, t, dt, 1.0, TestFunction::nodes(g, phi_nodes)).values;
    Eigen::VectorXd core(static_cast<Eigen::Index>(core_pts.size()));
    for (std::size_t j = 0; j < core_pts.size(); ++j) {
      const Eigen::Index i = g.index_of(core_pts[j][0], core_pts[j][1]);
      if (i < 0) throw ModelError("grids are not nested");
      core[static_cast<Eigen::Index>(j)] = u[i];
    }
    out.core_values.push_back(std::move(core));
  }
  for (std::size_t k = 1; k < out.core_values.size(); ++k) {
    const Eigen::VectorXd d = out.core_values[k] - out.core_values[k - 1];
    out.monotonicity_violation.push_back(std::max(0.0, -d.minCoeff()));
    out.increments.push_back(d.lpNorm<Eigen::Infinity>());
    if (out.monotonicity_violation.back() > 1e-12) out.monotone = false;
    if (k > 1 && !(out.increments[k - 1] < out.increments[k - 2])) out.increments_decreasing = false;
  }
  return out;
}

DerivativeRelationReport derivative_relation_check(std::shared_ptr<const StepCache> steps, double s, double t,
                                                   const std::vector<NamedFunction>& battery) {
  const Grid& g = steps->grid();
  const double dt = steps->dt();
  DerivativeRelationReport out;
  out.delta = dt;
  if (!(t - s > dt)) throw ModelError("derivative relation needs t - s > dt");
  const Propagator G0(steps, s, t), Gplus(steps, s + dt, t), Gminus(steps, s - dt, t);
  const auto core = g.core(0.5 * g.half_width());

  for (const auto& f : battery) {
    const Eigen::VectorXd phi = g.sample(f.expr);
    const double scale = phi.lpNorm<Eigen::Infinity>();
    for (Eigen::Index k = 0; k < g.size(); ++k)
      if (g.radius(k) > 0.5 * g.half_width() && std::abs(phi[k]) > 1e-10 * scale)
        throw ModelError(f.name + " is not supported in |x| <= R/2");

    const OperatorImage Aphi(steps->field(), f.expr);
    Eigen::VectorXd aphi = Eigen::VectorXd::Zero(g.size());
    for (auto k : g.interior()) {
      const auto x = g.node(k);
      aphi[k] = Aphi({s, x[0], x[1]});
    }
    const Eigen::VectorXd r = (Gplus.apply(phi) - Gminus.apply(phi)) / (2.0 * dt) + G0.apply(aphi);
    double worst = 0.0;
    for (auto k : core) worst = std::max(worst, std::abs(r[k]));
    out.per_function.push_back(worst);
    out.residual = std::max(out.residual, worst);
  }
  out.constant = out.residual / (dt + g.spacing() * g.spacing());
  return out;
}

}  // namespace nape

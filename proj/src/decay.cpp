#include "nape/decay.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "nape/errors.hpp"

namespace nape {

DecayCurves decay_curves(std::shared_ptr<const StepCache> steps, const EvolutionMeasureFamily& F, double s,
                         const Eigen::VectorXd& phi, int k_max, const std::vector<double>& p_list) {
  if (k_max < 1) throw ModelError("decay curves need k_max >= 1");
  const Grid& g = steps->grid();
  DecayCurves out;
  out.phase = s;
  out.period = F.period;
  out.p_list = p_list;
  out.lp.assign(p_list.size(), {});
  const double m = F.mean(s, phi);
  const auto core = g.core(0.5 * g.half_width());
  const auto interior = g.interior();

  const PeriodMap V(steps, s);
  Eigen::MatrixXd X(g.size(), 2);
  X.col(0) = phi;
  X.col(1).setOnes();
  for (int k = 1; k <= k_max; ++k) {
    V.apply(X);
    // Rescale both columns together; the ratio is what matters.
    const double norm = X.col(1).lpNorm<Eigen::Infinity>();
    if (!(norm > 0.0)) throw NumericalError("G(t,s)1 vanished");
    X /= norm;
    Eigen::VectorXd err = Eigen::VectorXd::Zero(g.size());
    for (auto i : interior)
      if (X(i, 1) > 0.0) err[i] = X(i, 0) / X(i, 1) - m;
    double sup = 0.0;
    for (auto i : core) sup = std::max(sup, std::abs(err[i]));
    out.sup.push_back(sup);
    for (std::size_t q = 0; q < p_list.size(); ++q) out.lp[q].push_back(lp_norm(F, s, err, p_list[q]));
  }
  return out;
}

RateFit fit_rate(const std::vector<double>& e, double period, const std::string& tag, double lo, double hi) {
  RateFit fit;
  fit.tag = tag;
  // Upper envelope from the right absorbs oscillation from a complex lambda2.
  std::vector<double> env(e.size());
  double run = 0.0;
  for (std::size_t k = e.size(); k-- > 0;) env[k] = run = std::max(run, e[k]);

  std::vector<double> t, y;
  for (std::size_t k = 0; k < env.size(); ++k) {
    if (env[k] < lo || env[k] > hi) continue;
    const int kk = static_cast<int>(k) + 1;
    if (t.empty()) fit.k_min = kk;
    fit.k_max = kk;
    t.push_back(kk * period);
    y.push_back(std::log(env[k]));
  }
  fit.points = static_cast<int>(t.size());
  if (fit.points < 4)
    throw NumericalError("decay fit window [" + std::to_string(lo) + ", " + std::to_string(hi) + "] holds " +
                         std::to_string(fit.points) + " points for " + tag);
  const Eigen::Map<const Eigen::VectorXd> tv(t.data(), fit.points), yv(y.data(), fit.points);
  const double tm = tv.mean(), ym = yv.mean();
  const Eigen::ArrayXd dt = tv.array() - tm, dy = yv.array() - ym;
  fit.rate = (dt * dy).sum() / dt.square().sum();
  const double ss_res = (dy - fit.rate * dt).square().sum();
  const double ss_tot = dy.square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.reliable = fit.r_squared >= 0.99;
  return fit;
}

DecayReport decay_fit(std::shared_ptr<const StepCache> steps, const EvolutionMeasureFamily& F, double omega0,
                      double s, const NamedFunction& phi, int k_max, const std::vector<double>& p_list) {
  DecayReport rep;
  rep.function = phi.name;
  rep.omega0 = omega0;
  rep.curves = decay_curves(steps, F, s, steps->grid().sample(phi.expr), k_max, p_list);
  const double T = rep.curves.period;
  rep.fits.push_back(fit_rate(rep.curves.sup, T, "sup"));
  for (std::size_t q = 0; q < p_list.size(); ++q) {
    std::string tag = "L" + std::to_string(p_list[q]);
    tag.erase(tag.find_last_not_of('0') + 1);
    if (tag.back() == '.') tag.pop_back();
    rep.fits.push_back(fit_rate(rep.curves.lp[q], T, tag));
  }
  const double scale = std::abs(omega0);
  for (const auto& a : rep.fits) {
    rep.max_relative_to_omega0 = std::max(rep.max_relative_to_omega0, std::abs(a.rate - omega0) / scale);
    if (a.rate < omega0 - 0.1 * scale) rep.none_below = false;
    for (const auto& b : rep.fits)
      rep.max_relative_spread = std::max(rep.max_relative_spread, std::abs(a.rate - b.rate) / scale);
  }
  return rep;
}

OperatorDecay operator_decay(std::shared_ptr<const StepCache> steps, const EvolutionMeasureFamily& F, double omega0,
                             double s, int k_max) {
  const Grid& g = steps->grid();
  const PeriodMap V(steps, s);
  const Eigen::MatrixXd& M = V.matrix();
  const Eigen::VectorXd& w = F.at(s);
  const auto core = g.core(0.5 * g.half_width());
  OperatorDecay out;
  Eigen::MatrixXd Vk = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  for (int k = 1; k <= k_max; ++k) {
    Vk = (M * Vk).eval();
    Vk /= Vk.cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (auto i : core) {
      const double r = Vk.row(i).sum();
      if (!(r > 0.0)) throw NumericalError("G(t,s)1 vanished on the core");
      worst = std::max(worst, (Vk.row(i).transpose() / r - w).lpNorm<1>());
    }
    out.error.push_back(worst);
  }
  out.fit = fit_rate(out.error, F.period, "operator");
  out.none_below = out.fit.rate >= omega0 - 0.1 * std::abs(omega0);
  return out;
}

CompactnessProbe lp_compactness_probe(const Propagator& P, double p, Weighting weighting,
                                      const EvolutionMeasureFamily* F) {
  if (!(p >= 1.0)) throw ModelError("compactness probe needs p >= 1");
  const Grid& g = P.grid();
  if (g.size() > kDenseNodeLimit) throw ModelError("compactness probe needs a materialized kernel");
  CompactnessProbe out;
  out.weighting = weighting;
  out.p = p;

  std::vector<Eigen::Index> nodes;
  Eigen::VectorXd ws, wt;
  if (weighting == Weighting::invariant) {
    if (!F) throw ModelError("invariant weighting needs the measure family");
    ws = F->at(P.s());
    wt = F->at(P.t());
    for (auto k : g.interior())
      if (ws[k] > 0.0 && wt[k] > 0.0) nodes.push_back(k);
  } else {
    nodes = g.interior();
    ws = wt = Eigen::VectorXd::Constant(g.size(), g.cell_volume());
  }
  const auto n = static_cast<Eigen::Index>(nodes.size());
  out.nodes = n;
  const Eigen::MatrixXd K = P.kernel();
  // A = W_t^{1/p} K W_s^{-1/p} maps l^p coordinates of L^p(mu_s) to those of L^p(mu_t).
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      A(i, j) = std::pow(wt[nodes[static_cast<std::size_t>(i)]], 1.0 / p) *
                K(nodes[static_cast<std::size_t>(i)], nodes[static_cast<std::size_t>(j)]) /
                std::pow(ws[nodes[static_cast<std::size_t>(j)]], 1.0 / p);

  const Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  const Eigen::VectorXd sv = svd.singularValues();
  out.singular_values = sv[0] > 0.0 ? Eigen::VectorXd(sv / sv[0]) : sv;
  out.k_star = (out.singular_values.array() > 1e-6).count();

  // Greedy net of the images of the unit coordinate vectors.
  auto lp = [p](const Eigen::VectorXd& v) { return std::pow(v.array().abs().pow(p).sum(), 1.0 / p); };
  double max_norm = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) max_norm = std::max(max_norm, lp(A.col(j)));
  const double radius = 1e-3 * max_norm;
  std::vector<Eigen::Index> net;
  for (Eigen::Index j = 0; j < n; ++j) {
    bool covered = false;
    for (auto c : net) {
      if (lp(A.col(j) - A.col(c)) <= radius) {
        covered = true;
        break;
      }
    }
    if (!covered) net.push_back(j);
  }
  out.net_size = static_cast<Eigen::Index>(net.size());
  return out;
}

}  // namespace nape

#include "nape/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "nape/errors.hpp"

namespace nape {

namespace {

std::vector<Eigen::Index> base_points(const Grid& g) { return g.core(0.5 * g.half_width()); }

Eigen::MatrixXd unit_columns(const Grid& g, const std::vector<Eigen::Index>& nodes) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(g.size(), static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t j = 0; j < nodes.size(); ++j) Y(nodes[j], static_cast<Eigen::Index>(j)) = 1.0;
  return Y;
}

// Walks w from phase k_end*dt down to k_begin*dt with transposed steps,
// renormalizing after each; `visit(k, w)` sees the measure at phase k*dt.
template <class F>
void walk_down(const StepCache& steps, std::int64_t k_end, std::int64_t k_begin, Eigen::VectorXd& w,
               std::vector<double>* defects, F&& visit) {
  for (std::int64_t k = k_end - 1; k >= k_begin; --k) {
    steps.step_transpose(k, w);
    const double mass = w.sum();
    if (!(mass > 0.0)) throw NumericalError("measure lost all mass");
    if (defects) defects->push_back(1.0 - mass);
    w /= mass;
    visit(k, w);
  }
}

}  // namespace

TightnessProfile tightness_radius(const Propagator& P, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ModelError("tightness needs eps in (0,1)");
  const Grid& g = P.grid();
  TightnessProfile out;
  out.eps = eps;
  out.base = base_points(g);
  Eigen::MatrixXd K = unit_columns(g, out.base);  // columns become kernel rows
  P.apply_transpose_inplace(K);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(g.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return g.radius(a) < g.radius(b); });

  for (std::size_t j = 0; j < out.base.size(); ++j) {
    const auto col = K.col(static_cast<Eigen::Index>(j));
    const double defect = 1.0 - col.cwiseMax(0.0).sum();
    out.max_defect = std::max(out.max_defect, defect);
    double mass = 0.0, rho = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < order.size(); ++q) {
      mass += std::max(0.0, col[order[q]]);
      // Nodes at equal radius enter together.
      const bool last_at_radius = q + 1 == order.size() || g.radius(order[q + 1]) > g.radius(order[q]);
      if (last_at_radius && mass >= 1.0 - eps) {
        rho = g.radius(order[q]);
        break;
      }
    }
    if (!std::isfinite(rho)) out.resolvable = false;
    out.rho.push_back(rho);
    out.radius = std::max(out.radius, rho);
  }
  return out;
}

TightnessSweep tightness_monotone_check(std::shared_ptr<const StepCache> steps, double s, double r,
                                        const std::vector<double>& times, double eps) {
  if (!(r > s)) throw ModelError("tightness sweep starts at r > s");
  TightnessSweep out;
  out.slack = 2.0 * steps->grid().spacing();
  out.reference_radius = tightness_radius(Propagator(steps, s, r), eps).radius;
  for (double t : times) {
    if (t < r) throw ModelError("tightness sweep times must be >= r");
    const double rho = tightness_radius(Propagator(steps, s, t), eps).radius;
    out.times.push_back(t);
    out.radii.push_back(rho);
    if (!(rho <= out.reference_radius + out.slack)) out.holds = false;
  }
  return out;
}

std::size_t EvolutionMeasureFamily::phase_index(double s) const {
  double ph = std::fmod(s, period);
  if (ph < 0.0) ph += period;
  for (std::size_t j = 0; j < phases.size(); ++j) {
    const double d = std::abs(ph - phases[j]);
    if (d <= 1e-9 * period || std::abs(d - period) <= 1e-9 * period) return j;
  }
  throw ModelError("phase " + std::to_string(s) + " is not in the measure family");
}

const Eigen::VectorXd& EvolutionMeasureFamily::at(double s) const { return weights[phase_index(s)]; }

double EvolutionMeasureFamily::total_defect() const {
  return std::accumulate(step_defects.begin(), step_defects.end(), 0.0);
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return 0.5 * (a - b).lpNorm<1>(); }

EvolutionMeasureFamily periodic_measures(std::shared_ptr<const StepCache> steps, int m, int spot_checks) {
  if (m < 1) throw ModelError("phase count must be positive");
  const std::int64_t M = steps->steps_per_period();
  if (M % m != 0) throw ModelError("phase count must divide T/dt");
  const std::int64_t stride = M / m;

  const SpectralReport S = floquet_data(PeriodMap(steps, 0.0));
  if (S.degenerate) throw NumericalError("periodic measures need a simple leading multiplier: " + S.diagnostic);

  EvolutionMeasureFamily F;
  F.grid = steps->grid();
  F.period = steps->field().period;
  F.dt = steps->dt();
  F.lambda1 = S.lambda1;
  F.phases.resize(static_cast<std::size_t>(m));
  F.weights.resize(static_cast<std::size_t>(m));
  Eigen::VectorXd w = S.w.cwiseMax(0.0);
  w /= w.sum();
  const Eigen::VectorXd w0 = w;
  walk_down(*steps, M, 0, w, &F.step_defects, [&](std::int64_t k, const Eigen::VectorXd& v) {
    if (k % stride != 0) return;
    const auto j = static_cast<std::size_t>(k / stride);
    F.phases[j] = static_cast<double>(k) * F.dt;
    F.weights[j] = v;
  });
  F.fixed_point_tv = total_variation(F.weights[0], w0);

  for (int q = 1; q <= spot_checks && q < m + 1; ++q) {
    const auto j = static_cast<std::size_t>((static_cast<std::int64_t>(q) * m) / (spot_checks + 1));
    const SpectralReport Sj = floquet_data(PeriodMap(steps, F.phases[j]));
    Eigen::VectorXd wj = Sj.w.cwiseMax(0.0);
    wj /= wj.sum();
    F.spot_checks.push_back({F.phases[j], total_variation(wj, F.weights[j])});
  }
  return F;
}

InvarianceResidual invariance_residual(const EvolutionMeasureFamily& F, const Propagator& P,
                                       const std::vector<Eigen::VectorXd>& battery) {
  if (!(P.grid() == F.grid)) throw ModelError("propagator and measures live on different grids");
  const Eigen::VectorXd& ws = F.at(P.s());
  const Eigen::VectorXd& wt = F.at(P.t());
  InvarianceResidual out;
  for (const Eigen::VectorXd& phi : battery) {
    double sc = 0.0;
    for (auto k : F.grid.interior()) sc = std::max(sc, std::abs(phi[k]));
    out.scale = std::max(out.scale, sc);
    const double r = std::abs(wt.dot(P.apply(phi)) - ws.dot(phi));
    out.per_function.push_back(r);
    out.residual = std::max(out.residual, r);
  }
  return out;
}

double lp_norm(const EvolutionMeasureFamily& F, double s, const Eigen::VectorXd& phi, double p) {
  if (!(p >= 1.0)) throw ModelError("L^p norm needs p >= 1");
  const Eigen::VectorXd& w = F.at(s);
  return std::pow(w.dot(phi.cwiseAbs().array().pow(p).matrix()), 1.0 / p);
}

MeanBoundReport lyapunov_mean_bound(const EvolutionMeasureFamily& F, const Propagator& P, const LyapunovData& L) {
  if (!(L.cc > 0.0)) throw ModelError("mean bound needs cc > 0");
  const Grid& g = F.grid;
  const Eigen::VectorXd W = blended_lyapunov_nodes(L.W, L.R0, g);
  double min_w = std::numeric_limits<double>::infinity();
  for (auto k : g.interior()) min_w = std::min(min_w, W[k]);
  MeanBoundReport out;
  out.measure_bound = min_w + L.a / L.cc;
  out.tolerance = 1e-6 * (1.0 + std::abs(out.measure_bound));
  out.max_mean_W = -std::numeric_limits<double>::infinity();
  for (const auto& w : F.weights) out.max_mean_W = std::max(out.max_mean_W, w.dot(W));
  out.measure_bound_holds = out.max_mean_W <= out.measure_bound + out.tolerance;

  const Eigen::VectorXd GW = P.apply(W);
  out.pointwise_excess = -std::numeric_limits<double>::infinity();
  for (auto k : g.core(0.5 * g.half_width()))
    out.pointwise_excess = std::max(out.pointwise_excess, GW[k] - W[k] - L.a / L.cc);
  out.pointwise_bound_holds = out.pointwise_excess <= out.tolerance;
  return out;
}

UniformBoundReport uniform_lyapunov_bound(std::shared_ptr<const StepCache> steps, double t, double delta,
                                          const LyapunovData& L, double relative_slack) {
  const Grid& g = steps->grid();
  const Propagator P(steps, t - delta, t);
  const Eigen::VectorXd GW = P.apply(blended_lyapunov_nodes(L.W, L.R0, g));
  UniformBoundReport out;
  out.relative_slack = relative_slack;
  out.bound = ComparisonSolution::bound(L.g.c, L.g.gamma, delta);
  out.sup_core = -std::numeric_limits<double>::infinity();
  for (auto k : g.core(0.5 * g.half_width())) out.sup_core = std::max(out.sup_core, GW[k]);
  out.holds = out.sup_core <= out.bound * (1.0 + relative_slack);
  return out;
}

UniquenessProbe uniqueness_probe(std::shared_ptr<const StepCache> steps, const EvolutionMeasureFamily& F, int starts,
                                 std::uint64_t seed) {
  const Grid& g = steps->grid();
  const PeriodMap V(steps, 0.0);
  const std::int64_t M = steps->steps_per_period();
  const auto m = static_cast<std::int64_t>(F.phases.size());
  const std::int64_t stride = M / m;
  UniquenessProbe out;
  out.starts = starts;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int q = 0; q < starts; ++q) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(g.size());
    for (auto k : g.interior()) w[k] = u(rng);
    w /= w.sum();
    int it = 0;
    for (; it < 20000; ++it) {
      Eigen::MatrixXd X = w;
      V.apply_transpose(X);
      Eigen::VectorXd next = X.col(0) / X.col(0).sum();
      const double change = total_variation(next, w);
      w = std::move(next);
      if (change <= 1e-14) break;
    }
    out.max_iterations = std::max(out.max_iterations, it + 1);
    walk_down(*steps, M, 0, w, nullptr, [&](std::int64_t k, const Eigen::VectorXd& v) {
      if (k % stride != 0) return;
      out.max_total_variation =
          std::max(out.max_total_variation, total_variation(v, F.weights[static_cast<std::size_t>(k / stride)]));
    });
  }
  return out;
}

}  // namespace nape

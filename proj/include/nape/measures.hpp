#pragma once

// Tightness of the discrete transition kernels and the periodic evolution
// system of measures {mu_s}, realized as phase-indexed probability vectors.

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include "nape/evolution.hpp"
#include "nape/lyapunov.hpp"
#include "nape/spectral.hpp"

namespace nape {

struct TightnessProfile {
  double eps = 0.0;
  double radius = 0.0;  // max over base points; +inf when not resolvable
  bool resolvable = true;
  std::vector<Eigen::Index> base;  // interior nodes with |x| <= R/2
  std::vector<double> rho;         // per base point
  double max_defect = 0.0;
};

/// Smallest node radius rho with p_{t,s,x}(|y| <= rho) >= 1 - eps for every
/// base point; defect mass counts as escaped.
TightnessProfile tightness_radius(const Propagator& P, double eps);

struct TightnessSweep {
  double reference_radius = 0.0;  // at t = r
  std::vector<double> times, radii;
  double slack = 0.0;  // 2h
  bool holds = true;
};

/// rho(eps, t) <= rho(eps, r) + 2h for every t in `times` (all >= r).
TightnessSweep tightness_monotone_check(std::shared_ptr<const StepCache> steps, double s, double r,
                                        const std::vector<double>& times, double eps);

struct SpotCheck {
  double phase = 0.0;
  double total_variation = 0.0;
};

/// mu_s at the phases j T/m, j = 0..m-1, as probability vectors on the grid.
struct EvolutionMeasureFamily {
  Grid grid{1, 1.0, 0.5};
  double period = 1.0;
  double dt = 0.0;
  std::vector<double> phases;
  std::vector<Eigen::VectorXd> weights;
  double lambda1 = 0.0;
  std::vector<double> step_defects;  // 1 - mass before renormalization, per step of one period
  double fixed_point_tv = 0.0;       // after a full period back at phase 0
  std::vector<SpotCheck> spot_checks;

  /// Throws ModelError when s mod T is not a stored phase.
  const Eigen::VectorXd& at(double s) const;
  std::size_t phase_index(double s) const;
  double mean(double s, const Eigen::VectorXd& phi) const { return at(s).dot(phi); }
  /// Weights divided by the cell volume.
  Eigen::VectorXd density(std::size_t j) const { return weights[j] / grid.cell_volume(); }
  double total_defect() const;
};

/// Left Perron vector of V(0) walked down through the period with transposed
/// single steps and renormalization. Spot-checks `spot_checks` phases against
/// direct eigensolves of V(s_j) (total variation is recorded, not enforced).
/// Throws NumericalError when the spectral gap is degenerate.
EvolutionMeasureFamily periodic_measures(std::shared_ptr<const StepCache> steps, int m = 8, int spot_checks = 2);

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct InvarianceResidual {
  double residual = 0.0;           // max over the battery
  std::vector<double> per_function;
  double scale = 1.0;              // max |phi| over the battery on interior nodes
};

/// max |<w(t), G(t,s) phi> - <w(s), phi>| over the battery.
InvarianceResidual invariance_residual(const EvolutionMeasureFamily& F, const Propagator& P,
                                       const std::vector<Eigen::VectorXd>& battery);

double lp_norm(const EvolutionMeasureFamily& F, double s, const Eigen::VectorXd& phi, double p);

struct MeanBoundReport {
  bool measure_bound_holds = true;
  bool pointwise_bound_holds = true;
  double max_mean_W = 0.0;     // max over phases of <w, W>
  double measure_bound = 0.0;  // min W + a/cc
  double pointwise_excess = 0.0;  // max over core of G(t,s)W - W - a/cc
  double tolerance = 0.0;
};

/// <w(s), W> <= min W + a/cc + tol at every phase and G(t,s)W <= W + a/cc + tol
/// on the core, tol = 1e-6 (1 + |min W + a/cc|).
MeanBoundReport lyapunov_mean_bound(const EvolutionMeasureFamily& F, const Propagator& P, const LyapunovData& L);

struct UniformBoundReport {
  double sup_core = 0.0;  // sup over |x| <= R/2 of G(t, t-delta) W
  double bound = 0.0;     // C(delta)
  double relative_slack = 0.05;
  bool holds = true;
};

/// sup_core G(t, t-delta)W <= C(delta) (1 + relative_slack), W blended near 0.
UniformBoundReport uniform_lyapunov_bound(std::shared_ptr<const StepCache> steps, double t, double delta,
                                          const LyapunovData& L, double relative_slack = 0.05);

struct UniquenessProbe {
  int starts = 0;
  double max_total_variation = 0.0;  // over starts and phases
  int max_iterations = 0;
};

/// Power iteration with V(0)^T from `starts` seeded positive vectors, walked
/// through the phases of F and compared with it.
UniquenessProbe uniqueness_probe(std::shared_ptr<const StepCache> steps, const EvolutionMeasureFamily& F,
                                 int starts = 5, std::uint64_t seed = 1);

}  // namespace nape

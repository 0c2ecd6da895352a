#pragma once

// Exponential decay of G(s+kT, s) phi towards m_s phi, and singular-value
// signatures of compactness for the kernel operator.

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nape/diagnostics.hpp"
#include "nape/measures.hpp"

namespace nape {

/// e_k for k = 1..k_max. sup: max over the core |x| <= R/2 of
/// |G phi / G 1 - m_s phi|; L^p: the same error in L^p(mu_s).
struct DecayCurves {
  double phase = 0.0;
  double period = 1.0;
  std::vector<double> sup;
  std::vector<double> p_list;
  std::vector<std::vector<double>> lp;  // lp[i][k-1] for p_list[i]
};

DecayCurves decay_curves(std::shared_ptr<const StepCache> steps, const EvolutionMeasureFamily& F, double s,
                         const Eigen::VectorXd& phi, int k_max, const std::vector<double>& p_list);

struct RateFit {
  std::string tag;  // "sup" or "L<p>"
  double rate = 0.0;  // slope of log e vs kT
  int k_min = 0, k_max = 0;
  int points = 0;
  double r_squared = 0.0;
  bool reliable = false;  // points >= 4 and R^2 >= 0.99
};

/// Least squares on the upper envelope max_{j >= k} e_j restricted to
/// e_k in [lo, hi]. Throws NumericalError when fewer than 4 points remain.
RateFit fit_rate(const std::vector<double>& e, double period, const std::string& tag, double lo = 1e-10,
                 double hi = 1e-3);

struct DecayReport {
  std::string function;
  double omega0 = 0.0;
  DecayCurves curves;
  std::vector<RateFit> fits;  // sup first, then p_list order
  double max_relative_spread = 0.0;  // max |r_i - r_j| / |omega0| over fits
  double max_relative_to_omega0 = 0.0;  // max |r_i - omega0| / |omega0|
  bool none_below = true;  // every rate >= omega0 - 0.1 |omega0|
};

/// Default p list {2, 4}. Throws NumericalError on an empty fit window.
DecayReport decay_fit(std::shared_ptr<const StepCache> steps, const EvolutionMeasureFamily& F, double omega0,
                      double s, const NamedFunction& phi, int k_max = 24,
                      const std::vector<double>& p_list = {2.0, 4.0});

struct OperatorDecay {
  std::vector<double> error;  // sup over |phi| <= 1 of the sup-norm error, per k
  RateFit fit;
  bool none_below = true;  // fit.rate >= omega0 - 0.1 |omega0|
};

/// Operator-norm version of the sup curve: max over core rows i of
/// sum_j |V^k_ij / (V^k 1)_i - w_j|. This is the quantity the rate bound
/// controls; single functions may decay faster when they miss the lambda2 mode.
/// Needs a dense period map.
OperatorDecay operator_decay(std::shared_ptr<const StepCache> steps, const EvolutionMeasureFamily& F, double omega0,
                             double s, int k_max = 24);

enum class Weighting { lebesgue, invariant };

struct CompactnessProbe {
  Weighting weighting = Weighting::lebesgue;
  double p = 2.0;
  Eigen::Index nodes = 0;
  Eigen::VectorXd singular_values;  // normalized by the largest (p = 2)
  Eigen::Index k_star = 0;          // number of sigma_k / sigma_1 > 1e-6
  Eigen::Index net_size = 0;        // greedy 1e-3 net of the weighted columns in l^p
};

/// Kernel operator of G(t,s) between discretized L^p spaces on the interior
/// nodes, with dx (cell volume) or mu_s, mu_t weights. For `invariant`
/// weighting nodes with zero weight are dropped and F must hold phases s, t.
CompactnessProbe lp_compactness_probe(const Propagator& P, double p, Weighting weighting = Weighting::lebesgue,
                                      const EvolutionMeasureFamily* F = nullptr);

}  // namespace nape

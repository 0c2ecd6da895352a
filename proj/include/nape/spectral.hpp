#pragma once

// Period map V(s) = G(s+T, s) and its leading Floquet data.

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "nape/evolution.hpp"

namespace nape {

/// V(s), dense when the node count allows it, matrix-free otherwise.
class PeriodMap {
 public:
  PeriodMap(std::shared_ptr<const StepCache> steps, double s, bool materialize = true);
  /// A bare matrix standing in for V (tests, small examples).
  static PeriodMap from_matrix(Eigen::MatrixXd V, double period = 1.0);

  double phase() const { return phase_; }
  double period() const { return period_; }
  Eigen::Index size() const { return n_; }
  bool is_dense() const { return dense_.has_value(); }
  const Eigen::MatrixXd& matrix() const;
  /// Null for matrices given by from_matrix.
  const Propagator* propagator() const { return P_ ? &*P_ : nullptr; }

  void apply(Eigen::Ref<Eigen::MatrixXd> X) const;
  void apply_transpose(Eigen::Ref<Eigen::MatrixXd> X) const;

 private:
  PeriodMap() = default;
  std::optional<Propagator> P_;
  std::optional<Eigen::MatrixXd> dense_;
  double phase_ = 0.0;
  double period_ = 1.0;
  Eigen::Index n_ = 0;
};

PeriodMap assemble_period_map(std::shared_ptr<const StepCache> steps, double s);

enum class EigenMethod { automatic, dense, power };

struct SpectralReport {
  double phase = 0.0;
  double lambda1 = 0.0;
  double lambda2_abs = 0.0;
  double gap_ratio = 0.0;  // |lambda2| / lambda1
  double omega0 = 0.0;     // log(gap_ratio) / T
  Eigen::VectorXd psi1;    // right Perron vector, <w, psi1> = 1
  Eigen::VectorXd w;       // left Perron vector, sum 1
  double residual_right = 0.0;
  double residual_left = 0.0;
  double matrix_scale = 1.0;  // max row sum of |V|
  bool degenerate = false;
  std::string diagnostic;
  std::string method;
  int iterations = 0;
};

/// Dense eigensolve (automatic: node count <= 400 and V materialized) or power
/// iteration for the Perron pair plus block subspace iteration on the
/// deflated map V - lambda1 psi1 w^T for |lambda2|. A relative gap
/// (lambda1 - |lambda2|)/lambda1 below 1e-8 yields a degenerate report.
SpectralReport floquet_data(const PeriodMap& V, EigenMethod method = EigenMethod::automatic);

/// Rank-one P = psi1 w^T and Q = I - P.
struct Projections {
  Eigen::VectorXd psi1, w;

  Eigen::VectorXd P(const Eigen::VectorXd& phi) const { return w.dot(phi) * psi1; }
  Eigen::VectorXd Q(const Eigen::VectorXd& phi) const { return phi - P(phi); }
  Eigen::MatrixXd P_matrix() const { return psi1 * w.transpose(); }
  Eigen::MatrixXd Q_matrix() const;
};

/// Throws NumericalError on a degenerate report.
Projections projections(const SpectralReport& S);

}  // namespace nape

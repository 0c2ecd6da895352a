#pragma once

// Discrete evolution operator G(t,s) for u_t = A(t) u on a truncated box with
// homogeneous Dirichlet data. The one-step factors depend only on the phase
// of the step within the period, so a StepCache holds T/dt factorizations and
// every Propagator is a contiguous run of step indices over that cache.

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cstdint>
#include <memory>
#include <vector>

#include "nape/coefficients.hpp"
#include "nape/grid.hpp"

namespace nape {

/// First-derivative discretization. `hybrid` uses central differences where
/// the cell Peclet number |b| h / (2 q) is below 1 and upwinding elsewhere;
/// `upwind` upwinds everywhere. Both give an M-matrix generator.
enum class Convection { hybrid, upwind };

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// L(t) on all nodes. Interior rows carry the full stencil (including the
/// couplings to boundary nodes) and sum to zero; boundary rows are empty.
SparseMatrix assemble_generator(const CoefficientField& c, const Grid& g, double t,
                                Convection convection = Convection::hybrid);

/// Step factors (I - theta dt L(t_{k+1})) u^{k+1} = (I + (1-theta) dt L(t_k)) u^k,
/// one per phase k mod (T/dt). Immutable after construction.
class StepCache {
 public:
  StepCache(const CoefficientField& c, const Grid& g, double dt, double theta = 1.0,
            Convection convection = Convection::hybrid);

  const CoefficientField& field() const { return field_; }
  const Grid& grid() const { return grid_; }
  double dt() const { return dt_; }
  double theta() const { return theta_; }
  Convection convection() const { return convection_; }
  std::int64_t steps_per_period() const { return static_cast<std::int64_t>(factors_.size()); }

  /// Snaps t to the time grid; throws ModelError when t is off-grid.
  std::int64_t time_index(double t) const;

  /// X <- S_k X, S_k the step from t_k to t_{k+1}. Columns are node vectors.
  void step(std::int64_t k, Eigen::Ref<Eigen::MatrixXd> X) const;
  /// X <- S_k^T X.
  void step_transpose(std::int64_t k, Eigen::Ref<Eigen::MatrixXd> X) const;

 private:
  struct Factor;
  CoefficientField field_;
  Grid grid_;
  double dt_;
  double theta_;
  Convection convection_;
  std::vector<std::shared_ptr<const Factor>> factors_;
};

/// Discrete G(t,s): the ordered chain of steps from s to t.
class Propagator {
 public:
  Propagator(std::shared_ptr<const StepCache> steps, double s, double t);

  const StepCache& steps() const { return *steps_; }
  std::shared_ptr<const StepCache> shared_steps() const { return steps_; }
  const Grid& grid() const { return steps_->grid(); }
  double s() const { return s_; }
  double t() const { return t_; }
  std::int64_t first_step() const { return k_begin_; }
  std::int64_t end_step() const { return k_end_; }

  /// X <- G(t,s) X.
  void apply_inplace(Eigen::Ref<Eigen::MatrixXd> X) const;
  /// X <- G(t,s)^T X.
  void apply_transpose_inplace(Eigen::Ref<Eigen::MatrixXd> X) const;

  Eigen::VectorXd apply(const Eigen::VectorXd& phi) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& w) const;

  /// Dense kernel K with K(i,j) ~ p_{t,s,x_i}({x_j}); at most 2000 nodes.
  Eigen::MatrixXd kernel() const;

 private:
  std::shared_ptr<const StepCache> steps_;
  double s_, t_;
  std::int64_t k_begin_, k_end_;
};

inline constexpr Eigen::Index kDenseNodeLimit = 2000;

/// One discrete transition measure p_{t,s,x}: node weights plus the mass
/// absorbed at the truncation boundary.
struct TransitionRow {
  Grid grid;
  Eigen::Index base = 0;
  Eigen::VectorXd weights;
  double defect = 0.0;
};

/// Row i of the kernel, from the transposed chain applied to e_i. Entries in
/// [-1e-14, 0) are clamped to zero.
TransitionRow kernel_row(const Propagator& P, Eigen::Index i);

struct PropagationResult {
  Eigen::VectorXd values;
  bool positivity_guaranteed = true;
};

/// Node values of G(t,s) phi. theta must be 1 (implicit Euler) or 0.5
/// (Crank-Nicolson, flagged as not positivity preserving).
PropagationResult propagate(const CoefficientField& c, const Grid& g, double s, double t, double dt, double theta,
                            const TestFunction& phi, Convection convection = Convection::hybrid);

}  // namespace nape

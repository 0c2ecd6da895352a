#pragma once

// Euler-Maruyama oracle for G(t,s)phi(x). The forward problem u_t = A(t)u
// with data at s is represented by the diffusion driven by the reversed
// schedule b(s+t-tau, .), Q(s+t-tau, .) over tau in [s, t].

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "nape/coefficients.hpp"
#include "nape/evolution.hpp"

namespace nape {

struct MCEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;  // from antithetic pair averages
  std::int64_t n = 0;    // paths entering the estimate
  std::uint64_t seed = 0;
  double em_dt = 0.0;
  bool flagged = false;  // explosion fraction above 1e-4
};

/// Endpoints of n paths started at x. Paths 2j and 2j+1 are an antithetic
/// pair; an odd n leaves the last path unpaired.
class MCSample {
 public:
  int dim() const { return dim_; }
  std::int64_t size() const { return static_cast<std::int64_t>(exploded_.size()); }
  std::int64_t exploded() const { return n_exploded_; }
  double explosion_fraction() const { return size() ? static_cast<double>(n_exploded_) / static_cast<double>(size()) : 0.0; }
  std::uint64_t seed() const { return seed_; }
  double em_dt() const { return em_dt_; }
  /// Row i: endpoint of path i (exploded paths hold NaN).
  const Eigen::MatrixX2d& endpoints() const { return z_; }
  bool is_exploded(std::int64_t i) const { return exploded_[static_cast<std::size_t>(i)] != 0; }

  /// Pairs with an exploded member are dropped. stderr is the standard
  /// deviation of the pair means over sqrt(#pairs) (unpaired path: weight 1).
  MCEstimate estimate(const std::function<double(double, double)>& phi) const;
  MCEstimate estimate(const Expr& phi) const;

 private:
  friend MCSample simulate(const CoefficientField&, double, double, const Point&, std::int64_t, double,
                           std::uint64_t, int);
  int dim_ = 1;
  std::uint64_t seed_ = 0;
  double em_dt_ = 0.0;
  Eigen::MatrixX2d z_;
  std::vector<std::uint8_t> exploded_;
  std::int64_t n_exploded_ = 0;
};

/// x.t is ignored. em_dt must divide t - s. Paths with |Z| > 1e8 or a
/// non-finite state are frozen and counted as exploded. `threads` <= 0 uses
/// the hardware concurrency; results do not depend on it.
MCSample simulate(const CoefficientField& c, double s, double t, const Point& x, std::int64_t n, double em_dt,
                  std::uint64_t seed, int threads = 1);

struct EmpiricalKernel {
  TransitionRow row;       // node weights from nearest-node binning; defect = mass outside the box
  std::int64_t paths = 0;  // non-exploded paths
};

/// Nearest-node histogram of the endpoints on `g` (d = 1 or 2).
EmpiricalKernel empirical_kernel(const MCSample& sample, const Grid& g, Eigen::Index base = -1);

struct TailMass {
  double mass = 0.0;
  double stderr_ = 0.0;  // binomial
};

/// Fraction of non-exploded endpoints with |Z| > rho.
TailMass tail_mass(const MCSample& sample, double rho);

struct WeakOrderStudy {
  std::vector<double> em_dts, errors, stderrs;
  double slope = 0.0;  // least squares of log error vs log em_dt
};

/// |MC(em_dt) - exact| for each step size, one sample per step size.
WeakOrderStudy weak_order_study(const CoefficientField& c, double s, double t, const Point& x, const Expr& phi,
                                double exact, std::int64_t n, const std::vector<double>& em_dts, std::uint64_t seed,
                                int threads = 1);

}  // namespace nape

#include "nape/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nape/errors.hpp"

namespace nape {

namespace {

// Node values of q_ii and b_i at time t; rows are axes.
struct NodeCoefficients {
  Eigen::MatrixXd q, b;
};

class CoefficientSampler {
 public:
  CoefficientSampler(const CoefficientField& c, const Grid& g) : field_(c), grid_(g) {
    const auto n = static_cast<std::size_t>(g.size());
    x1_.resize(n);
    x2_.resize(n);
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const auto x = g.node(k);
      x1_[static_cast<std::size_t>(k)] = x[0];
      x2_[static_cast<std::size_t>(k)] = x[1];
    }
    for (int a = 0; a < c.dim; ++a) {
      q_.emplace_back(c.q(a, a));
      b_.emplace_back(c.b(a));
    }
  }

  NodeCoefficients at(double t) const {
    const Eigen::Index n = grid_.size();
    NodeCoefficients out{Eigen::MatrixXd(field_.dim, n), Eigen::MatrixXd(field_.dim, n)};
    std::vector<double> buf(static_cast<std::size_t>(n));
    auto fill = [&](const CompiledExpr& e, const Expr& src, Eigen::MatrixXd& m, int a) {
      e.evaluate_batch(t, x1_, x2_, buf);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double v = buf[static_cast<std::size_t>(k)];
        // The scalar path reproduces the failure with its point attached.
        if (!std::isfinite(v)) evaluate(src, {t, x1_[static_cast<std::size_t>(k)], x2_[static_cast<std::size_t>(k)]});
        m(a, k) = v;
      }
    };
    for (int a = 0; a < field_.dim; ++a) {
      fill(q_[static_cast<std::size_t>(a)], field_.q(a, a), out.q, a);
      fill(b_[static_cast<std::size_t>(a)], field_.b(a), out.b, a);
    }
    return out;
  }

 private:
  const CoefficientField& field_;
  const Grid& grid_;
  std::vector<double> x1_, x2_;
  std::vector<CompiledExpr> q_, b_;
};

// Off-diagonal weights toward the lower and upper neighbour along one axis.
inline std::pair<double, double> stencil(double q, double b, double h, Convection conv) {
  const double diff = q / (h * h);
  if (conv == Convection::hybrid && std::abs(b) * h < 2.0 * q) return {diff - b / (2.0 * h), diff + b / (2.0 * h)};
  return {diff + std::max(-b, 0.0) / h, diff + std::max(b, 0.0) / h};
}

// Visits (row, col, value) of L(t) over interior rows, boundary columns included.
template <class F>
void for_each_entry(const NodeCoefficients& nc, const Grid& g, Convection conv, F&& emit) {
  const double h = g.spacing();
  const Eigen::Index n = g.per_axis();
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (g.is_boundary(k)) continue;
    double diag = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double q = nc.q(a, k);
      if (!(q > 0.0)) throw ModelError("diffusion must be positive at every node (got " + std::to_string(q) + ")");
      const auto [lo, up] = stencil(q, nc.b(a, k), h, conv);
      const Eigen::Index stride = a == 0 ? 1 : n;
      emit(k, k - stride, lo);
      emit(k, k + stride, up);
      diag -= lo + up;
    }
    emit(k, k, diag);
  }
}

}  // namespace

SparseMatrix assemble_generator(const CoefficientField& c, const Grid& g, double t, Convection convection) {
  if (c.dim != g.dim()) throw ModelError("field and grid dimensions differ");
  const NodeCoefficients nc = CoefficientSampler(c, g).at(t);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(g.size()) * (2 * static_cast<std::size_t>(g.dim()) + 1));
  for_each_entry(nc, g, convection, [&](Eigen::Index r, Eigen::Index col, double v) { trip.emplace_back(r, col, v); });
  SparseMatrix L(g.size(), g.size());
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

// Step factor for one phase. Boundary rows of the implicit matrix are the
// identity and those of the explicit matrix vanish, so boundary values of
// every stepped vector are zero and the transpose has the same structure.
struct StepCache::Factor {
  // d = 1: tridiagonal LU without pivoting (the implicit matrix is a
  // diagonally dominant M-matrix). mult = subdiagonal of unit L, piv and sup
  // are the diagonal and superdiagonal of U.
  Eigen::VectorXd mult, piv, sup;
  // d = 1 explicit part, tridiagonal.
  Eigen::VectorXd ex_lo, ex_d, ex_up;
  // d = 2.
  // mutable: SparseLU::transpose() is non-const but only builds a read-only view.
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  SparseMatrix explicit_part;
  bool has_explicit = false;
  int dim = 1;

  void solve(Eigen::Ref<Eigen::MatrixXd> X) const {
    if (dim == 2) {
      X = lu.solve(Eigen::MatrixXd(X));
      return;
    }
    const Eigen::Index N = X.rows();
    for (Eigen::Index i = 1; i < N; ++i) X.row(i) -= mult[i] * X.row(i - 1);
    X.row(N - 1) /= piv[N - 1];
    for (Eigen::Index i = N - 2; i >= 0; --i) X.row(i) = (X.row(i) - sup[i] * X.row(i + 1)) / piv[i];
  }

  void solve_transpose(Eigen::Ref<Eigen::MatrixXd> X) const {
    if (dim == 2) {
      X = lu.transpose().solve(Eigen::MatrixXd(X));
      return;
    }
    const Eigen::Index N = X.rows();
    X.row(0) /= piv[0];
    for (Eigen::Index i = 1; i < N; ++i) X.row(i) = (X.row(i) - sup[i - 1] * X.row(i - 1)) / piv[i];
    for (Eigen::Index i = N - 2; i >= 0; --i) X.row(i) -= mult[i + 1] * X.row(i + 1);
  }

  void apply_explicit(Eigen::Ref<Eigen::MatrixXd> X, bool transpose) const {
    if (dim == 2) {
      X = transpose ? Eigen::MatrixXd(explicit_part.transpose() * X) : Eigen::MatrixXd(explicit_part * X);
      return;
    }
    const Eigen::Index N = X.rows();
    Eigen::MatrixXd Y(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < N; ++i) {
      Y.row(i) = ex_d[i] * X.row(i);
      if (transpose) {
        // (B^T)_{i,i-1} = B_{i-1,i}
        if (i > 0) Y.row(i) += ex_up[i - 1] * X.row(i - 1);
        if (i + 1 < N) Y.row(i) += ex_lo[i + 1] * X.row(i + 1);
      } else {
        if (i > 0) Y.row(i) += ex_lo[i] * X.row(i - 1);
        if (i + 1 < N) Y.row(i) += ex_up[i] * X.row(i + 1);
      }
    }
    X = Y;
  }
};

StepCache::StepCache(const CoefficientField& c, const Grid& g, double dt, double theta, Convection convection)
    : field_(c), grid_(g), dt_(dt), theta_(theta), convection_(convection) {
  if (c.dim != g.dim()) throw ModelError("field and grid dimensions differ");
  if (theta != 1.0 && theta != 0.5) throw ModelError("theta must be 1 (implicit Euler) or 0.5 (Crank-Nicolson)");
  if (!(dt > 0.0)) throw ModelError("dt must be positive");
  const double steps = c.period / dt;
  const double M = std::round(steps);
  if (M < 1.0 || std::abs(steps - M) > 1e-9 * M) throw ModelError("T/dt must be a positive integer");
  const auto m = static_cast<std::int64_t>(M);

  const CoefficientSampler sampler(c, g);
  std::vector<NodeCoefficients> phase;
  phase.reserve(static_cast<std::size_t>(m));
  for (std::int64_t j = 0; j < m; ++j) phase.push_back(sampler.at(static_cast<double>(j) * dt));

  const Eigen::Index N = g.size();
  const double ai = theta * dt;           // implicit weight
  const double ae = (1.0 - theta) * dt;   // explicit weight
  const bool has_explicit = theta < 1.0;
  factors_.reserve(static_cast<std::size_t>(m));
  for (std::int64_t j = 0; j < m; ++j) {
    auto f = std::make_shared<Factor>();
    f->dim = g.dim();
    f->has_explicit = has_explicit;
    const NodeCoefficients& next = phase[static_cast<std::size_t>((j + 1) % m)];
    const NodeCoefficients& now = phase[static_cast<std::size_t>(j)];
    // Couplings to boundary columns are dropped: Dirichlet data are zero.
    auto interior_entry = [&](Eigen::Index r, Eigen::Index col) { return r == col || !g.is_boundary(col); };

    if (g.dim() == 1) {
      Eigen::VectorXd lo = Eigen::VectorXd::Zero(N), d = Eigen::VectorXd::Ones(N), up = Eigen::VectorXd::Zero(N);
      for_each_entry(next, g, convection, [&](Eigen::Index r, Eigen::Index col, double v) {
        if (!interior_entry(r, col)) return;
        if (col == r) d[r] = 1.0 - ai * v;
        else if (col == r - 1) lo[r] = -ai * v;
        else up[r] = -ai * v;
      });
      f->mult = Eigen::VectorXd::Zero(N);
      f->piv.resize(N);
      f->sup = up;
      f->piv[0] = d[0];
      for (Eigen::Index i = 1; i < N; ++i) {
        f->mult[i] = lo[i] / f->piv[i - 1];
        f->piv[i] = d[i] - f->mult[i] * up[i - 1];
        if (!(f->piv[i] > 0.0)) throw NumericalError("tridiagonal step factor lost its positive pivot");
      }
      if (has_explicit) {
        f->ex_lo = Eigen::VectorXd::Zero(N);
        f->ex_up = Eigen::VectorXd::Zero(N);
        f->ex_d = Eigen::VectorXd::Zero(N);
        for (Eigen::Index i = 0; i < N; ++i)
          if (!g.is_boundary(i)) f->ex_d[i] = 1.0;
        for_each_entry(now, g, convection, [&](Eigen::Index r, Eigen::Index col, double v) {
          if (!interior_entry(r, col)) return;
          if (col == r) f->ex_d[r] += ae * v;
          else if (col == r - 1) f->ex_lo[r] = ae * v;
          else f->ex_up[r] = ae * v;
        });
      }
    } else {
      std::vector<Eigen::Triplet<double>> trip;
      for (Eigen::Index k = 0; k < N; ++k)
        if (g.is_boundary(k)) trip.emplace_back(k, k, 1.0);
      for_each_entry(next, g, convection, [&](Eigen::Index r, Eigen::Index col, double v) {
        if (!interior_entry(r, col)) return;
        trip.emplace_back(r, col, (r == col ? 1.0 : 0.0) - ai * v);
      });
      Eigen::SparseMatrix<double> A(N, N);
      A.setFromTriplets(trip.begin(), trip.end());
      f->lu.analyzePattern(A);
      f->lu.factorize(A);
      if (f->lu.info() != Eigen::Success)
        throw NumericalError("sparse step factorization failed at phase " + std::to_string(j));
      if (has_explicit) {
        trip.clear();
        for_each_entry(now, g, convection, [&](Eigen::Index r, Eigen::Index col, double v) {
          if (!interior_entry(r, col)) return;
          trip.emplace_back(r, col, (r == col ? 1.0 : 0.0) + ae * v);
        });
        f->explicit_part.resize(N, N);
        f->explicit_part.setFromTriplets(trip.begin(), trip.end());
      }
    }
    factors_.push_back(std::move(f));
  }
}

std::int64_t StepCache::time_index(double t) const {
  const double k = t / dt_;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-7 * std::max(1.0, std::abs(r)))
    throw ModelError("time " + std::to_string(t) + " is not a multiple of dt = " + std::to_string(dt_));
  return static_cast<std::int64_t>(r);
}

namespace {
inline std::size_t phase_of(std::int64_t k, std::int64_t m) {
  const std::int64_t r = k % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}
}  // namespace

void StepCache::step(std::int64_t k, Eigen::Ref<Eigen::MatrixXd> X) const {
  const Factor& f = *factors_[phase_of(k, steps_per_period())];
  if (f.has_explicit) {
    f.apply_explicit(X, false);
  } else {
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (grid_.is_boundary(i)) X.row(i).setZero();
  }
  f.solve(X);
}

void StepCache::step_transpose(std::int64_t k, Eigen::Ref<Eigen::MatrixXd> X) const {
  const Factor& f = *factors_[phase_of(k, steps_per_period())];
  f.solve_transpose(X);
  if (f.has_explicit) {
    f.apply_explicit(X, true);
  } else {
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (grid_.is_boundary(i)) X.row(i).setZero();
  }
}

Propagator::Propagator(std::shared_ptr<const StepCache> steps, double s, double t)
    : steps_(std::move(steps)), s_(s), t_(t) {
  if (!steps_) throw ModelError("propagator needs a step cache");
  if (t < s) throw ModelError("G(t,s) needs t >= s");
  k_begin_ = steps_->time_index(s);
  k_end_ = steps_->time_index(t);
}

void Propagator::apply_inplace(Eigen::Ref<Eigen::MatrixXd> X) const {
  if (X.rows() != grid().size()) throw ModelError("vector length does not match the grid");
  for (std::int64_t k = k_begin_; k < k_end_; ++k) steps_->step(k, X);
}

void Propagator::apply_transpose_inplace(Eigen::Ref<Eigen::MatrixXd> X) const {
  if (X.rows() != grid().size()) throw ModelError("vector length does not match the grid");
  for (std::int64_t k = k_end_ - 1; k >= k_begin_; --k) steps_->step_transpose(k, X);
}

Eigen::VectorXd Propagator::apply(const Eigen::VectorXd& phi) const {
  Eigen::MatrixXd X = phi;
  apply_inplace(X);
  return X.col(0);
}

Eigen::VectorXd Propagator::apply_transpose(const Eigen::VectorXd& w) const {
  Eigen::MatrixXd X = w;
  apply_transpose_inplace(X);
  return X.col(0);
}

Eigen::MatrixXd Propagator::kernel() const {
  const Eigen::Index N = grid().size();
  if (N > kDenseNodeLimit) throw ModelError("dense kernel is limited to " + std::to_string(kDenseNodeLimit) + " nodes");
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(N, N);
  apply_inplace(K);
  return K;
}

TransitionRow kernel_row(const Propagator& P, Eigen::Index i) {
  const Grid& g = P.grid();
  if (i < 0 || i >= g.size()) throw ModelError("kernel_row: node index out of range");
  TransitionRow row{g, i, Eigen::VectorXd::Unit(g.size(), i), 0.0};
  if (g.is_boundary(i)) {
    // Boundary nodes are absorbing once time has passed.
    if (P.end_step() > P.first_step()) {
      row.weights.setZero();
      row.defect = 1.0;
    }
    return row;
  }
  P.apply_transpose_inplace(row.weights);
  for (Eigen::Index j = 0; j < row.weights.size(); ++j)
    if (row.weights[j] < 0.0 && row.weights[j] >= -1e-14) row.weights[j] = 0.0;
  row.defect = 1.0 - row.weights.sum();
  return row;
}

PropagationResult propagate(const CoefficientField& c, const Grid& g, double s, double t, double dt, double theta,
                            const TestFunction& phi, Convection convection) {
  auto cache = std::make_shared<const StepCache>(c, g, dt, theta, convection);
  const Propagator P(cache, s, t);
  Eigen::VectorXd u = phi.on(g);
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (g.is_boundary(k)) u[k] = 0.0;
  if (P.end_step() == P.first_step()) return {u, theta == 1.0};
  return {P.apply(u), theta == 1.0};
}

}  // namespace nape

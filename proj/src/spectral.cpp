#include "nape/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "nape/errors.hpp"

namespace nape {

PeriodMap::PeriodMap(std::shared_ptr<const StepCache> steps, double s, bool materialize)
    : phase_(s), period_(steps->field().period), n_(steps->grid().size()) {
  P_.emplace(steps, s, s + period_);
  if (materialize && n_ <= kDenseNodeLimit) dense_ = P_->kernel();
}

PeriodMap PeriodMap::from_matrix(Eigen::MatrixXd V, double period) {
  if (V.rows() != V.cols()) throw ModelError("period map must be square");
  PeriodMap m;
  m.n_ = V.rows();
  m.period_ = period;
  m.dense_ = std::move(V);
  return m;
}

const Eigen::MatrixXd& PeriodMap::matrix() const {
  if (!dense_) throw ModelError("period map is matrix-free at this size");
  return *dense_;
}

void PeriodMap::apply(Eigen::Ref<Eigen::MatrixXd> X) const {
  if (dense_) {
    X = (*dense_ * X).eval();
  } else {
    P_->apply_inplace(X);
  }
}

void PeriodMap::apply_transpose(Eigen::Ref<Eigen::MatrixXd> X) const {
  if (dense_) {
    X = (dense_->transpose() * X).eval();
  } else {
    P_->apply_transpose_inplace(X);
  }
}

PeriodMap assemble_period_map(std::shared_ptr<const StepCache> steps, double s) {
  return PeriodMap(std::move(steps), s);
}

namespace {

constexpr double kGapFloor = 1e-8;
constexpr int kMaxIterations = 20000;

Eigen::VectorXd apply(const PeriodMap& V, const Eigen::VectorXd& x, bool transpose) {
  Eigen::MatrixXd X = x;
  if (transpose)
    V.apply_transpose(X);
  else
    V.apply(X);
  return X.col(0);
}

double scale_of(const PeriodMap& V) {
  if (V.is_dense()) return std::max(1.0, V.matrix().cwiseAbs().rowwise().sum().maxCoeff());
  // Substochastic kernels have |V|_inf <= 1.
  return 1.0;
}

// Power iteration for the dominant eigenpair, starting from a positive vector.
std::pair<double, Eigen::VectorXd> perron(const PeriodMap& V, bool transpose, int& iterations) {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(V.size());
  double lambda = 0.0;
  for (int it = 1; it <= kMaxIterations; ++it) {
    Eigen::VectorXd y = apply(V, x, transpose);
    const double norm = y.lpNorm<Eigen::Infinity>();
    if (!(norm > 0.0)) throw NumericalError("period map annihilates the positive cone");
    y /= norm;
    const double change = (y - x).lpNorm<Eigen::Infinity>();
    const double lambda_change = std::abs(norm - lambda);
    x = std::move(y);
    lambda = norm;
    iterations = std::max(iterations, it);
    if (change <= 1e-13 && lambda_change <= 1e-15 * lambda) break;
  }
  // Rayleigh-type refinement of lambda with the final vector.
  const Eigen::VectorXd y = apply(V, x, transpose);
  lambda = x.dot(y) / x.squaredNorm();
  return {lambda, x};
}

double largest_modulus(const Eigen::MatrixXd& H) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(H, false);
  double m = 0.0;
  for (Eigen::Index k = 0; k < H.rows(); ++k) m = std::max(m, std::abs(es.eigenvalues()[k]));
  return m;
}

// |lambda2| by block subspace iteration on the deflated map with Rayleigh-Ritz.
double second_modulus(const PeriodMap& V, double lambda1, const Eigen::VectorXd& psi, const Eigen::VectorXd& w,
                      int& iterations) {
  const Eigen::Index n = V.size();
  const Eigen::Index block = std::min<Eigen::Index>(3, std::max<Eigen::Index>(1, n - 1));
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = normal(rng);
  auto deflate = [&](Eigen::MatrixXd& Y) { Y -= psi * (w.transpose() * Y); };
  deflate(X);
  X = Eigen::HouseholderQR<Eigen::MatrixXd>(X).householderQ() * Eigen::MatrixXd::Identity(n, block);
  double mu = -1.0;
  int stable = 0;
  for (int it = 1; it <= kMaxIterations; ++it) {
    Eigen::MatrixXd Y = X;
    V.apply(Y);
    Y -= lambda1 * psi * (w.transpose() * X);
    deflate(Y);
    const Eigen::MatrixXd H = X.transpose() * Y;
    const double next = largest_modulus(H);
    const double change = std::abs(next - mu);
    mu = next;
    if (Y.norm() == 0.0) return 0.0;
    X = Eigen::HouseholderQR<Eigen::MatrixXd>(Y).householderQ() * Eigen::MatrixXd::Identity(n, block);
    iterations = std::max(iterations, it);
    stable = change <= 1e-14 * std::max(lambda1, 1e-300) ? stable + 1 : 0;
    if (stable >= 3) break;
  }
  return mu;
}

void finish(SpectralReport& r, const PeriodMap& V) {
  if (r.w.sum() < 0.0) r.w = -r.w;
  if (r.psi1.sum() < 0.0) r.psi1 = -r.psi1;
  r.w /= r.w.sum();
  r.psi1 /= r.w.dot(r.psi1);
  r.matrix_scale = scale_of(V);
  r.residual_right = (apply(V, r.psi1, false) - r.lambda1 * r.psi1).norm() / r.psi1.norm();
  r.residual_left = (apply(V, r.w, true) - r.lambda1 * r.w).norm() / r.w.norm();
  r.gap_ratio = r.lambda1 > 0.0 ? r.lambda2_abs / r.lambda1 : 1.0;
  r.omega0 = std::log(r.gap_ratio) / V.period();
  if (!(r.lambda1 > 0.0)) {
    r.degenerate = true;
    r.diagnostic = "leading multiplier is not positive";
  } else if ((r.lambda1 - r.lambda2_abs) / r.lambda1 < kGapFloor) {
    r.degenerate = true;
    r.diagnostic = "spectral gap below 1e-8: leading multiplier is not simple";
  }
}

SpectralReport dense_report(const PeriodMap& V) {
  SpectralReport r;
  r.method = "dense";
  const Eigen::MatrixXd& M = V.matrix();
  const Eigen::EigenSolver<Eigen::MatrixXd> right(M), left(M.transpose());
  auto order = [](const Eigen::VectorXcd& ev) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index k = 0; k < ev.size(); ++k) idx[static_cast<std::size_t>(k)] = k;
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(ev[a]) > std::abs(ev[b]);
    });
    return idx;
  };
  const auto ir = order(right.eigenvalues());
  const auto il = order(left.eigenvalues());
  const std::complex<double> l1 = right.eigenvalues()[ir[0]];
  r.lambda1 = l1.real();
  r.lambda2_abs = ir.size() > 1 ? std::abs(right.eigenvalues()[ir[1]]) : 0.0;
  r.psi1 = right.eigenvectors().col(ir[0]).real();
  r.w = left.eigenvectors().col(il[0]).real();
  if (std::abs(l1.imag()) > 1e-12 * std::abs(l1)) {
    r.degenerate = true;
    r.diagnostic = "leading multiplier is not real";
  }
  return r;
}

SpectralReport power_report(const PeriodMap& V) {
  SpectralReport r;
  r.method = "power";
  int it = 0;
  auto [l1, psi] = perron(V, false, it);
  auto [l1t, w] = perron(V, true, it);
  r.lambda1 = l1;
  r.psi1 = psi;
  r.w = w / w.sum();
  const double wpsi = r.w.dot(r.psi1);
  if (!(std::abs(wpsi) > 0.0)) throw NumericalError("left and right Perron vectors are orthogonal");
  r.psi1 /= wpsi;
  r.lambda2_abs = second_modulus(V, r.lambda1, r.psi1, r.w, it);
  r.iterations = it;
  (void)l1t;
  return r;
}

}  // namespace

SpectralReport floquet_data(const PeriodMap& V, EigenMethod method) {
  if (method == EigenMethod::automatic) method = V.is_dense() && V.size() <= 400 ? EigenMethod::dense : EigenMethod::power;
  SpectralReport r = method == EigenMethod::dense ? dense_report(V) : power_report(V);
  r.phase = V.phase();
  const bool flagged = r.degenerate;
  const std::string diag = r.diagnostic;
  finish(r, V);
  if (flagged) {
    r.degenerate = true;
    r.diagnostic = diag;
  }
  return r;
}

Eigen::MatrixXd Projections::Q_matrix() const {
  return Eigen::MatrixXd::Identity(psi1.size(), psi1.size()) - P_matrix();
}

Projections projections(const SpectralReport& S) {
  if (S.degenerate) throw NumericalError("projections need a simple leading multiplier: " + S.diagnostic);
  return {S.psi1, S.w};
}

}  // namespace nape

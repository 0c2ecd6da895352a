#include "nape/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "nape/errors.hpp"
#include "nape/philox.hpp"

namespace nape {

namespace {

constexpr std::int64_t kPairsPerBlock = 1024;
constexpr double kExplosion = 1e8;
constexpr std::uint64_t kStream = 0x6e6170655f6d63ULL;

struct Compiled {
  int dim;
  std::vector<CompiledExpr> drift, diffusion;  // diffusion: diagonal entries
};

// Simulates pairs [p0, p0 + count) of a run and writes their endpoints.
void run_block(const Compiled& cc, double s, double t, const Point& x, double dt, std::int64_t steps, std::uint64_t seed,
               std::int64_t p0, std::int64_t count, Eigen::MatrixX2d& z_out, std::vector<std::uint8_t>& bad_out,
               std::int64_t n) {
  const int d = cc.dim;
  const auto lanes = static_cast<std::size_t>(2 * count);
  std::vector<double> z[2] = {std::vector<double>(lanes, x.x1), std::vector<double>(lanes, d == 2 ? x.x2 : 0.0)};
  std::vector<double> b[2] = {std::vector<double>(lanes), std::vector<double>(lanes)};
  std::vector<double> q[2] = {std::vector<double>(lanes), std::vector<double>(lanes)};
  std::vector<std::uint8_t> bad(lanes, 0);
  std::vector<double> noise(static_cast<std::size_t>(4 * count));
  const std::int64_t steps_per_call = 4 / d;
  const double sqdt = std::sqrt(dt);

  for (std::int64_t k = 0; k < steps; ++k) {
    const double theta = s + t - (s + static_cast<double>(k) * dt);
    const std::span<const double> x1(z[0]), x2(z[1]);
    for (int i = 0; i < d; ++i) {
      cc.drift[static_cast<std::size_t>(i)].evaluate_batch(theta, x1, x2, b[i]);
      cc.diffusion[static_cast<std::size_t>(i)].evaluate_batch(theta, x1, x2, q[i]);
    }
    const std::int64_t j = k % steps_per_call;
    if (j == 0) {
      for (std::int64_t p = 0; p < count; ++p) {
        const auto u = philox4x64({static_cast<std::uint64_t>(p0 + p), static_cast<std::uint64_t>(k / steps_per_call), 0, 0},
                                  {seed, kStream});
        for (int h = 0; h < 2; ++h) {
          const double r = std::sqrt(-2.0 * std::log(uniform_open0(u[2 * h])));
          const double a = 2.0 * std::numbers::pi * uniform_open0(u[2 * h + 1]);
          noise[static_cast<std::size_t>(4 * p + 2 * h)] = r * std::cos(a);
          noise[static_cast<std::size_t>(4 * p + 2 * h + 1)] = r * std::sin(a);
        }
      }
    }
    for (std::int64_t p = 0; p < count; ++p) {
      for (int side = 0; side < 2; ++side) {
        const auto l = static_cast<std::size_t>(p + side * count);
        if (bad[l]) continue;
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) {
          const double xi = noise[static_cast<std::size_t>(4 * p + j * d + i)];
          const double sigma = std::sqrt(2.0 * std::max(0.0, q[i][l]));
          z[i][l] += b[i][l] * dt + (side == 0 ? 1.0 : -1.0) * sigma * sqdt * xi;
          r2 += z[i][l] * z[i][l];
        }
        if (!(r2 <= kExplosion * kExplosion)) {
          bad[l] = 1;
          for (int i = 0; i < d; ++i) z[i][l] = 0.0;
        }
      }
    }
  }
  for (std::int64_t p = 0; p < count; ++p) {
    for (int side = 0; side < 2; ++side) {
      const std::int64_t path = 2 * (p0 + p) + side;
      if (path >= n) continue;
      const auto l = static_cast<std::size_t>(p + side * count);
      bad_out[static_cast<std::size_t>(path)] = bad[l];
      const double nan = std::numeric_limits<double>::quiet_NaN();
      z_out(path, 0) = bad[l] ? nan : z[0][l];
      z_out(path, 1) = bad[l] ? nan : (d == 2 ? z[1][l] : 0.0);
    }
  }
}

}  // namespace

MCSample simulate(const CoefficientField& c, double s, double t, const Point& x, std::int64_t n, double em_dt,
                  std::uint64_t seed, int threads) {
  if (n < 1) throw ModelError("Monte Carlo needs n >= 1");
  if (!(t >= s)) throw ModelError("Monte Carlo needs t >= s");
  if (!(em_dt > 0.0)) throw ModelError("Euler-Maruyama step must be positive");
  const double ratio = (t - s) / em_dt;
  const auto steps = static_cast<std::int64_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio))
    throw ModelError("Euler-Maruyama step must divide t - s");

  Compiled cc{c.dim, {}, {}};
  for (int i = 0; i < c.dim; ++i) {
    cc.drift.emplace_back(c.b(i));
    cc.diffusion.emplace_back(c.q(i, i));
  }

  MCSample out;
  out.dim_ = c.dim;
  out.seed_ = seed;
  out.em_dt_ = em_dt;
  out.z_.resize(n, 2);
  out.exploded_.assign(static_cast<std::size_t>(n), 0);

  const std::int64_t pairs = (n + 1) / 2;
  const std::int64_t blocks = (pairs + kPairsPerBlock - 1) / kPairsPerBlock;
  std::atomic<std::int64_t> next{0};
  auto worker = [&] {
    for (std::int64_t blk; (blk = next.fetch_add(1)) < blocks;) {
      const std::int64_t p0 = blk * kPairsPerBlock;
      run_block(cc, s, t, x, em_dt, steps, seed, p0, std::min(kPairsPerBlock, pairs - p0), out.z_, out.exploded_, n);
    }
  };
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<std::int64_t>(threads, blocks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  out.n_exploded_ = std::count(out.exploded_.begin(), out.exploded_.end(), std::uint8_t{1});
  return out;
}

MCEstimate MCSample::estimate(const std::function<double(double, double)>& phi) const {
  MCEstimate e;
  e.seed = seed_;
  e.em_dt = em_dt_;
  e.flagged = explosion_fraction() > 1e-4;
  std::vector<double> y, w;
  const std::int64_t n = size();
  for (std::int64_t i = 0; i < n; i += 2) {
    if (i + 1 < n) {
      if (is_exploded(i) || is_exploded(i + 1)) continue;
      y.push_back(0.5 * (phi(z_(i, 0), z_(i, 1)) + phi(z_(i + 1, 0), z_(i + 1, 1))));
      w.push_back(2.0);
    } else if (!is_exploded(i)) {
      y.push_back(phi(z_(i, 0), z_(i, 1)));
      w.push_back(1.0);
    }
  }
  if (y.empty()) throw NumericalError("every Monte Carlo path exploded");
  double sw = 0.0, swy = 0.0;
  for (std::size_t u = 0; u < y.size(); ++u) {
    sw += w[u];
    swy += w[u] * y[u];
  }
  e.mean = swy / sw;
  e.n = static_cast<std::int64_t>(sw);
  const auto U = static_cast<double>(y.size());
  if (y.size() < 2) {
    e.stderr_ = std::numeric_limits<double>::infinity();
  } else {
    double ss = 0.0;
    for (std::size_t u = 0; u < y.size(); ++u) ss += w[u] * w[u] * (y[u] - e.mean) * (y[u] - e.mean);
    e.stderr_ = std::sqrt(U / (U - 1.0) * ss) / sw;
  }
  return e;
}

MCEstimate MCSample::estimate(const Expr& phi) const {
  const CompiledExpr f(phi);
  return estimate([&](double a, double b) { return f({0.0, a, b}); });
}

EmpiricalKernel empirical_kernel(const MCSample& sample, const Grid& g, Eigen::Index base) {
  if (g.dim() != sample.dim()) throw ModelError("histogram grid dimension differs from the sample");
  EmpiricalKernel k{TransitionRow{g, base, Eigen::VectorXd::Zero(g.size()), 0.0}, 0};
  const Eigen::Index m = g.per_axis(), half = m / 2;
  double outside = 0.0;
  for (std::int64_t i = 0; i < sample.size(); ++i) {
    if (sample.is_exploded(i)) continue;
    ++k.paths;
    const auto& z = sample.endpoints();
    const auto i1 = static_cast<Eigen::Index>(std::llround(z(i, 0) / g.spacing())) + half;
    const auto i2 = g.dim() == 2 ? static_cast<Eigen::Index>(std::llround(z(i, 1) / g.spacing())) + half : 0;
    const Eigen::Index flat = i1 + m * i2;
    if (i1 < 0 || i1 >= m || i2 < 0 || (g.dim() == 2 && i2 >= m) || g.is_boundary(flat)) {
      outside += 1.0;
      continue;
    }
    k.row.weights[flat] += 1.0;
  }
  if (k.paths == 0) throw NumericalError("every Monte Carlo path exploded");
  k.row.weights /= static_cast<double>(k.paths);
  k.row.defect = outside / static_cast<double>(k.paths);
  return k;
}

TailMass tail_mass(const MCSample& sample, double rho) {
  std::int64_t used = 0, out = 0;
  const auto& z = sample.endpoints();
  for (std::int64_t i = 0; i < sample.size(); ++i) {
    if (sample.is_exploded(i)) continue;
    ++used;
    if (std::hypot(z(i, 0), z(i, 1)) > rho) ++out;
  }
  if (used == 0) throw NumericalError("every Monte Carlo path exploded");
  TailMass m;
  m.mass = static_cast<double>(out) / static_cast<double>(used);
  m.stderr_ = std::sqrt(m.mass * (1.0 - m.mass) / static_cast<double>(used));
  return m;
}

WeakOrderStudy weak_order_study(const CoefficientField& c, double s, double t, const Point& x, const Expr& phi,
                                double exact, std::int64_t n, const std::vector<double>& em_dts, std::uint64_t seed,
                                int threads) {
  if (em_dts.size() < 2) throw ModelError("weak-order study needs two step sizes");
  WeakOrderStudy w;
  for (double h : em_dts) {
    const MCEstimate e = simulate(c, s, t, x, n, h, seed, threads).estimate(phi);
    w.em_dts.push_back(h);
    w.errors.push_back(std::abs(e.mean - exact));
    w.stderrs.push_back(e.stderr_);
  }
  const auto m = static_cast<Eigen::Index>(em_dts.size());
  Eigen::VectorXd lx(m), ly(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    lx[i] = std::log(w.em_dts[static_cast<std::size_t>(i)]);
    ly[i] = std::log(std::max(w.errors[static_cast<std::size_t>(i)], 1e-300));
  }
  const Eigen::ArrayXd dx = lx.array() - lx.mean(), dy = ly.array() - ly.mean();
  w.slope = (dx * dy).sum() / dx.square().sum();
  return w;
}

}  // namespace nape

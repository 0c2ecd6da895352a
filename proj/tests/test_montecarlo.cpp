#include <doctest.h>

#include <cmath>

#include "nape/errors.hpp"
#include "nape/measures.hpp"
#include "nape/montecarlo.hpp"
#include "nape/ou.hpp"
#include "nape/philox.hpp"

using namespace nape;

TEST_CASE("Philox4x64-10 known answers") {
  // Reference words from numpy.random.Philox, which bumps the counter before
  // each block: Philox(key=k, counter=c) emits the bijection at c + 1.
  CHECK(philox4x64({1, 0, 0, 0}, {0, 0}) ==
        Philox4x64Counter{0x02f4ba6408e4d89bULL, 0x3dd62b0b9ca8c5b2ULL, 0x1c8667a55d902e79ULL, 0x907d7a052fd5b4dcULL});
  CHECK(philox4x64({2, 0, 0, 0}, {0, 0}) ==
        Philox4x64Counter{0x809bf322883987c3ULL, 0x471128b9e807f7ddULL, 0xf250ba0dbec065b7ULL, 0xfc6ed66767a457bcULL});
  CHECK(philox4x64({1, 0, 0, 0}, {12345, 0}) ==
        Philox4x64Counter{0xa5792c0a0ed6a560ULL, 0xc63666ba8b756514ULL, 0xc953e311f634209dULL, 0x28db5404d83fac91ULL});
  CHECK(philox4x64({8, 0, 0, 0}, {~0ULL, 0}) ==
        Philox4x64Counter{0xafc2cb25c1370495ULL, 0x588cae6c67e89df1ULL, 0x66aec8c5d4f9515eULL, 0x766bd41fdce7891cULL});
  CHECK(uniform_open0(0) > 0.0);
  CHECK(uniform_open0(~0ULL) == 1.0);
}

TEST_CASE("determinism and thread independence") {
  const CoefficientField c = cubic_benchmark();
  const MCSample a = simulate(c, 0.0, 1.0, {0, 0.5, 0}, 5001, 1e-2, 11, 1);
  const MCSample b = simulate(c, 0.0, 1.0, {0, 0.5, 0}, 5001, 1e-2, 11, 3);
  const MCSample other = simulate(c, 0.0, 1.0, {0, 0.5, 0}, 5001, 1e-2, 12, 1);
  CHECK((a.endpoints().array() == b.endpoints().array()).all());
  CHECK_FALSE((a.endpoints().array() == other.endpoints().array()).all());
  const Expr phi = parse_expr("x1^2");
  CHECK(a.estimate(phi).mean == b.estimate(phi).mean);
  CHECK(a.estimate(phi).stderr_ == b.estimate(phi).stderr_);
  // A prefix of a larger run reproduces the smaller run.
  const MCSample big = simulate(c, 0.0, 1.0, {0, 0.5, 0}, 9000, 1e-2, 11, 1);
  CHECK((big.endpoints().topRows(5000).array() == a.endpoints().topRows(5000).array()).all());
}

TEST_CASE("antithetic pairs mirror the noise") {
  // Zero drift, Q = 1/2: Z_t = x + B_t exactly, and pairs are x +- B_t.
  const CoefficientField c = make_field(1, 1.0, {{"0.5"}}, {"0"});
  const MCSample s = simulate(c, 0.0, 1.0, {0, 0.25, 0}, 2000, 0.1, 5);
  for (std::int64_t i = 0; i < s.size(); i += 2)
    CHECK(s.endpoints()(i, 0) + s.endpoints()(i + 1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  const MCEstimate e = s.estimate(parse_expr("x1"));
  CHECK(e.mean == doctest::Approx(0.25).epsilon(1e-12));
  const MCEstimate v = s.estimate(parse_expr("(x1-0.25)^2"));
  CHECK(std::abs(v.mean - 1.0) <= 3.0 * v.stderr_ + 1e-12);
}

TEST_CASE("frozen dynamics") {
  const CoefficientField c = make_field(1, 1.0, {{"0"}}, {"0"});
  const MCEstimate e = simulate(c, 0.0, 1.0, {0, 1.5, 0}, 100, 0.1, 1).estimate(parse_expr("x1"));
  CHECK(e.mean == 1.5);
  CHECK(e.stderr_ == 0.0);
  CHECK(e.n == 100);
}

TEST_CASE("single path") {
  const MCSample s = simulate(ou_benchmark(), 0.0, 1.0, {0, 0.0, 0}, 1, 0.01, 1);
  const MCEstimate e = s.estimate(parse_expr("x1"));
  CHECK(e.n == 1);
  CHECK(std::isinf(e.stderr_));
  const EmpiricalKernel k = empirical_kernel(s, Grid(1, 4.0, 0.05));
  CHECK(k.row.weights.sum() + k.row.defect == doctest::Approx(1.0));
  CHECK(k.row.weights.maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("explosions are counted and flagged") {
  // x' = x^3 plus noise: roughly half the paths from the origin blow up before t = 1.
  const CoefficientField c = make_field(1, 1.0, {{"1"}}, {"x1^3"});
  const MCSample s = simulate(c, 0.0, 1.0, {0, 0.0, 0}, 200, 1e-3, 1);
  CHECK(s.exploded() > 0);
  CHECK(s.exploded() < s.size());
  const MCEstimate e = s.estimate(parse_expr("1"));
  CHECK(e.flagged);
  CHECK(e.n < 200 - s.exploded() + 1);
  for (std::int64_t i = 0; i < s.size(); ++i)
    if (s.is_exploded(i)) CHECK(std::isnan(s.endpoints()(i, 0)));
  // Deterministic blow-up from x = 5 (time 1/50): nothing survives.
  const MCSample all = simulate(make_field(1, 1.0, {{"1e-6"}}, {"x1^3"}), 0.0, 1.0, {0, 5.0, 0}, 10, 1e-3, 1);
  CHECK(all.exploded() == 10);
  CHECK_THROWS_AS(all.estimate(parse_expr("1")), NumericalError);
}

TEST_CASE("OU moments against the closed form") {
  const OUParams p = OUParams::benchmark();
  const MCSample s = simulate(p.field(), 0.0, 1.0, {0, 0.0, 0}, 100000, 1e-3, 2024);
  CHECK(s.exploded() == 0);
  for (const char* f : {"1", "x1", "x1^2", "sin(x1)"}) {
    const Expr phi = parse_expr(f);
    const MCEstimate e = s.estimate(phi);
    CHECK(std::abs(e.mean - ou_exact_value(p, 0.0, 1.0, 0.0, phi)) <= 3.0 * e.stderr_ + 2e-3);
  }
  CHECK(s.estimate(parse_expr("x1")).mean == doctest::Approx(0.015617).epsilon(0.05));

  const EmpiricalKernel k = empirical_kernel(s, Grid(1, 8.0, 0.05));
  const GaussianMoments m = ou_exact_moments(p, 0.0, 1.0, 0.0);
  const Grid& g = k.row.grid;
  const Eigen::VectorXd x = g.sample(parse_expr("x1"));
  const double mean = k.row.weights.dot(x);
  const double var = k.row.weights.dot(x.cwiseProduct(x)) - mean * mean;
  CHECK(std::abs(mean - m.mean) <= 5e-3);
  CHECK(std::abs(var - m.variance) <= 2e-2);  // binning adds h^2/12
}

TEST_CASE("weak order one") {
  const OUParams p = OUParams::benchmark();
  const Expr phi = parse_expr("x1^2");
  const double exact = ou_exact_value(p, 0.0, 1.0, 0.0, phi);
  const WeakOrderStudy w = weak_order_study(p.field(), 0.0, 1.0, {0, 0.0, 0}, phi, exact, 400000,
                                            {0.2, 0.1, 0.05, 0.025}, 3);
  CHECK(w.slope >= 0.7);
  CHECK(w.slope <= 1.3);
}

TEST_CASE("cubic tail mass matches the PDE tightness radius") {
  auto steps = std::make_shared<const StepCache>(cubic_benchmark(), Grid(1, 4.0, 0.05), 1e-3);
  const TightnessProfile prof = tightness_radius(Propagator(steps, 0.0, 1.0), 0.01);
  // The PDE radius is the max over base points in |x| <= 2; check the edge base point.
  const MCSample s = simulate(cubic_benchmark(), 0.0, 1.0, {0, 2.0, 0}, 20000, 1e-3, 9);
  const TailMass tm = tail_mass(s, prof.radius);
  CHECK(tm.mass <= 0.01 + 3.0 * tm.stderr_);
}

TEST_CASE("argument checks") {
  CHECK_THROWS_AS(simulate(ou_benchmark(), 0.0, 1.0, {}, 0, 0.1, 1), ModelError);
  CHECK_THROWS_AS(simulate(ou_benchmark(), 0.0, 1.0, {}, 10, 0.3, 1), ModelError);
  CHECK_THROWS_AS(simulate(ou_benchmark(), 1.0, 0.0, {}, 10, 0.1, 1), ModelError);
}

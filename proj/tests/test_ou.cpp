#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nape/errors.hpp"
#include "nape/ou.hpp"

using namespace nape;
using std::numbers::pi;

TEST_CASE("autonomous moments") {
  const OUParams p = OUParams::parse("-1", "0", "1");
  const GaussianMoments g = ou_exact_moments(p, 0.0, 1.0, 1.0);
  CHECK(std::abs(g.mean - std::exp(-1.0)) <= 1e-12);
  CHECK(std::abs(g.variance - (1.0 - std::exp(-2.0))) <= 1e-12);
  const GaussianMoments z = ou_exact_moments(p, 0.3, 0.3, 2.5);
  CHECK(z.mean == 2.5);
  CHECK(z.variance == 0.0);
}

TEST_CASE("forced mean against the hand integral") {
  // int_0^1 cos(2 pi r) e^{-r} dr = (1 - e^{-1}) / (1 + 4 pi^2)
  const double expect = (1.0 - std::exp(-1.0)) / (1.0 + 4.0 * pi * pi);
  const GaussianMoments g = ou_exact_moments(OUParams::benchmark(), 0.0, 1.0, 0.0);
  CHECK(std::abs(g.mean - expect) <= 1e-12);
  CHECK(std::abs(g.mean - 0.015617) <= 1e-6);
}

TEST_CASE("time-dependent a against a closed form") {
  // a = -1 - 0.5 cos(2 pi t): int_0^r a = -r - sin(2 pi r)/(4 pi).
  const OUParams p = OUParams::parse("-1-0.5*cos(2*pi*t)", "0", "1");
  const double x = 1.7, t = 0.8;
  const double logU = -t - std::sin(2 * pi * t) / (4 * pi);
  CHECK(std::abs(ou_exact_moments(p, 0.0, t, x).mean - std::exp(logU) * x) <= 1e-11);
}

TEST_CASE("periodic measure") {
  const GaussianMoments m = ou_exact_measure(OUParams::benchmark(), 0.0);
  // c_0 = Re int_0^inf e^{(2 pi i - 1) r} dr = Re 1/(1 - 2 pi i) = 1/(1 + 4 pi^2)
  CHECK(std::abs(m.mean - 1.0 / (1.0 + 4.0 * pi * pi)) <= 1e-10);
  CHECK(std::abs(m.variance - 1.0) <= 1e-10);
  const GaussianMoments m2 = ou_exact_measure(OUParams::benchmark(), 0.37);
  // c_s = Re e^{2 pi i s}/(1 - 2 pi i)
  const double cs = (std::cos(2 * pi * 0.37) - 2 * pi * std::sin(2 * pi * 0.37)) / (1 + 4 * pi * pi);
  CHECK(std::abs(m2.mean - cs) <= 1e-10);
  const GaussianMoments shifted = ou_exact_measure(OUParams::benchmark(), 1.37);
  CHECK(std::abs(shifted.mean - m2.mean) <= 1e-10);
  CHECK(std::abs(shifted.variance - m2.variance) <= 1e-10);
  CHECK_THROWS_AS(ou_exact_measure(OUParams::parse("0.1", "0", "1"), 0.0), ModelError);
}

TEST_CASE("measure consistency: c_s = U(t,s) c_t + m(t,s)") {
  const OUParams p = OUParams::parse("-0.7-0.4*sin(2*pi*t)", "cos(2*pi*t)+0.3", "1+0.5*cos(2*pi*t)^2");
  for (double s : {0.0, 0.2}) {
    for (double t : {s + 0.25, s + 0.5, s + 1.0, s + 2.0}) {
      const GaussianMoments ms = ou_exact_measure(p, s), mt = ou_exact_measure(p, t);
      const GaussianMoments flow = ou_exact_moments(p, s, t, 1.0);
      const GaussianMoments drift = ou_exact_moments(p, s, t, 0.0);
      const double U = flow.mean - drift.mean;
      CHECK(std::abs(ms.mean - (U * mt.mean + drift.mean)) <= 1e-8);
      CHECK(std::abs(ms.variance - (U * U * mt.variance + drift.variance)) <= 1e-8);
    }
  }
}

TEST_CASE("Gauss-Hermite expectations") {
  const GaussianMoments g{0.3, 0.8};
  CHECK(std::abs(gaussian_expectation([](double) { return 1.0; }, g) - 1.0) <= 1e-13);
  CHECK(std::abs(gaussian_expectation([](double y) { return y * y; }, g) - (0.09 + 0.8)) <= 1e-12);
  CHECK(std::abs(gaussian_expectation([](double y) { return std::sin(y); }, g) - std::sin(0.3) * std::exp(-0.4)) <=
        1e-13);
  CHECK(gaussian_expectation([](double y) { return y; }, {2.0, 0.0}) == 2.0);
}

TEST_CASE("OU parameters are functions of time") {
  CHECK_THROWS_AS(OUParams::parse("-x1", "0", "1"), ModelError);
}

TEST_CASE("adaptive Gaussian expectation on steep data") {
  const GaussianMoments g{0.3, 0.4};
  CHECK(std::abs(gaussian_expectation_adaptive([](double) { return 1.0; }, g) - 1.0) <= 1e-13);
  CHECK(std::abs(gaussian_expectation_adaptive([](double y) { return y * y; }, g) - 0.49) <= 1e-13);
  // Smoothed indicator of |y| <= 1 with width 1/16: a midpoint sum on a fine
  // grid is the oracle; 64-point Gauss-Hermite misses it by about 3e-2.
  auto ind = [](double y) { return 0.5 * (1.0 - std::tanh(8.0 * (y * y - 1.0))); };
  const GaussianMoments w{0.0156, 0.8647};
  double mid = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double z = -12.0 + 24.0 * (i + 0.5) / n;
    mid += ind(w.mean + std::sqrt(w.variance) * z) * std::exp(-0.5 * z * z);
  }
  mid *= 24.0 / n / std::sqrt(2.0 * std::numbers::pi);
  CHECK(std::abs(gaussian_expectation_adaptive(ind, w) - mid) <= 1e-9);
}

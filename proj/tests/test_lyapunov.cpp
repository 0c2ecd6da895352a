#include <doctest.h>

#include <cmath>

#include "nape/errors.hpp"
#include "nape/lyapunov.hpp"
#include "nape/ou.hpp"

using namespace nape;

namespace {

LyapunovData with_W(const char* w) {
  LyapunovData L;
  L.W = parse_expr(w);
  return L;
}

SampleSpec at(std::initializer_list<Point> pts) {
  SampleSpec s;
  s.points = pts;
  return s;
}

const char* kLogTail = "log(x1^2)/2";

}  // namespace

TEST_CASE("drift bound with W = x^2") {
  SUBCASE("OU: the sampled sup is the closed-form max 2 + cos^2/2") {
    LyapunovData L = with_W("x1^2");
    const MarginReport r = check_drift_bound(ou_benchmark(), L, SampleSpec{});
    CHECK_FALSE(r.accepted);
    CHECK(r.sup_margin == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(r.witness.t == 0.0);
    CHECK(r.witness.x1 == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("cubic: W(0) = 0 makes every lambda fail at the origin") {
    for (double lambda : {0.0, 3.0, 1e6}) {
      LyapunovData L = with_W("x1^2");
      L.lambda = lambda;
      const MarginReport r = check_drift_bound(cubic_benchmark(), L, SampleSpec{});
      CHECK_FALSE(r.accepted);
      CHECK(r.sup_margin == doctest::Approx(2.0).epsilon(1e-12));
      CHECK(r.witness.x1 == 0.0);
      CHECK(r.witness.t == 0.0);
    }
  }
}

TEST_CASE("drift lambda scan with W = 1 + x^2") {
  // OU: sup_x of 2 - lambda + 2x cos - (2+lambda)x^2 is 2 - lambda + 1/(2+lambda) at cos = 1;
  // cubic: sup is 2 - lambda at x = 0. Both first go negative at lambda = 3.
  for (const auto& c : {ou_benchmark(), cubic_benchmark()}) {
    const DriftScan scan = scan_drift_lambda(c, with_W("1+x1^2"), SampleSpec{});
    REQUIRE(scan.lambda_star.has_value());
    CHECK(*scan.lambda_star == 3);
    CHECK(scan.report.accepted);
    CHECK(scan.report.sup_margin < 0.0);
  }
  const MarginReport ou3 = scan_drift_lambda(ou_benchmark(), with_W("1+x1^2"), SampleSpec{}).report;
  CHECK(ou3.sup_margin == doctest::Approx(-1.0 + 1.0 / 5.0).epsilon(1e-12));
}

TEST_CASE("dissipativity") {
  LyapunovData L = with_W("x1^2");
  L.a = 3.0;
  L.cc = 1.0;
  // A W - 3 + W = -1 + 2x cos - x^2 <= -1 + cos^2 <= 0.
  const DissipativityReport ok = check_dissipativity(ou_benchmark(), L, SampleSpec{});
  CHECK(ok.accepted);
  CHECK(std::abs(ok.sup_margin) <= 1e-12);
  CHECK(ok.a_over_c == 3.0);
  CHECK(ok.min_W == 0.0);
  CHECK(ok.measure_bound == 3.0);

  L.a = 2.0;
  CHECK(check_dissipativity(ou_benchmark(), L, at({{0, 0, 0}})).measure_bound == 2.0);

  L.a = 0.0;
  const DissipativityReport bad = check_dissipativity(ou_benchmark(), L, SampleSpec{});
  CHECK_FALSE(bad.accepted);
  CHECK(bad.sup_margin == doctest::Approx(3.0).epsilon(1e-12));  // 2 + cos^2 at x = cos = 1
  CHECK(std::abs(bad.witness.x1 - 1.0) <= 1e-12);
}

TEST_CASE("superlinear condition") {
  LyapunovData L = with_W(kLogTail);
  L.R0 = 2.0;
  L.g = {1.0, 2.0};
  const MarginReport point = check_superlinear(cubic_benchmark(), L, at({{0.0, 2.0, 0.0}}));
  // A W = -1/x^2 - x^2 = -4.25 at (t = 0, x = 2); g(W) = (log 2)^2.
  CHECK(point.sup_margin == doctest::Approx(-4.25 + std::log(2.0) * std::log(2.0)).epsilon(1e-12));
  CHECK(point.accepted);

  const MarginReport cubic = check_superlinear(cubic_benchmark(), L, SampleSpec{});
  CHECK(cubic.accepted);
  const MarginReport ou = check_superlinear(ou_benchmark(), L, SampleSpec{});
  CHECK_FALSE(ou.accepted);
  CHECK(std::abs(ou.witness.x1) == doctest::Approx(32.0));

  L.g.gamma = 1.0;
  const MarginReport lin = check_superlinear(cubic_benchmark(), L, SampleSpec{});
  CHECK_FALSE(lin.accepted);
  CHECK(lin.samples == 0);
}

TEST_CASE("log drift condition") {
  const MarginReport point = check_log_drift(cubic_benchmark(), 1.0, 2.0, 2.0, at({{0.0, 2.0, 0.0}}));
  CHECK(point.sup_margin == doctest::Approx(-17.0 + 4.0 * std::log(2.0) * std::log(2.0)).epsilon(1e-12));
  CHECK(check_log_drift(cubic_benchmark(), 1.0, 2.0, 2.0, SampleSpec{}).accepted);
  const MarginReport ou = check_log_drift(ou_benchmark(), 1.0, 2.0, 2.0, SampleSpec{});
  CHECK_FALSE(ou.accepted);
  CHECK(std::abs(ou.witness.x1) == doctest::Approx(32.0));
  CHECK_THROWS_AS(check_log_drift(make_field(1, 1.0, {{"1"}}, {"-x1*exp(x1^2)"}), 1.0, 2.0, 2.0, SampleSpec{}),
                  EvalError);
  CHECK_THROWS_AS(check_log_drift(cubic_benchmark(), 1.0, 2.0, 1.0, SampleSpec{}), ModelError);
  CHECK_FALSE(check_log_drift(cubic_benchmark(), 1.0, 1.0, 2.0, SampleSpec{}).accepted);
}

TEST_CASE("Lyapunov function shape") {
  LyapunovData L = with_W(kLogTail);
  L.R0 = 2.0;
  CHECK(check_lyapunov_function(L, 1, SampleSpec{}).accepted);
  CHECK_FALSE(check_lyapunov_function(with_W("exp(-x1^2)"), 1, SampleSpec{}).accepted);
}

TEST_CASE("2D sampling") {
  const CoefficientField c = make_field(2, 1.0, {{"1", "0"}, {"0", "1"}}, {"-x1^3", "-x2^3"});
  LyapunovData L = with_W("log(x1^2+x2^2)/2");
  L.R0 = 2.0;
  L.g = {1.0, 2.0};
  CHECK(check_superlinear(c, L, SampleSpec{}).accepted);
  CHECK(check_log_drift(c, 1.0, 2.0, 2.0, SampleSpec{}).accepted);
}

TEST_CASE("comparison ODE") {
  const ComparisonSolution z = solve_comparison(100.0, 1.0, 2.0, 0.5, 0.01);
  CHECK(z.values.back() == doctest::Approx(100.0 / 51.0).epsilon(1e-9));
  CHECK(z.bound(0.5) == 2.0);
  CHECK(z.max_relative_error() <= 1e-6);
  for (std::size_t k = 1; k < z.values.size(); ++k) CHECK(z.values[k] < z.values[k - 1]);
  for (double z0 : {10.0, 100.0, 1e6}) {
    const ComparisonSolution s = solve_comparison(z0, 1.0, 2.0, 0.5, 0.05);
    CHECK(s.values.back() <= s.bound(0.5));
    CHECK(s.max_relative_error() <= 1e-6);
    for (std::size_t k = 1; k < s.times.size(); ++k) CHECK(s.values[k] <= ComparisonSolution::bound(1.0, 2.0, s.times[k]));
  }
  const ComparisonSolution g3 = solve_comparison(5.0, 0.7, 3.0, 2.0, 0.1);
  CHECK(g3.max_relative_error() <= 1e-6);
  const ComparisonSolution zero = solve_comparison(2.0, 1.0, 2.0, 0.0, 0.1);
  CHECK(zero.values.size() == 1);
  CHECK(zero.values[0] == 2.0);
  CHECK_THROWS_AS(solve_comparison(0.0, 1.0, 2.0, 1.0, 0.1), ModelError);
}

TEST_CASE("blended W") {
  const Grid g(1, 4.0, 0.05);
  const Eigen::VectorXd w = blended_lyapunov_nodes(parse_expr(kLogTail), 2.0, g);
  CHECK(w[g.index_of(0.0)] == 0.0);  // log(R0/2)
  CHECK(w[g.index_of(0.5)] == 0.0);
  CHECK(w[g.index_of(3.0)] == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  for (Eigen::Index k = g.index_of(0.0); k + 1 < g.size(); ++k) CHECK(w[k + 1] >= w[k]);
}

TEST_CASE("supersolution inequalities") {
  SUBCASE("cubic with log tail") {
    auto steps = std::make_shared<const StepCache>(cubic_benchmark(), Grid(1, 4.0, 0.05), 1e-3);
    LyapunovData L = with_W(kLogTail);
    L.R0 = 2.0;
    L.g = {1.0, 2.0};
    const SupersolutionReport r = supersolution_check(steps, 0.0, 0.5, 1.0, L);
    CHECK(r.super_holds);
    CHECK(r.beta_holds);
    CHECK(r.nodes == 81);
    CHECK(r.beta_pairs == 16 * 15 / 2);
    const SupersolutionReport empty = supersolution_check(steps, 0.5, 0.5, 0.5, L);
    CHECK(empty.super_worst == 0.0);
    CHECK(empty.beta_worst == 0.0);
  }
  SUBCASE("autonomous OU, g below the true decay") {
    const OUParams ou = OUParams::parse("-1", "0", "1");
    auto steps = std::make_shared<const StepCache>(ou.field(), Grid(1, 8.0, 0.05), 1e-3);
    LyapunovData L = with_W("x1^2");
    L.g = {1.0, 1.0};
    const SupersolutionReport r = supersolution_check(steps, 0.0, 0.5, 1.0, L);
    CHECK(r.super_holds);
    CHECK(r.beta_holds);
    CHECK(r.beta_worst < 0.0);
    CHECK(r.g_shift == doctest::Approx(2.0).epsilon(1e-12));
  }
}

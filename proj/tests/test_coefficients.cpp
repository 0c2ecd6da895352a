#include <doctest.h>

#include <cmath>
#include <random>

#include "nape/coefficients.hpp"
#include "nape/errors.hpp"

using namespace nape;

TEST_CASE("benchmarks validate with unit ellipticity") {
  for (const auto& c : {ou_benchmark(), cubic_benchmark()}) {
    const FieldValidation v = validate_field(c, 10.0, 41);
    CHECK(v.accepted);
    CHECK(v.eta0 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v.periodicity_violation <= 1e-12);
    CHECK(v.errors.empty());
    CHECK(v.field.eta0 == 1.0);
  }
}

TEST_CASE("degenerate and non-periodic diffusion is rejected with a witness") {
  const FieldValidation v = validate_field(make_field(1, 1.0, {{"t"}}, {"0"}), 5.0, 11);
  CHECK_FALSE(v.accepted);
  CHECK(v.eta0 == 0.0);
  CHECK(v.eta0_witness.t == 0.0);
  // t itself is not 1-periodic; both defects are reported.
  CHECK(v.periodicity_violation > 1e-12);
  REQUIRE(v.rejection_witness.has_value());
  CHECK(v.rejection_witness->t == 0.0);
}

TEST_CASE("constant SPD diffusion: eta0 is the smallest eigenvalue") {
  const FieldValidation v = validate_field(make_field(2, 2.0, {{"3", "0"}, {"0", "0.25"}}, {"-x1", "-x2"}), 4.0, 100);
  CHECK(v.accepted);
  CHECK(std::abs(v.eta0 - 0.25) <= 1e-12);
}

TEST_CASE("evaluation failures reject the field") {
  const FieldValidation v = validate_field(make_field(1, 1.0, {{"1"}}, {"log(x1)"}), 2.0, 9);
  CHECK_FALSE(v.accepted);
  CHECK_FALSE(v.errors.empty());
  CHECK(v.rejection_witness.has_value());
}

TEST_CASE("structural rules") {
  CHECK_THROWS_AS(make_field(3, 1.0, {{"1"}}, {"0"}), ModelError);
  CHECK_THROWS_AS(make_field(1, 0.0, {{"1"}}, {"0"}), ModelError);
  CHECK_THROWS_AS(make_field(2, 1.0, {{"1", "0.1"}, {"0.1", "1"}}, {"0", "0"}), ModelError);
  CHECK_THROWS_AS(make_field(1, 1.0, {{"1"}}, {"x2"}), ModelError);
  CHECK_THROWS_AS(make_field(1, 1.0, {{"1"}}, {"x1 +"}), ParseError);
}

TEST_CASE("operator images") {
  CHECK(apply_operator(ou_benchmark(), parse_expr("x1^2"), {0.0, 3.0, 0.0}) == doctest::Approx(-10.0).epsilon(1e-14));
  CHECK(apply_operator(cubic_benchmark(), parse_expr("log(x1)"), {0.0, 4.0, 0.0}) ==
        doctest::Approx(-16.0625).epsilon(1e-14));
  CHECK(apply_operator(cubic_benchmark(), parse_expr("7.5"), {0.3, -2.0, 0.0}) == 0.0);

  // d = 2: Tr(Q D^2 f) + <b, grad f> for f = x1^2 x2 against a hand expansion.
  const CoefficientField c = make_field(2, 1.0, {{"2", "0"}, {"0", "1+x1^2"}}, {"-x1", "sin(t)"});
  const Expr f = parse_expr("x1^2*x2");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    const Point p{u(rng), u(rng), u(rng)};
    const double expect = 2.0 * 2.0 * p.x2 + (-p.x1) * 2.0 * p.x1 * p.x2 + std::sin(p.t) * p.x1 * p.x1;
    CHECK(apply_operator(c, f, p) == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("test functions carry their grid") {
  const Grid g(1, 2.0, 0.5), other(1, 2.0, 0.25);
  const TestFunction phi = TestFunction::nodes(g, Eigen::VectorXd::Ones(g.size()));
  CHECK(phi.on(g).size() == g.size());
  CHECK_THROWS_AS(phi.on(other), ModelError);
  const TestFunction e = TestFunction::expr(parse_expr("x1"));
  CHECK(e.on(g)[0] == -2.0);
}

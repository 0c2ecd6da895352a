#include <doctest.h>

#include <cmath>

#include "nape/diagnostics.hpp"
#include "nape/errors.hpp"

using namespace nape;

TEST_CASE("Chapman-Kolmogorov holds to rounding") {
  for (const auto& c : {ou_benchmark(), cubic_benchmark()}) {
    auto steps = std::make_shared<const StepCache>(c, Grid(1, 4.0, 0.05), 1e-3);
    const auto battery = sample_battery(standard_battery(), steps->grid());
    const CompositionReport r = chapman_kolmogorov_check(steps, 0.0, 0.5, 1.0, battery);
    CHECK(r.residual <= 1e-10);
    CHECK(r.per_function.size() == 5);
    CHECK(chapman_kolmogorov_check(steps, 0.25, 0.25, 1.0, battery).residual == 0.0);
    CHECK_THROWS_AS(chapman_kolmogorov_check(steps, 0.0, 1.5, 1.0, battery), ModelError);
    CHECK_THROWS_AS(chapman_kolmogorov_check(steps, 0.0, 0.5004, 1.0, battery), ModelError);
  }
}

TEST_CASE("expanding domains") {
  const Expr bump = parse_expr("0.5*(1-tanh(8*(x1^2-1)))");
  SUBCASE("cubic: monotone, increments collapse") {
    const ExpandingDomainReport r = expanding_domain_study(cubic_benchmark(), 1, 0.05, 0.0, 1.0, 1e-3, bump, {2, 4, 8});
    CHECK(r.monotone);
    CHECK(r.increments_decreasing);
    REQUIRE(r.increments.size() == 2);
    CHECK(r.increments[1] * 5.0 <= r.increments[0]);
    CHECK(r.core_radius == 1.0);
    CHECK(r.core_x.size() == 41);
  }
  SUBCASE("zero data stays zero") {
    const ExpandingDomainReport r =
        expanding_domain_study(ou_benchmark(), 1, 0.05, 0.0, 1.0, 1e-3, parse_expr("0"), {2, 4});
    for (const auto& u : r.core_values) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("OU, phi = 1: leakage shrinks along the ladder") {
    const ExpandingDomainReport r =
        expanding_domain_study(ou_benchmark(), 1, 0.05, 0.0, 1.0, 1e-3, parse_expr("1"), {2, 4, 8});
    const Eigen::Index mid = r.core_x.size() / 2;
    CHECK(r.core_x[mid] == 0.0);
    CHECK(r.core_values[0][mid] < r.core_values[1][mid]);
    CHECK(r.core_values[1][mid] < r.core_values[2][mid]);
    CHECK(r.core_values[2][mid] <= 1.0 + 1e-12);
    CHECK(r.monotone);
  }
  CHECK_THROWS_AS(expanding_domain_study(ou_benchmark(), 1, 0.05, 0.0, 1.0, 1e-3, bump, {4, 2}), ModelError);
  CHECK_THROWS_AS(expanding_domain_study(ou_benchmark(), 1, 0.05, 0.0, 1.0, 1e-3, bump, {2, 4.01}), ModelError);
  CHECK_THROWS_AS(expanding_domain_study(ou_benchmark(), 1, 0.05, 0.0, 1.0, 1e-3, parse_expr("x1"), {2, 4}),
                  ModelError);
}

TEST_CASE("derivative in the initial time") {
  SUBCASE("zero function") {
    auto steps = std::make_shared<const StepCache>(ou_benchmark(), Grid(1, 8.0, 0.05), 1e-3);
    const DerivativeRelationReport r = derivative_relation_check(steps, 0.5, 1.5, {{"zero", parse_expr("0")}});
    CHECK(r.residual == 0.0);
  }
  SUBCASE("support violation") {
    auto steps = std::make_shared<const StepCache>(ou_benchmark(), Grid(1, 4.0, 0.05), 1e-3);
    CHECK_THROWS_AS(derivative_relation_check(steps, 0.5, 1.5, {{"wide", parse_expr("exp(-x1^2/8)")}}), ModelError);
  }
  SUBCASE("OU residual is small and refines at order dt + h^2") {
    auto coarse = std::make_shared<const StepCache>(ou_benchmark(), Grid(1, 8.0, 0.05), 1e-3);
    auto fine = std::make_shared<const StepCache>(ou_benchmark(), Grid(1, 8.0, 0.025), 2.5e-4);
    const DerivativeRelationReport a = derivative_relation_check(coarse, 0.5, 1.5, compact_battery());
    const DerivativeRelationReport b = derivative_relation_check(fine, 0.5, 1.5, compact_battery());
    CHECK(a.residual <= 0.05);
    const double ratio = a.residual / b.residual;
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 6.0);
  }
}

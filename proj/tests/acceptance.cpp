// Acceptance run: one PASS/FAIL line per criterion at the pinned tolerances.
// Oracles are computed here independently of the library where possible
// (closed forms, midpoint sums, finite differences).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nape/cli.hpp"
#include "nape/decay.hpp"
#include "nape/diagnostics.hpp"
#include "nape/lyapunov.hpp"
#include "nape/measures.hpp"
#include "nape/montecarlo.hpp"
#include "nape/ou.hpp"
#include "nape/spectral.hpp"

using namespace nape;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAIL]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::shared_ptr<const StepCache> cache(const CoefficientField& c, double R, double h = 0.05, double dt = 1e-3) {
  return std::make_shared<const StepCache>(c, Grid(c.dim, R, h), dt);
}

const std::vector<std::pair<std::string, std::string>> kAgreement = {
    {"1", "1"}, {"x", "x1"}, {"x^2", "x1^2"}, {"sin x", "sin(x1)"}};

// Closed-form OU expectation computed here: for a = -1, q = 1 the law of the
// solution at t from (s, x) is Gaussian with
//   mean = e^{-(t-s)} x + int_s^t cos(2 pi r) e^{-(t-r)} dr,  var = 1 - e^{-2(t-s)},
// integrated against phi by a fine midpoint sum.
double ou_oracle(double s, double t, double x, const std::function<double(double)>& phi) {
  const double tau = t - s;
  auto F = [](double r) { return (std::cos(2 * pi * r) + 2 * pi * std::sin(2 * pi * r)) / (1 + 4 * pi * pi); };
  const double mean = std::exp(-tau) * x + F(t) - std::exp(-tau) * F(s);
  const double sd = std::sqrt(1.0 - std::exp(-2.0 * tau));
  const int n = 20000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = -12.0 + 24.0 * (i + 0.5) / n;
    acc += phi(mean + sd * z) * std::exp(-0.5 * z * z);
  }
  return acc * 24.0 / n / std::sqrt(2 * pi);
}

Outcome ac1() {
  Outcome o;
  const auto steps = cache(ou_benchmark(), 8.0);
  const Grid& g = steps->grid();
  const Propagator P(steps, 0.0, 1.0);
  const auto half = g.core(4.0);
  for (const auto& [label, src] : kAgreement) {
    const Expr phi = parse_expr(src);
    const CompiledExpr f(phi);
    const Eigen::VectorXd u = P.apply(g.sample(phi));
    double err = 0.0, err_half = 0.0;
    for (auto k : half) {
      const double x = g.node(k)[0];
      const double e = std::abs(u[k] - ou_oracle(0.0, 1.0, x, [&](double y) { return f({1.0, y, 0.0}); }));
      err_half = std::max(err_half, e);
      if (std::abs(x) <= 2.0 + 1e-12) err = std::max(err, e);
    }
    o.require(err <= 5e-3, "PDE " + label + fmt(" core R/4 %.2e (R/2 %.2e)", err, err_half));
  }
  const MCSample s = simulate(ou_benchmark(), 0.0, 1.0, {0, 0.0, 0}, 1000000, 1e-3, 2024);
  for (const auto& [label, src] : kAgreement) {
    const CompiledExpr f(parse_expr(src));
    const MCEstimate e = s.estimate(parse_expr(src));
    const double exact = ou_oracle(0.0, 1.0, 0.0, [&](double y) { return f({1.0, y, 0.0}); });
    const double tol = 3.0 * e.stderr_ + 2e-3;
    o.require(std::abs(e.mean - exact) <= tol, "MC " + label + fmt(" %.2e <= %.2e", std::abs(e.mean - exact), tol));
  }
  return o;
}

Outcome ac2() {
  Outcome o;
  for (const auto& [name, field, R] : {std::tuple{"OU", ou_benchmark(), 8.0}, std::tuple{"cubic", cubic_benchmark(), 4.0}}) {
    const auto steps = cache(field, R);
    const Grid& g = steps->grid();
    const auto battery = standard_battery();
    double contraction = -1e300, positivity = 1e300;
    std::vector<Eigen::VectorXd> sampled;
    for (const NamedFunction& f : battery) {
      const Eigen::VectorXd phi = g.sample(f.expr);
      sampled.push_back(phi);
      const Eigen::VectorXd u = Propagator(steps, 0.0, 1.0).apply(phi);
      contraction = std::max(contraction, u.cwiseAbs().maxCoeff() - phi.cwiseAbs().maxCoeff());
      if (phi.minCoeff() >= 0.0) positivity = std::min(positivity, u.minCoeff());
    }
    const double ck = chapman_kolmogorov_check(steps, 0.0, 0.4, 1.0, sampled).residual;
    const Eigen::MatrixXd K = Propagator(steps, 0.0, 1.0).kernel();
    double row = 0.0;
    for (auto i : g.interior()) row = std::max(row, K.row(i).sum());
    const std::string n(name);
    o.require(contraction <= 1e-12, n + fmt(" sup excess %.1e", contraction));
    o.require(positivity >= -1e-12, n + fmt(" min %.1e", positivity));
    o.require(ck <= 1e-10, n + fmt(" CK %.1e", ck));
    o.require(row <= 1.0 + 1e-12 && K.minCoeff() >= -1e-12, n + fmt(" max row sum 1%+.1e", row - 1.0));
  }
  return o;
}

Outcome ac3() {
  Outcome o;
  for (const auto& [name, field] : {std::pair{"OU", ou_benchmark()}, std::pair{"cubic", cubic_benchmark()}}) {
    const ExpandingDomainReport e =
        expanding_domain_study(field, 1, 0.05, 0.0, 1.0, 1e-3, parse_expr("1"), {2.0, 4.0, 8.0});
    double worst = 0.0;
    for (double v : e.monotonicity_violation) worst = std::max(worst, v);
    o.require(worst <= 1e-12, std::string(name) + fmt(" monotonicity %.1e", worst));
    o.require(e.increments_decreasing, std::string(name) + fmt(" increments %.2e > %.2e", e.increments[0], e.increments[1]));
  }
  return o;
}

Outcome ac4() {
  Outcome o;
  const double h = 0.05;
  auto rho = [&](const CoefficientField& c, double R) {
    return tightness_radius(Propagator(cache(c, R), 0.0, 1.0), 0.01).radius;
  };
  auto kstar = [&](const CoefficientField& c, double R) {
    return lp_compactness_probe(Propagator(cache(c, R), 0.0, 1.0), 2.0).k_star;
  };
  const double c4 = rho(cubic_benchmark(), 4.0), c8 = rho(cubic_benchmark(), 8.0);
  const double o4 = rho(ou_benchmark(), 4.0), o8 = rho(ou_benchmark(), 8.0);
  o.require(std::abs(c8 - c4) <= 2 * h, fmt("cubic rho %.2f -> %.2f", c4, c8));
  o.require(!(std::abs(o8 - o4) <= 2 * h) && o8 > o4, fmt("OU rho %.2f -> %.2f", o4, o8));
  std::vector<Eigen::Index> kc, ko;
  for (double R : {4.0, 8.0, 16.0}) {
    kc.push_back(kstar(cubic_benchmark(), R));
    ko.push_back(kstar(ou_benchmark(), R));
  }
  o.require(kc[0] == kc[1] && kc[1] == kc[2],
            "cubic k* " + std::to_string(kc[0]) + "," + std::to_string(kc[1]) + "," + std::to_string(kc[2]));
  o.require(ko[0] < ko[1] && ko[1] < ko[2],
            "OU k* " + std::to_string(ko[0]) + "," + std::to_string(ko[1]) + "," + std::to_string(ko[2]));
  return o;
}

Outcome ac5() {
  Outcome o;
  const SampleSpec spec;
  LyapunovData log_tail;
  log_tail.W = parse_expr("log(x1^2)/2");
  log_tail.R0 = 2.0;
  log_tail.g = {1.0, 2.0};
  o.require(check_superlinear(cubic_benchmark(), log_tail, spec).accepted, "cubic superlinear accepted");
  o.require(check_log_drift(cubic_benchmark(), 1.0, 2.0, 2.0, spec).accepted, "cubic log drift accepted");
  const MarginReport ou_super = check_superlinear(ou_benchmark(), log_tail, spec);
  const MarginReport ou_log = check_log_drift(ou_benchmark(), 1.0, 2.0, 2.0, spec);
  o.require(!ou_super.accepted, fmt("OU superlinear rejected at x=%.0f", ou_super.witness.x1));
  o.require(!ou_log.accepted, fmt("OU log drift rejected at x=%.0f", ou_log.witness.x1));

  LyapunovData quad;
  quad.W = parse_expr("x1^2");
  quad.a = 3.0;
  quad.cc = 1.0;
  for (const auto& [name, field, R] : {std::tuple{"OU", ou_benchmark(), 8.0}, std::tuple{"cubic", cubic_benchmark(), 4.0}}) {
    const std::string n(name);
    const DissipativityReport d = check_dissipativity(field, quad, spec);
    o.require(d.accepted, n + " dissipativity accepted");
    if (!d.accepted) continue;
    const auto steps = cache(field, R);
    const EvolutionMeasureFamily F = periodic_measures(steps);
    const MeanBoundReport mb = lyapunov_mean_bound(F, Propagator(steps, 0.0, 1.0), quad);
    o.require(mb.measure_bound_holds, n + fmt(" mean W %.3f <= %.3f", mb.max_mean_W, mb.measure_bound));
    o.require(mb.pointwise_bound_holds, n + fmt(" G W - W - a/c %.2e", mb.pointwise_excess));
  }

  const auto cubic = cache(cubic_benchmark(), 4.0);
  const UniformBoundReport u = uniform_lyapunov_bound(cubic, 1.0, 0.5, log_tail);
  o.require(u.sup_core <= 1.05 * u.bound, fmt("sup G(1,0.5)W %.3f <= 1.05 C = %.3f", u.sup_core, 1.05 * u.bound));
  const SupersolutionReport sr = supersolution_check(cubic, 0.0, 0.5, 1.0, log_tail);
  o.require(sr.super_holds && sr.beta_holds,
            fmt("supersolution worst %.1e, comparison worst %.1e", sr.super_worst, sr.beta_worst));
  return o;
}

Outcome ac6() {
  Outcome o;
  const ComparisonSolution z = solve_comparison(100.0, 1.0, 2.0, 1.0, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i < z.times.size(); ++i) {
    const double exact = 1.0 / (1.0 / 100.0 + z.times[i]);
    worst = std::max(worst, std::abs(z.values[i] - exact) / exact);
  }
  o.require(worst <= 1e-6, fmt("max relative error %.1e", worst));
  const double half = z.values[500];
  o.require(std::abs(half - 100.0 / 51.0) <= 1e-6 * (100.0 / 51.0), fmt("zeta(0.5) = %.9f", half));
  const double C = ComparisonSolution::bound(1.0, 2.0, 0.5);
  o.require(C == 2.0, fmt("C(0.5) = %.6f", C));
  for (double z0 : {10.0, 1e2, 1e6}) {
    const double v = solve_comparison(z0, 1.0, 2.0, 0.5, 1e-3).values.back();
    o.require(v <= C, fmt("zeta0 %.0e: %.6f", z0, v));
  }
  return o;
}

Outcome ac7() {
  Outcome o;
  const auto cubic = cache(cubic_benchmark(), 4.0);
  const EvolutionMeasureFamily F = periodic_measures(cubic);
  const auto battery = sample_battery(standard_battery(), F.grid);
  for (double len : {0.25, 0.5, 1.0, 2.0}) {
    const double r = invariance_residual(F, Propagator(cubic, 0.0, len), battery).residual;
    o.require(r <= 1e-6, fmt("invariance %.2fT %.1e", len, r));
  }
  const UniquenessProbe u = uniqueness_probe(cubic, F, 5, 1);
  o.require(u.max_total_variation <= 1e-8, fmt("uniqueness TV %.1e", u.max_total_variation));

  const EvolutionMeasureFamily G = periodic_measures(cache(ou_benchmark(), 8.0));
  const Eigen::VectorXd x = G.grid.sample(parse_expr("x1"));
  const double mean = G.weights[0].dot(x);
  const double var = G.weights[0].dot(x.cwiseProduct(x)) - mean * mean;
  const double exact_mean = 1.0 / (1.0 + 4.0 * pi * pi);
  o.require(std::abs(mean - exact_mean) <= 5e-3, fmt("OU mean %.6f vs %.6f", mean, exact_mean));
  o.require(std::abs(var - 1.0) <= 5e-3, fmt("OU variance %.6f", var));
  return o;
}

Outcome ac8() {
  Outcome o;
  for (const auto& [name, field] : {std::pair{"cubic", cubic_benchmark()}, std::pair{"OU", ou_benchmark()}}) {
    const std::string n(name);
    const auto steps = cache(field, 4.0);
    const SpectralReport a = floquet_data(assemble_period_map(steps, 0.0));
    const SpectralReport b = floquet_data(assemble_period_map(steps, 0.5));
    const double d1 = std::abs(a.lambda1 - b.lambda1) / a.lambda1;
    const double d2 = std::abs(a.lambda2_abs - b.lambda2_abs) / a.lambda2_abs;
    o.require(d1 <= 1e-8 && d2 <= 1e-8, n + fmt(" phase spread %.1e, %.1e", d1, d2));
    const double w0 = std::log(a.lambda2_abs / a.lambda1);
    const EvolutionMeasureFamily F = periodic_measures(steps);
    const DecayReport rep = decay_fit(steps, F, w0, 0.0, {"sin(x1)", parse_expr("sin(x1)")});
    const double sup = rep.fits[0].rate;
    o.require(std::abs(sup - w0) <= 0.1 * std::abs(w0), n + fmt(" sup rate %.4f vs omega0 %.4f", sup, w0));
    double spread = 0.0;
    for (const RateFit& f : rep.fits)
      for (const RateFit& g : rep.fits) spread = std::max(spread, std::abs(f.rate - g.rate) / std::abs(f.rate));
    o.require(spread <= 0.1, n + fmt(" sup/L2/L4 spread %.1e", spread));
    bool none_below = true;
    for (const RateFit& f : rep.fits) none_below = none_below && f.rate >= w0 - 0.1 * std::abs(w0);
    const OperatorDecay od = operator_decay(steps, F, w0, 0.0);
    none_below = none_below && od.fit.rate >= w0 - 0.1 * std::abs(w0);
    o.require(none_below, n + fmt(" operator-norm rate %.4f", od.fit.rate));
  }
  return o;
}

Outcome ac9() {
  Outcome o;
  for (const auto& [name, field] : {std::pair{"OU", ou_benchmark()}, std::pair{"cubic", cubic_benchmark()}}) {
    const double coarse = derivative_relation_check(cache(field, 8.0, 0.05, 1e-3), 0.5, 1.5, compact_battery()).residual;
    const double fine = derivative_relation_check(cache(field, 8.0, 0.025, 2.5e-4), 0.5, 1.5, compact_battery()).residual;
    const double ratio = coarse / fine;
    o.require(ratio >= 3.0 && ratio <= 6.0, std::string(name) + fmt(" %.2e / %.2e", coarse, fine) + fmt(" = %.2f", ratio));
  }
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome ac10() {
  Outcome o;
  const std::vector<std::string> corpus = {
      "sin(x1)*exp(-x1^2)",  "x1^3*(1 + 0.5*sin(2*pi*t))", "log(1 + x1^2)", "sqrt(1 + x1^2 + x2^2)",
      "tanh(3*x1)*cos(x2)",  "x1^2/(1 + x2^2)",            "exp(sin(t))*x1 - x2^3/3", "-(x1 - 2)^2*cos(pi*t)"};
  bool trip = true;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), ut(0.0, 1.0);
  for (const std::string& s : corpus) {
    const Expr a = parse_expr(s);
    const Expr b = parse_expr(to_string(a));
    trip = trip && to_string(b) == to_string(a);
    for (int i = 0; i < 20; ++i) {
      const Point p{ut(rng), ux(rng), ux(rng)};
      trip = trip && evaluate(a, p) == evaluate(b, p);
    }
  }
  o.require(trip, "parser round-trip on " + std::to_string(corpus.size()) + " expressions");

  // Richardson-extrapolated central differences as the oracle.
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Expr e = parse_expr(corpus[static_cast<std::size_t>(i) % corpus.size()]);
    const Var v = static_cast<Var>(i % 3);
    const Point p{ut(rng), ux(rng), ux(rng)};
    auto shifted = [&](double d) {
      Point q = p;
      (v == Var::t ? q.t : v == Var::x1 ? q.x1 : q.x2) += d;
      return evaluate(e, q);
    };
    const double h = 1e-3;
    const double d1 = (shifted(h) - shifted(-h)) / (2 * h), d2 = (shifted(h / 2) - shifted(-h / 2)) / h;
    const double fd = (4.0 * d2 - d1) / 3.0;
    const double sym = evaluate(differentiate(e, v), p);
    worst = std::max(worst, std::abs(sym - fd) / std::max(1.0, std::abs(sym)));
  }
  o.require(worst <= 1e-6, fmt("derivatives on 1000 samples %.1e", worst));

  const MCSample a = simulate(cubic_benchmark(), 0.0, 1.0, {0, 0.5, 0}, 20001, 1e-3, 77);
  const MCSample b = simulate(cubic_benchmark(), 0.0, 1.0, {0, 0.5, 0}, 20001, 1e-3, 77, 4);
  o.require((a.endpoints().array() == b.endpoints().array()).all(), "MC endpoints bit-exact across thread counts");

  const ExperimentConfig c = load_config(fs::path(NAPE_SOURCE_DIR) / "configs" / "cubic.json");
  const fs::path tmp = fs::temp_directory_path() / "nape_acceptance";
  fs::remove_all(tmp);
  const std::vector<std::string> names = {"solve", "measures", "spectrum", "mc"};
  run_experiments(c, names, {tmp / "a", std::nullopt, 0, false}, "acceptance");
  run_experiments(c, names, {tmp / "b", std::nullopt, 0, true}, "acceptance");
  o.require(slurp(tmp / "a" / "report.json") == slurp(tmp / "b" / "report.json"), "report.json bit-exact on rerun");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"AC1 OU triple agreement", ac1},      {"AC2 Markov structure", ac2},
      {"AC3 expanding domains", ac3},        {"AC4 compactness dichotomy", ac4},
      {"AC5 Lyapunov suite", ac5},           {"AC6 comparison ODE", ac6},
      {"AC7 periodic measures", ac7},        {"AC8 spectral decay", ac8},
      {"AC9 derivative relation", ac9},      {"AC10 tooling", ac10}};
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", name, sec, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

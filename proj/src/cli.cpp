#include "nape/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include "nape/decay.hpp"
#include "nape/diagnostics.hpp"
#include "nape/errors.hpp"
#include "nape/lyapunov.hpp"
#include "nape/measures.hpp"
#include "nape/montecarlo.hpp"
#include "nape/ou.hpp"
#include "nape/spectral.hpp"

namespace nape {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Shared, lazily built state. Experiments may run concurrently, so the
// expensive pieces are built once under std::call_once.
class RunContext {
 public:
  RunContext(const ExperimentConfig& c, fs::path out, std::optional<std::uint64_t> seed)
      : config(c), out_dir(std::move(out)), seed_override(seed) {}

  const ExperimentConfig& config;
  const fs::path out_dir;
  const std::optional<std::uint64_t> seed_override;

  Grid grid() const { return Grid(config.field.dim, config.numerics.R, config.numerics.h); }

  std::shared_ptr<const StepCache> steps() {
    std::call_once(steps_once_, [&] {
      steps_ = std::make_shared<const StepCache>(config.field, grid(), config.numerics.dt, config.numerics.theta,
                                                 config.numerics.convection);
    });
    return steps_;
  }

  const EvolutionMeasureFamily& family() {
    std::call_once(family_once_, [&] {
      family_ = std::make_unique<EvolutionMeasureFamily>(periodic_measures(
          steps(), config.param<int>("measures", "phases", 8), config.param<int>("measures", "spot_checks", 2)));
    });
    return *family_;
  }

  std::uint64_t seed(const std::string& experiment) const {
    return seed_override.value_or(config.param<std::uint64_t>(experiment, "seed", 1));
  }

  std::optional<OUParams> ou() const {
    if (!config.ou_reference) return std::nullopt;
    const OUReference& r = *config.ou_reference;
    return OUParams::parse(r.a, r.f, r.q, config.field.period);
  }

  fs::path dir(const std::string& experiment) const {
    const fs::path d = out_dir / experiment;
    fs::create_directories(d);
    return d;
  }

 private:
  std::once_flag steps_once_, family_once_;
  std::shared_ptr<const StepCache> steps_;
  std::unique_ptr<EvolutionMeasureFamily> family_;
};

json point_json(const Point& p, int dim) {
  json x = json::array({p.x1});
  if (dim == 2) x.push_back(p.x2);
  return {{"t", p.t}, {"x", x}};
}

json margin_json(const MarginReport& m, int dim) {
  json j{{"condition", m.condition},
         {"accepted", m.accepted},
         {"sup_margin", m.sup_margin},
         {"witness", point_json(m.witness, dim)},
         {"samples", m.samples},
         {"tolerance", m.tolerance}};
  if (!m.note.empty()) j["note"] = m.note;
  return j;
}

std::vector<NamedFunction> functions_from(const ExperimentConfig& c, const std::string& experiment,
                                          std::vector<NamedFunction> fallback) {
  const auto it = c.experiments.find(experiment);
  if (it == c.experiments.end() || !it->second.contains("functions")) return fallback;
  std::vector<NamedFunction> out;
  for (const auto& s : it->second.at("functions")) out.push_back({s.get<std::string>(), parse_expr(s.get<std::string>())});
  return out;
}

// Snaps t to the step grid of `c` (t is validated to lie on it by Propagator).
double snap(const ExperimentConfig& c, double t) { return std::round(t / c.numerics.dt) * c.numerics.dt; }

std::vector<double> first_coordinates(const Grid& g, const std::vector<Eigen::Index>& nodes) {
  std::vector<double> x;
  for (auto k : nodes) x.push_back(g.node(k)[0]);
  return x;
}

std::vector<double> values_at(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& nodes) {
  std::vector<double> y;
  for (auto k : nodes) y.push_back(v[k]);
  return y;
}

// Nodes along the first axis (x2 = 0) for CSV and plots.
std::vector<Eigen::Index> axis_nodes(const Grid& g) {
  std::vector<Eigen::Index> nodes;
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (g.dim() == 1 || g.node(k)[1] == 0.0) nodes.push_back(k);
  return nodes;
}

void write_matrix_csv(const fs::path& path, const Grid& g, const Eigen::MatrixXd& K) {
  std::ofstream out(path);
  out.precision(17);
  out << "x\\y";
  for (Eigen::Index j = 0; j < g.size(); ++j) out << ',' << g.node(j)[0];
  out << '\n';
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    out << g.node(i)[0];
    for (Eigen::Index j = 0; j < K.cols(); ++j) out << ',' << K(i, j);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

ExperimentResult run_validate(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  ExperimentResult r;
  const FieldValidation v =
      validate_field(c.field, c.param<double>("validate", "sample_R", c.numerics.R), c.param<int>("validate", "samples", 41));
  r.checks.push_back(Check::flag("field accepted", v.accepted));
  r.checks.push_back(Check::at_least("eta0", v.eta0, 0.0));
  r.checks.back().pass = v.eta0 > 0.0;
  r.checks.push_back(Check::at_most("periodicity violation", v.periodicity_violation, 1e-12));
  r.values["eta0_witness"] = point_json(v.eta0_witness, c.field.dim);
  r.values["periodicity_witness"] = point_json(v.periodicity_witness, c.field.dim);
  r.values["errors"] = v.errors;
  if (v.rejection_witness) r.values["rejection_witness"] = point_json(*v.rejection_witness, c.field.dim);
  return r;
}

ExperimentResult run_lyapunov(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const LyapunovBlock& B = *c.lyapunov;
  const LyapunovData L = B.data();
  const int dim = c.field.dim;
  SampleSpec spec;
  spec.R_domain = c.numerics.R;
  ExperimentResult r;

  json conditions = json::object();
  // A condition is binding only when the config states the expected verdict.
  auto record = [&](const std::string& name, const MarginReport& m) {
    conditions[name] = margin_json(m, dim);
    const auto it = B.expect.find(name);
    if (it != B.expect.end())
      r.checks.push_back(Check::flag(name + (it->second ? " accepted" : " rejected"), m.accepted == it->second));
  };

  record("function", check_lyapunov_function(L, dim, spec));
  if (B.lambda) {
    record("drift", check_drift_bound(c.field, L, spec));
  } else if (B.expect.count("drift")) {
    const DriftScan scan = scan_drift_lambda(c.field, L, spec);
    record("drift", scan.report);
    r.values["lambda_star"] = scan.lambda_star ? json(*scan.lambda_star) : json(nullptr);
  }
  std::optional<DissipativityReport> diss;
  if (B.a) {
    diss = check_dissipativity(c.field, L, spec);
    record("dissipativity", *diss);
    conditions["dissipativity"]["measure_bound"] = diss->measure_bound;
  }
  std::optional<MarginReport> super;
  if (B.g) {
    super = check_superlinear(c.field, L, spec);
    record("superlinear", *super);
  }
  if (B.log_drift) record("log_drift", check_log_drift(c.field, B.log_drift->c, B.log_drift->gamma, B.log_drift->R0, spec));
  r.values["conditions"] = conditions;

  const double T = c.field.period;
  if (diss && diss->accepted) {
    const MeanBoundReport mb = lyapunov_mean_bound(ctx.family(), Propagator(ctx.steps(), 0.0, T), L);
    r.checks.push_back(Check::at_most("max phase mean of W", mb.max_mean_W, mb.measure_bound + mb.tolerance));
    r.checks.push_back(Check::at_most("G(T,0)W - W - a/c on core", mb.pointwise_excess, mb.tolerance));
  }
  if (B.g) {
    const PowerG& g = *B.g;
    const ComparisonSolution z = solve_comparison(100.0, g.c, g.gamma, 1.0, 1e-3);
    r.checks.push_back(Check::at_most("comparison ODE relative error", z.max_relative_error(), 1e-6));
    const double delta = c.param<double>("lyapunov", "delta", 0.5);
    const double C = ComparisonSolution::bound(g.c, g.gamma, delta);
    r.values["C_delta"] = {{"delta", delta}, {"value", C}};
    for (double z0 : {10.0, 1e2, 1e6})
      r.checks.push_back(Check::at_most("zeta(delta) from " + std::to_string(static_cast<long long>(z0)),
                                        ComparisonSolution::exact(z0, g.c, g.gamma, delta), C));
    if (super && super->accepted) {
      const UniformBoundReport u = uniform_lyapunov_bound(ctx.steps(), snap(c, T), snap(c, delta), L);
      r.checks.push_back(Check::at_most("sup core G(t,t-delta)W", u.sup_core, u.bound * (1.0 + u.relative_slack)));
    }
  }
  if (c.experiments.at("lyapunov").contains("supersolution")) {
    const json& s = c.experiments.at("lyapunov").at("supersolution");
    const SupersolutionReport sr = supersolution_check(ctx.steps(), s.at("r").get<double>(), s.at("s").get<double>(),
                                                       s.at("t").get<double>(), L);
    r.checks.push_back(Check::at_most("supersolution inequality violation", sr.super_worst, sr.tolerance));
    r.checks.back().pass = sr.super_holds;
    r.checks.push_back(Check::at_most("comparison inequality violation", sr.beta_worst, sr.tolerance));
    r.checks.back().pass = sr.beta_holds;
    r.values["supersolution"] = {{"nodes", sr.nodes}, {"beta_pairs", sr.beta_pairs}, {"g_shift", sr.g_shift}};
  }
  return r;
}

ExperimentResult run_solve(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const double s = c.param<double>("solve", "s", 0.0), t = c.param<double>("solve", "t", c.field.period);
  const auto steps = ctx.steps();
  const Grid& g = steps->grid();
  const Propagator P(steps, s, t);
  const auto battery = functions_from(c, "solve", standard_battery());
  const auto ou = ctx.ou();
  const double core_r = c.param<double>("solve", "core_fraction", 0.25) * c.numerics.R;
  const auto core = g.core(core_r);
  const auto axis = axis_nodes(g);
  ExperimentResult r;

  std::vector<std::string> header{"x"};
  std::vector<std::vector<double>> columns{first_coordinates(g, axis)};
  std::vector<Series> plot;
  std::vector<Eigen::VectorXd> sampled;
  for (const NamedFunction& f : battery) {
    const Eigen::VectorXd phi = g.sample(f.expr, s);
    sampled.push_back(phi);
    const Eigen::VectorXd u = P.apply(phi);
    r.checks.push_back(Check::at_most("contraction " + f.name, u.cwiseAbs().maxCoeff(), phi.cwiseAbs().maxCoeff() + 1e-12));
    if (phi.minCoeff() >= 0.0) r.checks.push_back(Check::at_least("positivity " + f.name, u.minCoeff(), -1e-12));
    header.push_back(f.name);
    columns.push_back(values_at(u, axis));
    plot.push_back({f.name, columns.front(), columns.back()});
    if (ou && g.dim() == 1) {
      double err = 0.0;
      std::vector<double> exact;
      for (auto k : axis) exact.push_back(ou_exact_value(*ou, s, t, g.node(k)[0], f.expr));
      for (auto k : core) err = std::max(err, std::abs(u[k] - ou_exact_value(*ou, s, t, g.node(k)[0], f.expr)));
      r.checks.push_back(Check::at_most("closed-form error " + f.name, err, 5e-3));
      header.push_back(f.name + " exact");
      columns.push_back(std::move(exact));
    }
  }
  const double mid = snap(c, 0.5 * (s + t));
  r.checks.push_back(Check::at_most("composition residual", chapman_kolmogorov_check(steps, s, mid, t, sampled).residual, 1e-10));
  r.values["core_radius"] = core_r;

  if (c.experiments.at("solve").contains("ladder")) {
    const auto ladder = c.experiments.at("solve").at("ladder").get<std::vector<double>>();
    const ExpandingDomainReport e =
        expanding_domain_study(c.field, g.dim(), c.numerics.h, s, t, c.numerics.dt, parse_expr("1"), ladder);
    double worst = 0.0;
    for (double v : e.monotonicity_violation) worst = std::max(worst, v);
    r.checks.push_back(Check::at_most("expanding-domain monotonicity violation", worst, 1e-12));
    r.checks.push_back(Check::flag("expanding-domain increments decreasing", e.increments_decreasing));
    r.values["expanding_domain"] = {{"radii", e.radii}, {"increments", e.increments}};
  }

  const fs::path d = ctx.dir("solve");
  write_csv(d / "solution.csv", header, columns);
  write_svg_plot(d / "solution.svg", {"G(t,s) phi", "x", "value", false}, plot);
  r.artifacts = {"solve/solution.csv", "solve/solution.svg"};
  return r;
}

ExperimentResult run_kernel(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const double s = c.param<double>("kernel", "s", 0.0), t = c.param<double>("kernel", "t", c.field.period);
  const auto x = c.param<std::vector<double>>("kernel", "x", std::vector<double>(static_cast<std::size_t>(c.field.dim), 0.0));
  const auto steps = ctx.steps();
  const Grid& g = steps->grid();
  const Propagator P(steps, s, t);
  ExperimentResult r;

  const Eigen::Index base = g.index_of(x[0], c.field.dim == 2 ? x[1] : 0.0);
  const TransitionRow row = kernel_row(P, base);
  r.checks.push_back(Check::at_most("row mass", row.weights.sum(), 1.0 + 1e-12));
  r.checks.push_back(Check::at_least("row minimum", row.weights.minCoeff(), 0.0));
  r.values["row_defect"] = row.defect;
  const auto axis = axis_nodes(g);
  const fs::path d = ctx.dir("kernel");
  const Eigen::VectorXd density = row.weights / g.cell_volume();
  write_csv(d / "kernel_row.csv", {"y", "density"}, {first_coordinates(g, axis), values_at(density, axis)});
  write_svg_plot(d / "kernel_row.svg", {"transition density from x", "y", "density", false},
                 {{"p(t,s,x,.)", first_coordinates(g, axis), values_at(density, axis)}});
  r.artifacts = {"kernel/kernel_row.csv", "kernel/kernel_row.svg"};

  if (g.size() <= kDenseNodeLimit) {
    const Eigen::MatrixXd K = P.kernel();
    const auto interior = g.interior();
    double max_row = 0.0, min_entry = 0.0;
    for (auto i : interior) {
      max_row = std::max(max_row, K.row(i).sum());
      min_entry = std::min(min_entry, K.row(i).minCoeff());
    }
    r.checks.push_back(Check::at_most("max kernel row sum", max_row, 1.0 + 1e-12));
    r.checks.push_back(Check::at_least("min kernel entry", min_entry, -1e-12));
    if (g.dim() == 1) {
      write_matrix_csv(d / "kernel.csv", g, K);
      r.artifacts.push_back("kernel/kernel.csv");
    }
  }
  return r;
}

ExperimentResult run_tightness(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const double s = c.param<double>("tightness", "s", 0.0), t = c.param<double>("tightness", "t", c.field.period);
  const double eps = c.param<double>("tightness", "eps", 0.01);
  const double h = c.numerics.h;
  const auto steps = ctx.steps();
  const auto wide = std::make_shared<const StepCache>(c.field, Grid(c.field.dim, 2.0 * c.numerics.R, h), c.numerics.dt,
                                                      c.numerics.theta, c.numerics.convection);
  const Propagator P(steps, s, t), P2(wide, s, t);
  const TightnessProfile a = tightness_radius(P, eps), b = tightness_radius(P2, eps);
  ExperimentResult r;

  const bool rho_stable = a.resolvable && b.resolvable && std::abs(b.radius - a.radius) <= 2.0 * h;
  r.values["rho"] = {{"R", c.numerics.R}, {"rho_R", a.radius}, {"rho_2R", b.radius}, {"slack", 2.0 * h}};
  bool k_stable = rho_stable;
  if (P2.grid().size() <= kDenseNodeLimit) {
    const CompactnessProbe ka = lp_compactness_probe(P, 2.0), kb = lp_compactness_probe(P2, 2.0);
    k_stable = ka.k_star == kb.k_star;
    r.values["k_star"] = {{"k_star_R", ka.k_star}, {"k_star_2R", kb.k_star}};
    r.values["net_size"] = {{"R", ka.net_size}, {"2R", kb.net_size}};
  }
  if (!std::isfinite(a.radius)) r.values["rho"]["rho_R"] = "unresolvable";
  if (!std::isfinite(b.radius)) r.values["rho"]["rho_2R"] = "unresolvable";
  const std::string cls = rho_stable && k_stable ? "TIGHT" : (!rho_stable && !k_stable ? "NON-TIGHT" : "INCONCLUSIVE");
  r.classification = cls;
  const std::string expect = c.param<std::string>("tightness", "expect", "");
  if (!expect.empty())
    r.checks.push_back(Check::flag("classification " + cls + " matches " + expect,
                                   (cls == "TIGHT") == (expect == "tight") && cls != "INCONCLUSIVE"));

  if (c.experiments.at("tightness").contains("sweep")) {
    auto times = c.experiments.at("tightness").at("sweep").get<std::vector<double>>();
    const double ref = times.front();
    const TightnessSweep sw = tightness_monotone_check(steps, s, ref, times, eps);
    r.values["sweep"] = {{"reference", ref}, {"times", sw.times}, {"radii", sw.radii}, {"holds", sw.holds}};
    // Binding only for families expected to be tight.
    if (expect == "tight") r.checks.push_back(Check::flag("radius monotone in t", sw.holds));
  }

  const fs::path d = ctx.dir("tightness");
  auto profile = [&](const TightnessProfile& p, const Grid& g) {
    Series sr{"", {}, {}};
    for (std::size_t i = 0; i < p.base.size(); ++i) {
      if (g.dim() == 2 && g.node(p.base[i])[1] != 0.0) continue;
      sr.x.push_back(g.node(p.base[i])[0]);
      sr.y.push_back(p.rho[i]);
    }
    return sr;
  };
  Series sa = profile(a, P.grid()), sb = profile(b, P2.grid());
  sa.label = "R = " + std::to_string(c.numerics.R).substr(0, 5);
  sb.label = "R = " + std::to_string(2.0 * c.numerics.R).substr(0, 5);
  write_csv(d / "profile_R.csv", {"x", "rho"}, {sa.x, sa.y});
  write_csv(d / "profile_2R.csv", {"x", "rho"}, {sb.x, sb.y});
  write_svg_plot(d / "profile.svg", {"tightness radius by base point", "x", "rho", false}, {sa, sb});
  r.artifacts = {"tightness/profile_R.csv", "tightness/profile_2R.csv", "tightness/profile.svg"};
  return r;
}

ExperimentResult run_measures(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const auto steps = ctx.steps();
  const EvolutionMeasureFamily& F = ctx.family();
  const Grid& g = F.grid;
  const double T = c.field.period;
  ExperimentResult r;

  std::vector<Eigen::VectorXd> battery = sample_battery(standard_battery(), g);
  for (double frac : {0.25, 0.5, 1.0, 2.0}) {
    const double t = snap(c, frac * T);
    const InvarianceResidual ir = invariance_residual(F, Propagator(steps, 0.0, t), battery);
    r.checks.push_back(Check::at_most("invariance residual t-s=" + std::to_string(frac).substr(0, 4) + "T", ir.residual, 1e-6));
  }
  const UniquenessProbe u = uniqueness_probe(steps, F, c.param<int>("measures", "starts", 5), ctx.seed("measures"));
  r.checks.push_back(Check::at_most("uniqueness total variation", u.max_total_variation, 1e-8));
  r.values["lambda1"] = F.lambda1;
  r.values["total_defect"] = F.total_defect();
  r.values["fixed_point_tv"] = F.fixed_point_tv;
  json spots = json::array();
  for (const SpotCheck& sc : F.spot_checks) spots.push_back({{"phase", sc.phase}, {"total_variation", sc.total_variation}});
  r.values["spot_checks"] = spots;

  const Eigen::VectorXd x = g.sample(parse_expr("x1"));
  json moments = json::array();
  const auto ou = ctx.ou();
  for (std::size_t j = 0; j < F.phases.size(); ++j) {
    const double mean = F.weights[j].dot(x);
    const double var = F.weights[j].dot(x.cwiseProduct(x)) - mean * mean;
    moments.push_back({{"phase", F.phases[j]}, {"mean", mean}, {"variance", var}});
    if (ou && g.dim() == 1) {
      const GaussianMoments m = ou_exact_measure(*ou, F.phases[j]);
      const std::string ph = std::to_string(F.phases[j]).substr(0, 5);
      r.checks.push_back(Check::within("measure mean at phase " + ph, mean, m.mean, 5e-3));
      r.checks.push_back(Check::within("measure variance at phase " + ph, var, m.variance, 5e-3));
    }
  }
  r.values["moments"] = moments;

  const fs::path d = ctx.dir("measures");
  const auto axis = axis_nodes(g);
  std::vector<std::string> header{"x"};
  std::vector<std::vector<double>> columns{first_coordinates(g, axis)};
  std::vector<Series> plot;
  for (std::size_t j = 0; j < F.phases.size(); ++j) {
    const std::string label = "phase " + std::to_string(F.phases[j]).substr(0, 5);
    header.push_back(label);
    columns.push_back(values_at(F.density(j), axis));
    plot.push_back({label, columns.front(), columns.back()});
  }
  write_csv(d / "densities.csv", header, columns);
  write_svg_plot(d / "densities.svg", {"periodic measure densities", "x", "density", false}, plot);
  r.artifacts = {"measures/densities.csv", "measures/densities.svg"};
  return r;
}

ExperimentResult run_spectrum(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const double T = c.field.period;
  const auto phases = c.param<std::vector<double>>("spectrum", "phases", {0.0, 0.5 * T});
  const auto steps = ctx.steps();
  ExperimentResult r;

  std::vector<SpectralReport> reps;
  std::vector<double> ph, l1, l2, om;
  for (double p : phases) {
    const double s = snap(c, p);
    const PeriodMap V = assemble_period_map(steps, s);
    SpectralReport S = floquet_data(V);
    if (S.degenerate) throw NumericalError("degenerate spectrum at phase " + std::to_string(s) + ": " + S.diagnostic);
    const Projections pr = projections(S);
    const double scale = std::max(1.0, S.matrix_scale);
    r.checks.push_back(Check::at_most("right residual at phase " + std::to_string(s).substr(0, 5), S.residual_right, 1e-8 * scale));
    // P is idempotent and Q P = 0: checked on the Perron vector and on 1.
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(S.psi1.size());
    const double idem = (pr.P(pr.P(one)) - pr.P(one)).cwiseAbs().maxCoeff();
    const double qp = pr.Q(pr.P(one)).cwiseAbs().maxCoeff();
    r.checks.push_back(Check::at_most("P idempotent at phase " + std::to_string(s).substr(0, 5), idem, 1e-10));
    r.checks.push_back(Check::at_most("Q P = 0 at phase " + std::to_string(s).substr(0, 5), qp, 1e-10));
    ph.push_back(s);
    l1.push_back(S.lambda1);
    l2.push_back(S.lambda2_abs);
    om.push_back(S.omega0);
    r.values["phases"].push_back({{"phase", s},
                                  {"lambda1", S.lambda1},
                                  {"lambda2_abs", S.lambda2_abs},
                                  {"omega0", S.omega0},
                                  {"method", S.method},
                                  {"iterations", S.iterations}});
    reps.push_back(std::move(S));
  }
  for (std::size_t i = 1; i < reps.size(); ++i) {
    r.checks.push_back(Check::at_most("lambda1 phase spread", std::abs(l1[i] - l1[0]) / std::abs(l1[0]), 1e-8));
    r.checks.push_back(Check::at_most("|lambda2| phase spread", std::abs(l2[i] - l2[0]) / std::abs(l2[0]), 1e-8));
  }
  const fs::path d = ctx.dir("spectrum");
  write_csv(d / "spectrum.csv", {"phase", "lambda1", "lambda2_abs", "omega0"}, {ph, l1, l2, om});
  r.artifacts = {"spectrum/spectrum.csv"};
  return r;
}

ExperimentResult run_decay(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const double s = snap(c, c.param<double>("decay", "phase", 0.0));
  const int k_max = c.param<int>("decay", "k_max", 24);
  const auto p_list = c.param<std::vector<double>>("decay", "p", {2.0, 4.0});
  const auto steps = ctx.steps();
  const EvolutionMeasureFamily& F = ctx.family();
  const SpectralReport S = floquet_data(assemble_period_map(steps, s));
  if (S.degenerate) throw NumericalError("degenerate spectrum: " + S.diagnostic);
  const double w0 = S.omega0;
  ExperimentResult r;
  r.values["omega0"] = w0;

  const fs::path d = ctx.dir("decay");
  std::vector<Series> plot;
  const auto battery = functions_from(c, "decay", {{"sin(x1)", parse_expr("sin(x1)")}});
  for (const NamedFunction& f : battery) {
    const DecayReport rep = decay_fit(steps, F, w0, s, f, k_max, p_list);
    json fits = json::array();
    for (const RateFit& fit : rep.fits) {
      fits.push_back({{"norm", fit.tag},
                      {"rate", fit.rate},
                      {"k_min", fit.k_min},
                      {"k_max", fit.k_max},
                      {"r_squared", fit.r_squared},
                      {"reliable", fit.reliable}});
      r.checks.push_back(Check::within(f.name + " " + fit.tag + " rate", fit.rate, w0, 0.1 * std::abs(w0)));
    }
    r.checks.push_back(Check::at_most(f.name + " relative spread of rates", rep.max_relative_spread, 0.1));
    r.values["functions"][f.name] = fits;

    std::vector<double> k;
    for (int i = 1; i <= k_max; ++i) k.push_back(i);
    std::vector<std::string> header{"k", "sup"};
    std::vector<std::vector<double>> columns{k, rep.curves.sup};
    plot.push_back({f.name + " sup", k, rep.curves.sup});
    for (std::size_t i = 0; i < p_list.size(); ++i) {
      const std::string tag = "L" + std::to_string(static_cast<int>(p_list[i]));
      header.push_back(tag);
      columns.push_back(rep.curves.lp[i]);
      plot.push_back({f.name + " " + tag, k, rep.curves.lp[i]});
    }
    const std::string file = "curve_" + std::to_string(&f - battery.data()) + ".csv";
    write_csv(d / file, header, columns);
    r.artifacts.push_back("decay/" + file);
  }

  if (steps->grid().size() <= 400) {
    const OperatorDecay od = operator_decay(steps, F, w0, s, k_max);
    r.checks.push_back(Check::at_least("operator-norm rate", od.fit.rate, w0 - 0.1 * std::abs(w0)));
    r.values["operator_rate"] = od.fit.rate;
    std::vector<double> k;
    for (int i = 1; i <= k_max; ++i) k.push_back(i);
    plot.push_back({"operator norm", k, od.error});
    std::vector<double> ref;
    for (double kk : k) ref.push_back(od.error.front() * std::exp(w0 * (kk - 1.0) * c.field.period));
    plot.push_back({"slope omega0", k, ref});
  }
  write_svg_plot(d / "decay.svg", {"decay towards the measure mean", "k (periods)", "error", true}, plot);
  r.artifacts.push_back("decay/decay.svg");
  return r;
}

ExperimentResult run_mc(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const double s = c.param<double>("mc", "s", 0.0), t = c.param<double>("mc", "t", c.field.period);
  const auto xv = c.param<std::vector<double>>("mc", "x", std::vector<double>(static_cast<std::size_t>(c.field.dim), 0.0));
  const auto n = c.param<std::int64_t>("mc", "n", 100000);
  const double em_dt = c.param<double>("mc", "em_dt", c.numerics.dt);
  const std::uint64_t seed = ctx.seed("mc");
  const Point x{0.0, xv[0], c.field.dim == 2 ? xv[1] : 0.0};
  ExperimentResult r;

  const MCSample sample = simulate(c.field, s, t, x, n, em_dt, seed, 1);
  r.checks.push_back(Check::at_most("explosion fraction", sample.explosion_fraction(), 1e-4));
  r.values["seed"] = seed;
  r.values["exploded"] = sample.exploded();

  const auto ou = ctx.ou();
  const auto steps = ctx.steps();
  const Grid& g = steps->grid();
  const Propagator P(steps, s, t);
  const Eigen::Index base = g.index_of(x.x1, x.x2);
  const bool on_node = std::abs(g.node(base)[0] - x.x1) <= 1e-12 && std::abs(g.node(base)[1] - x.x2) <= 1e-12;
  if (!ou && !on_node) throw ModelError("mc start point must be a grid node for the PDE reference");
  for (const NamedFunction& f : functions_from(c, "mc", standard_battery())) {
    const MCEstimate e = sample.estimate(f.expr);
    double ref;
    std::string source;
    if (ou && c.field.dim == 1) {
      ref = ou_exact_value(*ou, s, t, x.x1, f.expr);
      source = "closed form";
    } else {
      ref = P.apply(g.sample(f.expr, s))[base];
      source = "PDE";
    }
    r.checks.push_back(Check::within("MC " + f.name + " vs " + source, e.mean, ref, 3.0 * e.stderr_ + 2e-3));
    r.values["estimates"][f.name] = {{"mean", e.mean}, {"stderr", e.stderr_}, {"n", e.n}, {"reference", ref}};
  }

  const EmpiricalKernel k = empirical_kernel(sample, g, base);
  const TransitionRow row = kernel_row(P, base);
  const auto axis = axis_nodes(g);
  const double vol = g.cell_volume();
  std::vector<double> xs = first_coordinates(g, axis), emp = values_at(k.row.weights / vol, axis),
                      pde = values_at(row.weights / vol, axis);
  const fs::path d = ctx.dir("mc");
  write_csv(d / "histogram.csv", {"x", "mc_density", "pde_density"}, {xs, emp, pde});
  write_svg_plot(d / "histogram.svg", {"endpoint histogram", "x", "density", false}, {{"Monte Carlo", xs, emp}, {"PDE kernel", xs, pde}});
  r.artifacts = {"mc/histogram.csv", "mc/histogram.svg"};
  return r;
}

using Runner = std::function<ExperimentResult(RunContext&)>;

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> m = {
      {"validate", run_validate}, {"lyapunov", run_lyapunov}, {"solve", run_solve},
      {"kernel", run_kernel},     {"tightness", run_tightness}, {"measures", run_measures},
      {"spectrum", run_spectrum}, {"decay", run_decay},       {"mc", run_mc}};
  return m;
}

ExperimentResult run_one(const std::string& name, RunContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult r;
  try {
    if (name == "lyapunov" && !ctx.config.lyapunov) throw ConfigError("/lyapunov: the lyapunov experiment needs a lyapunov block");
    r = runners().at(name)(ctx);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    r = ExperimentResult{};
    r.error = e.what();
    r.exit_code = 3;
  }
  r.name = name;
  if (!r.error && !r.passed()) r.exit_code = 1;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

RunReport run_experiments(const ExperimentConfig& config, const std::vector<std::string>& experiments,
                          const RunOptions& options, const std::string& subcommand) {
  ExperimentConfig c = config;
  refine(c, options.refine);
  for (const std::string& e : experiments)
    if (!c.experiments.count(e)) c.experiments[e] = nlohmann::json::object();
  const fs::path out = options.out.empty() ? fs::path(c.output_dir) : options.out;
  fs::create_directories(out);
  RunContext ctx(c, out, options.seed);

  RunReport report;
  report.config = c.source;
  report.subcommand = subcommand;
  report.seed = options.seed.value_or(c.param<std::uint64_t>("mc", "seed", 1));
  report.refine = options.refine;
  report.experiments.resize(experiments.size());
  if (options.parallel && experiments.size() > 1) {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(experiments.size());
    for (std::size_t i = 0; i < experiments.size(); ++i)
      pool.emplace_back([&, i] {
        try {
          report.experiments[i] = run_one(experiments[i], ctx);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
  } else {
    for (std::size_t i = 0; i < experiments.size(); ++i) report.experiments[i] = run_one(experiments[i], ctx);
  }

  std::ofstream(out / "report.json") << report.to_json().dump(2) << '\n';
  std::ofstream(out / "timing.json") << report.timing_json().dump(2) << '\n';
  return report;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Numerical experiments for nonautonomous parabolic evolution operators with periodic coefficients"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  int refine_k = 0;
  bool parallel = false;
  std::string chosen;

  std::vector<std::string> commands = experiment_names();
  commands.push_back("all");
  for (const std::string& name : commands) {
    CLI::App* sub = app.add_subcommand(name, name == "all" ? "run every experiment enabled in the config"
                                                          : "run the " + name + " experiment");
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (default: the config's \"output\")");
    sub->add_option("--seed", seed, "seed for the measures and mc experiments");
    sub->add_option("--refine", refine_k, "halve h and quarter dt K times")->check(CLI::NonNegativeNumber);
    sub->add_flag("--parallel", parallel, "run independent experiments concurrently");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const ExperimentConfig c = load_config(config_path);
    std::vector<std::string> run;
    if (chosen == "all") {
      for (const std::string& e : experiment_names())
        if (c.enabled(e)) run.push_back(e);
      if (run.empty()) throw ConfigError("/experiments: no experiment is enabled");
    } else {
      run.push_back(chosen);
    }
    const RunReport rep = run_experiments(c, run, RunOptions{out_dir, seed, refine_k, parallel}, chosen);
    for (const ExperimentResult& e : rep.experiments) {
      std::cout << e.name << ": " << (e.error ? "ERROR" : (e.passed() ? "PASS" : "FAIL"));
      if (e.classification) std::cout << " [" << *e.classification << "]";
      std::cout << '\n';
      if (e.error) std::cerr << "  " << e.name << ": " << *e.error << '\n';
      for (const Check& k : e.checks)
        if (!k.pass) std::cout << "  failed: " << k.name << " = " << k.value << " (tolerance " << k.tolerance << ")\n";
    }
    return rep.exit_code();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace nape

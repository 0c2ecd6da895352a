#include "nape/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "nape/errors.hpp"

namespace nape {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& ptr, const std::string& what) {
  throw ConfigError((ptr.empty() ? "/" : ptr) + ": " + what);
}

void allow_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(ptr, "expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (!ok.count(k)) fail(ptr + "/" + k, "unknown key");
  }
}

const json& require(const json& j, const std::string& ptr, const char* key) {
  if (!j.contains(key)) fail(ptr + "/" + key, "required key is missing");
  return j.at(key);
}

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) fail(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(ptr, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& ptr) {
  const double v = number(j, ptr);
  if (!(v > 0.0)) fail(ptr, "expected a positive number");
  return v;
}

std::string expression(const json& j, const std::string& ptr) {
  if (!j.is_string()) fail(ptr, "expected an expression string");
  const std::string s = j.get<std::string>();
  try {
    parse_expr(s);
  } catch (const ParseError& e) {
    fail(ptr, std::string("expression does not parse: ") + e.what());
  }
  return s;
}

void expressions(const json& j, const std::string& ptr) {
  if (!j.is_array()) fail(ptr, "expected an array of expressions");
  for (std::size_t i = 0; i < j.size(); ++i) expression(j[i], ptr + "/" + std::to_string(i));
}

void numbers(const json& j, const std::string& ptr) {
  if (!j.is_array()) fail(ptr, "expected an array of numbers");
  for (std::size_t i = 0; i < j.size(); ++i) number(j[i], ptr + "/" + std::to_string(i));
}

void integer(const json& j, const std::string& ptr, std::int64_t lo) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < lo) fail(ptr, "expected an integer >= " + std::to_string(lo));
}

bool divides(double step, double length) {
  const double r = length / step;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

void check_experiment(const std::string& name, const json& j, const std::string& ptr, int dim) {
  auto point = [&](const char* key) {
    if (!j.contains(key)) return;
    numbers(j.at(key), ptr + "/" + key);
    if (static_cast<int>(j.at(key).size()) != dim) fail(ptr + "/" + key, "point must have one entry per dimension");
  };
  auto times = [&] {
    for (const char* k : {"s", "t"})
      if (j.contains(k)) number(j.at(k), ptr + "/" + k);
    if (j.contains("s") && j.contains("t") && !(j.at("t").get<double>() >= j.at("s").get<double>()))
      fail(ptr + "/t", "t must be >= s");
  };
  if (name == "validate") {
    allow_keys(j, ptr, {"sample_R", "samples"});
    if (j.contains("sample_R")) positive(j.at("sample_R"), ptr + "/sample_R");
    if (j.contains("samples")) integer(j.at("samples"), ptr + "/samples", 2);
  } else if (name == "lyapunov") {
    allow_keys(j, ptr, {"supersolution", "delta"});
    if (j.contains("delta")) positive(j.at("delta"), ptr + "/delta");
    if (j.contains("supersolution")) {
      const json& s = j.at("supersolution");
      allow_keys(s, ptr + "/supersolution", {"r", "s", "t"});
      for (const char* k : {"r", "s", "t"}) number(require(s, ptr + "/supersolution", k), ptr + "/supersolution/" + k);
    }
  } else if (name == "solve") {
    allow_keys(j, ptr, {"s", "t", "functions", "core_fraction", "ladder"});
    times();
    if (j.contains("ladder")) numbers(j.at("ladder"), ptr + "/ladder");
    if (j.contains("functions")) expressions(j.at("functions"), ptr + "/functions");
    if (j.contains("core_fraction")) positive(j.at("core_fraction"), ptr + "/core_fraction");
  } else if (name == "kernel") {
    allow_keys(j, ptr, {"s", "t", "x"});
    times();
    point("x");
  } else if (name == "tightness") {
    allow_keys(j, ptr, {"s", "t", "eps", "expect", "sweep"});
    times();
    if (j.contains("eps")) {
      const double e = number(j.at("eps"), ptr + "/eps");
      if (!(e > 0.0 && e < 1.0)) fail(ptr + "/eps", "eps must lie in (0,1)");
    }
    if (j.contains("expect")) {
      const json& e = j.at("expect");
      if (!e.is_string() || (e != "tight" && e != "non-tight")) fail(ptr + "/expect", "expected \"tight\" or \"non-tight\"");
    }
    if (j.contains("sweep")) numbers(j.at("sweep"), ptr + "/sweep");
  } else if (name == "measures") {
    allow_keys(j, ptr, {"phases", "spot_checks", "starts", "seed"});
    if (j.contains("phases")) integer(j.at("phases"), ptr + "/phases", 1);
    if (j.contains("spot_checks")) integer(j.at("spot_checks"), ptr + "/spot_checks", 0);
    if (j.contains("starts")) integer(j.at("starts"), ptr + "/starts", 1);
    if (j.contains("seed")) integer(j.at("seed"), ptr + "/seed", 0);
  } else if (name == "spectrum") {
    allow_keys(j, ptr, {"phases"});
    if (j.contains("phases")) numbers(j.at("phases"), ptr + "/phases");
  } else if (name == "decay") {
    allow_keys(j, ptr, {"k_max", "p", "functions", "phase"});
    if (j.contains("k_max")) integer(j.at("k_max"), ptr + "/k_max", 4);
    if (j.contains("p")) {
      numbers(j.at("p"), ptr + "/p");
      for (std::size_t i = 0; i < j.at("p").size(); ++i)
        if (!(j.at("p")[i].get<double>() >= 1.0)) fail(ptr + "/p/" + std::to_string(i), "p must be >= 1");
    }
    if (j.contains("functions")) expressions(j.at("functions"), ptr + "/functions");
    if (j.contains("phase")) number(j.at("phase"), ptr + "/phase");
  } else if (name == "mc") {
    allow_keys(j, ptr, {"s", "t", "x", "n", "em_dt", "seed", "functions"});
    times();
    point("x");
    if (j.contains("n")) integer(j.at("n"), ptr + "/n", 1);
    if (j.contains("em_dt")) positive(j.at("em_dt"), ptr + "/em_dt");
    if (j.contains("seed")) integer(j.at("seed"), ptr + "/seed", 0);
    if (j.contains("functions")) expressions(j.at("functions"), ptr + "/functions");
  }
}

}  // namespace

LyapunovData LyapunovBlock::data() const {
  LyapunovData L;
  L.W = parse_expr(W);
  L.R0 = R0;
  L.lambda = lambda.value_or(0.0);
  L.a = a.value_or(0.0);
  L.cc = cc.value_or(0.0);
  if (g) L.g = *g;
  return L;
}

ExperimentConfig parse_config(const json& j) {
  allow_keys(j, "", {"name", "field", "numerics", "ou_reference", "lyapunov", "experiments", "output"});
  ExperimentConfig c;
  c.source = j;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) fail("/name", "expected a string");
    c.name = j.at("name").get<std::string>();
  }

  const json& f = require(j, "", "field");
  allow_keys(f, "/field", {"dim", "period", "diffusion", "drift"});
  integer(require(f, "/field", "dim"), "/field/dim", 1);
  const int dim = f.at("dim").get<int>();
  if (dim != 1 && dim != 2) fail("/field/dim", "dimension must be 1 or 2");
  const double period = positive(require(f, "/field", "period"), "/field/period");
  const json& Q = require(f, "/field", "diffusion");
  if (!Q.is_array() || static_cast<int>(Q.size()) != dim) fail("/field/diffusion", "expected a dim x dim array");
  for (int i = 0; i < dim; ++i) {
    const std::string row = "/field/diffusion/" + std::to_string(i);
    if (!Q[i].is_array() || static_cast<int>(Q[i].size()) != dim) fail(row, "expected a row of dim expressions");
    c.diffusion_src.emplace_back();
    for (int k = 0; k < dim; ++k) c.diffusion_src.back().push_back(expression(Q[i][k], row + "/" + std::to_string(k)));
  }
  const json& b = require(f, "/field", "drift");
  if (!b.is_array() || static_cast<int>(b.size()) != dim) fail("/field/drift", "expected dim expressions");
  for (int i = 0; i < dim; ++i) c.drift_src.push_back(expression(b[i], "/field/drift/" + std::to_string(i)));
  try {
    c.field = make_field(dim, period, c.diffusion_src, c.drift_src);
  } catch (const ModelError& e) {
    fail("/field", e.what());
  }

  const json& n = require(j, "", "numerics");
  allow_keys(n, "/numerics", {"R", "h", "dt", "theta", "convection"});
  c.numerics.R = positive(require(n, "/numerics", "R"), "/numerics/R");
  c.numerics.h = positive(require(n, "/numerics", "h"), "/numerics/h");
  c.numerics.dt = positive(require(n, "/numerics", "dt"), "/numerics/dt");
  if (!divides(c.numerics.h, c.numerics.R)) fail("/numerics/h", "h must divide R");
  if (!divides(c.numerics.dt, period)) fail("/numerics/dt", "dt must divide the period");
  if (n.contains("theta")) {
    c.numerics.theta = number(n.at("theta"), "/numerics/theta");
    if (c.numerics.theta != 1.0 && c.numerics.theta != 0.5) fail("/numerics/theta", "theta must be 1 or 0.5");
  }
  if (n.contains("convection")) {
    const json& v = n.at("convection");
    if (v == "hybrid") {
      c.numerics.convection = Convection::hybrid;
    } else if (v == "upwind") {
      c.numerics.convection = Convection::upwind;
    } else {
      fail("/numerics/convection", "expected \"hybrid\" or \"upwind\"");
    }
  }

  if (j.contains("ou_reference")) {
    const json& o = j.at("ou_reference");
    allow_keys(o, "/ou_reference", {"a", "f", "q"});
    OUReference r;
    r.a = expression(require(o, "/ou_reference", "a"), "/ou_reference/a");
    r.f = expression(require(o, "/ou_reference", "f"), "/ou_reference/f");
    r.q = expression(require(o, "/ou_reference", "q"), "/ou_reference/q");
    if (dim != 1) fail("/ou_reference", "the OU reference is one-dimensional");
    c.ou_reference = r;
  }

  if (j.contains("lyapunov")) {
    const json& l = j.at("lyapunov");
    const std::string p = "/lyapunov";
    allow_keys(l, p, {"W", "R0", "lambda", "a", "c", "g", "log_drift", "expect"});
    LyapunovBlock L;
    L.W = expression(require(l, p, "W"), p + "/W");
    if (l.contains("R0")) L.R0 = number(l.at("R0"), p + "/R0");
    if (l.contains("lambda")) L.lambda = number(l.at("lambda"), p + "/lambda");
    if (l.contains("a")) L.a = number(l.at("a"), p + "/a");
    if (l.contains("c")) L.cc = positive(l.at("c"), p + "/c");
    if (L.a.has_value() != L.cc.has_value()) fail(p, "a and c come together");
    if (l.contains("g")) {
      const json& g = l.at("g");
      allow_keys(g, p + "/g", {"c", "gamma"});
      PowerG pg;
      pg.c = positive(require(g, p + "/g", "c"), p + "/g/c");
      pg.gamma = number(require(g, p + "/g", "gamma"), p + "/g/gamma");
      if (!(pg.gamma > 1.0)) fail(p + "/g/gamma", "gamma must exceed 1");
      L.g = pg;
    }
    if (l.contains("log_drift")) {
      const json& g = l.at("log_drift");
      allow_keys(g, p + "/log_drift", {"c", "gamma", "R0"});
      LyapunovBlock::LogDrift d;
      d.c = positive(require(g, p + "/log_drift", "c"), p + "/log_drift/c");
      d.gamma = number(require(g, p + "/log_drift", "gamma"), p + "/log_drift/gamma");
      d.R0 = number(require(g, p + "/log_drift", "R0"), p + "/log_drift/R0");
      if (!(d.R0 > 1.0)) fail(p + "/log_drift/R0", "R0 must exceed 1");
      L.log_drift = d;
    }
    if (l.contains("expect")) {
      const json& e = l.at("expect");
      allow_keys(e, p + "/expect", {"drift", "dissipativity", "superlinear", "log_drift", "function"});
      for (const auto& [k, v] : e.items()) {
        if (!v.is_boolean()) fail(p + "/expect/" + k, "expected a boolean");
        L.expect[k] = v.get<bool>();
      }
    }
    c.lyapunov = L;
  }

  if (j.contains("experiments")) {
    const json& e = j.at("experiments");
    if (!e.is_object()) fail("/experiments", "expected an object");
    for (const auto& [k, v] : e.items()) {
      const auto& names = experiment_names();
      if (std::find(names.begin(), names.end(), k) == names.end()) fail("/experiments/" + k, "unknown experiment");
      check_experiment(k, v, "/experiments/" + k, dim);
      c.experiments[k] = v;
    }
  }
  if (c.enabled("lyapunov") && !c.lyapunov) fail("/lyapunov", "the lyapunov experiment needs a lyapunov block");

  if (j.contains("output")) {
    if (!j.at("output").is_string()) fail("/output", "expected a string");
    c.output_dir = j.at("output").get<std::string>();
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return parse_config(j);
}

void refine(ExperimentConfig& c, int times) {
  for (int k = 0; k < times; ++k) {
    c.numerics.h *= 0.5;
    c.numerics.dt *= 0.25;
  }
}

}  // namespace nape

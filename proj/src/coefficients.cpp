#include "nape/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nape/errors.hpp"

namespace nape {

CoefficientField make_field(int dim, double period, const std::vector<std::vector<std::string>>& diffusion,
                            const std::vector<std::string>& drift) {
  if (dim != 1 && dim != 2) throw ModelError("dimension must be 1 or 2");
  if (!(period > 0.0)) throw ModelError("period must be positive");
  const auto d = static_cast<std::size_t>(dim);
  if (diffusion.size() != d || drift.size() != d) throw ModelError("Q must be d x d and b must have d entries");
  CoefficientField c;
  c.dim = dim;
  c.period = period;
  c.diffusion.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (diffusion[i].size() != d) throw ModelError("Q must be d x d");
    for (const auto& s : diffusion[i]) c.diffusion[i].push_back(parse_expr(s));
    c.drift.push_back(parse_expr(drift[i]));
  }
  if (dim == 2 && !(c.q(0, 1).is_zero() && c.q(1, 0).is_zero()))
    throw ModelError("d = 2 requires a diagonal diffusion matrix (off-diagonal entries must be 0)");
  if (dim == 1) {
    auto uses_x2 = [](const Expr& e) { return e.depends_on(Var::x2); };
    if (uses_x2(c.q(0, 0)) || uses_x2(c.b(0))) throw ModelError("x2 is not a variable of a one-dimensional field");
  }
  return c;
}

CoefficientField ou_benchmark() { return make_field(1, 1.0, {{"1"}}, {"-x1+cos(2*pi*t)"}); }

CoefficientField cubic_benchmark() { return make_field(1, 1.0, {{"1"}}, {"-x1^3*(1+0.5*sin(2*pi*t))"}); }

FieldValidation validate_field(const CoefficientField& c, double sample_R, int n_samples) {
  if (!(sample_R > 0.0) || n_samples < 1) throw ModelError("validate_field needs sample_R > 0 and n_samples >= 1");
  FieldValidation out;
  out.eta0 = std::numeric_limits<double>::infinity();
  constexpr int kPhases = 64;
  const int per_axis = c.dim == 1 ? n_samples : std::max(1, static_cast<int>(std::ceil(std::sqrt(n_samples))));
  auto axis = [&](int i) { return per_axis == 1 ? 0.0 : -sample_R + 2.0 * sample_R * i / (per_axis - 1); };

  std::vector<const Expr*> entries;
  for (const auto& row : c.diffusion)
    for (const auto& e : row) entries.push_back(&e);
  for (const auto& e : c.drift) entries.push_back(&e);

  const int n2 = c.dim == 1 ? 1 : per_axis;
  for (int k = 0; k < kPhases; ++k) {
    const double t = c.period * k / kPhases;
    for (int j = 0; j < n2; ++j) {
      for (int i = 0; i < per_axis; ++i) {
        const Point p{t, axis(i), c.dim == 1 ? 0.0 : axis(j)};
        try {
          double lmin;
          if (c.dim == 1) {
            lmin = evaluate(c.q(0, 0), p);
          } else {
            lmin = std::min(evaluate(c.q(0, 0), p), evaluate(c.q(1, 1), p));
          }
          if (lmin < out.eta0) {
            out.eta0 = lmin;
            out.eta0_witness = p;
          }
          Point shifted = p;
          shifted.t += c.period;
          for (const Expr* e : entries) {
            const double a = evaluate(*e, p);
            const double b = evaluate(*e, shifted);
            const double viol = std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
            if (viol > out.periodicity_violation) {
              out.periodicity_violation = viol;
              out.periodicity_witness = p;
            }
          }
        } catch (const EvalError& err) {
          if (out.errors.size() < 16) out.errors.emplace_back(err.what());
          if (!out.rejection_witness) out.rejection_witness = p;
        }
      }
    }
  }
  if (!std::isfinite(out.eta0)) out.eta0 = 0.0;
  const bool elliptic = out.eta0 > 0.0;
  const bool periodic = out.periodicity_violation <= 1e-12;
  out.accepted = elliptic && periodic && out.errors.empty();
  if (!out.rejection_witness) {
    if (!elliptic)
      out.rejection_witness = out.eta0_witness;
    else if (!periodic)
      out.rejection_witness = out.periodicity_witness;
  }
  out.field = c;
  out.field.eta0 = std::max(out.eta0, 0.0);
  return out;
}

OperatorImage::OperatorImage(const CoefficientField& c, const Expr& f) : field_(c) {
  const Var vars[2] = {Var::x1, Var::x2};
  for (int i = 0; i < c.dim; ++i) {
    grad_.push_back(differentiate(f, vars[i]));
    hessian_.emplace_back();
    for (int j = 0; j < c.dim; ++j) hessian_.back().push_back(differentiate(grad_.back(), vars[j]));
  }
}

double OperatorImage::operator()(const Point& p) const {
  const CoefficientField& c = field_;
  double sum = 0.0;
  for (int i = 0; i < c.dim; ++i) {
    for (int j = 0; j < c.dim; ++j) {
      const Expr& q = c.q(i, j);
      if (q.is_zero()) continue;
      sum += evaluate(q, p) * evaluate(hessian_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], p);
    }
    sum += evaluate(c.b(i), p) * evaluate(grad_[static_cast<std::size_t>(i)], p);
  }
  return sum;
}

double apply_operator(const CoefficientField& c, const Expr& f, const Point& p) { return OperatorImage(c, f)(p); }

Eigen::VectorXd TestFunction::on(const Grid& g) const {
  if (const auto* e = std::get_if<Expr>(&data)) return g.sample(*e);
  const auto& n = std::get<Nodes>(data);
  if (!(n.grid == g)) throw ModelError("test function lives on a different grid");
  return n.values;
}

}  // namespace nape

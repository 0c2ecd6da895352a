#include "nape/grid.hpp"

#include <cmath>

#include "nape/errors.hpp"

namespace nape {

Grid::Grid(int dim, double half_width, double spacing) : dim_(dim), half_width_(half_width), spacing_(spacing) {
  if (dim != 1 && dim != 2) throw ModelError("grid dimension must be 1 or 2");
  if (!(spacing > 0.0) || !(half_width > 0.0)) throw ModelError("grid needs R > 0 and h > 0");
  const double cells = 2.0 * half_width / spacing;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-9 * rounded || static_cast<long long>(rounded) % 2 != 0)
    throw ModelError("2R/h must be an even integer so that the origin is a node");
  per_axis_ = static_cast<Index>(rounded) + 1;
}

std::array<double, 2> Grid::node(Index flat) const {
  if (dim_ == 1) return {axis_coord(flat), 0.0};
  return {axis_coord(flat % per_axis_), axis_coord(flat / per_axis_)};
}

double Grid::radius(Index flat) const {
  const auto x = node(flat);
  return std::hypot(x[0], x[1]);
}

bool Grid::is_boundary(Index flat) const {
  const Index last = per_axis_ - 1;
  const Index i = dim_ == 1 ? flat : flat % per_axis_;
  if (i == 0 || i == last) return true;
  if (dim_ == 1) return false;
  const Index j = flat / per_axis_;
  return j == 0 || j == last;
}

std::vector<Grid::Index> Grid::core(double r) const {
  std::vector<Index> out;
  const double tol = 1e-9 * spacing_;
  for (Index k = 0; k < size(); ++k)
    if (!is_boundary(k) && radius(k) <= r + tol) out.push_back(k);
  return out;
}

std::vector<Grid::Index> Grid::interior() const {
  std::vector<Index> out;
  for (Index k = 0; k < size(); ++k)
    if (!is_boundary(k)) out.push_back(k);
  return out;
}

Eigen::VectorXd Grid::sample(const Expr& e, double t) const {
  Eigen::VectorXd v(size());
  for (Index k = 0; k < size(); ++k) {
    const auto x = node(k);
    v[k] = evaluate(e, {t, x[0], x[1]});
  }
  return v;
}

Grid::Index Grid::index_of(double x1, double x2) const {
  auto axis = [&](double x) -> Index {
    const double f = x / spacing_ + static_cast<double>(per_axis_ / 2);
    const double r = std::round(f);
    if (std::abs(f - r) > 1e-9 || r < 0 || r >= static_cast<double>(per_axis_)) return -1;
    return static_cast<Index>(r);
  };
  const Index i = axis(x1);
  if (i < 0) return -1;
  if (dim_ == 1) return x2 == 0.0 ? i : -1;
  const Index j = axis(x2);
  return j < 0 ? -1 : i + per_axis_ * j;
}

}  // namespace nape

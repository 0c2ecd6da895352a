#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "nape/expr.hpp"

namespace nape {

/// Uniform tensor grid on [-R, R]^d with an odd node count per axis so the
/// origin is a node. Boundary nodes carry homogeneous Dirichlet data.
/// Flat index: i1 + n * i2.
class Grid {
 public:
  using Index = Eigen::Index;

  Grid(int dim, double half_width, double spacing);

  int dim() const { return dim_; }
  double half_width() const { return half_width_; }
  double spacing() const { return spacing_; }
  Index per_axis() const { return per_axis_; }
  Index size() const { return dim_ == 1 ? per_axis_ : per_axis_ * per_axis_; }
  double cell_volume() const { return dim_ == 1 ? spacing_ : spacing_ * spacing_; }

  double axis_coord(Index i) const { return static_cast<double>(i - per_axis_ / 2) * spacing_; }
  std::array<double, 2> node(Index flat) const;
  double radius(Index flat) const;
  bool is_boundary(Index flat) const;

  /// Interior nodes with |x| <= r.
  std::vector<Index> core(double r) const;
  std::vector<Index> interior() const;

  /// Node values of a time-independent expression (evaluated at `t`).
  Eigen::VectorXd sample(const Expr& e, double t = 0.0) const;

  /// Node index of a point that lies on the grid, or -1.
  Index index_of(double x1, double x2 = 0.0) const;

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.per_axis_ == b.per_axis_ && a.spacing_ == b.spacing_;
  }

 private:
  int dim_;
  double half_width_;
  double spacing_;
  Index per_axis_;
};

}  // namespace nape

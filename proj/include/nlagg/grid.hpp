#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>

namespace nlagg {

/// Uniform cell-centred square grid of n x n cells.
///
/// Cell (i, j) has centre (x_min + (i + 1/2) dx, y_min + (j + 1/2) dx); i runs
/// along x and is the fast (contiguous) index of every field array.
struct Grid2D {
  double x_min = -10.0;
  double x_max = 10.0;
  double y_min = -10.0;
  double y_max = 10.0;
  int n = 128;

  /// Square grid [-half_width, half_width]^2. Throws std::invalid_argument on
  /// a degenerate domain or n < 4.
  static Grid2D centered(double half_width, int n);

  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;

  double dx() const { return (x_max - x_min) / n; }
  double cell_area() const { return dx() * dx(); }
  double x(int i) const { return x_min + (i + 0.5) * dx(); }
  double y(int j) const { return y_min + (j + 0.5) * dx(); }
  double width() const { return x_max - x_min; }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

/// Cell-averaged scalar field, values(i, j) with i along x.
struct Field {
  Grid2D grid;
  Eigen::ArrayXXd values;

  Field() = default;
  explicit Field(const Grid2D& g) : grid(g), values(Eigen::ArrayXXd::Zero(g.n, g.n)) {}
  Field(const Grid2D& g, Eigen::ArrayXXd v);

  /// Samples f(x, y) at every cell centre.
  static Field sample(const Grid2D& g, const std::function<double(double, double)>& f);

  bool all_finite() const { return values.allFinite(); }
};

/// Kernel values on a (2r+1) x (2r+1) stencil with the origin at index (r, r).
struct KernelSamples {
  double dx = 1.0;
  Eigen::ArrayXXd values;

  int radius() const { return static_cast<int>(values.rows() / 2); }
  double mass() const { return dx * dx * values.sum(); }
};

/// Normal derivatives on cell edges. x_edges has shape (n+1) x n and holds the
/// x-derivative on the edge between cells (i-1, j) and (i, j); y_edges has
/// shape n x (n+1). Edges on the domain boundary are zero.
struct EdgeVectorField {
  Eigen::ArrayXXd x_edges;
  Eigen::ArrayXXd y_edges;
};

/// Midpoint quadrature: dx^2 times the sum of cell values.
double integrate(const Field& f);

/// dx^2 sum |x_cell|^2 f_cell.
double second_moment(const Field& f);

EdgeVectorField gradient_at_edges(const Field& phi);

/// Point reflection (x, y) -> (-x, -y) of the cell array.
Field reflect(const Field& f);

/// Rotation by 90 degrees counter-clockwise about the domain centre.
Field rotate90(const Field& f);

}  // namespace nlagg

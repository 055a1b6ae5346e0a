#include "nlagg/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nlagg {

Grid2D Grid2D::centered(double half_width, int n) {
  Grid2D g{-half_width, half_width, -half_width, half_width, n};
  g.validate();
  return g;
}

void Grid2D::validate() const {
  if (n < 4) throw std::invalid_argument("grid: n must be at least 4, got " + std::to_string(n));
  if (!(x_max > x_min) || !(y_max > y_min))
    throw std::invalid_argument("grid: empty domain");
  if (std::abs((x_max - x_min) - (y_max - y_min)) > 1e-12 * (x_max - x_min))
    throw std::invalid_argument("grid: domain must be square");
}

Field::Field(const Grid2D& g, Eigen::ArrayXXd v) : grid(g), values(std::move(v)) {
  if (values.rows() != g.n || values.cols() != g.n)
    throw std::invalid_argument("field: value array does not match the grid");
}

Field Field::sample(const Grid2D& g, const std::function<double(double, double)>& f) {
  Field out(g);
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) out.values(i, j) = f(g.x(i), g.y(j));
  return out;
}

double integrate(const Field& f) { return f.grid.cell_area() * f.values.sum(); }

double second_moment(const Field& f) {
  const Grid2D& g = f.grid;
  double acc = 0.0;
  for (int j = 0; j < g.n; ++j) {
    const double y = g.y(j);
    for (int i = 0; i < g.n; ++i) {
      const double x = g.x(i);
      acc += (x * x + y * y) * f.values(i, j);
    }
  }
  return g.cell_area() * acc;
}

EdgeVectorField gradient_at_edges(const Field& phi) {
  const int n = phi.grid.n;
  const double inv_dx = 1.0 / phi.grid.dx();
  EdgeVectorField e;
  e.x_edges = Eigen::ArrayXXd::Zero(n + 1, n);
  e.y_edges = Eigen::ArrayXXd::Zero(n, n + 1);
  e.x_edges.middleRows(1, n - 1) =
      (phi.values.bottomRows(n - 1) - phi.values.topRows(n - 1)) * inv_dx;
  e.y_edges.middleCols(1, n - 1) =
      (phi.values.rightCols(n - 1) - phi.values.leftCols(n - 1)) * inv_dx;
  return e;
}

Field reflect(const Field& f) {
  return Field(f.grid, f.values.reverse().eval());
}

Field rotate90(const Field& f) {
  // (x, y) -> (-y, x): new(i, j) = old(j, n - 1 - i)
  const int n = f.grid.n;
  Eigen::ArrayXXd out(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out(i, j) = f.values(j, n - 1 - i);
  return Field(f.grid, std::move(out));
}

}  // namespace nlagg

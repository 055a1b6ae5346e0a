#include <catch_amalgamated.hpp>

#include "nlagg/grid.hpp"

#include <cmath>
#include <random>

using namespace nlagg;
using Catch::Approx;

namespace {

constexpr double kPi = 3.14159265358979323846;

Field uniform_ball(const Grid2D& g, double S) {
  return Field::sample(g, [&](double x, double y) { return x * x + y * y < S * S ? 1.0 / (kPi * S * S) : 0.0; });
}

}  // namespace

TEST_CASE("grid geometry and validation", "[grid]") {
  const Grid2D g = Grid2D::centered(10.0, 128);
  CHECK(g.dx() == Approx(20.0 / 128));
  CHECK(g.x(0) == Approx(-10.0 + 0.5 * g.dx()));
  CHECK(g.y(127) == Approx(10.0 - 0.5 * g.dx()));

  CHECK_THROWS_AS(Grid2D::centered(1.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(Grid2D::centered(0.0, 16), std::invalid_argument);
  Grid2D rect{0.0, 2.0, 0.0, 1.0, 8};
  CHECK_THROWS_AS(rect.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Field(g, Eigen::ArrayXXd::Zero(4, 4)), std::invalid_argument);
}

TEST_CASE("integrate", "[grid]") {
  const Grid2D g = Grid2D::centered(5.0, 64);
  CHECK(integrate(Field(g)) == 0.0);

  Field c(g);
  c.values.setConstant(0.3);
  CHECK(integrate(c) == Approx(0.3 * 100.0).epsilon(1e-12));

  // analytic mass of 1/(pi S^2) on B(0, S) is 1; error is boundary rasterisation
  const Grid2D fine = Grid2D::centered(10.0, 256);
  const double S = 2.0;
  CHECK(std::abs(integrate(uniform_ball(fine, S)) - 1.0) <= 2.0 * fine.dx() / S);
}

TEST_CASE("second moment", "[grid]") {
  const Grid2D g = Grid2D::centered(10.0, 256);
  const double S = 2.0;
  // int |x|^2 / (pi S^2) over B(0,S) = S^2 / 2
  CHECK(std::abs(second_moment(uniform_ball(g, S)) - S * S / 2.0) <= 2.0 * g.dx());

  // a delta at the origin: with an odd grid the centre cell sits at 0
  const Grid2D odd = Grid2D::centered(5.0, 65);
  Field delta(odd);
  delta.values(32, 32) = 1.0 / odd.cell_area();
  CHECK(std::abs(second_moment(delta)) < 1e-20);

  SECTION("parallel-axis identity") {
    // symmetric Gaussian translated by h: W(h) = W(0) + |h|^2 m
    const Grid2D grid = Grid2D::centered(8.0, 128);
    const double hx = 16 * grid.dx(), hy = -8 * grid.dx();
    auto bump = [](double x, double y) { return std::exp(-(x * x + y * y) / 0.8); };
    const Field f0 = Field::sample(grid, bump);
    const Field fh = Field::sample(grid, [&](double x, double y) { return bump(x - hx, y - hy); });
    const double m = integrate(f0);
    CHECK(second_moment(fh) == Approx(second_moment(f0) + (hx * hx + hy * hy) * m).epsilon(1e-10));
  }
}

TEST_CASE("gradient at edges", "[grid]") {
  const Grid2D g = Grid2D::centered(3.0, 32);

  Field c(g);
  c.values.setConstant(4.2);
  const auto zero = gradient_at_edges(c);
  CHECK((zero.x_edges == 0.0).all());
  CHECK((zero.y_edges == 0.0).all());

  const auto lin = gradient_at_edges(Field::sample(g, [](double x, double) { return x; }));
  CHECK(lin.x_edges.rows() == g.n + 1);
  CHECK(lin.y_edges.cols() == g.n + 1);
  CHECK((lin.x_edges.middleRows(1, g.n - 1) - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((lin.x_edges.row(0) == 0.0).all());
  CHECK((lin.x_edges.row(g.n) == 0.0).all());
  CHECK(lin.y_edges.abs().maxCoeff() < 1e-12);

  SECTION("second-order convergence against the analytic derivative") {
    auto phi = [](double x, double y) { return std::exp(-(x * x + 0.5 * y * y)); };
    auto dphi_dx = [&](double x, double y) { return -2.0 * x * phi(x, y); };
    double prev = 0.0;
    for (int n : {32, 64, 128, 256}) {
      const Grid2D grid = Grid2D::centered(4.0, n);
      const auto e = gradient_at_edges(Field::sample(grid, phi));
      double err = 0.0;
      for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i) {
          const double xe = grid.x_min + i * grid.dx();
          err = std::max(err, std::abs(e.x_edges(i, j) - dphi_dx(xe, grid.y(j))));
        }
      if (prev > 0.0) {
        const double ratio = prev / err;
        CHECK(ratio > 3.6);
        CHECK(ratio < 4.4);
      }
      prev = err;
    }
  }
}

TEST_CASE("reflection and rotation", "[grid]") {
  const Grid2D g = Grid2D::centered(2.0, 8);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Field f(g);
  for (Eigen::Index k = 0; k < f.values.size(); ++k) f.values(k) = U(rng);

  const Field r = reflect(f);
  CHECK(r.values(0, 0) == f.values(7, 7));
  CHECK((reflect(r).values == f.values).all());
  // two quarter turns are a point reflection
  CHECK((rotate90(rotate90(f)).values == r.values).all());
  CHECK((rotate90(rotate90(rotate90(rotate90(f)))).values == f.values).all());

  // (x, y) -> (-y, x): the value at (x, y) moves to (-y, x)
  const Field rot = rotate90(Field::sample(g, [](double x, double y) { return x + 10 * y; }));
  const Field expected = Field::sample(g, [](double x, double y) { return y - 10 * x; });
  CHECK((rot.values - expected.values).abs().maxCoeff() < 1e-12);
}

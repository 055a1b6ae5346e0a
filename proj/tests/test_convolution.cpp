#include <catch_amalgamated.hpp>

#include "nlagg/convolution.hpp"
#include "nlagg/kernels.hpp"

#include <cmath>
#include <random>

using namespace nlagg;

namespace {

// O(n^4) reference: dx^2 sum_y k(x - y) f(y) over the grid.
Field direct_convolution(const Field& f, const KernelSamples& k) {
  const int n = f.grid.n;
  const int r = k.radius();
  Field out(f.grid);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
          const int di = i - a, dj = j - b;
          if (std::abs(di) > r || std::abs(dj) > r) continue;
          acc += k.values(di + r, dj + r) * f.values(a, b);
        }
      out.values(i, j) = acc * f.grid.cell_area();
    }
  return out;
}

Field random_field(const Grid2D& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Field f(g);
  for (Eigen::Index k = 0; k < f.values.size(); ++k) f.values(k) = U(rng);
  return f;
}

KernelSamples random_kernel(int radius, double dx, std::mt19937& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  KernelSamples k;
  k.dx = dx;
  k.values.resize(2 * radius + 1, 2 * radius + 1);
  for (Eigen::Index q = 0; q < k.values.size(); ++q) k.values(q) = U(rng);
  return k;
}

KernelSamples gaussian_kernel(double variance, double dx, int radius) {
  KernelSamples k;
  k.dx = dx;
  k.values.resize(2 * radius + 1, 2 * radius + 1);
  for (int b = -radius; b <= radius; ++b)
    for (int a = -radius; a <= radius; ++a)
      k.values(a + radius, b + radius) = gaussian_density(variance, (a * a + b * b) * dx * dx);
  return k;
}

}  // namespace

TEST_CASE("padded sizes are FFT friendly and large enough", "[convolution]") {
  for (int n : {4, 16, 100, 128, 257})
    for (int r : {0, 1, 7, 50, 1000}) {
      const int L = padded_size(n, r);
      CHECK(L >= n + std::min(r, n - 1));
      int v = L;
      for (int p : {2, 3, 5, 7})
        while (v % p == 0) v /= p;
      CHECK(v == 1);
    }
}

TEST_CASE("delta identity", "[convolution]") {
  const Grid2D g = Grid2D::centered(4.0, 32);
  std::mt19937 rng(1);
  const KernelSamples k = random_kernel(5, g.dx(), rng);
  Field delta(g);
  const int ci = 13, cj = 18;
  delta.values(ci, cj) = 1.0 / g.cell_area();
  const Field out = convolve(delta, k);
  double err = 0.0;
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const int a = i - ci, b = j - cj;
      const double expect = (std::abs(a) <= 5 && std::abs(b) <= 5) ? k.values(a + 5, b + 5) : 0.0;
      err = std::max(err, std::abs(out.values(i, j) - expect));
    }
  CHECK(err <= 1e-12);
}

TEST_CASE("FFT convolution matches the direct double sum", "[convolution]") {
  std::mt19937 rng(42);
  const Grid2D g = Grid2D::centered(1.0, 16);
  for (int radius : {3, 6, 15, 20}) {
    const Field f = random_field(g, rng);
    const KernelSamples k = random_kernel(radius, g.dx(), rng);
    const Field fast = convolve(f, k);
    const Field slow = direct_convolution(f, k);
    INFO("radius " << radius);
    CHECK((fast.values - slow.values).abs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("Gaussian closure under convolution", "[convolution]") {
  // N(0, a) * N(0, b) = N(0, a + b)
  const Grid2D g = Grid2D::centered(4.0, 128);
  const double a = 0.1, b = 0.2;
  const Field f = Field::sample(g, [&](double x, double y) { return gaussian_density(a, x * x + y * y); });
  const int r = static_cast<int>(std::ceil(6.0 * std::sqrt(b) / g.dx()));
  const Field out = convolve(f, gaussian_kernel(b, g.dx(), r));
  const Field exact = Field::sample(g, [&](double x, double y) { return gaussian_density(a + b, x * x + y * y); });
  CHECK((out.values - exact.values).abs().maxCoeff() / exact.values.abs().maxCoeff() <= 1e-6);
}

TEST_CASE("convolution properties", "[convolution]") {
  std::mt19937 rng(3);
  const Grid2D g = Grid2D::centered(2.0, 32);
  const KernelSamples k = random_kernel(4, g.dx(), rng);

  SECTION("linear in the field") {
    const Field f = random_field(g, rng), h = random_field(g, rng);
    const double alpha = 0.7, beta = -1.9;
    const Field lhs = convolve(Field(g, alpha * f.values + beta * h.values), k);
    const Eigen::ArrayXXd rhs = alpha * convolve(f, k).values + beta * convolve(h, k).values;
    CHECK((lhs.values - rhs).abs().maxCoeff() <= 1e-12);
  }

  SECTION("commutes with translation away from the boundary") {
    Field f(g), shifted(g);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int j = 10; j < 20; ++j)
      for (int i = 10; i < 20; ++i) f.values(i, j) = U(rng);
    shifted.values.block(11, 10, 10, 10) = f.values.block(10, 10, 10, 10);
    const Field a = convolve(f, k), b = convolve(shifted, k);
    CHECK((b.values.block(1, 0, 31, 32) - a.values.block(0, 0, 31, 32)).abs().maxCoeff() <= 1e-12);
  }

  SECTION("discrete Fubini") {
    Field f(g);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int j = 8; j < 24; ++j)
      for (int i = 8; i < 24; ++i) f.values(i, j) = U(rng);
    CHECK(integrate(convolve(f, k)) == Catch::Approx(integrate(f) * k.mass()).epsilon(1e-10));
  }
}

TEST_CASE("convolution input checks", "[convolution]") {
  const Grid2D g = Grid2D::centered(1.0, 16);
  Field f(g);
  KernelSamples even;
  even.dx = g.dx();
  even.values = Eigen::ArrayXXd::Zero(4, 4);
  CHECK_THROWS_AS(convolve(f, even), std::invalid_argument);

  KernelSamples wrong_dx;
  wrong_dx.dx = 2.0 * g.dx();
  wrong_dx.values = Eigen::ArrayXXd::Zero(5, 5);
  CHECK_THROWS_AS(convolve(f, wrong_dx), std::invalid_argument);

  Convolver c(g, 2);
  KernelSamples big;
  big.dx = g.dx();
  big.values = Eigen::ArrayXXd::Zero(9, 9);
  CHECK_THROWS_AS(c.transform_kernel(big), std::invalid_argument);
  CHECK_THROWS_AS(c.forward(Field(Grid2D::centered(1.0, 8))), std::invalid_argument);
}

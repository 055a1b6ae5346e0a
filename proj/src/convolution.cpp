#include "nlagg/convolution.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

namespace nlagg {
namespace {

bool is_smooth(int v) {
  for (int p : {2, 3, 5, 7})
    while (v % p == 0) v /= p;
  return v == 1;
}

struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

// FFTW's planner is not thread-safe; execution on fresh arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// ESTIMATE planning keeps plans (and therefore results) reproducible run to run.
PlanPair plans_for(int L) {
  static std::map<int, PlanPair> cache;
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto it = cache.find(L);
  if (it != cache.end()) return it->second;
  const int hc = L / 2 + 1;
  double* r = fftw_alloc_real(static_cast<std::size_t>(L) * L);
  fftw_complex* c = fftw_alloc_complex(static_cast<std::size_t>(L) * hc);
  PlanPair p;
  p.r2c = fftw_plan_dft_r2c_2d(L, L, r, c, FFTW_ESTIMATE);
  p.c2r = fftw_plan_dft_c2r_2d(L, L, c, r, FFTW_ESTIMATE);
  fftw_free(r);
  fftw_free(c);
  if (!p.r2c || !p.c2r) throw std::runtime_error("fftw: planning failed for size " + std::to_string(L));
  cache.emplace(L, p);
  return p;
}

void check_kernel(const KernelSamples& k, const Grid2D& g) {
  if (k.values.rows() != k.values.cols() || k.values.rows() % 2 != 1)
    throw std::invalid_argument("convolve: kernel samples must be square with odd size");
  if (std::abs(k.dx - g.dx()) > 1e-12 * g.dx())
    throw std::invalid_argument("convolve: kernel spacing differs from grid spacing");
}

}  // namespace

int padded_size(int n, int kernel_radius) {
  int L = n + std::clamp(kernel_radius, 0, n - 1);
  if (L % 2) ++L;
  while (!is_smooth(L)) L += 2;
  return L;
}

struct Convolver::Buffers {
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
  PlanPair plans;
  ~Buffers() {
    fftw_free(real);
    fftw_free(cplx);
  }
};

Convolver::Convolver(const Grid2D& grid, int max_kernel_radius)
    : grid_(grid),
      padded_(nlagg::padded_size(grid.n, max_kernel_radius)),
      max_radius_(std::max(max_kernel_radius, 0)),
      buf_(std::make_unique<Buffers>()) {
  grid_.validate();
  const std::size_t L = padded_;
  buf_->real = fftw_alloc_real(L * L);
  buf_->cplx = fftw_alloc_complex(L * (L / 2 + 1));
  buf_->plans = plans_for(padded_);
}

Convolver::~Convolver() = default;
Convolver::Convolver(Convolver&&) noexcept = default;
Convolver& Convolver::operator=(Convolver&&) noexcept = default;

Spectrum Convolver::forward(const Field& f) {
  if (!(f.grid == grid_)) throw std::invalid_argument("convolve: field grid differs from convolver grid");
  const int L = padded_;
  const int n = grid_.n;
  Eigen::Map<Eigen::ArrayXXd> real(buf_->real, L, L);
  real.setZero();
  real.topLeftCorner(n, n) = f.values;
  fftw_execute_dft_r2c(buf_->plans.r2c, buf_->real, buf_->cplx);
  return Eigen::Map<Spectrum>(reinterpret_cast<std::complex<double>*>(buf_->cplx), L / 2 + 1, L);
}

Spectrum Convolver::transform_kernel(const KernelSamples& k) {
  check_kernel(k, grid_);
  const int r = k.radius();
  if (r > max_radius_)
    throw std::invalid_argument("convolve: kernel radius " + std::to_string(r) +
                                " exceeds the padded domain (max " + std::to_string(max_radius_) + ")");
  const int L = padded_;
  // offsets beyond n - 1 cells cannot couple two grid cells
  const int reach = std::min(r, grid_.n - 1);
  Eigen::Map<Eigen::ArrayXXd> real(buf_->real, L, L);
  real.setZero();
  for (int b = -reach; b <= reach; ++b) {
    const int jj = (b + L) % L;
    for (int a = -reach; a <= reach; ++a) real((a + L) % L, jj) = k.values(a + r, b + r);
  }
  fftw_execute_dft_r2c(buf_->plans.r2c, buf_->real, buf_->cplx);
  return Eigen::Map<Spectrum>(reinterpret_cast<std::complex<double>*>(buf_->cplx), L / 2 + 1, L);
}

Field Convolver::inverse(const Spectrum& s) {
  const int L = padded_;
  if (s.rows() != L / 2 + 1 || s.cols() != L)
    throw std::invalid_argument("convolve: spectrum size does not match the padded grid");
  Eigen::Map<Spectrum>(reinterpret_cast<std::complex<double>*>(buf_->cplx), L / 2 + 1, L) = s;
  fftw_execute_dft_c2r(buf_->plans.c2r, buf_->cplx, buf_->real);
  Eigen::Map<Eigen::ArrayXXd> real(buf_->real, L, L);
  const double scale = grid_.cell_area() / (static_cast<double>(L) * L);
  return Field(grid_, (real.topLeftCorner(grid_.n, grid_.n) * scale).eval());
}

Field Convolver::convolve(const Field& f, const KernelSamples& k) {
  Spectrum kh = transform_kernel(k);
  Spectrum fh = forward(f);
  return inverse(fh * kh);
}

Field convolve(const Field& f, const KernelSamples& k) {
  check_kernel(k, f.grid);
  Convolver c(f.grid, k.radius());
  return c.convolve(f, k);
}

}  // namespace nlagg

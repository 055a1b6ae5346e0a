#pragma once

#include "nlagg/grid.hpp"

#include <Eigen/Core>

#include <memory>

namespace nlagg {

/// Half-spectrum of an L x L real array: shape (L/2 + 1) x L.
using Spectrum = Eigen::ArrayXXcd;

/// Smallest L >= n + kernel_radius whose only prime factors are 2, 3, 5, 7.
/// Kernel offsets beyond n - 1 cells never couple two cells of the grid, so the
/// radius is clipped there first.
int padded_size(int n, int kernel_radius);

/// Zero-padded linear convolution on a fixed grid via real FFTs.
///
/// The field is placed in the lower-left n x n corner of an L x L buffer and the
/// kernel is wrapped around the origin, so the circular product is exact on the
/// n x n output window as long as L >= n + radius. FFTW plans are shared per L;
/// the work buffers belong to the instance, so one Convolver must not be used
/// from two threads at once.
class Convolver {
 public:
  Convolver(const Grid2D& grid, int max_kernel_radius);
  ~Convolver();
  Convolver(Convolver&&) noexcept;
  Convolver& operator=(Convolver&&) noexcept;
  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;

  const Grid2D& grid() const { return grid_; }
  int padded_size() const { return padded_; }
  /// Largest kernel radius (in cells) that transform_kernel accepts.
  int max_kernel_radius() const { return max_radius_; }

  Spectrum forward(const Field& f);
  Spectrum transform_kernel(const KernelSamples& k);
  /// Inverse transform, cropped to the grid and scaled by dx^2.
  Field inverse(const Spectrum& s);

  Field convolve(const Field& f, const KernelSamples& k);

 private:
  struct Buffers;
  Grid2D grid_;
  int padded_ = 0;
  int max_radius_ = 0;
  std::unique_ptr<Buffers> buf_;
};

/// (k * f)(x_cell) approximated by dx^2 sum_y k(x - y) f(y).
/// Throws std::invalid_argument if the kernel spacing differs from the grid's
/// or its sample array is not square with odd size.
Field convolve(const Field& f, const KernelSamples& k);

}  // namespace nlagg

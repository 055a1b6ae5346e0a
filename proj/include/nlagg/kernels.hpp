#pragma once

#include "nlagg/grid.hpp"

#include <Eigen/Core>

#include <optional>
#include <variant>
#include <vector>

namespace nlagg {

inline constexpr double kRankTolerance = 1e-10;
inline constexpr double kLeftInverseTolerance = 1e-10;
inline constexpr double kNormalizationTolerance = 1e-8;
/// Gaussians are sampled out to this many standard deviations.
inline constexpr double kGaussianTruncation = 6.0;

/// Isotropic 2D Gaussian density of the given variance at squared radius r2.
template <typename Scalar>
Scalar gaussian_density(Scalar variance, Scalar r2) {
  using std::exp;
  return exp(-r2 / (Scalar(2) * variance)) / (Scalar(2) * Scalar(EIGEN_PI) * variance);
}

struct GaussianProfile {
  double variance = 0.1;
};

/// Radial profile rho(r), linearly interpolated between samples and zero past
/// the last radius. Radii must start at 0 and increase strictly.
struct TabulatedProfile {
  std::vector<double> radii;
  std::vector<double> values;
};

/// Unit-mass radial mollifier rho in two dimensions.
class MollifierSpec {
 public:
  static MollifierSpec gaussian(double variance);
  static MollifierSpec tabulated(std::vector<double> radii, std::vector<double> values);

  bool is_gaussian() const { return std::holds_alternative<GaussianProfile>(profile_); }
  double variance() const;  // Gaussian only
  const std::variant<GaussianProfile, TabulatedProfile>& profile() const { return profile_; }

  /// Unscaled rho at radius r.
  double operator()(double r) const;
  /// Radius beyond which the sampled profile is treated as zero.
  double support_radius() const;

  friend bool operator==(const MollifierSpec& a, const MollifierSpec& b);

 private:
  explicit MollifierSpec(std::variant<GaussianProfile, TabulatedProfile> p) : profile_(std::move(p)) {}
  std::variant<GaussianProfile, TabulatedProfile> profile_;
};

/// Kernel family K^{ij}_eps = sum_k A(k,i) A(k,j) rho^i_eps(-.) * rho^j_eps built
/// from a p x N weight matrix and N mollifiers at range epsilon.
struct InteractionModel {
  Eigen::MatrixXd A;
  std::vector<MollifierSpec> mollifiers;
  double epsilon = 1.0;

  InteractionModel() = default;
  /// Throws std::invalid_argument if the column count and mollifier count
  /// differ, an entry is not finite, or epsilon <= 0.
  InteractionModel(Eigen::MatrixXd a, std::vector<MollifierSpec> m, double eps);

  int species() const { return static_cast<int>(A.cols()); }
};

/// gamma^{ij} = (A^T A)_{ij}. The upper triangle is computed and mirrored, so
/// the result is exactly symmetric.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> gamma_matrix(
    const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = A.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      g(i, j) = A.col(i).dot(A.col(j));
      g(j, i) = g(i, j);
    }
  }
  return g;
}

/// sum_ij f_i G_ij f_j
template <typename DerivedG, typename DerivedF>
typename DerivedF::Scalar quadratic_form(const Eigen::MatrixBase<DerivedG>& G,
                                         const Eigen::MatrixBase<DerivedF>& f) {
  return f.dot(G * f);
}

/// sum_k (sum_i A_ki f_i)^2, the same quantity written as a sum of squares.
template <typename DerivedA, typename DerivedF>
typename DerivedF::Scalar factored_quadratic_form(const Eigen::MatrixBase<DerivedA>& A,
                                                  const Eigen::MatrixBase<DerivedF>& f) {
  return (A * f).squaredNorm();
}

struct MollifierCheck {
  bool nonnegative = true;
  double normalization_error = 0.0;  // |integral - 1|
  bool moment_finite = true;
  bool passed() const {
    return nonnegative && normalization_error <= kNormalizationTolerance && moment_finite;
  }
};

struct ValidationReport {
  int rank_of_A = 0;
  int species = 0;
  int rows_of_A = 0;
  bool full_rank = false;
  /// N x p matrix B with B A = I, present exactly when full_rank.
  std::optional<Eigen::MatrixXd> left_inverse;
  double left_inverse_error = 0.0;  // max |BA - I|
  std::vector<MollifierCheck> mollifiers;
  bool pass = false;
};

/// Reports (never throws on) violations of the decomposition hypotheses:
/// rank(A) = N, and unit-mass nonnegative mollifiers with a finite moment.
ValidationReport validate_model(const InteractionModel& model);

/// Numerical rank with singular values below kRankTolerance * s_max treated
/// as zero.
int numerical_rank(const Eigen::MatrixXd& A);

/// eps^-2 rho(x / eps). Throws std::invalid_argument if eps <= 0.
double mollifier_eval(const MollifierSpec& spec, double eps, const Eigen::Vector2d& x);

/// rho_eps sampled on a stencil of spacing dx, clipped to max_radius cells.
KernelSamples sample_mollifier(const MollifierSpec& spec, double eps, double dx, int max_radius);

/// Physical radius of the sampled K^{ij}_eps.
double kernel_support_radius(const InteractionModel& model, int i, int j);

/// Closed-form Gaussian K^{ij}_eps = gamma^{ij} N(0, eps^2 (s_i^2 + s_j^2)),
/// truncated at kGaussianTruncation standard deviations and at n - 1 cells.
/// Throws std::invalid_argument for non-Gaussian mollifiers or bad indices.
KernelSamples kernel_closed_form(const InteractionModel& model, int i, int j, const Grid2D& grid);

/// gamma^{ij} (rho^i_eps(-.) * rho^j_eps) by discrete convolution of sampled
/// mollifiers. Works for any profile.
KernelSamples kernel_by_convolution(const InteractionModel& model, int i, int j, const Grid2D& grid);

/// kernel_closed_form when both profiles are Gaussian, kernel_by_convolution
/// otherwise.
KernelSamples interaction_kernel(const InteractionModel& model, int i, int j, const Grid2D& grid);

}  // namespace nlagg

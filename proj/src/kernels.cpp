#include "nlagg/kernels.hpp"

#include "nlagg/convolution.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nlagg {
namespace {

void check_index(const InteractionModel& model, int i, int j) {
  if (i < 0 || j < 0 || i >= model.species() || j >= model.species())
    throw std::invalid_argument("kernel: species index out of range");
}

int cells_for(double radius, double dx, int max_radius) {
  const int r = static_cast<int>(std::ceil(radius / dx - 1e-12));
  return std::clamp(r, 1, std::max(max_radius, 1));
}

// 2 pi int_0^inf r^power rho(r) r dr
double radial_integral(const MollifierSpec& spec, int power) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianProfile>) {
          // composite Simpson on [0, 12 sigma]; the tail beyond is below 1e-30
          const double upper = 12.0 * std::sqrt(p.variance);
          const int m = 4000;
          const double h = upper / m;
          double acc = 0.0;
          for (int k = 0; k <= m; ++k) {
            const double r = k * h;
            const double w = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            acc += w * std::pow(r, power + 1) * spec(r);
          }
          return 2.0 * EIGEN_PI * acc * h / 3.0;
        } else {
          if (power != 0) throw std::logic_error("radial_integral: tabulated moments unsupported");
          // exact for the piecewise-linear interpolant times r
          double acc = 0.0;
          for (std::size_t k = 0; k + 1 < p.radii.size(); ++k) {
            const double r0 = p.radii[k], r1 = p.radii[k + 1];
            const double v0 = p.values[k], v1 = p.values[k + 1];
            acc += (r1 - r0) / 6.0 * (2 * r0 * v0 + r0 * v1 + r1 * v0 + 2 * r1 * v1);
          }
          return 2.0 * EIGEN_PI * acc;
        }
      },
      spec.profile());
}

MollifierCheck check_mollifier(const MollifierSpec& spec) {
  MollifierCheck c;
  if (spec.is_gaussian()) {
    c.nonnegative = true;
    c.moment_finite = true;
  } else {
    const auto& t = std::get<TabulatedProfile>(spec.profile());
    const double peak = *std::max_element(t.values.begin(), t.values.end());
    c.nonnegative = std::all_of(t.values.begin(), t.values.end(), [](double v) { return v >= 0.0; });
    c.moment_finite = std::abs(t.values.back()) <= 1e-12 * std::max(peak, 1e-300);
  }
  c.normalization_error = std::abs(radial_integral(spec, 0) - 1.0);
  return c;
}

}  // namespace

MollifierSpec MollifierSpec::gaussian(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw std::invalid_argument("mollifier: Gaussian variance must be positive");
  return MollifierSpec(GaussianProfile{variance});
}

MollifierSpec MollifierSpec::tabulated(std::vector<double> radii, std::vector<double> values) {
  if (radii.size() < 2 || radii.size() != values.size())
    throw std::invalid_argument("mollifier: table needs at least two (radius, value) pairs");
  if (radii.front() != 0.0) throw std::invalid_argument("mollifier: table must start at radius 0");
  for (std::size_t k = 1; k < radii.size(); ++k)
    if (!(radii[k] > radii[k - 1])) throw std::invalid_argument("mollifier: radii must increase");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("mollifier: table values must be finite");
  return MollifierSpec(TabulatedProfile{std::move(radii), std::move(values)});
}

double MollifierSpec::variance() const {
  if (!is_gaussian()) throw std::logic_error("mollifier: variance requested for a tabulated profile");
  return std::get<GaussianProfile>(profile_).variance;
}

double MollifierSpec::operator()(double r) const {
  if (is_gaussian()) return gaussian_density(variance(), r * r);
  const auto& t = std::get<TabulatedProfile>(profile_);
  if (r >= t.radii.back()) return 0.0;
  auto it = std::upper_bound(t.radii.begin(), t.radii.end(), r);
  const std::size_t k = static_cast<std::size_t>(it - t.radii.begin()) - 1;
  const double s = (r - t.radii[k]) / (t.radii[k + 1] - t.radii[k]);
  return (1.0 - s) * t.values[k] + s * t.values[k + 1];
}

double MollifierSpec::support_radius() const {
  if (is_gaussian()) return kGaussianTruncation * std::sqrt(variance());
  return std::get<TabulatedProfile>(profile_).radii.back();
}

bool operator==(const MollifierSpec& a, const MollifierSpec& b) {
  if (a.is_gaussian() != b.is_gaussian()) return false;
  if (a.is_gaussian()) return a.variance() == b.variance();
  const auto& ta = std::get<TabulatedProfile>(a.profile_);
  const auto& tb = std::get<TabulatedProfile>(b.profile_);
  return ta.radii == tb.radii && ta.values == tb.values;
}

InteractionModel::InteractionModel(Eigen::MatrixXd a, std::vector<MollifierSpec> m, double eps)
    : A(std::move(a)), mollifiers(std::move(m)), epsilon(eps) {
  if (A.cols() == 0 || A.rows() == 0) throw std::invalid_argument("model: empty interaction matrix");
  if (static_cast<std::size_t>(A.cols()) != mollifiers.size())
    throw std::invalid_argument("model: " + std::to_string(mollifiers.size()) + " mollifiers for " +
                                std::to_string(A.cols()) + " species");
  if (!A.allFinite()) throw std::invalid_argument("model: interaction matrix has non-finite entries");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("model: epsilon must be positive");
}

int numerical_rank(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<int>((s.array() > kRankTolerance * s(0)).count());
}

ValidationReport validate_model(const InteractionModel& model) {
  ValidationReport rep;
  const Eigen::MatrixXd& A = model.A;
  rep.species = static_cast<int>(A.cols());
  rep.rows_of_A = static_cast<int>(A.rows());

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  rep.rank_of_A = (s.size() == 0 || s(0) == 0.0)
                      ? 0
                      : static_cast<int>((s.array() > kRankTolerance * s(0)).count());
  rep.full_rank = rep.rank_of_A == rep.species;

  if (rep.full_rank) {
    // Moore-Penrose pseudoinverse V S^-1 U^T
    Eigen::MatrixXd B = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(rep.species, rep.species);
    rep.left_inverse_error = (B * A - I).cwiseAbs().maxCoeff();
    rep.left_inverse = std::move(B);
  }

  bool ok = rep.full_rank && rep.left_inverse_error <= kLeftInverseTolerance;
  for (const auto& m : model.mollifiers) {
    rep.mollifiers.push_back(check_mollifier(m));
    ok = ok && rep.mollifiers.back().passed();
  }
  rep.pass = ok;
  return rep;
}

double mollifier_eval(const MollifierSpec& spec, double eps, const Eigen::Vector2d& x) {
  if (!(eps > 0.0)) throw std::invalid_argument("mollifier_eval: epsilon must be positive");
  return spec(x.norm() / eps) / (eps * eps);
}

KernelSamples sample_mollifier(const MollifierSpec& spec, double eps, double dx, int max_radius) {
  if (!(eps > 0.0)) throw std::invalid_argument("sample_mollifier: epsilon must be positive");
  const double reach = spec.support_radius() * eps;
  const int R = cells_for(reach, dx, max_radius);
  KernelSamples k;
  k.dx = dx;
  k.values = Eigen::ArrayXXd::Zero(2 * R + 1, 2 * R + 1);
  const double inv_e2 = 1.0 / (eps * eps);
  for (int b = -R; b <= R; ++b)
    for (int a = -R; a <= R; ++a) {
      const double r = std::hypot(a * dx, b * dx);
      if (r <= reach) k.values(a + R, b + R) = spec(r / eps) * inv_e2;
    }
  return k;
}

double kernel_support_radius(const InteractionModel& model, int i, int j) {
  check_index(model, i, j);
  const auto& mi = model.mollifiers[i];
  const auto& mj = model.mollifiers[j];
  if (mi.is_gaussian() && mj.is_gaussian())
    return kGaussianTruncation * model.epsilon * std::sqrt(mi.variance() + mj.variance());
  return model.epsilon * (mi.support_radius() + mj.support_radius());
}

KernelSamples kernel_closed_form(const InteractionModel& model, int i, int j, const Grid2D& grid) {
  check_index(model, i, j);
  const auto& mi = model.mollifiers[i];
  const auto& mj = model.mollifiers[j];
  if (!mi.is_gaussian() || !mj.is_gaussian())
    throw std::invalid_argument("kernel_closed_form: both mollifiers must be Gaussian");
  const double gamma = model.A.col(i).dot(model.A.col(j));
  const double var = model.epsilon * model.epsilon * (mi.variance() + mj.variance());
  const double reach = kGaussianTruncation * std::sqrt(var);
  const double dx = grid.dx();
  const int R = cells_for(reach, dx, grid.n - 1);
  KernelSamples k;
  k.dx = dx;
  k.values = Eigen::ArrayXXd::Zero(2 * R + 1, 2 * R + 1);
  if (gamma == 0.0) return k;
  for (int b = -R; b <= R; ++b)
    for (int a = -R; a <= R; ++a) {
      const double r2 = (a * dx) * (a * dx) + (b * dx) * (b * dx);
      if (r2 <= reach * reach) k.values(a + R, b + R) = gamma * gaussian_density(var, r2);
    }
  return k;
}

KernelSamples kernel_by_convolution(const InteractionModel& model, int i, int j, const Grid2D& grid) {
  check_index(model, i, j);
  const double dx = grid.dx();
  const double gamma = model.A.col(i).dot(model.A.col(j));
  KernelSamples ri = sample_mollifier(model.mollifiers[i], model.epsilon, dx, grid.n - 1);
  KernelSamples rj = sample_mollifier(model.mollifiers[j], model.epsilon, dx, grid.n - 1);
  ri.values = ri.values.reverse().eval();  // rho(-x)

  const int Ri = ri.radius(), Rj = rj.radius();
  const int R = Ri + Rj;
  const int m = 2 * R + 1;
  Grid2D aux{-0.5 * m * dx, 0.5 * m * dx, -0.5 * m * dx, 0.5 * m * dx, m};
  Field host(aux);
  host.values.block(Ri, Ri, 2 * Rj + 1, 2 * Rj + 1) = rj.values;
  Field full = convolve(host, ri);

  const int keep = std::min(R, grid.n - 1);
  KernelSamples k;
  k.dx = dx;
  k.values = gamma * full.values.block(R - keep, R - keep, 2 * keep + 1, 2 * keep + 1);
  return k;
}

KernelSamples interaction_kernel(const InteractionModel& model, int i, int j, const Grid2D& grid) {
  check_index(model, i, j);
  if (model.mollifiers[i].is_gaussian() && model.mollifiers[j].is_gaussian())
    return kernel_closed_form(model, i, j, grid);
  return kernel_by_convolution(model, i, j, grid);
}

}  // namespace nlagg

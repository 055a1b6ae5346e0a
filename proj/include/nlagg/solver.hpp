#pragma once

#include "nlagg/convolution.hpp"
#include "nlagg/grid.hpp"
#include "nlagg/kernels.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlagg {

/// Densities u^1..u^N on one shared grid at one time.
struct SpeciesState {
  double time = 0.0;
  std::vector<Field> fields;

  int species() const { return static_cast<int>(fields.size()); }
  const Grid2D& grid() const { return fields.front().grid; }
  double min_value() const;
};

/// Kernel spectra for a nonlocal model on a fixed grid. Transforms every
/// K^{ij}_eps and rho^i_eps once; each application costs N forward and N
/// inverse FFTs.
class NonlocalOperator {
 public:
  NonlocalOperator(const InteractionModel& model, const Grid2D& grid);

  const InteractionModel& model() const { return model_; }
  const Grid2D& grid() const { return grid_; }
  const Eigen::MatrixXd& gamma() const { return gamma_; }

  /// xi^i = sum_j K^{ij}_eps * u^j
  std::vector<Field> potentials(const std::vector<Field>& u) const;
  /// rho^i_eps * u^i restricted to the grid
  std::vector<Field> mollified(const std::vector<Field>& u) const;
  /// sum_ij integral u^i (K^{ij}_eps * u^j)
  double energy_direct(const std::vector<Field>& u) const;
  /// sum_k integral (sum_i A(k,i) rho^i_eps * u^i)^2
  double energy_factored(const std::vector<Field>& u) const;

 private:
  InteractionModel model_;
  Grid2D grid_;
  Eigen::MatrixXd gamma_;
  mutable std::mutex mu_;
  std::unique_ptr<Convolver> conv_;
  std::vector<Spectrum> kernel_hat_;     // row-major N x N
  std::vector<Spectrum> mollifier_hat_;  // N
  std::vector<KernelSamples> mollifier_samples_;
};

/// How the drift potential xi^i is formed from the densities.
class PotentialStrategy {
 public:
  /// xi^i = sum_j K^{ij}_eps * u^j on the given grid.
  static PotentialStrategy nonlocal(const InteractionModel& model, const Grid2D& grid);
  /// xi^i = sum_j gamma^{ij} u^j pointwise.
  static PotentialStrategy local(const Eigen::MatrixXd& gamma);

  bool is_nonlocal() const { return static_cast<bool>(op_); }
  int species() const { return static_cast<int>(gamma_.rows()); }
  const Eigen::MatrixXd& gamma() const { return gamma_; }
  /// Only valid for the nonlocal variant.
  const NonlocalOperator& nonlocal_operator() const;

 private:
  Eigen::MatrixXd gamma_;
  std::shared_ptr<const NonlocalOperator> op_;
};

enum class Limiter { none, minmod };

struct SchemeParams {
  double cfl = 0.45;
  double max_dt = 0.1;
  Limiter limiter = Limiter::minmod;
  /// Also bound dt by cfl dx^2 / (4 D), D = max_i (max u^i) sum_j |gamma^{ij}|.
  bool diffusive_bound = true;

  void validate() const;
  friend bool operator==(const SchemeParams&, const SchemeParams&) = default;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class BlowUpError : public SolverError {
 public:
  using SolverError::SolverError;
};

class StagnationError : public SolverError {
 public:
  using SolverError::SolverError;
};

inline constexpr double kBlowUpThreshold = 1e12;
inline constexpr double kMinTimeStep = 1e-12;

/// Drift potentials xi^i for the given strategy. Throws std::invalid_argument
/// when the species count or grid does not match.
std::vector<Field> compute_potentials(const SpeciesState& state, const PotentialStrategy& strategy);

struct StepResult {
  SpeciesState state;
  double dt = 0.0;
};

/// One forward-Euler upwind finite-volume step of du^i/dt = div(u^i grad xi^i).
///
/// Edge velocities are v = -grad xi on interior edges and zero on the boundary;
/// the edge density is the upwind cell's reconstructed face value. The step is
/// dt = min(max_dt, cfl dx / (2 max|v|), diffusive bound, max_step). Throws
/// BlowUpError on non-finite or huge velocities or values, and
/// StagnationError when the stability-limited dt drops below kMinTimeStep.
StepResult advance_step(const SpeciesState& state, const PotentialStrategy& strategy,
                        const SchemeParams& params,
                        double max_step = std::numeric_limits<double>::infinity());

using OutputObserver = std::function<void(const SpeciesState&)>;
using StepObserver = std::function<void(const SpeciesState&, double dt)>;

struct RunObservers {
  /// Output times; those inside [state.time, t_end] are hit exactly.
  std::vector<double> output_times;
  std::vector<OutputObserver> on_output;
  std::vector<StepObserver> on_step;
};

/// Steps until t_end, clipping steps to land on every output time and on t_end.
/// Solver errors are rethrown with the failure time in the message.
SpeciesState run_to_time(SpeciesState state, const PotentialStrategy& strategy,
                         const SchemeParams& params, double t_end,
                         const RunObservers& observers = {});

}  // namespace nlagg

#pragma once

#include "nlagg/diagnostics.hpp"
#include "nlagg/kernels.hpp"
#include "nlagg/solver.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlagg {

/// The three four-species setups: upper-triangular ones with equal variances
/// 0.1 (case1), the same matrix with variances 0.1..0.4 (case2), and a rank-one
/// row of ones with variances 0.1..0.4 (case3).
enum class CasePreset { case1 = 1, case2 = 2, case3 = 3 };

CasePreset case_from_int(int id);
Eigen::MatrixXd preset_matrix(CasePreset c);
std::vector<double> preset_variances(CasePreset c);

/// Thrown for malformed or inconsistent configuration; field() names the key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ModelSpec {
  std::optional<int> case_id;
  /// Explicit p x N matrix and variances take precedence over the preset.
  Eigen::MatrixXd matrix;
  std::vector<double> variances;
  std::string mollifier = "gaussian";

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) {
    return a.case_id == b.case_id && a.matrix.rows() == b.matrix.rows() &&
           a.matrix.cols() == b.matrix.cols() && a.matrix == b.matrix && a.variances == b.variances &&
           a.mollifier == b.mollifier;
  }
};

struct InitialSpec {
  double radius = 2.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  /// Standard deviation of the Gaussian the indicator is convolved with; 0 = raw.
  double smoothing_width = 0.0;

  friend bool operator==(const InitialSpec& a, const InitialSpec& b) {
    return a.radius == b.radius && a.center == b.center && a.smoothing_width == b.smoothing_width;
  }
};

struct ExperimentConfig {
  double half_width = 10.0;
  int n = 128;
  int species = 4;
  ModelSpec model{1, {}, {}, "gaussian"};
  std::vector<double> epsilons{4.0, 2.0, 1.0, 0.5};
  double t_end = 10.0;
  /// Empty means eleven evenly spaced times on [0, t_end].
  std::vector<double> output_times;
  SchemeParams scheme;
  InitialSpec initial;
  std::string output_dir;

  Grid2D grid() const { return Grid2D::centered(half_width, n); }
  std::vector<double> resolved_output_times() const;
  Eigen::MatrixXd resolved_matrix() const;
  std::vector<double> resolved_variances() const;

  /// Throws ConfigError on the first inconsistent field.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config(const std::string& toml_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

InteractionModel build_model(const ExperimentConfig& config, double epsilon);

/// Every species set to 1/(pi S^2) on cells whose centre lies inside the ball,
/// optionally convolved with a Gaussian. Throws std::invalid_argument if the
/// ball (plus six smoothing widths) reaches the domain boundary.
SpeciesState initial_condition(const ExperimentConfig& config);

struct RunArtifacts {
  std::string label;
  std::optional<double> epsilon;  // empty for the local model
  ValidationReport validation;
  std::vector<DiagnosticsRecord> diagnostics;
  std::vector<SpeciesState> outputs;
  SpeciesState final_state;
  std::size_t steps = 0;
  double min_value_seen = 0.0;
  /// Largest mass fraction found in the two outermost cell rings.
  double boundary_mass_fraction = 0.0;
  std::vector<std::filesystem::path> files;
};

/// Runs one configuration with the nonlocal strategy at `epsilon` or the local
/// strategy when epsilon is empty. Model validation is recorded but does not
/// stop the run. Writes snapshots, diagnostics and radial profiles under
/// config.output_dir/<label> when output_dir is set.
RunArtifacts run_case(const ExperimentConfig& config, std::optional<double> epsilon);
RunArtifacts run_case(ExperimentConfig config, CasePreset preset, std::optional<double> epsilon);

struct ConvergenceTable {
  std::vector<double> epsilons;
  Eigen::MatrixXd distances;  // epsilons x species
  /// Per-species strict decrease as epsilon shrinks; absent for a single epsilon.
  std::optional<std::vector<bool>> decreasing;
  RunArtifacts local;
  std::vector<RunArtifacts> nonlocal;
};

/// Runs the local model once and each epsilon once (concurrently, up to
/// `jobs` workers; 0 = hardware concurrency), then measures L2 distances at
/// t_end. Epsilons must be nonempty and strictly descending.
ConvergenceTable epsilon_sweep(const ExperimentConfig& config, unsigned jobs = 0);
ConvergenceTable epsilon_sweep(ExperimentConfig config, CasePreset preset, unsigned jobs = 0);

void write_convergence_csv(std::ostream& os, const ConvergenceTable& table);

/// Command-line entry point. Returns 0 on success, 1 on usage or config
/// errors, 2 on solver or I/O failures.
int cli_main(int argc, const char* const* argv);

}  // namespace nlagg

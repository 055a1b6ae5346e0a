#pragma once

#include "nlagg/solver.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <vector>

namespace nlagg {

struct SpeciesDiagnostics {
  double mass = 0.0;
  double second_moment = 0.0;
  double entropy = 0.0;
  double min_value = 0.0;
};

struct DiagnosticsRecord {
  double time = 0.0;
  std::vector<SpeciesDiagnostics> species;
  double quadratic_energy = 0.0;
};

/// Signed entropy integral u ln u, with 0 ln 0 = 0 and cells below 1e-300 skipped.
double entropy(const Field& f);

/// Mass, second moment, entropy and minimum per species, plus the quadratic
/// interaction energy. Nonlocal energy uses the sum-of-squares form over the
/// rows of A; local energy is sum_ij gamma^{ij} integral u^i u^j.
DiagnosticsRecord record(const SpeciesState& state, const PotentialStrategy& strategy);

struct RadialProfile {
  Eigen::VectorXd edges;  // lambda_0 = 0 < ... < lambda_M
  /// values(m, i): mass of species i in bin m divided by d_lambda.
  Eigen::MatrixXd values;

  double d_lambda() const { return edges(1) - edges(0); }
  int bins() const { return static_cast<int>(values.rows()); }
};

/// Bins each cell's mass by the radius of its centre about `center`. Cells at
/// radius >= lambda_M are dropped. Throws std::invalid_argument if
/// d_lambda <= 0 or lambda_max < d_lambda.
RadialProfile radial_profile(const SpeciesState& state, double d_lambda, double lambda_max,
                             const Eigen::Vector2d& center = Eigen::Vector2d::Zero());

/// Per-species sqrt(dx^2 sum (a - b)^2). Throws std::invalid_argument on
/// different grids, species counts, or times.
Eigen::VectorXd l2_distance(const SpeciesState& a, const SpeciesState& b);

/// Smallest radius (cell-centre resolution) whose disc holds `fraction` of the
/// field's mass.
double mass_radius(const Field& f, double fraction,
                   const Eigen::Vector2d& center = Eigen::Vector2d::Zero());

void write_diagnostics_header(std::ostream& os);
void write_diagnostics_rows(std::ostream& os, const DiagnosticsRecord& rec);
void write_radial_csv(std::ostream& os, const RadialProfile& profile);

}  // namespace nlagg

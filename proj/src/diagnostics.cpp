#include "nlagg/diagnostics.hpp"

#include "nlagg/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace nlagg {

double entropy(const Field& f) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < f.values.size(); ++k) {
    const double u = f.values(k);
    if (u > 1e-300) acc += u * std::log(u);
  }
  return acc * f.grid.cell_area();
}

DiagnosticsRecord record(const SpeciesState& state, const PotentialStrategy& strategy) {
  DiagnosticsRecord rec;
  rec.time = state.time;
  for (const auto& f : state.fields)
    rec.species.push_back({integrate(f), second_moment(f), entropy(f), f.values.minCoeff()});

  if (strategy.is_nonlocal()) {
    rec.quadratic_energy = strategy.nonlocal_operator().energy_factored(state.fields);
  } else {
    const auto& G = strategy.gamma();
    const int N = state.species();
    double e = 0.0;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        if (G(i, j) != 0.0) e += G(i, j) * (state.fields[i].values * state.fields[j].values).sum();
    rec.quadratic_energy = e * state.grid().cell_area();
  }
  return rec;
}

RadialProfile radial_profile(const SpeciesState& state, double d_lambda, double lambda_max,
                             const Eigen::Vector2d& center) {
  if (!(d_lambda > 0.0)) throw std::invalid_argument("radial_profile: d_lambda must be positive");
  if (!(lambda_max >= d_lambda)) throw std::invalid_argument("radial_profile: lambda_max below d_lambda");
  const int M = static_cast<int>(std::ceil(lambda_max / d_lambda - 1e-9));
  const Grid2D& g = state.grid();
  const int N = state.species();

  RadialProfile p;
  p.edges = Eigen::VectorXd::LinSpaced(M + 1, 0.0, M * d_lambda);
  p.values = Eigen::MatrixXd::Zero(M, N);
  for (int j = 0; j < g.n; ++j) {
    const double y = g.y(j) - center.y();
    for (int i = 0; i < g.n; ++i) {
      const double x = g.x(i) - center.x();
      const int m = static_cast<int>(std::floor(std::sqrt(x * x + y * y) / d_lambda));
      if (m >= M) continue;
      for (int s = 0; s < N; ++s) p.values(m, s) += state.fields[s].values(i, j);
    }
  }
  p.values *= g.cell_area() / d_lambda;
  return p;
}

Eigen::VectorXd l2_distance(const SpeciesState& a, const SpeciesState& b) {
  if (a.species() != b.species()) throw std::invalid_argument("l2_distance: species counts differ");
  if (a.fields.empty()) return Eigen::VectorXd();
  if (!(a.grid() == b.grid())) throw std::invalid_argument("l2_distance: grids differ");
  if (std::abs(a.time - b.time) > 1e-12 * std::max(1.0, std::abs(a.time)))
    throw std::invalid_argument("l2_distance: states are at different times");
  Eigen::VectorXd d(a.species());
  for (int s = 0; s < a.species(); ++s)
    d(s) = std::sqrt(a.grid().cell_area() * (a.fields[s].values - b.fields[s].values).square().sum());
  return d;
}

double mass_radius(const Field& f, double fraction, const Eigen::Vector2d& center) {
  const Grid2D& g = f.grid;
  std::vector<std::pair<double, double>> cells;
  cells.reserve(static_cast<std::size_t>(g.n) * g.n);
  double total = 0.0;
  for (int j = 0; j < g.n; ++j)
    for (int i = 0; i < g.n; ++i) {
      const double r = std::hypot(g.x(i) - center.x(), g.y(j) - center.y());
      cells.emplace_back(r, f.values(i, j));
      total += f.values(i, j);
    }
  std::sort(cells.begin(), cells.end());
  double acc = 0.0;
  for (const auto& [r, v] : cells) {
    acc += v;
    if (acc >= fraction * total) return r;
  }
  return cells.back().first;
}

void write_diagnostics_header(std::ostream& os) {
  os << "time,species,mass,second_moment,entropy,min_value,energy\n";
}

void write_diagnostics_rows(std::ostream& os, const DiagnosticsRecord& rec) {
  for (std::size_t s = 0; s < rec.species.size(); ++s) {
    const auto& d = rec.species[s];
    os << format_double(rec.time) << ',' << s + 1 << ',' << format_double(d.mass) << ','
       << format_double(d.second_moment) << ',' << format_double(d.entropy) << ','
       << format_double(d.min_value) << ',' << format_double(rec.quadratic_energy) << '\n';
  }
}

void write_radial_csv(std::ostream& os, const RadialProfile& profile) {
  os << "lambda";
  for (Eigen::Index s = 0; s < profile.values.cols(); ++s) os << ",species_" << s + 1;
  os << '\n';
  for (int m = 0; m < profile.bins(); ++m) {
    os << format_double(profile.edges(m));
    for (Eigen::Index s = 0; s < profile.values.cols(); ++s) os << ',' << format_double(profile.values(m, s));
    os << '\n';
  }
}

}  // namespace nlagg

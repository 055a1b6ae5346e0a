#include "nlagg/experiment.hpp"
#include "nlagg/snapshot.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

namespace nlagg {
namespace {

struct Overrides {
  std::string config;
  int case_id = 0;
  std::string epsilon;
  std::string out;
  int grid = 0;
  double t_end = -1.0;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "TOML configuration file");
  cmd->add_option("--case", o.case_id, "case preset (1, 2 or 3)")->check(CLI::Range(1, 3));
  cmd->add_option("--epsilon", o.epsilon, "kernel range, or 'local' for the limit model");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--grid", o.grid, "cells per axis");
  cmd->add_option("--t-end", o.t_end, "final time");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.case_id) {
    c.model = ModelSpec{o.case_id, {}, {}, "gaussian"};
    c.species = 4;
  }
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.grid) c.n = o.grid;
  if (o.t_end >= 0.0) {
    c.t_end = o.t_end;
    std::erase_if(c.output_times, [&](double t) { return t > c.t_end; });
  }
  c.validate();
  return c;
}

// empty optional = local model
std::optional<double> resolve_epsilon(const Overrides& o, const ExperimentConfig& c) {
  if (o.epsilon.empty()) {
    if (c.epsilons.empty()) throw ConfigError("epsilons", "no epsilon given");
    return c.epsilons.front();
  }
  if (o.epsilon == "local") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(o.epsilon, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != o.epsilon.size() || !(v > 0.0)) throw ConfigError("--epsilon", "expected a positive number or 'local'");
  return v;
}

int cmd_validate(const Overrides& o) {
  const ExperimentConfig c = resolve(o);
  const InteractionModel m = build_model(c, resolve_epsilon(o, c).value_or(1.0));
  const ValidationReport r = validate_model(m);
  std::cout << "rank(A) = " << r.rank_of_A << (r.full_rank ? " = " : " < ") << "N = " << r.species
            << " (A is " << r.rows_of_A << " x " << r.species << ")\n";
  if (r.full_rank)
    std::cout << "full-rank hypothesis satisfied; max|BA - I| = " << format_double(r.left_inverse_error) << '\n';
  else
    std::cout << "full-rank hypothesis violated\n";
  const Eigen::MatrixXd G = gamma_matrix(m.A);
  std::cout << "gamma = A^T A:\n" << G << '\n';
  for (std::size_t i = 0; i < r.mollifiers.size(); ++i) {
    const auto& mc = r.mollifiers[i];
    std::cout << "mollifier " << i + 1 << ": nonnegative " << (mc.nonnegative ? "yes" : "no")
              << ", |mass - 1| = " << format_double(mc.normalization_error) << ", finite moment "
              << (mc.moment_finite ? "yes" : "no") << '\n';
  }
  std::cout << "hypotheses " << (r.pass ? "hold" : "do not hold") << '\n';
  return 0;
}

int cmd_simulate(const Overrides& o) {
  ExperimentConfig c = resolve(o);
  if (c.output_dir.empty()) c.output_dir = "nlagg_out";
  const auto eps = resolve_epsilon(o, c);
  const RunArtifacts a = run_case(c, eps);
  std::cout << a.label << ": " << a.steps << " steps to t = " << format_double(a.final_state.time) << '\n';
  if (!a.validation.full_rank) std::cout << "warning: rank(A) < N, full-rank hypothesis violated\n";
  if (a.boundary_mass_fraction > 1e-6)
    std::cout << "warning: " << format_double(a.boundary_mass_fraction)
              << " of a species' mass reached the boundary cells\n";
  std::cout << "outputs in " << (std::filesystem::path(c.output_dir) / a.label).string() << '\n';
  return 0;
}

int cmd_sweep(const Overrides& o) {
  ExperimentConfig c = resolve(o);
  if (c.output_dir.empty()) c.output_dir = "nlagg_out";
  if (!o.epsilon.empty()) throw ConfigError("--epsilon", "sweep takes its epsilons from the config");
  const ConvergenceTable t = epsilon_sweep(c);
  write_convergence_csv(std::cout, t);
  if (t.decreasing)
    for (std::size_t s = 0; s < t.decreasing->size(); ++s)
      std::cout << "species " << s + 1 << ": " << ((*t.decreasing)[s] ? "decreasing" : "NOT decreasing") << '\n';
  std::cout << "table in " << (std::filesystem::path(c.output_dir) / "convergence.csv").string() << '\n';
  return 0;
}

int cmd_radial(const std::string& input, std::string out, double d_lambda) {
  if (!std::filesystem::is_directory(input)) throw ConfigError("--input", "not a directory: " + input);
  if (out.empty()) out = input;
  std::map<double, std::vector<Snapshot>> by_time;
  for (const auto& entry : std::filesystem::directory_iterator(input)) {
    if (entry.path().extension() != ".json") continue;
    Snapshot s = read_snapshot(entry.path());
    by_time[s.time].push_back(std::move(s));
  }
  if (by_time.empty()) throw ConfigError("--input", "no snapshot sidecars in " + input);
  std::filesystem::create_directories(out);
  int k = 0;
  for (auto& [time, snaps] : by_time) {
    std::sort(snaps.begin(), snaps.end(), [](const Snapshot& a, const Snapshot& b) { return a.species < b.species; });
    SpeciesState st;
    st.time = time;
    for (auto& s : snaps) st.fields.push_back(std::move(s.field));
    const Grid2D& g = st.grid();
    const double dl = d_lambda > 0.0 ? d_lambda : 2.0 * g.dx();
    const double lmax = 0.5 * g.width();
    const Eigen::Vector2d center(0.5 * (g.x_min + g.x_max), 0.5 * (g.y_min + g.y_max));
    const auto path = std::filesystem::path(out) / ("radial_" + std::to_string(k++) + ".csv");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_radial_csv(os, radial_profile(st, dl, lmax, center));
    std::cout << "t = " << format_double(time) << " -> " << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Nonlocal aggregation / cross-diffusion simulator"};
  app.require_subcommand(1);
  Overrides sim, swp, val;
  auto* simulate = app.add_subcommand("simulate", "run one configuration");
  add_common(simulate, sim);
  auto* sweep = app.add_subcommand("sweep", "epsilon sweep against the local model");
  add_common(sweep, swp);
  auto* validate = app.add_subcommand("validate", "report the kernel decomposition hypotheses");
  add_common(validate, val);
  auto* radial = app.add_subcommand("radial", "radial profiles from snapshot files");
  std::string input, radial_out;
  double d_lambda = 0.0;
  radial->add_option("--input", input, "directory of snapshot sidecars")->required();
  radial->add_option("--out", radial_out, "output directory (default: input)");
  radial->add_option("--dlambda", d_lambda, "ring width (default: 2 dx)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*sweep) return cmd_sweep(swp);
    if (*validate) return cmd_validate(val);
    if (*radial) return cmd_radial(input, radial_out, d_lambda);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace nlagg

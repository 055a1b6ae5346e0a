#include "nlagg/experiment.hpp"

#include "nlagg/convolution.hpp"
#include "nlagg/snapshot.hpp"

#include <toml.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace nlagg {

CasePreset case_from_int(int id) {
  if (id < 1 || id > 3) throw ConfigError("model.case", "must be 1, 2 or 3 (got " + std::to_string(id) + ")");
  return static_cast<CasePreset>(id);
}

Eigen::MatrixXd preset_matrix(CasePreset c) {
  if (c == CasePreset::case3) return Eigen::MatrixXd::Ones(1, 4);
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(4, 4).triangularView<Eigen::Upper>();
  return a;
}

std::vector<double> preset_variances(CasePreset c) {
  if (c == CasePreset::case1) return {0.1, 0.1, 0.1, 0.1};
  return {0.1, 0.2, 0.3, 0.4};
}

// ---------------------------------------------------------------- config

std::vector<double> ExperimentConfig::resolved_output_times() const {
  if (!output_times.empty()) return output_times;
  if (t_end == 0.0) return {0.0};
  std::vector<double> t(11);
  for (int k = 0; k <= 10; ++k) t[k] = t_end * k / 10.0;
  t.back() = t_end;
  return t;
}

Eigen::MatrixXd ExperimentConfig::resolved_matrix() const {
  if (model.matrix.size() > 0) return model.matrix;
  if (!model.case_id) throw ConfigError("model.matrix", "neither a matrix nor a case preset is given");
  return preset_matrix(case_from_int(*model.case_id));
}

std::vector<double> ExperimentConfig::resolved_variances() const {
  if (!model.variances.empty()) return model.variances;
  if (!model.case_id) throw ConfigError("model.variances", "neither variances nor a case preset is given");
  return preset_variances(case_from_int(*model.case_id));
}

void ExperimentConfig::validate() const {
  if (!(half_width > 0.0)) throw ConfigError("grid.half_width", "must be positive");
  if (n < 4) throw ConfigError("grid.n", "must be at least 4");
  if (species < 1) throw ConfigError("species", "must be at least 1");
  if (model.case_id) case_from_int(*model.case_id);
  if (model.mollifier != "gaussian") throw ConfigError("model.mollifier", "only \"gaussian\" is supported in configs");
  const Eigen::MatrixXd A = resolved_matrix();
  if (!A.allFinite()) throw ConfigError("model.matrix", "entries must be finite");
  if (A.cols() != species)
    throw ConfigError("model.matrix", "has " + std::to_string(A.cols()) + " columns for " +
                                          std::to_string(species) + " species");
  const auto v = resolved_variances();
  if (static_cast<int>(v.size()) != species)
    throw ConfigError("model.variances", "has " + std::to_string(v.size()) + " entries for " +
                                             std::to_string(species) + " species");
  for (double s : v)
    if (!(s > 0.0)) throw ConfigError("model.variances", "entries must be positive");
  for (double e : epsilons)
    if (!(e > 0.0)) throw ConfigError("epsilons", "entries must be positive");
  if (!(t_end >= 0.0)) throw ConfigError("t_end", "must be nonnegative");
  for (double t : output_times)
    if (!(t >= 0.0 && t <= t_end)) throw ConfigError("output_times", "entries must lie in [0, t_end]");
  if (!(scheme.cfl > 0.0 && scheme.cfl <= 1.0)) throw ConfigError("scheme.cfl", "must lie in (0, 1]");
  if (!(scheme.max_dt > 0.0)) throw ConfigError("scheme.max_dt", "must be positive");
  if (!(initial.radius > 0.0)) throw ConfigError("initial.radius", "must be positive");
  if (!(initial.smoothing_width >= 0.0)) throw ConfigError("initial.smoothing_width", "must be nonnegative");
}

namespace {

const toml::node* find(const toml::table& t, std::string_view key) { return t.get(key); }

double as_double(const toml::node& node, const std::string& field) {
  if (auto v = node.value_exact<double>()) return *v;
  if (auto v = node.value_exact<int64_t>()) return static_cast<double>(*v);
  throw ConfigError(field, "expected a number");
}

std::vector<double> as_doubles(const toml::node& node, const std::string& field) {
  const toml::array* arr = node.as_array();
  if (!arr) throw ConfigError(field, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& el : *arr) out.push_back(as_double(el, field));
  return out;
}

void reject_unknown(const toml::table& t, std::initializer_list<std::string_view> known, const std::string& prefix) {
  for (const auto& [k, v] : t) {
    if (std::find(known.begin(), known.end(), k.str()) == known.end())
      throw ConfigError(prefix + std::string(k.str()), "unknown key");
  }
}

const toml::table* subtable(const toml::table& t, std::string_view key) {
  const toml::node* n = find(t, key);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError(std::string(key), "expected a table");
  return n->as_table();
}

toml::array to_array(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError("<toml>", os.str());
  }
  ExperimentConfig c;
  reject_unknown(root, {"species", "epsilons", "t_end", "output_times", "output_dir", "grid", "model", "scheme", "initial"},
                 "");

  if (auto* n = find(root, "species")) {
    auto v = n->value_exact<int64_t>();
    if (!v) throw ConfigError("species", "expected an integer");
    c.species = static_cast<int>(*v);
  }
  if (auto* n = find(root, "epsilons")) c.epsilons = as_doubles(*n, "epsilons");
  if (auto* n = find(root, "t_end")) c.t_end = as_double(*n, "t_end");
  if (auto* n = find(root, "output_times")) c.output_times = as_doubles(*n, "output_times");
  if (auto* n = find(root, "output_dir")) {
    auto v = n->value_exact<std::string>();
    if (!v) throw ConfigError("output_dir", "expected a string");
    c.output_dir = *v;
  }

  if (auto* g = subtable(root, "grid")) {
    reject_unknown(*g, {"half_width", "n"}, "grid.");
    if (auto* n = find(*g, "half_width")) c.half_width = as_double(*n, "grid.half_width");
    if (auto* n = find(*g, "n")) {
      auto v = n->value_exact<int64_t>();
      if (!v) throw ConfigError("grid.n", "expected an integer");
      c.n = static_cast<int>(*v);
    }
  }

  if (auto* m = subtable(root, "model")) {
    reject_unknown(*m, {"case", "matrix", "variances", "mollifier"}, "model.");
    c.model.case_id.reset();
    if (auto* n = find(*m, "case")) {
      auto v = n->value_exact<int64_t>();
      if (!v) throw ConfigError("model.case", "expected an integer");
      c.model.case_id = static_cast<int>(*v);
    }
    if (auto* n = find(*m, "matrix")) {
      const toml::array* rows = n->as_array();
      if (!rows || rows->empty()) throw ConfigError("model.matrix", "expected a nonempty array of rows");
      std::vector<std::vector<double>> r;
      for (const auto& row : *rows) r.push_back(as_doubles(row, "model.matrix"));
      const std::size_t cols = r.front().size();
      if (cols == 0) throw ConfigError("model.matrix", "rows must be nonempty");
      Eigen::MatrixXd A(r.size(), cols);
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (r[k].size() != cols) throw ConfigError("model.matrix", "rows have different lengths");
        for (std::size_t j = 0; j < cols; ++j) A(k, j) = r[k][j];
      }
      c.model.matrix = A;
    }
    if (auto* n = find(*m, "variances")) c.model.variances = as_doubles(*n, "model.variances");
    if (auto* n = find(*m, "mollifier")) {
      auto v = n->value_exact<std::string>();
      if (!v) throw ConfigError("model.mollifier", "expected a string");
      c.model.mollifier = *v;
    }
  }

  if (auto* s = subtable(root, "scheme")) {
    reject_unknown(*s, {"cfl", "max_dt", "limiter", "diffusive_bound"}, "scheme.");
    if (auto* n = find(*s, "cfl")) c.scheme.cfl = as_double(*n, "scheme.cfl");
    if (auto* n = find(*s, "max_dt")) c.scheme.max_dt = as_double(*n, "scheme.max_dt");
    if (auto* n = find(*s, "limiter")) {
      auto v = n->value_exact<std::string>();
      if (!v || (*v != "none" && *v != "minmod")) throw ConfigError("scheme.limiter", "expected \"none\" or \"minmod\"");
      c.scheme.limiter = *v == "none" ? Limiter::none : Limiter::minmod;
    }
    if (auto* n = find(*s, "diffusive_bound")) {
      auto v = n->value_exact<bool>();
      if (!v) throw ConfigError("scheme.diffusive_bound", "expected a boolean");
      c.scheme.diffusive_bound = *v;
    }
  }

  if (auto* i = subtable(root, "initial")) {
    reject_unknown(*i, {"radius", "center", "smoothing_width"}, "initial.");
    if (auto* n = find(*i, "radius")) c.initial.radius = as_double(*n, "initial.radius");
    if (auto* n = find(*i, "center")) {
      auto v = as_doubles(*n, "initial.center");
      if (v.size() != 2) throw ConfigError("initial.center", "expected two coordinates");
      c.initial.center = {v[0], v[1]};
    }
    if (auto* n = find(*i, "smoothing_width")) c.initial.smoothing_width = as_double(*n, "initial.smoothing_width");
  }

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  toml::table root;
  root.insert("species", c.species);
  root.insert("epsilons", to_array(c.epsilons));
  root.insert("t_end", c.t_end);
  root.insert("output_times", to_array(c.output_times));
  root.insert("output_dir", c.output_dir);

  root.insert("grid", toml::table{{"half_width", c.half_width}, {"n", c.n}});

  toml::table model;
  if (c.model.case_id) model.insert("case", *c.model.case_id);
  if (c.model.matrix.size() > 0) {
    toml::array rows;
    for (Eigen::Index k = 0; k < c.model.matrix.rows(); ++k) {
      toml::array row;
      for (Eigen::Index j = 0; j < c.model.matrix.cols(); ++j) row.push_back(c.model.matrix(k, j));
      rows.push_back(std::move(row));
    }
    model.insert("matrix", std::move(rows));
  }
  if (!c.model.variances.empty()) model.insert("variances", to_array(c.model.variances));
  model.insert("mollifier", c.model.mollifier);
  root.insert("model", std::move(model));

  root.insert("scheme", toml::table{{"cfl", c.scheme.cfl},
                                    {"max_dt", c.scheme.max_dt},
                                    {"limiter", c.scheme.limiter == Limiter::none ? "none" : "minmod"},
                                    {"diffusive_bound", c.scheme.diffusive_bound}});
  root.insert("initial", toml::table{{"radius", c.initial.radius},
                                     {"center", to_array({c.initial.center.x(), c.initial.center.y()})},
                                     {"smoothing_width", c.initial.smoothing_width}});
  std::ostringstream os;
  os << root << '\n';
  return os.str();
}

InteractionModel build_model(const ExperimentConfig& config, double epsilon) {
  std::vector<MollifierSpec> m;
  for (double v : config.resolved_variances()) m.push_back(MollifierSpec::gaussian(v));
  return InteractionModel(config.resolved_matrix(), std::move(m), epsilon);
}

// ---------------------------------------------------------------- initial data

SpeciesState initial_condition(const ExperimentConfig& config) {
  const Grid2D g = config.grid();
  const InitialSpec& ic = config.initial;
  const double reach = ic.radius + kGaussianTruncation * ic.smoothing_width;
  if (ic.center.x() - reach <= g.x_min + g.dx() || ic.center.x() + reach >= g.x_max - g.dx() ||
      ic.center.y() - reach <= g.y_min + g.dx() || ic.center.y() + reach >= g.y_max - g.dx())
    throw std::invalid_argument("initial_condition: ball of radius " + format_double(ic.radius) +
                                " reaches the domain boundary");

  const double level = 1.0 / (EIGEN_PI * ic.radius * ic.radius);
  const double r2max = ic.radius * ic.radius;
  Field ball = Field::sample(g, [&](double x, double y) {
    const double dx = x - ic.center.x(), dy = y - ic.center.y();
    return dx * dx + dy * dy < r2max ? level : 0.0;
  });
  if (ic.smoothing_width > 0.0) {
    KernelSamples k = sample_mollifier(MollifierSpec::gaussian(ic.smoothing_width * ic.smoothing_width), 1.0,
                                       g.dx(), g.n - 1);
    ball = convolve(ball, k);
    ball.values = ball.values.max(0.0);  // FFT round-off below zero
  }
  SpeciesState s;
  s.time = 0.0;
  s.fields.assign(config.species, ball);
  return s;
}

// ---------------------------------------------------------------- runs

namespace {

std::string eps_label(std::optional<double> eps) {
  if (!eps) return "local";
  char buf[64];
  std::snprintf(buf, sizeof buf, "eps_%g", *eps);
  return buf;
}

double boundary_fraction(const Field& f) {
  const int n = f.grid.n;
  const double total = f.values.sum();
  if (total <= 0.0) return 0.0;
  const double inner = f.values.block(2, 2, n - 4, n - 4).sum();
  return std::max(0.0, (total - inner) / total);
}

std::ofstream open_or_throw(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void write_validation(std::ostream& os, const ValidationReport& r) {
  os << "rank_of_A " << r.rank_of_A << "\nspecies " << r.species << "\nrows_of_A " << r.rows_of_A
     << "\nfull_rank " << (r.full_rank ? "true" : "false") << "\nleft_inverse_error "
     << format_double(r.left_inverse_error) << '\n';
  for (std::size_t i = 0; i < r.mollifiers.size(); ++i) {
    const auto& m = r.mollifiers[i];
    os << "mollifier_" << i + 1 << " nonnegative=" << (m.nonnegative ? "true" : "false")
       << " normalization_error=" << format_double(m.normalization_error)
       << " moment_finite=" << (m.moment_finite ? "true" : "false") << '\n';
  }
  os << "pass " << (r.pass ? "true" : "false") << '\n';
}

}  // namespace

RunArtifacts run_case(const ExperimentConfig& config, std::optional<double> epsilon) {
  config.validate();
  if (epsilon && !(*epsilon > 0.0)) throw std::invalid_argument("run_case: epsilon must be positive");
  const Grid2D g = config.grid();

  RunArtifacts art;
  art.epsilon = epsilon;
  art.label = eps_label(epsilon);
  const InteractionModel model = build_model(config, epsilon.value_or(1.0));
  art.validation = validate_model(model);
  const PotentialStrategy strategy = epsilon ? PotentialStrategy::nonlocal(model, g)
                                             : PotentialStrategy::local(gamma_matrix(model.A));

  std::filesystem::path dir;
  if (!config.output_dir.empty()) {
    dir = std::filesystem::path(config.output_dir) / art.label;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    auto os = open_or_throw(dir / "validation.txt");
    write_validation(os, art.validation);
    art.files.push_back(dir / "validation.txt");
  }

  SpeciesState state = initial_condition(config);
  art.min_value_seen = state.min_value();
  const double d_lambda = 2.0 * g.dx();

  RunObservers obs;
  obs.output_times = config.resolved_output_times();
  obs.on_step.push_back([&](const SpeciesState& s, double) {
    ++art.steps;
    art.min_value_seen = std::min(art.min_value_seen, s.min_value());
  });
  obs.on_output.push_back([&](const SpeciesState& s) {
    art.diagnostics.push_back(record(s, strategy));
    art.outputs.push_back(s);
    for (const auto& f : s.fields) art.boundary_mass_fraction = std::max(art.boundary_mass_fraction, boundary_fraction(f));
    if (dir.empty()) return;
    const std::size_t k = art.outputs.size() - 1;
    for (int i = 0; i < s.species(); ++i) {
      const auto stem = dir / ("snap_" + std::to_string(k) + "_s" + std::to_string(i + 1));
      write_snapshot(stem, {s.fields[i], s.time, i + 1});
      art.files.push_back(stem.string() + ".csv");
    }
    const auto radial = dir / ("radial_" + std::to_string(k) + ".csv");
    auto os = open_or_throw(radial);
    write_radial_csv(os, radial_profile(s, d_lambda, config.half_width));
    art.files.push_back(radial);
  });

  art.final_state = run_to_time(std::move(state), strategy, config.scheme, config.t_end, obs);

  if (!dir.empty()) {
    auto os = open_or_throw(dir / "diagnostics.csv");
    write_diagnostics_header(os);
    for (const auto& r : art.diagnostics) write_diagnostics_rows(os, r);
    art.files.push_back(dir / "diagnostics.csv");
  }
  return art;
}

RunArtifacts run_case(ExperimentConfig config, CasePreset preset, std::optional<double> epsilon) {
  config.model = ModelSpec{static_cast<int>(preset), {}, {}, "gaussian"};
  config.species = 4;
  return run_case(config, epsilon);
}

ConvergenceTable epsilon_sweep(const ExperimentConfig& config, unsigned jobs) {
  config.validate();
  if (config.epsilons.empty()) throw ConfigError("epsilons", "sweep needs at least one epsilon");
  for (std::size_t k = 1; k < config.epsilons.size(); ++k)
    if (!(config.epsilons[k] < config.epsilons[k - 1]))
      throw ConfigError("epsilons", "must be strictly descending");

  ConvergenceTable table;
  table.epsilons = config.epsilons;
  table.local = run_case(config, std::nullopt);

  const std::size_t count = config.epsilons.size();
  table.nonlocal.resize(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        table.nonlocal[k] = run_case(config, config.epsilons[k]);
      } catch (const SolverError& e) {
        errors[k] = std::make_exception_ptr(
            SolverError("epsilon = " + format_double(config.epsilons[k]) + ": " + e.what(), e.time()));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const int N = table.local.final_state.species();
  table.distances.resize(static_cast<Eigen::Index>(count), N);
  for (std::size_t k = 0; k < count; ++k)
    table.distances.row(static_cast<Eigen::Index>(k)) =
        l2_distance(table.nonlocal[k].final_state, table.local.final_state).transpose();

  if (count > 1) {
    std::vector<bool> dec(N, true);
    for (int s = 0; s < N; ++s)
      for (std::size_t k = 1; k < count; ++k)
        if (!(table.distances(k, s) < table.distances(k - 1, s))) dec[s] = false;
    table.decreasing = dec;
  }

  if (!config.output_dir.empty()) {
    const auto p = std::filesystem::path(config.output_dir) / "convergence.csv";
    auto os = open_or_throw(p);
    write_convergence_csv(os, table);
    if (table.decreasing) {
      const auto v = std::filesystem::path(config.output_dir) / "convergence_verdict.csv";
      auto vs = open_or_throw(v);
      vs << "species,decreasing\n";
      for (int s = 0; s < N; ++s) vs << s + 1 << ',' << ((*table.decreasing)[s] ? "true" : "false") << '\n';
    }
  }
  return table;
}

ConvergenceTable epsilon_sweep(ExperimentConfig config, CasePreset preset, unsigned jobs) {
  config.model = ModelSpec{static_cast<int>(preset), {}, {}, "gaussian"};
  config.species = 4;
  return epsilon_sweep(config, jobs);
}

void write_convergence_csv(std::ostream& os, const ConvergenceTable& table) {
  os << "epsilon";
  for (Eigen::Index s = 0; s < table.distances.cols(); ++s) os << ",species_" << s + 1;
  os << '\n';
  for (std::size_t k = 0; k < table.epsilons.size(); ++k) {
    os << format_double(table.epsilons[k]);
    for (Eigen::Index s = 0; s < table.distances.cols(); ++s)
      os << ',' << format_double(table.distances(static_cast<Eigen::Index>(k), s));
    os << '\n';
  }
}

}  // namespace nlagg

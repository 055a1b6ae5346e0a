#include <catch_amalgamated.hpp>

#include "nlagg/experiment.hpp"
#include "nlagg/snapshot.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

using namespace nlagg;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = fs::temp_directory_path() / ("nlagg_test_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.half_width = 8.0;
  c.n = 32;
  c.t_end = 0.2;
  c.epsilons = {2.0, 1.0};
  return c;
}

int run_cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"nlagg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("case presets", "[experiment]") {
  Eigen::MatrixXd min_ij(4, 4);
  min_ij << 1, 1, 1, 1, 1, 2, 2, 2, 1, 2, 3, 3, 1, 2, 3, 4;
  CHECK(gamma_matrix(preset_matrix(CasePreset::case1)) == min_ij);
  CHECK(gamma_matrix(preset_matrix(CasePreset::case2)) == min_ij);
  CHECK(gamma_matrix(preset_matrix(CasePreset::case3)) == Eigen::MatrixXd::Ones(4, 4));
  CHECK(preset_variances(CasePreset::case1) == std::vector<double>{0.1, 0.1, 0.1, 0.1});
  CHECK(preset_variances(CasePreset::case3) == std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK_THROWS_AS(case_from_int(4), ConfigError);

  ExperimentConfig c;
  c.model.case_id = 3;
  CHECK_FALSE(validate_model(build_model(c, 1.0)).full_rank);
  c.model.case_id = 2;
  CHECK(validate_model(build_model(c, 1.0)).pass);
}

TEST_CASE("initial condition", "[experiment]") {
  ExperimentConfig c;
  c.n = 256;
  const SpeciesState s = initial_condition(c);
  REQUIRE(s.species() == 4);
  const double tol = 2.0 * c.grid().dx() / 2.0;
  for (const auto& f : s.fields) {
    CHECK(std::abs(integrate(f) - 1.0) <= tol);
    CHECK(std::abs(second_moment(f) - 2.0) <= 4.0 * tol);
    CHECK(f.values.maxCoeff() == 1.0 / (kPi * 4.0));
    CHECK(f.values.minCoeff() == 0.0);
  }
  CHECK(s.time == 0.0);

  SECTION("smoothing keeps mass and positivity") {
    c.initial.smoothing_width = 0.3;
    const SpeciesState m = initial_condition(c);
    CHECK(integrate(m.fields[0]) == Approx(integrate(s.fields[0])).epsilon(1e-7));
    CHECK(m.fields[0].values.minCoeff() >= 0.0);
    CHECK(m.fields[0].values.maxCoeff() < s.fields[0].values.maxCoeff());
  }

  SECTION("ball reaching the boundary is rejected") {
    c.initial.center = {8.5, 0.0};
    CHECK_THROWS_AS(initial_condition(c), std::invalid_argument);
    c.initial.center = {0.0, 0.0};
    c.initial.radius = 9.99;
    CHECK_THROWS_AS(initial_condition(c), std::invalid_argument);
  }
}

TEST_CASE("TOML configuration", "[experiment]") {
  SECTION("defaults") {
    const ExperimentConfig c = parse_config("");
    CHECK(c == ExperimentConfig{});
    CHECK(c.resolved_output_times().size() == 11);
    CHECK(c.resolved_output_times().back() == c.t_end);
  }

  SECTION("round trip") {
    ExperimentConfig c;
    c.half_width = 7.25;
    c.n = 96;
    c.species = 3;
    c.model.case_id.reset();
    c.model.matrix = Eigen::MatrixXd::Random(5, 3);
    c.model.variances = {0.1, 0.123456789012345, 1.0 / 3.0};
    c.epsilons = {3.0, 1.0 / 7.0};
    c.t_end = 2.5;
    c.output_times = {0.0, 0.1, 2.5};
    c.scheme.cfl = 0.3;
    c.scheme.limiter = Limiter::none;
    c.scheme.diffusive_bound = false;
    c.initial.center = {0.5, -0.25};
    c.initial.smoothing_width = 0.2;
    c.output_dir = "out dir/with \"quotes\"";
    const std::string text = serialize_config(c);
    INFO(text);
    CHECK(parse_config(text) == c);
    CHECK(serialize_config(parse_config(text)) == text);
  }

  SECTION("a full file") {
    const ExperimentConfig c = parse_config(R"(
species = 4
epsilons = [1, 0.5]
t_end = 3
[grid]
half_width = 12.0
n = 64
[model]
case = 3
[scheme]
limiter = "none"
[initial]
radius = 1.5
)");
    CHECK(c.model.case_id == 3);
    CHECK(c.resolved_matrix() == Eigen::MatrixXd::Ones(1, 4));
    CHECK(c.epsilons == std::vector<double>{1.0, 0.5});
    CHECK(c.grid().x_max == 12.0);
    CHECK(c.scheme.limiter == Limiter::none);
    CHECK(c.initial.radius == 1.5);
  }

  auto field_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<no error>");
  };
  SECTION("errors name the offending key") {
    CHECK(field_of("bogus = 1") == "bogus");
    CHECK(field_of("[grid]\nsize = 3") == "grid.size");
    CHECK(field_of("[grid]\nn = \"big\"") == "grid.n");
    CHECK(field_of("[grid]\nn = 2") == "grid.n");
    CHECK(field_of("t_end = -1") == "t_end");
    CHECK(field_of("epsilons = [1, -2]") == "epsilons");
    CHECK(field_of("[model]\ncase = 7") == "model.case");
    CHECK(field_of("[model]\nmatrix = [[1, 2], [3]]\nvariances = [0.1, 0.1]\n") == "model.matrix");
    CHECK(field_of("species = 2\n[model]\nmatrix = [[1, 2]]\nvariances = [0.1]\n") == "model.variances");
    CHECK(field_of("[scheme]\ncfl = 1.5") == "scheme.cfl");
    CHECK(field_of("[scheme]\nlimiter = \"superbee\"") == "scheme.limiter");
    CHECK(field_of("output_times = [20]") == "output_times");
    CHECK(field_of("t_end = [") == "<toml>");
  }
}

TEST_CASE("snapshots round-trip bit for bit", "[experiment]") {
  TempDir tmp("snap");
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Field f(Grid2D{-1.5, 2.5, -3.0, 1.0, 7});
  for (Eigen::Index k = 0; k < f.values.size(); ++k) f.values(k) = U(rng) * std::pow(10.0, 20 * U(rng));
  write_snapshot(tmp.path / "s", {f, 1.0 / 3.0, 2});
  const Snapshot back = read_snapshot(tmp.path / "s.json");
  CHECK((back.field.values == f.values).all());
  CHECK(back.field.grid == f.grid);
  CHECK(back.time == 1.0 / 3.0);
  CHECK(back.species == 2);

  // first CSV line holds row j = 0
  std::istringstream csv(slurp(tmp.path / "s.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.substr(0, line.find(',')) == format_double(f.values(0, 0)));

  std::ofstream(tmp.path / "bad.json") << "{\"n\": 7}";
  CHECK_THROWS_WITH(read_snapshot(tmp.path / "bad.json"), Catch::Matchers::ContainsSubstring("bad.json"));
}

TEST_CASE("single runs", "[experiment]") {
  SECTION("t_end = 0 returns the initial condition") {
    ExperimentConfig c = small_config();
    c.t_end = 0.0;
    const RunArtifacts a = run_case(c, 1.0);
    CHECK(a.steps == 0);
    REQUIRE(a.outputs.size() == 1);
    CHECK((a.final_state.fields[0].values == initial_condition(c).fields[0].values).all());
    CHECK(a.label == "eps_1");
  }

  SECTION("rank-deficient case still runs and reports") {
    const RunArtifacts a = run_case(small_config(), CasePreset::case3, 1.0);
    CHECK_FALSE(a.validation.full_rank);
    CHECK(a.validation.rank_of_A == 1);
    CHECK(a.final_state.time == 0.2);
    CHECK(a.min_value_seen >= 0.0);
  }

  SECTION("deterministic and writes its files") {
    TempDir tmp("run");
    ExperimentConfig c = small_config();
    c.output_dir = tmp.path.string();
    c.output_times = {0.0, 0.1, 0.2};
    const RunArtifacts a = run_case(c, std::nullopt);
    const RunArtifacts b = run_case(c, std::nullopt);
    CHECK(a.label == "local");
    CHECK(a.steps == b.steps);
    for (int i = 0; i < 4; ++i) CHECK((a.final_state.fields[i].values == b.final_state.fields[i].values).all());

    const fs::path dir = tmp.path / "local";
    for (const char* name : {"validation.txt", "diagnostics.csv", "radial_0.csv", "radial_2.csv", "snap_2_s4.csv",
                             "snap_2_s4.json"})
      CHECK(fs::exists(dir / name));
    for (const auto& p : a.files) CHECK(fs::exists(p));
    // header plus one row per species per output
    const std::string diag = slurp(dir / "diagnostics.csv");
    CHECK(std::count(diag.begin(), diag.end(), '\n') == 1 + 4 * 3);
    const Snapshot s = read_snapshot(dir / "snap_2_s4.json");
    CHECK((s.field.values == a.final_state.fields[3].values).all());
    CHECK(s.time == 0.2);
  }
}

TEST_CASE("epsilon sweep", "[experiment]") {
  ExperimentConfig c = small_config();
  c.epsilons = {1.0, 2.0};
  CHECK_THROWS_AS(epsilon_sweep(c), ConfigError);
  c.epsilons = {};
  CHECK_THROWS_AS(epsilon_sweep(c), ConfigError);

  c.epsilons = {1.0};
  const ConvergenceTable one = epsilon_sweep(c, 1);
  CHECK_FALSE(one.decreasing);
  CHECK(one.distances.rows() == 1);

  TempDir tmp("sweep");
  c.output_dir = tmp.path.string();
  c.epsilons = {2.0, 1.0, 0.5};
  const ConvergenceTable t = epsilon_sweep(c, 2);
  REQUIRE(t.decreasing);
  CHECK(t.distances.rows() == 3);
  CHECK(t.distances(2, 0) == l2_distance(t.nonlocal[2].final_state, t.local.final_state)(0));
  // threads do not change the answer
  const ConvergenceTable serial = epsilon_sweep(c, 1);
  CHECK((serial.distances.array() == t.distances.array()).all());
  CHECK(fs::exists(tmp.path / "convergence.csv"));
  CHECK(fs::exists(tmp.path / "convergence_verdict.csv"));
}

TEST_CASE("command line", "[experiment]") {
  TempDir tmp("cli");
  const std::string out = (tmp.path / "o").string();

  CHECK(run_cli({"validate", "--case", "3"}) == 0);
  CHECK(run_cli({"simulate", "--case", "1", "--grid", "32", "--t-end", "0", "--epsilon", "1", "--out", out}) == 0);
  const Snapshot s = read_snapshot(fs::path(out) / "eps_1" / "snap_0_s1.json");
  ExperimentConfig c;
  c.n = 32;
  CHECK((s.field.values == initial_condition(c).fields[0].values).all());

  CHECK(run_cli({"radial", "--input", (fs::path(out) / "eps_1").string(), "--out", (tmp.path / "r").string()}) == 0);
  CHECK(fs::exists(tmp.path / "r" / "radial_0.csv"));

  CHECK(run_cli({"simulate", "--no-such-flag"}) == 1);
  CHECK(run_cli({"simulate", "--case", "9"}) == 1);
  CHECK(run_cli({"simulate", "--epsilon", "-1", "--t-end", "0", "--out", out}) == 1);
  CHECK(run_cli({}) == 1);
  std::ofstream(tmp.path / "bad.toml") << "[grid]\nn = 1\n";
  CHECK(run_cli({"simulate", "--config", (tmp.path / "bad.toml").string()}) == 1);
  CHECK(run_cli({"simulate", "--config", (tmp.path / "missing.toml").string()}) == 1);
  CHECK(run_cli({"radial", "--input", (tmp.path / "nowhere").string()}) == 1);

  SECTION("installed binary") {
    const std::string bin = NLAGG_CLI_PATH;
    const std::string quiet = " > " + (tmp.path / "log.txt").string() + " 2>&1";
    auto status = [](int raw) { return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1; };
    CHECK(status(std::system((bin + " validate --case 3" + quiet).c_str())) == 0);
    CHECK(slurp(tmp.path / "log.txt").find("full-rank hypothesis violated") != std::string::npos);
    CHECK(status(std::system((bin + " simulate --bogus" + quiet).c_str())) == 1);
    CHECK(status(std::system((bin + " simulate --config " + (tmp.path / "bad.toml").string() + quiet).c_str())) == 1);
  }
}

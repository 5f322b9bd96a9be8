#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ofosim/sweep.hpp"

using namespace ofosim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scenario small_two_bus_scenario() {
  Scenario s;
  s.grid = "two-bus";
  s.alpha_values = {0.05};
  s.n_vertices = 12;
  s.max_iter = 400;
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("an empty scenario document yields the defaults") {
  const Scenario s = parse_scenario("{}");
  CHECK(s.grid == "meshed-10");
  REQUIRE(s.alpha_values.size() == 1);
  CHECK(s.alpha_values[0] == kMeshedAlphaLo);
  CHECK(s.g_diagonal.empty());
  CHECK(s.n_vertices == 36);
  CHECK(s.conv_tol == 1e-4);
  CHECK(s.max_iter == 600);
  CHECK(s.initial_input == InitialPolicy::Midpoint);
  CHECK(!s.soft_outputs);
  CHECK(s.relinearize_every == 0);
  CHECK(s.deterministic);
  CHECK(s.constraints.voltage_rows);
  CHECK(s.constraints.circle_segments == 16);
}

TEST_CASE("scenario parsing is strict") {
  CHECK_THROWS_AS(parse_scenario("{"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[]"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"typo_key": 1})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"alpha_values": []})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"alpha_values": [0.1, -0.5]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"alpha_values": "0.1"})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"n_vertices": 4})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"conv_tol": 0})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"max_iter": 0})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"sensitivity_step": -1e-5})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"grid": ""})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"grid": 7})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"G": {"type": "scalar"}})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"G": {"type": "diagonal"}})"), ParseError);
  CHECK_THROWS_AS(
      parse_scenario(R"({"G": {"type": "identity", "values": [1]}})"),
      ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"G": {"type": "diagonal", "values": []}})"),
                  ParseError);
  CHECK_THROWS_AS(
      parse_scenario(R"({"G": {"type": "diagonal", "values": [1, 0]}})"),
      ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"constraints": {"voltage": true}})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"constraints": {"circle_segments": 2}})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"initial_input": "median"})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"disturbance": ["x"]})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"rho": 0})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"relinearize_every": -1})"), ParseError);
}

TEST_CASE("scenario fields parse into the configuration") {
  const Scenario s = parse_scenario(R"({
    "grid": "two-bus",
    "alpha_values": [0.1, 0.02],
    "G": {"type": "diagonal", "values": [1.0, 2.0]},
    "n_vertices": 8,
    "conv_tol": 1e-5,
    "max_iter": 250,
    "constraints": {"voltage_rows": false, "circle_segments": 8},
    "disturbance": [0, 0, 0.05, 0],
    "initial_input": "zero",
    "soft_outputs": true,
    "rho": 500.0,
    "relinearize_every": 10
  })");
  CHECK(s.grid == "two-bus");
  CHECK(s.alpha_values == std::vector<double>{0.1, 0.02});
  CHECK(s.g_diagonal == std::vector<double>{1.0, 2.0});
  CHECK(s.n_vertices == 8);
  CHECK(s.conv_tol == 1e-5);
  CHECK(s.max_iter == 250);
  CHECK(!s.constraints.voltage_rows);
  CHECK(s.constraints.pcc_circle);
  CHECK(s.constraints.circle_segments == 8);
  CHECK(s.disturbance == std::vector<double>{0.0, 0.0, 0.05, 0.0});
  CHECK(s.initial_input == InitialPolicy::Zero);
  CHECK(s.soft_outputs);
  CHECK(s.rho == 500.0);
  CHECK(s.relinearize_every == 10);
}

TEST_CASE("the effective scenario echo is a parse fixed point") {
  const Scenario s = parse_scenario(
      R"({"grid": "two-bus", "alpha_values": [0.05], "n_vertices": 8,
          "G": {"type": "diagonal", "values": [2.0, 0.5]}})");
  const std::string echo = effective_scenario_json(s);
  const Scenario back = parse_scenario(echo);
  CHECK(effective_scenario_json(back) == echo);
  CHECK(back.grid == s.grid);
  CHECK(back.g_diagonal == s.g_diagonal);

  const std::string dflt = effective_scenario_json(parse_scenario("{}"));
  CHECK(dflt.find("\"meshed-10\"") != std::string::npos);
  CHECK(dflt.find("\"identity\"") != std::string::npos);
}

TEST_CASE("grids resolve by builtin name or path") {
  CHECK(resolve_grid("two-bus").n_buses() == 2);
  CHECK(resolve_grid("meshed-10").n_buses() == 10);

  const fs::path tmp = fs::temp_directory_path() / "ofosim-test-grid.json";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << serialize(builtin_grid("radial-4"));
  }
  CHECK(resolve_grid(tmp.string()).n_buses() == 4);
  fs::remove(tmp);

  CHECK_THROWS_AS(resolve_grid("/nonexistent/grid.json"), ParseError);
}

TEST_CASE("a two-bus vertex sweep is stable, safe, and covering") {
  const Scenario s = small_two_bus_scenario();
  const SweepReport rep = run_vertex_sweep(s);

  CHECK(rep.u0.size() == 2);
  CHECK(rep.u0.norm() == 0.0);  // symmetric box, midpoint at the origin
  CHECK(rep.s_pcc0.norm() < 1e-9);
  REQUIRE(rep.polygon.vertices.size() == 12);
  CHECK(rep.safety_tol == doctest::Approx(0.01 * polygon_diameter(rep.polygon)));

  REQUIRE(rep.per_alpha.size() == 1);
  const AlphaReport& ar = rep.per_alpha[0];
  CHECK(ar.alpha == 0.05);
  REQUIRE(ar.runs.size() == 12);
  CHECK(ar.n_stable == 12);
  CHECK(ar.n_oscillatory == 0);
  CHECK(ar.n_divergent == 0);
  CHECK(ar.safe);
  CHECK(ar.violations.empty());
  REQUIRE(ar.median_iterations.has_value());
  CHECK(*ar.median_iterations > 0.0);

  REQUIRE(!ar.sets.empty());
  CHECK(ar.sets.size() == ar.coverage.size());
  for (size_t k = 0; k < ar.sets.size(); ++k) {
    CHECK(ar.sets[k].k == static_cast<int>(k));
    CHECK(ar.sets[k].points.size() == 12);
  }
  for (size_t k = 1; k < ar.coverage.size(); ++k)
    CHECK(ar.coverage[k] >= ar.coverage[k - 1] - 1e-9);
  CHECK(ar.coverage.front() == 0.0);  // the ensemble starts as one point
  CHECK(ar.coverage.back() > 0.9);

  for (const VertexRun& run : ar.runs) {
    CHECK(run.final_distance <= 10 * s.conv_tol);
    CHECK(run.trajectory.samples.size() >= 1);
  }
}

TEST_CASE("a measurement disturbance shifts the operating point") {
  Scenario s = small_two_bus_scenario();
  s.n_vertices = 8;
  const SweepReport base = run_vertex_sweep(s);
  s.disturbance = {0.0, 0.0, 0.05, 0.0};
  const SweepReport shifted = run_vertex_sweep(s);
  CHECK(shifted.s_pcc0.x() - base.s_pcc0.x() == doctest::Approx(0.05));
  CHECK(shifted.s_pcc0.y() == doctest::Approx(base.s_pcc0.y()).epsilon(1e-9));
}

TEST_CASE("sweep-level validation rejects bad scenarios") {
  SUBCASE("vertex count") {
    Scenario s = small_two_bus_scenario();
    s.n_vertices = 4;
    CHECK_THROWS_AS(run_vertex_sweep(s), std::invalid_argument);
  }
  SUBCASE("gain list") {
    Scenario s = small_two_bus_scenario();
    s.alpha_values = {};
    CHECK_THROWS_AS(run_vertex_sweep(s), std::invalid_argument);
  }
  SUBCASE("G diagonal length") {
    Scenario s = small_two_bus_scenario();
    s.g_diagonal = {1.0, 2.0, 3.0};  // two-bus has two input channels
    CHECK_THROWS_AS(run_vertex_sweep(s), std::invalid_argument);
  }
}

TEST_CASE("the gain study compares step sizes") {
  SUBCASE("fewer than two gains is refused") {
    const Scenario s = small_two_bus_scenario();
    CHECK_THROWS_AS(run_gain_study(s), std::invalid_argument);
  }

  Scenario s = small_two_bus_scenario();
  s.n_vertices = 8;
  s.alpha_values = {0.02, 0.2};
  const GainStudy study = run_gain_study(s);
  REQUIRE(study.rows.size() == 2);
  CHECK(study.rows[0].alpha == 0.02);
  CHECK(study.rows[1].alpha == 0.2);
  for (const GainRow& r : study.rows) {
    CHECK(r.n_stable == 8);
    CHECK(r.n_oscillatory == 0);
    CHECK(r.n_divergent == 0);
    CHECK(r.safe);
    REQUIRE(r.median_iterations.has_value());
  }
  // The two-bus loop contracts faster with the larger step.
  CHECK(*study.rows[0].median_iterations > *study.rows[1].median_iterations);

  const std::string table = format_gain_table(study.rows);
  CHECK(table.find("alpha") != std::string::npos);
  CHECK(table.find("median_iters") != std::string::npos);
  CHECK(table.find("yes") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}

TEST_CASE("safety verdicts are consistent with the violation list") {
  Scenario s = small_two_bus_scenario();
  s.n_vertices = 8;
  s.alpha_values = {0.05, 0.3};
  const SweepReport rep = run_vertex_sweep(s);
  for (const AlphaReport& ar : rep.per_alpha)
    CHECK(ar.safe == ar.violations.empty());
}

TEST_CASE("plot exports are complete and byte-stable") {
  Scenario s = small_two_bus_scenario();
  s.n_vertices = 8;
  s.alpha_values = {0.05, 0.2};

  TempDir a("ofosim-sweep-a");
  TempDir b("ofosim-sweep-b");

  const SweepReport rep1 = run_vertex_sweep(s);
  const auto names = export_plot_data(rep1, a.path.string());
  const std::vector<std::string> expected = {
      "trajectories.csv", "for_polygon.csv", "trajectory_sets.csv",
      "coverage.csv", "summary.json"};
  CHECK(names == expected);
  for (const std::string& n : names) CHECK(fs::exists(a.path / n));

  // A fresh end-to-end run must reproduce every byte.
  const SweepReport rep2 = run_vertex_sweep(s);
  export_plot_data(rep2, b.path.string());
  for (const std::string& n : names) CHECK(slurp(a.path / n) == slurp(b.path / n));

  SUBCASE("headers") {
    const std::string traj = slurp(a.path / "trajectories.csv");
    CHECK(traj.rfind("alpha,vertex,k,u_0,u_1,y_0,y_1,y_2,y_3,"
                     "phi,sigma_norm,n_active,classification\n", 0) == 0);
    const std::string sets = slurp(a.path / "trajectory_sets.csv");
    CHECK(sets.rfind("alpha,k,member,p,q\n", 0) == 0);
    const std::string cov = slurp(a.path / "coverage.csv");
    CHECK(cov.rfind("alpha,k,fraction\n", 0) == 0);
    const std::string poly = slurp(a.path / "for_polygon.csv");
    CHECK(poly.rfind("theta_deg,p,q\n", 0) == 0);
  }
  SUBCASE("summary encodes the scenario and the verdicts") {
    const nlohmann::json j =
        nlohmann::json::parse(slurp(a.path / "summary.json"));
    CHECK(j["scenario"]["grid"] == "two-bus");
    CHECK(j["grid"]["buses"] == 2);
    CHECK(j["polygon"]["n_vertices"] == 8);
    REQUIRE(j["alphas"].size() == 2);
    CHECK(j["alphas"][0]["alpha"] == 0.05);
    CHECK(j["alphas"][0]["safe"].is_boolean());
    CHECK(j["alphas"][0]["final_coverage"].is_number());
    CHECK(j["files"].size() == 5);
  }
}

TEST_CASE("exporting an empty report is an error") {
  SweepReport empty;
  CHECK_THROWS_AS(export_plot_data(empty, "/tmp/ofosim-empty-report"),
                  std::runtime_error);
}

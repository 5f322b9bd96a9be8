// Scenario-driven experiment layer: vertex sweeps across gains, gain-study
// tables, and deterministic plot-data exports.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ofosim/controller.hpp"
#include "ofosim/flex_region.hpp"
#include "ofosim/grid.hpp"
#include "ofosim/plant.hpp"

namespace ofosim {

// Gains frozen for the bundled meshed-10 fixture. With five units the PCC
// sensitivity block has lambda_max(Js Js^T) near 5, so the closed-loop error
// contraction |1 - 2*alpha*lambda| leaves the unit circle around alpha = 0.2:
// kMeshedAlphaLo stays well inside, kMeshedAlphaHi well beyond.
inline constexpr double kMeshedAlphaLo = 0.02;
inline constexpr double kMeshedAlphaHi = 0.5;

struct Scenario {
  std::string grid = "meshed-10";        // builtin name or grid JSON path
  std::vector<double> alpha_values{kMeshedAlphaLo};
  std::vector<double> g_diagonal;        // empty -> identity weighting
  int n_vertices = 36;
  double conv_tol = 1e-4;
  int max_iter = 600;
  double sensitivity_step = 1e-5;
  ConstraintPolicy constraints;
  std::vector<double> disturbance;       // empty -> zero, else length n_y
  InitialPolicy initial_input = InitialPolicy::Midpoint;
  bool soft_outputs = false;
  double rho = 1e4;
  int relinearize_every = 0;
  bool deterministic = true;             // declarative: the pipeline is RNG-free
};

// Strict parse: unknown keys, bad types, or invariant violations raise
// ParseError so that no effective parameter can hide behind a default.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);

// The scenario with every default materialized, as a JSON document. Embedded
// in summary.json so reports are auditable.
std::string effective_scenario_json(const Scenario& s);

// Builtin name (two-bus, radial-4, meshed-10) or a path to a grid document.
Network resolve_grid(const std::string& name_or_path);

struct VertexRun {
  int vertex = 0;
  double theta_deg = 0.0;
  DispatchTarget target;
  Trajectory trajectory;
  double final_distance = 0.0;  // |s_pcc(final) - target|
};

struct AlphaReport {
  double alpha = 0.0;
  std::vector<VertexRun> runs;             // one per polygon vertex
  std::vector<TrajectorySet> sets;         // E(k) for k = 0..K
  std::vector<double> coverage;            // coverage_fraction per k
  bool safe = true;                        // E(k) within F for every k
  std::vector<SafetyViolation> violations;
  int n_stable = 0;
  int n_oscillatory = 0;
  int n_divergent = 0;
  std::optional<double> median_iterations;  // among stable runs that converged
};

struct SweepReport {
  Scenario scenario;
  Network network;
  Eigen::VectorXd u0;
  Eigen::Vector2d s_pcc0;
  ForPolygon polygon;      // built once, with the smallest alpha
  double safety_tol = 0.0; // 1% of the polygon diameter
  std::vector<AlphaReport> per_alpha;
};

// Builds the polygon with the most conservative gain, then runs one
// trajectory per (alpha, vertex) from the common initial state and assembles
// trajectory sets, coverage curves, and the per-alpha safety verdict.
SweepReport run_vertex_sweep(const Scenario& scenario);

struct GainRow {
  double alpha = 0.0;
  int n_stable = 0;
  int n_oscillatory = 0;
  int n_divergent = 0;
  std::optional<double> median_iterations;
  bool safe = true;
};

struct GainStudy {
  std::vector<GainRow> rows;
  SweepReport report;  // the underlying sweep, for exports
};

// Requires >= 2 gains in the scenario.
GainStudy run_gain_study(const Scenario& scenario);

std::string format_gain_table(const std::vector<GainRow>& rows);

// Writes trajectories.csv, for_polygon.csv, trajectory_sets.csv,
// coverage.csv, summary.json into out_dir; returns the file names. Byte
// stable across repeat runs; throws std::runtime_error on an empty report or
// an unwritable directory.
std::vector<std::string> export_plot_data(const SweepReport& report,
                                          const std::string& out_dir);

}  // namespace ofosim

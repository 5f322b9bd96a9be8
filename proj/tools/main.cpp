// ofosim command-line driver: validate | powerflow | for | sweep | gain-study.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include <CLI11.hpp>

#include "ofosim/csv.hpp"
#include "ofosim/flex_region.hpp"
#include "ofosim/grid.hpp"
#include "ofosim/plant.hpp"
#include "ofosim/powerflow.hpp"
#include "ofosim/qp.hpp"
#include "ofosim/sensitivity.hpp"
#include "ofosim/sweep.hpp"

namespace {

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir;
  std::string grid;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario_path, "Scenario JSON file");
  cmd->add_option("--out", args.out_dir, "Output directory for exports");
  cmd->add_option("--grid", args.grid,
                  "Grid: builtin name (two-bus, radial-4, meshed-10) or JSON path; "
                  "overrides the scenario's grid");
}

ofosim::Scenario resolve_scenario(const CommonArgs& args) {
  ofosim::Scenario s;
  if (!args.scenario_path.empty()) s = ofosim::load_scenario_file(args.scenario_path);
  if (!args.grid.empty()) s.grid = args.grid;
  return s;
}

std::ofstream open_out(const std::string& dir, const char* name) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path path = fs::path(dir) / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

int cmd_validate(const CommonArgs& args) {
  const ofosim::Scenario s = resolve_scenario(args);
  const ofosim::Network net = ofosim::resolve_grid(s.grid);
  std::cout << "grid '" << s.grid << "' OK: " << net.n_buses() << " buses, "
            << net.branches.size() << " branches, " << net.n_units()
            << " units\n";
  std::cout << "effective scenario:\n"
            << ofosim::effective_scenario_json(s) << '\n';
  return 0;
}

int cmd_powerflow(const CommonArgs& args) {
  const ofosim::Scenario s = resolve_scenario(args);
  const ofosim::Network net = ofosim::resolve_grid(s.grid);
  const ofosim::GridPlant plant(net);
  const Eigen::VectorXd u0 = plant.initial_input(s.initial_input);
  const ofosim::PowerFlowSolution sol =
      ofosim::solve_powerflow(net, plant.injections_for(u0));
  if (!sol.converged) {
    std::cerr << "power flow did not converge ("
              << (sol.status == ofosim::PfStatus::SingularJacobian
                      ? "singular Jacobian"
                      : "iteration limit")
              << ")\n";
    return 2;
  }
  std::cout << "converged in " << sol.iterations << " iterations\n";
  for (int i = 0; i < net.n_buses(); ++i)
    std::cout << "  " << net.buses[i].id << ": v = " << ofosim::csv::num(sol.v_mag(i))
              << " p.u., theta = "
              << ofosim::csv::num(sol.v_ang(i) * 180.0 / std::numbers::pi)
              << " deg\n";
  std::cout << "s_pcc = " << ofosim::csv::num(sol.s_pcc.real()) << " + j"
            << ofosim::csv::num(sol.s_pcc.imag()) << " p.u. (export positive)\n";
  if (!args.out_dir.empty()) {
    std::ofstream os = open_out(args.out_dir, "powerflow.csv");
    os << "bus,v_pu,theta_deg\n";
    for (int i = 0; i < net.n_buses(); ++i)
      os << net.buses[i].id << ',' << ofosim::csv::num(sol.v_mag(i)) << ','
         << ofosim::csv::num(sol.v_ang(i) * 180.0 / std::numbers::pi) << '\n';
    std::cout << "wrote " << args.out_dir << "/powerflow.csv\n";
  }
  return 0;
}

int cmd_for(const CommonArgs& args) {
  const ofosim::Scenario s = resolve_scenario(args);
  const ofosim::Network net = ofosim::resolve_grid(s.grid);
  const ofosim::GridPlant grid_plant(net);
  const ofosim::PlantFn plant = [&](const Eigen::VectorXd& u) {
    return grid_plant.apply(u);
  };
  const Eigen::VectorXd u0 = grid_plant.initial_input(s.initial_input);

  ofosim::OfoConfig cfg;
  cfg.alpha = *std::min_element(s.alpha_values.begin(), s.alpha_values.end());
  cfg.sensitivity = ofosim::compute_sensitivity(plant, u0, s.sensitivity_step);
  cfg.constraints = ofosim::build_constraints(net, s.constraints);
  cfg.max_iter = s.max_iter;
  cfg.conv_tol = s.conv_tol;
  cfg.soft_outputs = s.soft_outputs;
  cfg.rho = s.rho;

  const ofosim::ForPolygon f =
      ofosim::compute_for_polygon(plant, u0, cfg, s.n_vertices);
  std::cout << f.vertices.size() << " vertices, diameter = "
            << ofosim::csv::num(ofosim::polygon_diameter(f)) << " p.u.\n";
  if (!args.out_dir.empty()) {
    std::ofstream os = open_out(args.out_dir, "for_polygon.csv");
    ofosim::write_for_csv(os, f);
    std::cout << "wrote " << args.out_dir << "/for_polygon.csv\n";
  } else {
    ofosim::write_for_csv(std::cout, f);
  }
  return 0;
}

void print_alpha_summary(const ofosim::SweepReport& rep) {
  for (const ofosim::AlphaReport& ar : rep.per_alpha)
    std::cout << "alpha = " << ofosim::csv::num(ar.alpha) << ": " << ar.n_stable
              << " stable, " << ar.n_oscillatory << " oscillatory, "
              << ar.n_divergent << " divergent; safe = "
              << (ar.safe ? "yes" : "no") << "; final coverage = "
              << ofosim::csv::num(ar.coverage.empty() ? 0.0 : ar.coverage.back())
              << '\n';
}

int cmd_sweep(const CommonArgs& args) {
  const ofosim::Scenario s = resolve_scenario(args);
  const ofosim::SweepReport rep = ofosim::run_vertex_sweep(s);
  print_alpha_summary(rep);
  const std::string out = args.out_dir.empty() ? "out" : args.out_dir;
  for (const std::string& f : ofosim::export_plot_data(rep, out))
    std::cout << "wrote " << out << '/' << f << '\n';
  return 0;
}

int cmd_gain_study(const CommonArgs& args) {
  const ofosim::Scenario s = resolve_scenario(args);
  const ofosim::GainStudy study = ofosim::run_gain_study(s);
  std::cout << ofosim::format_gain_table(study.rows);
  if (!args.out_dir.empty()) {
    {
      std::ofstream os = open_out(args.out_dir, "gain_table.txt");
      os << ofosim::format_gain_table(study.rows);
    }
    for (const std::string& f : ofosim::export_plot_data(study.report, args.out_dir))
      std::cout << "wrote " << args.out_dir << '/' << f << '\n';
    std::cout << "wrote " << args.out_dir << "/gain_table.txt\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OFO flexibility simulator"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* validate = app.add_subcommand("validate", "Check a grid and scenario");
  CLI::App* powerflow = app.add_subcommand("powerflow", "Solve one power flow");
  CLI::App* forcmd =
      app.add_subcommand("for", "Construct the feasible operating region");
  CLI::App* sweep =
      app.add_subcommand("sweep", "Run the vertex sweep and export plot data");
  CLI::App* gain =
      app.add_subcommand("gain-study", "Compare gains across the vertex ensemble");
  for (CLI::App* cmd : {validate, powerflow, forcmd, sweep, gain})
    add_common(cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(args);
    if (powerflow->parsed()) return cmd_powerflow(args);
    if (forcmd->parsed()) return cmd_for(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (gain->parsed()) return cmd_gain_study(args);
  } catch (const ofosim::ValidationError& e) {
    std::cerr << "validation error:\n";
    for (const std::string& v : e.violations) std::cerr << "  - " << v << '\n';
    return 1;
  } catch (const ofosim::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

#include "ofosim/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ofosim/csv.hpp"
#include "ofosim/qp.hpp"
#include "ofosim/sensitivity.hpp"

namespace ofosim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> scenario_violations(const Scenario& s) {
  std::vector<std::string> v;
  if (s.grid.empty()) v.push_back("grid must be non-empty");
  if (s.alpha_values.empty()) v.push_back("alpha_values must be non-empty");
  for (double a : s.alpha_values)
    if (!(a > 0.0)) {
      v.push_back("alpha_values must all be > 0");
      break;
    }
  for (double g : s.g_diagonal)
    if (!(g > 0.0)) {
      v.push_back("G diagonal must be > 0 everywhere");
      break;
    }
  if (s.n_vertices < 8) v.push_back("n_vertices must be >= 8");
  if (!(s.conv_tol > 0.0)) v.push_back("conv_tol must be > 0");
  if (s.max_iter < 1) v.push_back("max_iter must be >= 1");
  if (!(s.sensitivity_step > 0.0)) v.push_back("sensitivity_step must be > 0");
  if (s.constraints.circle_segments < 3) v.push_back("circle_segments must be >= 3");
  if (!(s.rho > 0.0)) v.push_back("rho must be > 0");
  if (s.relinearize_every < 0) v.push_back("relinearize_every must be >= 0");
  return v;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const std::string& p : parts) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

double as_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ParseError("scenario: '" + key + "' must be a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& key) {
  if (!j.is_number_integer())
    throw ParseError("scenario: '" + key + "' must be an integer");
  return j.get<int>();
}

bool as_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ParseError("scenario: '" + key + "' must be a boolean");
  return j.get<bool>();
}

std::vector<double> as_number_list(const json& j, const std::string& key) {
  if (!j.is_array()) throw ParseError("scenario: '" + key + "' must be an array");
  std::vector<double> out;
  for (const json& e : j) out.push_back(as_number(e, key + " entry"));
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scenario: top level must be an object");

  static const std::set<std::string> known = {
      "grid",           "alpha_values", "G",
      "n_vertices",     "conv_tol",     "max_iter",
      "sensitivity_step", "constraints", "disturbance",
      "initial_input",  "soft_outputs", "rho",
      "relinearize_every", "deterministic"};
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw ParseError("scenario: unknown key '" + item.key() + "'");

  Scenario s;
  if (j.contains("grid")) {
    if (!j["grid"].is_string()) throw ParseError("scenario: 'grid' must be a string");
    s.grid = j["grid"].get<std::string>();
  }
  if (j.contains("alpha_values"))
    s.alpha_values = as_number_list(j["alpha_values"], "alpha_values");
  if (j.contains("G")) {
    const json& g = j["G"];
    if (!g.is_object() || !g.contains("type") || !g["type"].is_string())
      throw ParseError("scenario: 'G' must be an object with a 'type' string");
    const std::string type = g["type"].get<std::string>();
    if (type == "identity") {
      if (g.size() != 1) throw ParseError("scenario: identity G takes no extra keys");
    } else if (type == "diagonal") {
      if (!g.contains("values") || g.size() != 2)
        throw ParseError("scenario: diagonal G needs exactly 'type' and 'values'");
      s.g_diagonal = as_number_list(g["values"], "G values");
      if (s.g_diagonal.empty())
        throw ParseError("scenario: diagonal G must list at least one value");
    } else {
      throw ParseError("scenario: G type must be 'identity' or 'diagonal'");
    }
  }
  if (j.contains("n_vertices")) s.n_vertices = as_int(j["n_vertices"], "n_vertices");
  if (j.contains("conv_tol")) s.conv_tol = as_number(j["conv_tol"], "conv_tol");
  if (j.contains("max_iter")) s.max_iter = as_int(j["max_iter"], "max_iter");
  if (j.contains("sensitivity_step"))
    s.sensitivity_step = as_number(j["sensitivity_step"], "sensitivity_step");
  if (j.contains("constraints")) {
    const json& c = j["constraints"];
    if (!c.is_object()) throw ParseError("scenario: 'constraints' must be an object");
    static const std::set<std::string> ckeys = {"voltage_rows", "pcc_circle",
                                                "unit_caps", "circle_segments"};
    for (const auto& item : c.items())
      if (!ckeys.count(item.key()))
        throw ParseError("scenario: unknown constraints key '" + item.key() + "'");
    if (c.contains("voltage_rows"))
      s.constraints.voltage_rows = as_bool(c["voltage_rows"], "voltage_rows");
    if (c.contains("pcc_circle"))
      s.constraints.pcc_circle = as_bool(c["pcc_circle"], "pcc_circle");
    if (c.contains("unit_caps"))
      s.constraints.unit_caps = as_bool(c["unit_caps"], "unit_caps");
    if (c.contains("circle_segments"))
      s.constraints.circle_segments = as_int(c["circle_segments"], "circle_segments");
  }
  if (j.contains("disturbance"))
    s.disturbance = as_number_list(j["disturbance"], "disturbance");
  if (j.contains("initial_input")) {
    if (!j["initial_input"].is_string())
      throw ParseError("scenario: 'initial_input' must be a string");
    const std::string p = j["initial_input"].get<std::string>();
    if (p == "zero")
      s.initial_input = InitialPolicy::Zero;
    else if (p == "midpoint")
      s.initial_input = InitialPolicy::Midpoint;
    else
      throw ParseError("scenario: initial_input must be 'zero' or 'midpoint'");
  }
  if (j.contains("soft_outputs"))
    s.soft_outputs = as_bool(j["soft_outputs"], "soft_outputs");
  if (j.contains("rho")) s.rho = as_number(j["rho"], "rho");
  if (j.contains("relinearize_every"))
    s.relinearize_every = as_int(j["relinearize_every"], "relinearize_every");
  if (j.contains("deterministic"))
    s.deterministic = as_bool(j["deterministic"], "deterministic");

  const auto violations = scenario_violations(s);
  if (!violations.empty()) throw ParseError("scenario: " + join(violations));
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("scenario: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string effective_scenario_json(const Scenario& s) {
  ordered_json j;
  j["grid"] = s.grid;
  j["alpha_values"] = s.alpha_values;
  if (s.g_diagonal.empty())
    j["G"] = ordered_json{{"type", "identity"}};
  else
    j["G"] = ordered_json{{"type", "diagonal"}, {"values", s.g_diagonal}};
  j["n_vertices"] = s.n_vertices;
  j["conv_tol"] = s.conv_tol;
  j["max_iter"] = s.max_iter;
  j["sensitivity_step"] = s.sensitivity_step;
  j["constraints"] = ordered_json{{"voltage_rows", s.constraints.voltage_rows},
                                  {"pcc_circle", s.constraints.pcc_circle},
                                  {"unit_caps", s.constraints.unit_caps},
                                  {"circle_segments", s.constraints.circle_segments}};
  j["disturbance"] = s.disturbance;
  j["initial_input"] = s.initial_input == InitialPolicy::Zero ? "zero" : "midpoint";
  j["soft_outputs"] = s.soft_outputs;
  j["rho"] = s.rho;
  j["relinearize_every"] = s.relinearize_every;
  j["deterministic"] = s.deterministic;
  return j.dump(2);
}

Network resolve_grid(const std::string& name_or_path) {
  if (name_or_path == "two-bus" || name_or_path == "radial-4" ||
      name_or_path == "meshed-10")
    return builtin_grid(name_or_path);
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) throw ParseError("grid: cannot open '" + name_or_path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_network(buf.str());
}

namespace {

bool is_stable(TrajectoryClass c) {
  return c == TrajectoryClass::StableConverged ||
         c == TrajectoryClass::StableConstrained;
}

std::optional<double> median_of(std::vector<double> xs) {
  if (xs.empty()) return std::nullopt;
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

SweepReport run_vertex_sweep(const Scenario& scenario) {
  const auto violations = scenario_violations(scenario);
  if (!violations.empty())
    throw std::invalid_argument("run_vertex_sweep: " + join(violations));

  SweepReport rep;
  rep.scenario = scenario;
  rep.network = resolve_grid(scenario.grid);

  Eigen::VectorXd d;
  if (!scenario.disturbance.empty())
    d = Eigen::Map<const Eigen::VectorXd>(scenario.disturbance.data(),
                                          scenario.disturbance.size());
  GridPlant grid_plant(rep.network, d);
  const PlantFn plant = [gp = grid_plant](const Eigen::VectorXd& u) {
    return gp.apply(u);
  };

  rep.u0 = grid_plant.initial_input(scenario.initial_input);
  const Measurement y0 = plant(rep.u0);
  if (!y0.converged)
    throw std::runtime_error(
        "run_vertex_sweep: power flow diverged at the initial input");
  rep.s_pcc0 = Eigen::Vector2d(y0.p_pcc(), y0.q_pcc());

  const int n_u = grid_plant.n_inputs();
  OfoConfig base;
  if (!scenario.g_diagonal.empty()) {
    if (static_cast<int>(scenario.g_diagonal.size()) != n_u)
      throw std::invalid_argument(
          "run_vertex_sweep: diagonal G must have one entry per input channel");
    base.G = Eigen::Map<const Eigen::VectorXd>(scenario.g_diagonal.data(), n_u)
                 .asDiagonal();
  }
  base.sensitivity = compute_sensitivity(plant, rep.u0, scenario.sensitivity_step);
  base.constraints = build_constraints(rep.network, scenario.constraints);
  base.max_iter = scenario.max_iter;
  base.conv_tol = scenario.conv_tol;
  base.soft_outputs = scenario.soft_outputs;
  base.rho = scenario.rho;
  base.relinearize_every = scenario.relinearize_every;
  base.sensitivity_step = scenario.sensitivity_step;

  OfoConfig for_cfg = base;
  for_cfg.alpha = *std::min_element(scenario.alpha_values.begin(),
                                    scenario.alpha_values.end());
  rep.polygon = compute_for_polygon(plant, rep.u0, for_cfg, scenario.n_vertices);
  rep.safety_tol = 0.01 * polygon_diameter(rep.polygon);

  for (double alpha : scenario.alpha_values) {
    AlphaReport ar;
    ar.alpha = alpha;
    OfoConfig cfg = base;
    cfg.alpha = alpha;

    std::vector<Trajectory> trajs;
    trajs.reserve(rep.polygon.vertices.size());
    size_t horizon = 0;
    for (size_t i = 0; i < rep.polygon.vertices.size(); ++i) {
      VertexRun run;
      run.vertex = static_cast<int>(i);
      run.theta_deg = rep.polygon.angles_deg[i];
      run.target = {rep.polygon.vertices[i].x(), rep.polygon.vertices[i].y()};
      Trajectory t = run_to_target(plant, rep.u0, cfg, run.target);
      const Measurement last{t.final_sample().y, true};
      run.final_distance = std::hypot(run.target.p_set - last.p_pcc(),
                                      run.target.q_set - last.q_pcc());
      if (is_stable(t.classification))
        ++ar.n_stable;
      else if (t.classification == TrajectoryClass::Oscillatory)
        ++ar.n_oscillatory;
      else
        ++ar.n_divergent;
      horizon = std::max(horizon, t.samples.size());
      trajs.push_back(std::move(t));
      ar.runs.push_back(std::move(run));
    }

    for (size_t k = 0; k < horizon; ++k) {
      TrajectorySet e = trajectory_set_at(trajs, static_cast<int>(k));
      auto [ok, viol] = is_safe(e, rep.polygon, rep.safety_tol);
      if (!ok) {
        ar.safe = false;
        ar.violations.insert(ar.violations.end(), viol.begin(), viol.end());
      }
      ar.coverage.push_back(coverage_fraction(e, rep.polygon));
      ar.sets.push_back(std::move(e));
    }

    std::vector<double> iters;
    for (size_t i = 0; i < trajs.size(); ++i)
      if (is_stable(trajs[i].classification) &&
          trajs[i].iterations_to_converge.has_value())
        iters.push_back(static_cast<double>(*trajs[i].iterations_to_converge));
    ar.median_iterations = median_of(std::move(iters));

    for (size_t i = 0; i < trajs.size(); ++i)
      ar.runs[i].trajectory = std::move(trajs[i]);
    rep.per_alpha.push_back(std::move(ar));
  }
  return rep;
}

GainStudy run_gain_study(const Scenario& scenario) {
  if (scenario.alpha_values.size() < 2)
    throw std::invalid_argument("run_gain_study: need at least two gains");
  GainStudy study;
  study.report = run_vertex_sweep(scenario);
  for (const AlphaReport& ar : study.report.per_alpha)
    study.rows.push_back({ar.alpha, ar.n_stable, ar.n_oscillatory, ar.n_divergent,
                          ar.median_iterations, ar.safe});
  return study;
}

std::string format_gain_table(const std::vector<GainRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "alpha" << std::right << std::setw(8)
     << "stable" << std::setw(13) << "oscillatory" << std::setw(11) << "divergent"
     << std::setw(14) << "median_iters" << std::setw(6) << "safe" << '\n';
  for (const GainRow& r : rows) {
    os << std::left << std::setw(10) << csv::num(r.alpha) << std::right
       << std::setw(8) << r.n_stable << std::setw(13) << r.n_oscillatory
       << std::setw(11) << r.n_divergent << std::setw(14)
       << (r.median_iterations ? csv::num(*r.median_iterations) : std::string("-"))
       << std::setw(6) << (r.safe ? "yes" : "no") << '\n';
  }
  return os.str();
}

std::vector<std::string> export_plot_data(const SweepReport& report,
                                          const std::string& out_dir) {
  if (report.per_alpha.empty() || report.polygon.vertices.empty())
    throw std::runtime_error("export_plot_data: empty report");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  auto open = [&](const char* name) {
    std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
    if (!os)
      throw std::runtime_error(std::string("export_plot_data: cannot write ") +
                               name + " in '" + out_dir + "'");
    return os;
  };

  {
    std::ofstream os = open("trajectories.csv");
    const int n_u = static_cast<int>(report.u0.size());
    const int n_y = report.network.n_buses() + 2;
    os << "alpha,vertex,k";
    for (int i = 0; i < n_u; ++i) os << ",u_" << i;
    for (int i = 0; i < n_y; ++i) os << ",y_" << i;
    os << ",phi,sigma_norm,n_active,classification\n";
    for (const AlphaReport& ar : report.per_alpha)
      for (const VertexRun& run : ar.runs)
        for (const TrajectorySample& s : run.trajectory.samples) {
          os << csv::num(ar.alpha) << ',' << run.vertex << ',' << s.k;
          for (int i = 0; i < n_u; ++i) os << ',' << csv::num(s.u(i));
          for (int i = 0; i < n_y; ++i) os << ',' << csv::num(s.y(i));
          os << ',' << csv::num(s.phi) << ',' << csv::num(s.sigma.norm()) << ','
             << s.active_constraints.size() << ','
             << to_string(run.trajectory.classification) << '\n';
        }
  }
  {
    std::ofstream os = open("for_polygon.csv");
    write_for_csv(os, report.polygon);
  }
  {
    std::ofstream os = open("trajectory_sets.csv");
    os << "alpha,k,member,p,q\n";
    for (const AlphaReport& ar : report.per_alpha)
      for (const TrajectorySet& e : ar.sets)
        for (size_t m = 0; m < e.points.size(); ++m)
          os << csv::num(ar.alpha) << ',' << e.k << ',' << m << ','
             << csv::num(e.points[m].x()) << ',' << csv::num(e.points[m].y())
             << '\n';
  }
  {
    std::ofstream os = open("coverage.csv");
    os << "alpha,k,fraction\n";
    for (const AlphaReport& ar : report.per_alpha)
      for (size_t k = 0; k < ar.coverage.size(); ++k)
        os << csv::num(ar.alpha) << ',' << k << ',' << csv::num(ar.coverage[k])
           << '\n';
  }
  {
    std::ofstream os = open("summary.json");
    ordered_json j;
    j["scenario"] = ordered_json::parse(effective_scenario_json(report.scenario));
    j["grid"] = ordered_json{{"buses", report.network.n_buses()},
                             {"units", report.network.n_units()}};
    j["u0"] = std::vector<double>(report.u0.data(),
                                  report.u0.data() + report.u0.size());
    j["s_pcc0"] = std::vector<double>{report.s_pcc0.x(), report.s_pcc0.y()};
    ordered_json poly;
    poly["n_vertices"] = report.polygon.vertices.size();
    poly["resolution_deg"] = report.polygon.resolution_deg;
    poly["diameter"] = polygon_diameter(report.polygon);
    j["polygon"] = std::move(poly);
    j["safety_tol"] = report.safety_tol;
    ordered_json alphas = ordered_json::array();
    for (const AlphaReport& ar : report.per_alpha) {
      ordered_json a;
      a["alpha"] = ar.alpha;
      a["n_stable"] = ar.n_stable;
      a["n_oscillatory"] = ar.n_oscillatory;
      a["n_divergent"] = ar.n_divergent;
      if (ar.median_iterations)
        a["median_iterations"] = *ar.median_iterations;
      else
        a["median_iterations"] = nullptr;
      a["safe"] = ar.safe;
      a["n_violations"] = ar.violations.size();
      a["final_coverage"] = ar.coverage.empty() ? 0.0 : ar.coverage.back();
      alphas.push_back(std::move(a));
    }
    j["alphas"] = std::move(alphas);
    j["files"] = std::vector<std::string>{"trajectories.csv", "for_polygon.csv",
                                          "trajectory_sets.csv", "coverage.csv",
                                          "summary.json"};
    os << j.dump(2) << '\n';
  }

  return {"trajectories.csv", "for_polygon.csv", "trajectory_sets.csv",
          "coverage.csv", "summary.json"};
}

}  // namespace ofosim

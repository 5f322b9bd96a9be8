// Closed-loop OFO iteration: measure, evaluate the gradient, solve the QP,
// integrate u(k+1) = u(k) + alpha * sigma; classifies the trajectory.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ofosim/plant.hpp"
#include "ofosim/qp.hpp"
#include "ofosim/sensitivity.hpp"

namespace ofosim {

struct DispatchTarget {
  double p_set = 0.0;
  double q_set = 0.0;
};

// Support-point objective used for FOR construction: minimize
// -(cos(theta) p_pcc + sin(theta) q_pcc).
struct DirectionalObjective {
  double theta_rad = 0.0;
};

using Objective = std::variant<DispatchTarget, DirectionalObjective>;

struct OfoConfig {
  double alpha = 0.008;
  Eigen::MatrixXd G;  // empty -> identity
  SensitivityModel sensitivity;
  ConstraintSet constraints;
  int max_iter = 2000;
  double conv_tol = 1e-4;  // on ||sigma|| and on set-point distance
  bool soft_outputs = false;
  double rho = 1e4;
  int relinearize_every = 0;  // 0: keep the u0 linearization for the whole run
  double sensitivity_step = 1e-5;
};

enum class TrajectoryClass { StableConverged, StableConstrained, Oscillatory, Divergent };

std::string to_string(TrajectoryClass c);

struct TrajectorySample {
  int k = 0;
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  double phi = 0.0;
  Eigen::VectorXd sigma;
  std::vector<int> active_constraints;
  bool pf_converged = true;
  QpStatus qp_status = QpStatus::Optimal;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  TrajectoryClass classification = TrajectoryClass::Divergent;
  std::optional<int> iterations_to_converge;

  const TrajectorySample& final_sample() const { return samples.back(); }
};

// Stacked gradient [dPhi/du; dPhi/dy], length n_u + n_y: zero except the
// (p_pcc, q_pcc) entries, which carry -2 (s_set - s_pcc).
Eigen::VectorXd grad_phi(const Measurement& y, const DispatchTarget& target, int n_u);
Eigen::VectorXd grad_directional(const Measurement& y, double theta_rad, int n_u);

double phi_value(const Measurement& y, const Objective& objective);

struct StepResult {
  Eigen::VectorXd u_next;
  Measurement y_next;
  Eigen::VectorXd sigma;
  QpStatus qp_status = QpStatus::Optimal;
  std::vector<int> active_constraints;
};

StepResult ofo_step(const Eigen::VectorXd& u, const Measurement& y,
                    const OfoConfig& config, const Objective& objective,
                    const PlantFn& plant);

struct ClassifyTolerances {
  double conv_tol = 1e-4;
  double eps_cycle = 1e-4;        // state-recurrence distance
  double phi_range_factor = 10.0; // tail phi range vs conv_tol
  double divergence_factor = 10.0;
};

// divergent: non-converged/non-finite sample or ||y|| beyond 10x grid scale;
// oscillatory: tail phi range above threshold AND a non-adjacent state revisit;
// stable otherwise. Requires >= 2 samples.
TrajectoryClass classify_trajectory(const std::vector<TrajectorySample>& samples,
                                    const ClassifyTolerances& tol,
                                    const std::optional<DispatchTarget>& target = {});

Trajectory run_ofo(const PlantFn& plant, const Eigen::VectorXd& u0,
                   const OfoConfig& config, const Objective& objective);

inline Trajectory run_to_target(const PlantFn& plant, const Eigen::VectorXd& u0,
                                const OfoConfig& config, const DispatchTarget& target) {
  return run_ofo(plant, u0, config, Objective(target));
}
inline Trajectory run_directional(const PlantFn& plant, const Eigen::VectorXd& u0,
                                  const OfoConfig& config, double theta_rad) {
  return run_ofo(plant, u0, config, Objective(DirectionalObjective{theta_rad}));
}

// Columns: k, u..., y..., phi, sigma_norm, n_active, classification.
void write_trajectory_csv(std::ostream& os, const Trajectory& t);

}  // namespace ofosim

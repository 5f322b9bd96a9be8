#include "ofosim/controller.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "ofosim/csv.hpp"

namespace ofosim {

std::string to_string(TrajectoryClass c) {
  switch (c) {
    case TrajectoryClass::StableConverged: return "stable-converged";
    case TrajectoryClass::StableConstrained: return "stable-constrained";
    case TrajectoryClass::Oscillatory: return "oscillatory";
    case TrajectoryClass::Divergent: return "divergent";
  }
  return "divergent";
}

Eigen::VectorXd grad_phi(const Measurement& y, const DispatchTarget& target, int n_u) {
  const int n_y = static_cast<int>(y.y.size());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n_u + n_y);
  g(n_u + n_y - 2) = -2.0 * (target.p_set - y.p_pcc());
  g(n_u + n_y - 1) = -2.0 * (target.q_set - y.q_pcc());
  return g;
}

Eigen::VectorXd grad_directional(const Measurement& y, double theta_rad, int n_u) {
  const int n_y = static_cast<int>(y.y.size());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n_u + n_y);
  g(n_u + n_y - 2) = -std::cos(theta_rad);
  g(n_u + n_y - 1) = -std::sin(theta_rad);
  return g;
}

double phi_value(const Measurement& y, const Objective& objective) {
  if (const auto* t = std::get_if<DispatchTarget>(&objective)) {
    const double dp = t->p_set - y.p_pcc();
    const double dq = t->q_set - y.q_pcc();
    return dp * dp + dq * dq;
  }
  const auto& d = std::get<DirectionalObjective>(objective);
  return -(std::cos(d.theta_rad) * y.p_pcc() + std::sin(d.theta_rad) * y.q_pcc());
}

namespace {

Eigen::VectorXd stacked_gradient(const Measurement& y, const Objective& objective,
                                 int n_u) {
  if (const auto* t = std::get_if<DispatchTarget>(&objective))
    return grad_phi(y, *t, n_u);
  return grad_directional(y, std::get<DirectionalObjective>(objective).theta_rad, n_u);
}

QpSolution solve_step_qp(const Eigen::VectorXd& u, const Measurement& y,
                         const OfoConfig& config, const SensitivityModel& sens,
                         const Objective& objective) {
  const int n_u = static_cast<int>(u.size());
  const Eigen::VectorXd grad = stacked_gradient(y, objective, n_u);
  const Eigen::VectorXd hgrad = assemble_H(sens) * grad;

  QpProblem qp;
  qp.G = config.G.size() > 0 ? config.G
                             : Eigen::MatrixXd(Eigen::MatrixXd::Identity(n_u, n_u));
  Eigen::LLT<Eigen::MatrixXd> llt(qp.G);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("ofo: G must be positive-definite");
  qp.grad_term = llt.solve(hgrad);
  qp.A = config.constraints.A;
  qp.b = config.constraints.b;
  qp.C = config.constraints.C;
  qp.d_out = config.constraints.d_out;
  qp.alpha = config.alpha;
  qp.u = u;
  qp.y = y.y;
  qp.nabla_h = sens.nabla_h;
  qp.soft_outputs = config.soft_outputs;
  qp.rho = config.rho;
  return solve_qp(qp);
}

}  // namespace

StepResult ofo_step(const Eigen::VectorXd& u, const Measurement& y,
                    const OfoConfig& config, const Objective& objective,
                    const PlantFn& plant) {
  StepResult res;
  QpSolution qsol = solve_step_qp(u, y, config, config.sensitivity, objective);
  res.qp_status = qsol.status;
  res.active_constraints = qsol.active_set;
  if (qsol.status != QpStatus::Optimal) {
    res.sigma = Eigen::VectorXd::Zero(u.size());
    res.u_next = u;
    res.y_next = y;
    return res;
  }
  res.sigma = qsol.sigma;
  res.u_next = u + config.alpha * qsol.sigma;
  res.y_next = plant(res.u_next);
  return res;
}

TrajectoryClass classify_trajectory(const std::vector<TrajectorySample>& samples,
                                    const ClassifyTolerances& tol,
                                    const std::optional<DispatchTarget>& target) {
  if (samples.size() < 2)
    throw std::invalid_argument("classify_trajectory: need at least 2 samples");

  const double scale = std::max(1.0, samples.front().y.lpNorm<Eigen::Infinity>());
  for (const TrajectorySample& s : samples) {
    if (!s.pf_converged || s.qp_status != QpStatus::Optimal) return TrajectoryClass::Divergent;
    if (!s.y.allFinite() || !s.u.allFinite()) return TrajectoryClass::Divergent;
    if (s.y.lpNorm<Eigen::Infinity>() > tol.divergence_factor * scale)
      return TrajectoryClass::Divergent;
  }

  // Limit-cycle detection over the final quarter: macroscopic phi range plus
  // a non-adjacent state revisit.
  const size_t n = samples.size();
  const size_t tail = std::max<size_t>(2, (n + 3) / 4);
  const size_t start = n - tail;
  double phi_lo = std::numeric_limits<double>::infinity();
  double phi_hi = -std::numeric_limits<double>::infinity();
  for (size_t i = start; i < n; ++i) {
    phi_lo = std::min(phi_lo, samples[i].phi);
    phi_hi = std::max(phi_hi, samples[i].phi);
  }
  if (phi_hi - phi_lo > tol.phi_range_factor * tol.conv_tol) {
    for (size_t i = start; i < n; ++i)
      for (size_t j = i + 2; j < n; ++j)
        if ((samples[j].u - samples[i].u).norm() <= tol.eps_cycle)
          return TrajectoryClass::Oscillatory;
  }

  if (target) {
    const Measurement last{samples.back().y, true};
    const double dp = target->p_set - last.p_pcc();
    const double dq = target->q_set - last.q_pcc();
    if (std::sqrt(dp * dp + dq * dq) <= tol.conv_tol)
      return TrajectoryClass::StableConverged;
  }
  return TrajectoryClass::StableConstrained;
}

Trajectory run_ofo(const PlantFn& plant, const Eigen::VectorXd& u0,
                   const OfoConfig& config, const Objective& objective) {
  if (config.alpha <= 0.0) throw std::invalid_argument("run_ofo: alpha must be positive");
  if (config.max_iter < 1) throw std::invalid_argument("run_ofo: max_iter must be >= 1");
  const int n_u = static_cast<int>(u0.size());

  ClassifyTolerances ctol;
  ctol.conv_tol = config.conv_tol;
  const std::optional<DispatchTarget> target =
      std::holds_alternative<DispatchTarget>(objective)
          ? std::optional<DispatchTarget>(std::get<DispatchTarget>(objective))
          : std::nullopt;

  Trajectory traj;
  SensitivityModel sens = config.sensitivity;
  Eigen::VectorXd u = u0;
  Measurement y = plant(u);

  for (int k = 0;; ++k) {
    TrajectorySample s;
    s.k = k;
    s.u = u;
    s.y = y.y;
    s.pf_converged = y.converged;

    if (!y.converged) {
      s.phi = std::numeric_limits<double>::quiet_NaN();
      s.sigma = Eigen::VectorXd::Zero(n_u);
      traj.samples.push_back(std::move(s));
      traj.classification = TrajectoryClass::Divergent;
      break;
    }

    if (config.relinearize_every > 0 && k > 0 && k % config.relinearize_every == 0) {
      try {
        sens = compute_sensitivity(plant, u, config.sensitivity_step);
      } catch (const std::runtime_error&) {
        s.phi = std::numeric_limits<double>::quiet_NaN();
        s.sigma = Eigen::VectorXd::Zero(n_u);
        s.pf_converged = false;
        traj.samples.push_back(std::move(s));
        traj.classification = TrajectoryClass::Divergent;
        break;
      }
    }

    s.phi = phi_value(y, objective);
    QpSolution qsol = solve_step_qp(u, y, config, sens, objective);
    s.qp_status = qsol.status;
    s.active_constraints = qsol.active_set;
    s.sigma = qsol.status == QpStatus::Optimal ? qsol.sigma
                                               : Eigen::VectorXd::Zero(n_u);
    traj.samples.push_back(s);

    if (qsol.status != QpStatus::Optimal) {
      traj.classification = TrajectoryClass::Divergent;
      break;
    }
    if (s.sigma.norm() <= config.conv_tol) {
      traj.iterations_to_converge = k;
      traj.classification = TrajectoryClass::StableConstrained;
      if (target) {
        const double dp = target->p_set - y.p_pcc();
        const double dq = target->q_set - y.q_pcc();
        if (std::sqrt(dp * dp + dq * dq) <= config.conv_tol)
          traj.classification = TrajectoryClass::StableConverged;
      }
      break;
    }
    if (k == config.max_iter) {
      traj.classification = classify_trajectory(traj.samples, ctol, target);
      break;
    }
    u = u + config.alpha * s.sigma;
    y = plant(u);
  }
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  const int n_u = static_cast<int>(t.samples.front().u.size());
  const int n_y = static_cast<int>(t.samples.front().y.size());
  os << "k";
  for (int i = 0; i < n_u; ++i) os << ",u_" << i;
  for (int i = 0; i < n_y; ++i) os << ",y_" << i;
  os << ",phi,sigma_norm,n_active,classification\n";
  for (const TrajectorySample& s : t.samples) {
    os << s.k;
    for (int i = 0; i < n_u; ++i) os << ',' << csv::num(s.u(i));
    for (int i = 0; i < n_y; ++i) os << ',' << csv::num(s.y(i));
    os << ',' << csv::num(s.phi) << ',' << csv::num(s.sigma.norm()) << ','
       << s.active_constraints.size() << ',' << to_string(t.classification) << '\n';
  }
}

}  // namespace ofosim

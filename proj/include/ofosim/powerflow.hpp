// Newton-Raphson AC power flow in polar coordinates, dense linear algebra.
#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "ofosim/grid.hpp"

namespace ofosim {

struct AdmittanceMatrix {
  Eigen::MatrixXcd y;  // n x n nodal admittance, pi-model
};

enum class PfStatus { Converged, MaxIterations, SingularJacobian };

// Complex power entering the branch at each terminal (p.u.).
struct BranchFlow {
  Complex from;
  Complex to;
};

struct PowerFlowSolution {
  Eigen::VectorXd v_mag;   // p.u.
  Eigen::VectorXd v_ang;   // rad
  std::vector<BranchFlow> branch_flows;
  Complex s_pcc;           // export from the flexible system is positive
  int iterations = 0;
  bool converged = false;
  PfStatus status = PfStatus::MaxIterations;
};

struct PowerFlowOptions {
  double tol = 1e-8;   // max |mismatch|, p.u.
  int max_iter = 30;
};

AdmittanceMatrix build_admittance(const Network& net);

// injections: per-bus complex power (generation positive), slack entry ignored.
// All non-slack buses are PQ; slack-pcc holds 1.0 at angle 0; flat start.
PowerFlowSolution solve_powerflow(const Network& net,
                                  const Eigen::VectorXcd& injections,
                                  const PowerFlowOptions& opt = {});

// (p_pcc, q_pcc); throws std::logic_error on a non-converged solution.
std::pair<double, double> pcc_flow(const PowerFlowSolution& sol);

// Power mismatch (P then Q at non-slack buses) for a polar state; exposed so
// tests can difference it against the Newton Jacobian.
Eigen::VectorXd power_mismatch(const Network& net, const AdmittanceMatrix& ybus,
                               const Eigen::VectorXcd& injections,
                               const Eigen::VectorXd& v_mag,
                               const Eigen::VectorXd& v_ang);

// The Jacobian of the computed injections used inside the Newton loop,
// [dP/dth dP/dV; dQ/dth dQ/dV] over non-slack buses (angles first).
Eigen::MatrixXd newton_jacobian(const Network& net, const AdmittanceMatrix& ybus,
                                const Eigen::VectorXd& v_mag,
                                const Eigen::VectorXd& v_ang);

}  // namespace ofosim

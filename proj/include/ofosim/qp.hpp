// Internal QP of the OFO iteration: G-weighted step direction subject to
// linearized input and output constraints, solved by a dual active-set method.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ofosim/grid.hpp"

namespace ofosim {

struct ConstraintPolicy {
  bool voltage_rows = true;
  bool pcc_circle = true;
  bool unit_caps = true;
  int circle_segments = 16;  // inscribed tangent polygon for quadratic ratings
};

// A w-rows act on inputs, C rows on measurements y = [v.., p_pcc, q_pcc].
struct ConstraintSet {
  Eigen::MatrixXd A;      // m_u x n_u
  Eigen::VectorXd b;      // m_u
  Eigen::MatrixXd C;      // m_y x n_y
  Eigen::VectorXd d_out;  // m_y
};

ConstraintSet build_constraints(const Network& net,
                                const ConstraintPolicy& policy = {});

enum class QpStatus { Optimal, Infeasible, MaxIter };

struct QpSolution {
  Eigen::VectorXd sigma;
  double kkt_residual = 0.0;
  std::vector<int> active_set;  // stacked row indices: A rows, then C rows
  QpStatus status = QpStatus::MaxIter;
};

// minimize ||w + grad_term||^2_G
// s.t.     A (u + alpha w) <= b
//          C (y + alpha nabla_h w) <= d_out
// grad_term carries G^{-1} H^T grad_phi, precomputed by the caller.
struct QpProblem {
  Eigen::MatrixXd G;          // n_u x n_u, symmetric positive-definite
  Eigen::VectorXd grad_term;  // n_u
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd C;
  Eigen::VectorXd d_out;
  double alpha = 1.0;
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  Eigen::MatrixXd nabla_h;    // n_y x n_u
  bool soft_outputs = false;  // replace hard C-rows by quadratic slack penalty
  double rho = 1e4;
};

QpSolution solve_qp(const QpProblem& problem);

// Low-level solver: minimize 1/2 x^T P x + q^T x  s.t.  M x <= v.
// Dual active set (Goldfarb-Idnani); ties among equally violated constraints
// break toward the lowest row index. x0, when given, must be the
// unconstrained minimizer -P^{-1} q and is used verbatim.
QpSolution solve_inequality_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                               const Eigen::MatrixXd& M, const Eigen::VectorXd& v,
                               const Eigen::VectorXd* x0 = nullptr,
                               int max_iter = 0);

}  // namespace ofosim

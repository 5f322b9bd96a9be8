#include "ofosim/powerflow.hpp"

#include <cmath>
#include <stdexcept>

namespace ofosim {

AdmittanceMatrix build_admittance(const Network& net) {
  const int n = net.n_buses();
  AdmittanceMatrix ybus;
  ybus.y = Eigen::MatrixXcd::Zero(n, n);
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    const Complex y_series = 1.0 / Complex(br.r, br.x);
    const Complex y_shunt(0.0, br.b_shunt / 2.0);
    ybus.y(f, f) += y_series + y_shunt;
    ybus.y(t, t) += y_series + y_shunt;
    ybus.y(f, t) -= y_series;
    ybus.y(t, f) -= y_series;
  }
  return ybus;
}

namespace {

// P_i, Q_i injected at every bus for the given polar state.
void calc_injections(const Eigen::MatrixXcd& y, const Eigen::VectorXd& vm,
                     const Eigen::VectorXd& va, Eigen::VectorXd& p,
                     Eigen::VectorXd& q) {
  const int n = static_cast<int>(vm.size());
  p.setZero(n);
  q.setZero(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double g = y(i, j).real();
      const double b = y(i, j).imag();
      if (g == 0.0 && b == 0.0) continue;
      const double th = va(i) - va(j);
      p(i) += vm(i) * vm(j) * (g * std::cos(th) + b * std::sin(th));
      q(i) += vm(i) * vm(j) * (g * std::sin(th) - b * std::cos(th));
    }
  }
}

// Polar Newton Jacobian of the computed injections,
// [dP/dth dP/dV; dQ/dth dQ/dV], over the non-slack buses listed in pq.
Eigen::MatrixXd jacobian_impl(const Eigen::MatrixXcd& y, const std::vector<int>& pq,
                              const Eigen::VectorXd& vm, const Eigen::VectorXd& va,
                              const Eigen::VectorXd& p_calc,
                              const Eigen::VectorXd& q_calc) {
  const int m = static_cast<int>(pq.size());
  Eigen::MatrixXd jac(2 * m, 2 * m);
  for (int a = 0; a < m; ++a) {
    const int i = pq[a];
    const double vi = vm(i);
    for (int c = 0; c < m; ++c) {
      const int j = pq[c];
      const double g = y(i, j).real();
      const double b = y(i, j).imag();
      if (i == j) {
        jac(a, c) = -q_calc(i) - b * vi * vi;
        jac(a, m + c) = p_calc(i) / vi + g * vi;
        jac(m + a, c) = p_calc(i) - g * vi * vi;
        jac(m + a, m + c) = q_calc(i) / vi - b * vi;
      } else {
        const double vj = vm(j);
        const double th = va(i) - va(j);
        const double cs = std::cos(th);
        const double sn = std::sin(th);
        jac(a, c) = vi * vj * (g * sn - b * cs);
        jac(a, m + c) = vi * (g * cs + b * sn);
        jac(m + a, c) = -vi * vj * (g * cs + b * sn);
        jac(m + a, m + c) = vi * (g * sn - b * cs);
      }
    }
  }
  return jac;
}

}  // namespace

Eigen::MatrixXd newton_jacobian(const Network& net, const AdmittanceMatrix& ybus,
                                const Eigen::VectorXd& v_mag,
                                const Eigen::VectorXd& v_ang) {
  const int slack = net.slack_index();
  std::vector<int> pq;
  for (int i = 0; i < net.n_buses(); ++i)
    if (i != slack) pq.push_back(i);
  Eigen::VectorXd p_calc, q_calc;
  calc_injections(ybus.y, v_mag, v_ang, p_calc, q_calc);
  return jacobian_impl(ybus.y, pq, v_mag, v_ang, p_calc, q_calc);
}

Eigen::VectorXd power_mismatch(const Network& net, const AdmittanceMatrix& ybus,
                               const Eigen::VectorXcd& injections,
                               const Eigen::VectorXd& v_mag,
                               const Eigen::VectorXd& v_ang) {
  const int n = net.n_buses();
  const int slack = net.slack_index();
  Eigen::VectorXd p_calc, q_calc;
  calc_injections(ybus.y, v_mag, v_ang, p_calc, q_calc);
  Eigen::VectorXd f(2 * (n - 1));
  int row = 0;
  for (int i = 0; i < n; ++i) {
    if (i == slack) continue;
    f(row) = injections(i).real() - p_calc(i);
    f(row + n - 1) = injections(i).imag() - q_calc(i);
    ++row;
  }
  return f;
}

PowerFlowSolution solve_powerflow(const Network& net,
                                  const Eigen::VectorXcd& injections,
                                  const PowerFlowOptions& opt) {
  const int n = net.n_buses();
  const int slack = net.slack_index();
  if (slack < 0) throw std::logic_error("solve_powerflow: no slack-pcc bus");
  if (injections.size() != n)
    throw std::invalid_argument("solve_powerflow: injection vector size mismatch");

  const AdmittanceMatrix ybus = build_admittance(net);
  const Eigen::MatrixXcd& y = ybus.y;

  PowerFlowSolution sol;
  sol.v_mag = Eigen::VectorXd::Ones(n);   // flat start
  sol.v_ang = Eigen::VectorXd::Zero(n);
  sol.status = PfStatus::MaxIterations;

  // Non-slack bus order for the Jacobian rows/columns.
  std::vector<int> pq;
  pq.reserve(n - 1);
  for (int i = 0; i < n; ++i)
    if (i != slack) pq.push_back(i);
  const int m = static_cast<int>(pq.size());

  Eigen::VectorXd p_calc, q_calc;
  for (int it = 0; it <= opt.max_iter; ++it) {
    calc_injections(y, sol.v_mag, sol.v_ang, p_calc, q_calc);
    Eigen::VectorXd mis(2 * m);
    for (int a = 0; a < m; ++a) {
      mis(a) = injections(pq[a]).real() - p_calc(pq[a]);
      mis(m + a) = injections(pq[a]).imag() - q_calc(pq[a]);
    }
    if (mis.lpNorm<Eigen::Infinity>() <= opt.tol) {
      sol.iterations = it;
      sol.converged = true;
      sol.status = PfStatus::Converged;
      break;
    }
    if (it == opt.max_iter) {
      sol.iterations = it;
      break;
    }

    const Eigen::MatrixXd jac =
        jacobian_impl(y, pq, sol.v_mag, sol.v_ang, p_calc, q_calc);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      sol.iterations = it;
      sol.status = PfStatus::SingularJacobian;
      break;
    }
    const Eigen::VectorXd dx = lu.solve(mis);
    for (int a = 0; a < m; ++a) {
      sol.v_ang(pq[a]) += dx(a);
      sol.v_mag(pq[a]) += dx(m + a);
    }
  }

  // Branch flows from the final state, whatever the status.
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i)
    v(i) = std::polar(sol.v_mag(i), sol.v_ang(i));
  sol.branch_flows.reserve(net.branches.size());
  for (const Branch& br : net.branches) {
    const int f = net.bus_index(br.from_bus);
    const int t = net.bus_index(br.to_bus);
    const Complex y_series = 1.0 / Complex(br.r, br.x);
    const Complex y_shunt(0.0, br.b_shunt / 2.0);
    BranchFlow bf;
    bf.from = v(f) * std::conj(y_series * (v(f) - v(t)) + y_shunt * v(f));
    bf.to = v(t) * std::conj(y_series * (v(t) - v(f)) + y_shunt * v(t));
    sol.branch_flows.push_back(bf);
  }

  // s_pcc: power received by the slack-pcc bus over the PCC branches,
  // i.e. export from the flexible system toward transmission is positive.
  sol.s_pcc = Complex(0.0, 0.0);
  for (int bi : net.pcc_branch_indices()) {
    const Branch& br = net.branches[bi];
    if (net.bus_index(br.from_bus) == slack)
      sol.s_pcc -= sol.branch_flows[bi].from;
    else
      sol.s_pcc -= sol.branch_flows[bi].to;
  }
  return sol;
}

std::pair<double, double> pcc_flow(const PowerFlowSolution& sol) {
  if (!sol.converged)
    throw std::logic_error("pcc_flow: power flow did not converge");
  return {sol.s_pcc.real(), sol.s_pcc.imag()};
}

}  // namespace ofosim

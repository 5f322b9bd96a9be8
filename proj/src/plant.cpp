#include "ofosim/plant.hpp"

#include <stdexcept>

namespace ofosim {

GridPlant::GridPlant(Network net, Eigen::VectorXd disturbance)
    : net_(std::move(net)), d_(std::move(disturbance)) {
  const int n_y = net_.n_buses() + 2;
  if (d_.size() == 0) d_ = Eigen::VectorXd::Zero(n_y);
  if (d_.size() != n_y)
    throw std::invalid_argument("GridPlant: disturbance length must be n_buses + 2");
  unit_bus_.reserve(net_.units.size());
  for (const ControllableUnit& u : net_.units)
    unit_bus_.push_back(net_.bus_index(u.bus));
  base_load_ = Eigen::VectorXcd::Zero(net_.n_buses());
  for (const FixedLoad& l : net_.loads)
    base_load_(net_.bus_index(l.bus)) += Complex(l.p, l.q);
}

Eigen::VectorXcd GridPlant::injections_for(const Eigen::VectorXd& u) const {
  if (u.size() != n_inputs())
    throw std::invalid_argument("GridPlant: input length must be 2 * n_units");
  Eigen::VectorXcd inj = base_load_;
  const int m = net_.n_units();
  for (int j = 0; j < m; ++j)
    inj(unit_bus_[j]) -= Complex(u(j), u(m + j));  // load convention
  return inj;
}

Measurement GridPlant::apply(const Eigen::VectorXd& u) const {
  const PowerFlowSolution sol = solve_powerflow(net_, injections_for(u));
  Measurement meas;
  meas.converged = sol.converged;
  meas.y.resize(n_outputs());
  meas.y.head(net_.n_buses()) = sol.v_mag;
  meas.y(net_.n_buses()) = sol.s_pcc.real();
  meas.y(net_.n_buses() + 1) = sol.s_pcc.imag();
  meas.y += d_;
  return meas;
}

Eigen::VectorXd GridPlant::initial_input(InitialPolicy policy) const {
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(n_inputs());
  if (policy == InitialPolicy::Midpoint) {
    const int m = net_.n_units();
    for (int j = 0; j < m; ++j) {
      u0(j) = 0.5 * (net_.units[j].p_min + net_.units[j].p_max);
      u0(m + j) = 0.5 * (net_.units[j].q_min + net_.units[j].q_max);
    }
  }
  return u0;
}

Measurement apply_input(const Network& net, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& d) {
  return GridPlant(net, d).apply(u);
}

std::pair<Eigen::VectorXd, Measurement> initial_state(const Network& net,
                                                      InitialPolicy policy,
                                                      const Eigen::VectorXd& d) {
  GridPlant plant(net, d);
  Eigen::VectorXd u0 = plant.initial_input(policy);
  Measurement y0 = plant.apply(u0);
  if (!y0.converged)
    throw std::runtime_error("initial_state: power flow diverged at u0");
  return {std::move(u0), std::move(y0)};
}

}  // namespace ofosim

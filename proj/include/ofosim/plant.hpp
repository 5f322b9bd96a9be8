// Physical plant layer: maps a control input u to a measurement y = h(u) + d.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "ofosim/grid.hpp"
#include "ofosim/powerflow.hpp"

namespace ofosim {

// y = [v_1..v_n, p_pcc, q_pcc]; the PCC pair is always the trailing two
// entries, so generic code can address it from the vector length alone.
struct Measurement {
  Eigen::VectorXd y;
  bool converged = true;

  double p_pcc() const { return y(y.size() - 2); }
  double q_pcc() const { return y(y.size() - 1); }
};

using PlantFn = std::function<Measurement(const Eigen::VectorXd&)>;

enum class InitialPolicy { Zero, Midpoint };

// Wraps the power-flow solver as the steady-state plant of a Network.
// Unit setpoints u are stacked [p_1..p_m, q_1..q_m] in the load convention
// (positive = consumption); the injection applied at a unit's bus is -u.
// u is never clipped: out-of-range inputs are still evaluated so that
// unstable tunings stay observable.
class GridPlant {
 public:
  explicit GridPlant(Network net, Eigen::VectorXd disturbance = {});

  int n_inputs() const { return 2 * net_.n_units(); }
  int n_outputs() const { return net_.n_buses() + 2; }

  Measurement apply(const Eigen::VectorXd& u) const;
  Eigen::VectorXd initial_input(InitialPolicy policy = InitialPolicy::Zero) const;
  Eigen::VectorXcd injections_for(const Eigen::VectorXd& u) const;

  const Network& network() const { return net_; }
  const Eigen::VectorXd& disturbance() const { return d_; }

 private:
  Network net_;
  Eigen::VectorXd d_;            // additive on y, zero when not provided
  std::vector<int> unit_bus_;    // unit -> bus index
  Eigen::VectorXcd base_load_;   // fixed injections per bus
};

// Free-function conveniences over a throwaway GridPlant.
Measurement apply_input(const Network& net, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& d = {});

// (u0, y0); throws std::runtime_error if the power flow diverges at u0.
std::pair<Eigen::VectorXd, Measurement> initial_state(
    const Network& net, InitialPolicy policy = InitialPolicy::Zero,
    const Eigen::VectorXd& d = {});

}  // namespace ofosim

#include <doctest.h>

#include <cmath>

#include "ofosim/plant.hpp"
#include "ofosim/powerflow.hpp"
#include "ofosim/sensitivity.hpp"

using namespace ofosim;

TEST_CASE("two-bus at rest measures flat voltages and zero pcc flow") {
  const Network net = builtin_grid("two-bus");
  const GridPlant plant(net);
  const Measurement y = plant.apply(Eigen::VectorXd::Zero(2));
  REQUIRE(y.converged);
  REQUIRE(y.y.size() == 4);
  CHECK(y.y(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y.y(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y.p_pcc() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(y.q_pcc() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("disturbance shifts the measurement additively") {
  const Network net = builtin_grid("two-bus");
  Eigen::VectorXd d = Eigen::VectorXd::Zero(4);
  d(2) = 0.1;
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(2);

  const Measurement base = apply_input(net, u);
  const Measurement shifted = apply_input(net, u, d);
  CHECK(shifted.p_pcc() == doctest::Approx(base.p_pcc() + 0.1).epsilon(1e-15));

  SUBCASE("additivity holds on every channel") {
    Eigen::VectorXd d2(4);
    d2 << 0.01, -0.02, 0.05, -0.03;
    const Measurement m2 = apply_input(net, u, d2);
    CHECK((m2.y - base.y - d2).lpNorm<Eigen::Infinity>() < 1e-15);
  }
}

TEST_CASE("plant agrees with a direct power-flow call") {
  const Network net = builtin_grid("meshed-10");
  const GridPlant plant(net);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(plant.n_inputs());
  u(0) = net.units[0].p_min;  // full export from the first unit

  const Measurement meas = plant.apply(u);
  REQUIRE(meas.converged);
  const PowerFlowSolution sol = solve_powerflow(net, plant.injections_for(u));
  REQUIRE(sol.converged);
  for (int i = 0; i < net.n_buses(); ++i)
    CHECK(meas.y(i) == sol.v_mag(i));
  CHECK(meas.p_pcc() == sol.s_pcc.real());
  CHECK(meas.q_pcc() == sol.s_pcc.imag());
}

TEST_CASE("unit setpoints follow the load convention") {
  const Network net = builtin_grid("two-bus");
  const GridPlant plant(net);
  Eigen::VectorXd u(2);
  u << -0.3, 0.0;  // negative consumption = generation = export
  const Measurement m = plant.apply(u);
  REQUIRE(m.converged);
  CHECK(m.p_pcc() > 0.25);  // exports roughly 0.3 minus losses
}

TEST_CASE("initial state policies") {
  SUBCASE("two-bus zero policy") {
    const auto [u0, y0] = initial_state(builtin_grid("two-bus"));
    REQUIRE(u0.size() == 2);
    CHECK((u0.array() == 0.0).all());
    CHECK(y0.converged);
  }
  SUBCASE("meshed-10 midpoint policy") {
    const Network net = builtin_grid("meshed-10");
    const auto [u0, y0] = initial_state(net, InitialPolicy::Midpoint);
    const int m = net.n_units();
    for (int j = 0; j < m; ++j) {
      CHECK(u0(j) ==
            doctest::Approx(0.5 * (net.units[j].p_min + net.units[j].p_max)));
      CHECK(u0(m + j) ==
            doctest::Approx(0.5 * (net.units[j].q_min + net.units[j].q_max)));
    }
    CHECK(y0.converged);
  }
  SUBCASE("a collapsing initial power flow throws") {
    Network net = builtin_grid("two-bus");
    net.loads.push_back({"b2", -8.0, 0.0});  // far past the transfer limit
    CHECK_THROWS_AS(initial_state(net), std::runtime_error);
  }
}

TEST_CASE("the plant map is deterministic") {
  const Network net = builtin_grid("meshed-10");
  Eigen::VectorXd u(10);
  u << -0.2, -0.1, -0.15, -0.25, -0.05, 0.1, -0.1, 0.05, -0.02, 0.08;
  const Measurement a = apply_input(net, u);
  const Measurement b = apply_input(net, u);
  REQUIRE(a.converged);
  CHECK((a.y.array() == b.y.array()).all());
}

TEST_CASE("local continuity against the sensitivity scale") {
  const Network net = builtin_grid("meshed-10");
  const GridPlant plant(net);
  const Eigen::VectorXd u0 = plant.initial_input(InitialPolicy::Midpoint);
  const SensitivityModel sens = compute_sensitivity(
      [&](const Eigen::VectorXd& u) { return plant.apply(u); }, u0);
  const double lipschitz = sens.nabla_h.norm();

  const Measurement y0 = plant.apply(u0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd du(u0.size());
    for (int i = 0; i < du.size(); ++i)
      du(i) = 1e-4 * std::sin(3.0 * trial + 0.7 * i);
    du *= 1e-4 / du.norm();
    const Measurement y1 = plant.apply(u0 + du);
    REQUIRE(y1.converged);
    CHECK((y1.y - y0.y).norm() <= 10.0 * lipschitz * du.norm());
  }
}

TEST_CASE("input length is checked") {
  const GridPlant plant(builtin_grid("two-bus"));
  CHECK_THROWS_AS(plant.apply(Eigen::VectorXd::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(GridPlant(builtin_grid("two-bus"), Eigen::VectorXd::Zero(7)),
                  std::invalid_argument);
}

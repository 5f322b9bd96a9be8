// Steady-state input-output sensitivity by central finite differences.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>

#include "ofosim/plant.hpp"

namespace ofosim {

struct SensitivityModel {
  Eigen::MatrixXd nabla_h;  // n_y x n_u, d h_i / d u_j
  Eigen::VectorXd u0;       // linearization point
};

// Column j = (h(u0 + step e_j) - h(u0 - step e_j)) / (2 step).
// Throws std::invalid_argument on step <= 0 and std::runtime_error if the
// plant diverges at any perturbed point.
SensitivityModel compute_sensitivity(const PlantFn& plant,
                                     const Eigen::VectorXd& u0,
                                     double step = 1e-5);
SensitivityModel compute_sensitivity(const Network& net,
                                     const Eigen::VectorXd& u0,
                                     double step = 1e-5);

// H^T = [I_nu | nabla_h^T], n_u x (n_u + n_y).
Eigen::MatrixXd assemble_H(const SensitivityModel& model);

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m);

}  // namespace ofosim

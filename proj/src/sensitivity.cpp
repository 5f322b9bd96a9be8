#include "ofosim/sensitivity.hpp"

#include <ostream>
#include <stdexcept>

#include "ofosim/csv.hpp"

namespace ofosim {

SensitivityModel compute_sensitivity(const PlantFn& plant,
                                     const Eigen::VectorXd& u0, double step) {
  if (step <= 0.0)
    throw std::invalid_argument("compute_sensitivity: step must be positive");
  const int n_u = static_cast<int>(u0.size());
  SensitivityModel model;
  model.u0 = u0;
  for (int j = 0; j < n_u; ++j) {
    Eigen::VectorXd up = u0;
    Eigen::VectorXd dn = u0;
    up(j) += step;
    dn(j) -= step;
    const Measurement yp = plant(up);
    const Measurement yn = plant(dn);
    if (!yp.converged || !yn.converged)
      throw std::runtime_error(
          "compute_sensitivity: plant diverged at perturbed point, column " +
          std::to_string(j));
    if (j == 0) model.nabla_h.resize(yp.y.size(), n_u);
    model.nabla_h.col(j) = (yp.y - yn.y) / (2.0 * step);
  }
  if (n_u == 0) model.nabla_h.resize(0, 0);
  return model;
}

SensitivityModel compute_sensitivity(const Network& net,
                                     const Eigen::VectorXd& u0, double step) {
  GridPlant plant(net);
  return compute_sensitivity([&plant](const Eigen::VectorXd& u) { return plant.apply(u); },
                             u0, step);
}

Eigen::MatrixXd assemble_H(const SensitivityModel& model) {
  const int n_u = static_cast<int>(model.nabla_h.cols());
  const int n_y = static_cast<int>(model.nabla_h.rows());
  Eigen::MatrixXd h_t(n_u, n_u + n_y);
  h_t.leftCols(n_u) = Eigen::MatrixXd::Identity(n_u, n_u);
  h_t.rightCols(n_y) = model.nabla_h.transpose();
  return h_t;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) os << ',';
      os << csv::num(m(i, j));
    }
    os << '\n';
  }
}

}  // namespace ofosim

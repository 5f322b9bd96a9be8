#include "ofosim/qp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ofosim {

ConstraintSet build_constraints(const Network& net, const ConstraintPolicy& policy) {
  const int m = net.n_units();
  const int n_u = 2 * m;
  const int n = net.n_buses();
  const int n_y = n + 2;
  const int seg = policy.circle_segments;
  if (seg < 3) throw std::invalid_argument("build_constraints: circle_segments < 3");

  ConstraintSet cs;

  // Input rows: per-unit box bounds, then per-unit apparent-power polygons.
  int m_u = 4 * m;
  if (policy.unit_caps)
    for (const ControllableUnit& u : net.units)
      if (u.s_max) m_u += seg;
  cs.A = Eigen::MatrixXd::Zero(m_u, n_u);
  cs.b = Eigen::VectorXd::Zero(m_u);
  int row = 0;
  for (int j = 0; j < m; ++j) {
    const ControllableUnit& u = net.units[j];
    cs.A(row, j) = 1.0;
    cs.b(row++) = u.p_max;
    cs.A(row, j) = -1.0;
    cs.b(row++) = -u.p_min;
    cs.A(row, m + j) = 1.0;
    cs.b(row++) = u.q_max;
    cs.A(row, m + j) = -1.0;
    cs.b(row++) = -u.q_min;
  }
  // Inscribed regular polygon: faces at distance cos(pi/seg) * radius, with
  // vertices on the circle at multiples of 2*pi/seg.
  const double inset = std::cos(std::numbers::pi / seg);
  if (policy.unit_caps) {
    for (int j = 0; j < m; ++j) {
      if (!net.units[j].s_max) continue;
      for (int k = 0; k < seg; ++k) {
        const double phi = (2 * k + 1) * std::numbers::pi / seg;
        cs.A(row, j) = std::cos(phi);
        cs.A(row, m + j) = std::sin(phi);
        cs.b(row++) = inset * *net.units[j].s_max;
      }
    }
  }

  // Output rows: voltage band per bus, then PCC transformer circle.
  int m_y = policy.voltage_rows ? 2 * n : 0;
  double pcc_rating = 0.0;
  if (policy.pcc_circle) {
    for (int bi : net.pcc_branch_indices()) pcc_rating += net.branches[bi].s_rating;
    if (pcc_rating > 0.0) m_y += seg;
  }
  cs.C = Eigen::MatrixXd::Zero(m_y, n_y);
  cs.d_out = Eigen::VectorXd::Zero(m_y);
  row = 0;
  if (policy.voltage_rows) {
    for (int i = 0; i < n; ++i) {
      cs.C(row, i) = 1.0;
      cs.d_out(row++) = net.buses[i].v_max;
      cs.C(row, i) = -1.0;
      cs.d_out(row++) = -net.buses[i].v_min;
    }
  }
  if (policy.pcc_circle && pcc_rating > 0.0) {
    for (int k = 0; k < seg; ++k) {
      const double phi = (2 * k + 1) * std::numbers::pi / seg;
      cs.C(row, n) = std::cos(phi);
      cs.C(row, n + 1) = std::sin(phi);
      cs.d_out(row++) = inset * pcc_rating;
    }
  }
  return cs;
}

namespace {

double kkt_residual(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                    const Eigen::MatrixXd& M, const Eigen::VectorXd& v,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  double res = 0.0;
  Eigen::VectorXd stat = P * x + q;
  if (M.rows() > 0) stat += M.transpose() * lambda;
  res = std::max(res, stat.lpNorm<Eigen::Infinity>());
  if (M.rows() > 0) {
    const Eigen::VectorXd slack = M * x - v;
    res = std::max(res, slack.maxCoeff());          // primal feasibility
    res = std::max(res, -lambda.minCoeff());        // dual feasibility
    res = std::max(res, lambda.cwiseProduct(slack).lpNorm<Eigen::Infinity>());
  }
  return std::max(res, 0.0);
}

}  // namespace

QpSolution solve_inequality_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                               const Eigen::MatrixXd& M, const Eigen::VectorXd& v,
                               const Eigen::VectorXd* x0, int max_iter) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(M.rows());
  if (max_iter <= 0) max_iter = 100 * std::max(1, n);
  constexpr double kFeasTol = 1e-10;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("solve_inequality_qp: P is not positive-definite");

  QpSolution sol;
  sol.sigma = x0 ? *x0 : Eigen::VectorXd(-llt.solve(q));
  Eigen::VectorXd& x = sol.sigma;

  std::vector<int> active;       // entry order
  Eigen::VectorXd lambda(0);     // multipliers, aligned with `active`

  auto finish = [&](QpStatus status) {
    sol.status = status;
    Eigen::VectorXd lam_full = Eigen::VectorXd::Zero(m);
    for (size_t i = 0; i < active.size(); ++i)
      lam_full(active[i]) = std::max(lambda(static_cast<Eigen::Index>(i)), 0.0);
    sol.kkt_residual = kkt_residual(P, q, M, v, x, lam_full);
    sol.active_set = active;
    std::sort(sol.active_set.begin(), sol.active_set.end());
    return sol;
  };

  if (m == 0) return finish(QpStatus::Optimal);

  int p = -1;          // incoming constraint
  double u_p = 0.0;    // its tentative multiplier
  bool need_new_p = true;

  for (int it = 0; it < max_iter; ++it) {
    if (need_new_p) {
      // Most violated constraint; ties resolve to the lowest index.
      const Eigen::VectorXd slack = v - M * x;
      p = -1;
      double worst = -kFeasTol;
      for (int i = 0; i < m; ++i)
        if (slack(i) < worst) {
          worst = slack(i);
          p = i;
        }
      if (p < 0) return finish(QpStatus::Optimal);
      u_p = 0.0;
      need_new_p = false;
    }

    const Eigen::VectorXd n_p = -M.row(p).transpose();
    const Eigen::VectorXd pinv_np = llt.solve(n_p);

    // Primal direction z and dual direction r for the current active set.
    const int na = static_cast<int>(active.size());
    Eigen::VectorXd z = pinv_np;
    Eigen::VectorXd r(na);
    if (na > 0) {
      Eigen::MatrixXd N(n, na);
      for (int i = 0; i < na; ++i) N.col(i) = -M.row(active[i]).transpose();
      const Eigen::MatrixXd K = llt.solve(N);
      const Eigen::MatrixXd B = N.transpose() * K;
      Eigen::LDLT<Eigen::MatrixXd> bldlt(B);
      if (bldlt.info() != Eigen::Success) return finish(QpStatus::MaxIter);
      r = bldlt.solve(N.transpose() * pinv_np);
      z -= K * r;
    }

    // Blocking dual step t1 and full primal step t2.
    double t1 = kInf;
    int drop = -1;
    for (int i = 0; i < na; ++i)
      if (r(i) > 1e-14) {
        const double t = lambda(i) / r(i);
        if (t < t1) {
          t1 = t;
          drop = i;
        }
      }
    const double denom = z.dot(n_p);
    const double s_p = v(p) - M.row(p) * x;  // negative while violated
    const bool z_zero = denom <= 1e-14 * std::max(1.0, n_p.squaredNorm());
    const double t2 = z_zero ? kInf : -s_p / denom;

    const double t = std::min(t1, t2);
    if (t == kInf) return finish(QpStatus::Infeasible);

    if (t2 == kInf) {
      // Dual-only step: constraint p stays violated, drop the blocking one.
      for (int i = 0; i < na; ++i) lambda(i) -= t * r(i);
      u_p += t;
      active.erase(active.begin() + drop);
      Eigen::VectorXd nl(na - 1);
      int w = 0;
      for (int i = 0; i < na; ++i)
        if (i != drop) nl(w++) = lambda(i);
      lambda = nl;
      continue;
    }

    x += t * z;
    for (int i = 0; i < na; ++i) lambda(i) -= t * r(i);
    u_p += t;
    if (t == t2) {
      active.push_back(p);
      lambda.conservativeResize(na + 1);
      lambda(na) = u_p;
      need_new_p = true;
    } else {
      active.erase(active.begin() + drop);
      Eigen::VectorXd nl(na - 1);
      int w = 0;
      for (int i = 0; i < na; ++i)
        if (i != drop) nl(w++) = lambda(i);
      lambda = nl;
    }
  }
  return finish(QpStatus::MaxIter);
}

QpSolution solve_qp(const QpProblem& pb) {
  const int n_u = static_cast<int>(pb.G.rows());
  const int m_u = static_cast<int>(pb.A.rows());
  const int m_y = static_cast<int>(pb.C.rows());
  if (pb.alpha <= 0.0) throw std::invalid_argument("solve_qp: alpha must be positive");

  const Eigen::VectorXd b_eff =
      m_u > 0 ? Eigen::VectorXd(pb.b - pb.A * pb.u) : Eigen::VectorXd(0);
  const Eigen::VectorXd d_eff =
      m_y > 0 ? Eigen::VectorXd(pb.d_out - pb.C * pb.y) : Eigen::VectorXd(0);
  const Eigen::MatrixXd cn =
      m_y > 0 ? Eigen::MatrixXd(pb.C * pb.nabla_h) : Eigen::MatrixXd(0, n_u);

  if (!pb.soft_outputs) {
    Eigen::MatrixXd M(m_u + m_y, n_u);
    Eigen::VectorXd v(m_u + m_y);
    if (m_u > 0) {
      M.topRows(m_u) = pb.alpha * pb.A;
      v.head(m_u) = b_eff;
    }
    if (m_y > 0) {
      M.bottomRows(m_y) = pb.alpha * cn;
      v.tail(m_y) = d_eff;
    }
    const Eigen::VectorXd q = pb.G * pb.grad_term;
    const Eigen::VectorXd x0 = -pb.grad_term;
    return solve_inequality_qp(pb.G, q, M, v, &x0, 100 * std::max(1, n_u));
  }

  // Soft outputs: w augmented with slack s >= 0, penalty rho * ||s||^2.
  const int nv = n_u + m_y;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nv, nv);
  P.topLeftCorner(n_u, n_u) = pb.G;
  P.bottomRightCorner(m_y, m_y) = pb.rho * Eigen::MatrixXd::Identity(m_y, m_y);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nv);
  q.head(n_u) = pb.G * pb.grad_term;

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m_u + 2 * m_y, nv);
  Eigen::VectorXd v(m_u + 2 * m_y);
  if (m_u > 0) {
    M.block(0, 0, m_u, n_u) = pb.alpha * pb.A;
    v.head(m_u) = b_eff;
  }
  if (m_y > 0) {
    M.block(m_u, 0, m_y, n_u) = pb.alpha * cn;
    M.block(m_u, n_u, m_y, m_y) = -Eigen::MatrixXd::Identity(m_y, m_y);
    v.segment(m_u, m_y) = d_eff;
    M.block(m_u + m_y, n_u, m_y, m_y) = -Eigen::MatrixXd::Identity(m_y, m_y);
    v.tail(m_y).setZero();
  }
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(nv);
  x0.head(n_u) = -pb.grad_term;
  QpSolution aug = solve_inequality_qp(P, q, M, v, &x0, 100 * std::max(1, nv));
  QpSolution sol;
  sol.status = aug.status;
  sol.kkt_residual = aug.kkt_residual;
  sol.sigma = aug.sigma.head(n_u);
  for (int idx : aug.active_set)
    if (idx < m_u + m_y) sol.active_set.push_back(idx);
  return sol;
}

}  // namespace ofosim

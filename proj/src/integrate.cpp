#include "phflow/integrate.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace phflow {

namespace {

// True when the constant system has the two-block structure
// J = [[0, A], [-A^T, 0]], R = 0, Q = I that the symplectic scheme needs.
bool has_two_block_split(const PhsSystem& sys) {
  if (!sys.constant || sys.split <= 0 || sys.split >= sys.dim_state)
    return false;
  const int nv = sys.split;
  const int ne = sys.dim_state - nv;
  if (sys.R.cwiseAbs().maxCoeff() > 0.0) return false;
  if (!sys.Q.isIdentity(1e-14)) return false;
  if (sys.J.topLeftCorner(nv, nv).cwiseAbs().maxCoeff() > 0.0) return false;
  if (sys.J.bottomRightCorner(ne, ne).cwiseAbs().maxCoeff() > 0.0)
    return false;
  return true;
}

void check_finite(bool finite, int step) {
  if (!finite)
    throw std::runtime_error("integration produced a non-finite state at step " +
                             std::to_string(step));
}

}  // namespace

Trajectory integrate_forward(const PhsSystem& sys, const TimeGrid& grid,
                             const Eigen::VectorXd& z0,
                             const Eigen::MatrixXd& controls) {
  const int n = sys.dim_state;
  const int N = grid.steps;
  if (N < 1) throw std::invalid_argument("time grid needs at least one step");
  if (z0.size() != n) throw std::invalid_argument("initial state dimension mismatch");
  if (controls.rows() != N + 1 || controls.cols() != sys.dim_input)
    throw std::invalid_argument("control table must be (steps+1) x dim_input");

  Trajectory traj;
  traj.grid = grid;
  traj.controls = controls;
  traj.states.resize(N + 1, n);
  traj.states.row(0) = z0.transpose();

  const double dt = grid.dt();
  if (has_two_block_split(sys)) {
    const int nv = sys.split;
    const int ne = n - nv;
    const Eigen::MatrixXd A = sys.J.topRightCorner(nv, ne);
    Eigen::VectorXd rho = z0.head(nv);
    Eigen::VectorXd x = z0.tail(ne);
    for (int k = 0; k < N; ++k) {
      const Eigen::VectorXd bu = sys.B * controls.row(k).transpose();
      rho += dt * (A * x + bu.head(nv));
      x += dt * (-A.transpose() * rho + bu.tail(ne));
      traj.states.row(k + 1).head(nv) = rho.transpose();
      traj.states.row(k + 1).tail(ne) = x.transpose();
      check_finite(rho.allFinite() && x.allFinite(), k + 1);
    }
  } else {
    traj.explicit_euler = true;
    Eigen::VectorXd z = z0;
    for (int k = 0; k < N; ++k) {
      z += dt * phs_rhs(sys, z, controls.row(k).transpose());
      traj.states.row(k + 1) = z.transpose();
      check_finite(z.allFinite(), k + 1);
    }
  }
  return traj;
}

AdjointTrajectory integrate_adjoint(const PhsSystem& sys, const TimeGrid& grid,
                                    const Trajectory& traj,
                                    const CostDerivatives& cost) {
  const int n = sys.dim_state;
  const int N = grid.steps;
  if (traj.states.rows() != N + 1 || traj.states.cols() != n)
    throw std::invalid_argument("trajectory does not match grid/system");

  AdjointTrajectory adj;
  adj.grid = grid;
  adj.costates.setZero(N + 1, n);
  adj.control_costates.setZero(N + 1, n);

  const double dt = grid.dt();
  auto running = [&](int k) -> Eigen::VectorXd {
    if (!cost.running) return Eigen::VectorXd::Zero(n);
    Eigen::VectorXd g = cost.running(k, traj.states.row(k).transpose());
    if (g.size() != n)
      throw std::invalid_argument("running cost gradient dimension mismatch");
    return g;
  };

  const Eigen::VectorXd cT =
      cost.terminal ? cost.terminal(traj.states.row(N).transpose())
                    : Eigen::VectorXd::Zero(n);
  if (cT.size() != n)
    throw std::invalid_argument("terminal cost gradient dimension mismatch");

  if (!traj.explicit_euler && has_two_block_split(sys)) {
    const int nv = sys.split;
    const int ne = n - nv;
    const Eigen::MatrixXd A = sys.J.topRightCorner(nv, ne);

    // Terminal condition: the edge costate matches c_T directly; the node
    // costate picks up the cross term from the staggered edge update.
    Eigen::VectorXd p = cT.tail(ne);
    Eigen::VectorXd nu = cT.head(nv) - dt * (A * p);
    adj.costates.row(N).head(nv) = nu.transpose();
    adj.costates.row(N).tail(ne) = p.transpose();

    for (int j = N - 1; j >= 0; --j) {
      adj.control_costates.row(j) = adj.costates.row(j + 1);
      const Eigen::VectorXd cj = running(j);
      const Eigen::VectorXd nu_next = nu;
      p += dt * cj.tail(ne) + dt * (A.transpose() * nu_next);
      if (j > 0) {
        nu = nu_next + dt * cj.head(nv) - dt * (A * p);
      } else {
        // rho_0 is an initial datum: it enters only the first node update,
        // so its sensitivity carries no edge-equation cross term.
        nu = nu_next + dt * cj.head(nv);
      }
      adj.costates.row(j).head(nv) = nu.transpose();
      adj.costates.row(j).tail(ne) = p.transpose();
    }
    return adj;
  }

  // Explicit Euler transpose: phi_j = (I + dt Df(z_j,u_j))^T phi_{j+1}
  // + dt c'_j.
  Eigen::VectorXd phi = cT;
  adj.costates.row(N) = phi.transpose();
  for (int j = N - 1; j >= 0; --j) {
    adj.control_costates.row(j) = phi.transpose();
    const Eigen::VectorXd z = traj.states.row(j).transpose();
    const Eigen::VectorXd u = traj.controls.row(j).transpose();
    const Eigen::VectorXd Qz = sys.Q * z;
    Eigen::VectorXd jac_t_phi =
        sys.Q.transpose() *
        ((sys.J_at(z) - sys.R_at(z)).transpose() * phi);
    if (!sys.constant) {
      if (sys.dJ_adjoint) jac_t_phi += sys.dJ_adjoint(z, phi, Qz);
      if (sys.dR_adjoint) jac_t_phi -= sys.dR_adjoint(z, phi, Qz);
      if (sys.dB_adjoint) jac_t_phi += sys.dB_adjoint(z, phi, u);
    }
    phi += grid.dt() * (jac_t_phi + running(j));
    adj.costates.row(j) = phi.transpose();
  }
  return adj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const int n = static_cast<int>(traj.states.cols());
  const int m = static_cast<int>(traj.controls.cols());
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",z_" << i;
  for (int i = 1; i <= m; ++i) out << ",u_" << i;
  out << "\n";
  out.precision(17);
  for (int k = 0; k < traj.states.rows(); ++k) {
    out << traj.grid.node(k);
    for (int i = 0; i < n; ++i) out << "," << traj.states(k, i);
    for (int i = 0; i < m; ++i) out << "," << traj.controls(k, i);
    out << "\n";
  }
}

}  // namespace phflow

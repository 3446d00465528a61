#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>

#include "phflow/phs.hpp"

namespace phflow {

struct TimeGrid {
  double horizon = 1.0;  // T
  int steps = 1;         // N_t

  double dt() const { return horizon / steps; }
  double node(int k) const { return k * dt(); }
};

struct Trajectory {
  TimeGrid grid;
  Eigen::MatrixXd states;    // (N_t+1) x n, row k = z_k
  Eigen::MatrixXd controls;  // (N_t+1) x m, row k = u_k (left-endpoint samples)
  // Set when the system lacks the two-block split and the integrator fell
  // back to explicit Euler.
  bool explicit_euler = false;
};

// Derivatives of the cost functional used by the adjoint sweep.
struct CostDerivatives {
  // c'(z_k) at grid node k; must be valid for k = 0..N_t-1.
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> running;
  // c_T'(z_N); empty means zero terminal cost.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> terminal;
};

// Forward sweep. For two-block systems (J = [[0,A],[-A^T,0]], R = 0, Q = I)
// the symplectic Euler update is used: the node block advances explicitly,
// the edge block uses the already-updated node block. Other systems fall
// back to explicit Euler and flag it on the trajectory.
Trajectory integrate_forward(const PhsSystem& sys, const TimeGrid& grid,
                             const Eigen::VectorXd& z0,
                             const Eigen::MatrixXd& controls);

struct AdjointTrajectory {
  TimeGrid grid;
  // (N_t+1) x n; row j = phi_j. Row 0 is the sensitivity of the discrete
  // objective w.r.t. the initial state.
  Eigen::MatrixXd costates;
  // (N_t+1) x n; row k = phi_{k+1}, the costate a control sample u_k acts
  // through (dJ/du_k = dt * B^T * row k). Row N_t is zero.
  Eigen::MatrixXd control_costates;
};

// Exact discrete adjoint (transpose of the discrete forward map), so the
// assembled gradient differentiates the discretized objective exactly.
AdjointTrajectory integrate_adjoint(const PhsSystem& sys, const TimeGrid& grid,
                                    const Trajectory& traj,
                                    const CostDerivatives& cost);

// Header t,z_1..z_n,u_1..u_m; one row per grid node, 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace phflow

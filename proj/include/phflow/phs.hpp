#pragma once

#include <Eigen/Dense>
#include <functional>

#include "phflow/network.hpp"

namespace phflow {

using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
// Derivative-action callback: maps (z, phi, aux) to the n-vector
// M'(z)^*[phi (x) aux]. Defaults to zero when absent.
using DerivativeAction =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                  const Eigen::VectorXd&)>;

// dz/dt = (J(z) - R(z)) Q z + B(z) u,   y = B(z)^T Q z,
// H(z) = z^T Q z / 2 with constant symmetric positive definite Q.
struct PhsSystem {
  int dim_state = 0;
  int dim_input = 0;

  // Constant fast path (all paper experiments): matrices stored once,
  // derivative actions fixed to zero.
  bool constant = true;
  Eigen::MatrixXd J;
  Eigen::MatrixXd R;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd B;

  MatrixFn J_fn, R_fn, B_fn;
  DerivativeAction dJ_adjoint, dR_adjoint, dB_adjoint;

  // Two-block split for semi-implicit stepping: the first `split` state
  // components form the node block (rho), the rest the edge block (x).
  // Negative means no split (explicit Euler fallback in the integrator).
  int split = -1;

  Eigen::MatrixXd J_at(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd R_at(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd B_at(const Eigen::VectorXd& z) const;
};

// Constant-matrix system; validates Q SPD and J skew-symmetry.
PhsSystem make_constant_phs(Eigen::MatrixXd J, Eigen::MatrixXd R,
                            Eigen::MatrixXd Q, Eigen::MatrixXd B,
                            int split = -1);

// Eq-structured flow system: J = [[0, A], [-A^T, 0]], R = 0, Q = I,
// B = [[I,0],[0,0]]. With `dynamic` the lower-right block of B becomes I so
// u^x enters the edge equation.
PhsSystem flow_phs(const Network& net, bool dynamic = false);

double hamiltonian(const PhsSystem& sys, const Eigen::VectorXd& z);
Eigen::VectorXd phs_rhs(const PhsSystem& sys, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& u);
Eigen::VectorXd phs_output(const PhsSystem& sys, const Eigen::VectorXd& z);

}  // namespace phflow

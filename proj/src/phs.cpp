#include "phflow/phs.hpp"

#include <stdexcept>

namespace phflow {

namespace {

void check_skew(const Eigen::MatrixXd& J) {
  if ((J + J.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("J is not skew-symmetric");
}

}  // namespace

Eigen::MatrixXd PhsSystem::J_at(const Eigen::VectorXd& z) const {
  Eigen::MatrixXd m = constant ? J : J_fn(z);
#ifndef NDEBUG
  check_skew(m);
#endif
  return m;
}

Eigen::MatrixXd PhsSystem::R_at(const Eigen::VectorXd& z) const {
  return constant ? R : R_fn(z);
}

Eigen::MatrixXd PhsSystem::B_at(const Eigen::VectorXd& z) const {
  return constant ? B : B_fn(z);
}

PhsSystem make_constant_phs(Eigen::MatrixXd J, Eigen::MatrixXd R,
                            Eigen::MatrixXd Q, Eigen::MatrixXd B, int split) {
  const int n = static_cast<int>(J.rows());
  if (J.cols() != n || R.rows() != n || R.cols() != n || Q.rows() != n ||
      Q.cols() != n || B.rows() != n)
    throw std::invalid_argument("phs matrix dimension mismatch");
  check_skew(J);
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("Q is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("Q is not positive definite");

  PhsSystem sys;
  sys.dim_state = n;
  sys.dim_input = static_cast<int>(B.cols());
  sys.J = std::move(J);
  sys.R = std::move(R);
  sys.Q = std::move(Q);
  sys.B = std::move(B);
  sys.split = split;
  return sys;
}

PhsSystem flow_phs(const Network& net, bool dynamic) {
  const int nv = net.node_count;
  const int ne = net.edge_count();
  const int n = nv + ne;
  const Eigen::MatrixXd A = incidence(net).full;

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  J.topRightCorner(nv, ne) = A;
  J.bottomLeftCorner(ne, nv) = -A.transpose();

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  B.topLeftCorner(nv, nv).setIdentity();
  if (dynamic) B.bottomRightCorner(ne, ne).setIdentity();

  return make_constant_phs(std::move(J), Eigen::MatrixXd::Zero(n, n),
                           Eigen::MatrixXd::Identity(n, n), std::move(B), nv);
}

double hamiltonian(const PhsSystem& sys, const Eigen::VectorXd& z) {
  if (z.size() != sys.dim_state)
    throw std::invalid_argument("state dimension mismatch");
  return 0.5 * z.dot(sys.Q * z);
}

Eigen::VectorXd phs_rhs(const PhsSystem& sys, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& u) {
  if (z.size() != sys.dim_state || u.size() != sys.dim_input)
    throw std::invalid_argument("state or input dimension mismatch");
  return (sys.J_at(z) - sys.R_at(z)) * (sys.Q * z) + sys.B_at(z) * u;
}

Eigen::VectorXd phs_output(const PhsSystem& sys, const Eigen::VectorXd& z) {
  if (z.size() != sys.dim_state)
    throw std::invalid_argument("state dimension mismatch");
  return sys.B_at(z).transpose() * (sys.Q * z);
}

}  // namespace phflow

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "phflow/integrate.hpp"
#include "phflow/network.hpp"
#include "phflow/phs.hpp"

using namespace phflow;

namespace {

struct SplitMix {
  std::uint64_t state;
  double next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return 2.0 * (static_cast<double>(z >> 11) / 9007199254740992.0) - 1.0;
  }
  Eigen::MatrixXd matrix(int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = next();
    return m;
  }
};

// Harmonic oscillator rho' = x, x' = -rho in two-block form (A = [1]).
PhsSystem oscillator() {
  Eigen::MatrixXd J(2, 2);
  J << 0, 1, -1, 0;
  return make_constant_phs(J, Eigen::MatrixXd::Zero(2, 2),
                           Eigen::MatrixXd::Identity(2, 2),
                           Eigen::MatrixXd::Identity(2, 2), 1);
}

double max_energy_drift(const PhsSystem& sys, int steps) {
  const TimeGrid grid{2.0 * M_PI, steps};
  Eigen::VectorXd z0(2);
  z0 << 1, 0;
  const Trajectory traj = integrate_forward(
      sys, grid, z0, Eigen::MatrixXd::Zero(steps + 1, 2));
  const double h0 = hamiltonian(sys, z0);
  double drift = 0.0;
  for (int k = 0; k <= steps; ++k) {
    drift = std::max(
        drift, std::abs(hamiltonian(sys, traj.states.row(k).transpose()) - h0));
  }
  return drift;
}

double endpoint_error(const PhsSystem& sys, int steps) {
  const TimeGrid grid{2.0 * M_PI, steps};
  Eigen::VectorXd z0(2);
  z0 << 1, 0;
  const Trajectory traj = integrate_forward(
      sys, grid, z0, Eigen::MatrixXd::Zero(steps + 1, 2));
  double err = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double t = grid.node(k);
    err = std::max(err, std::abs(traj.states(k, 0) - std::cos(t)));
    err = std::max(err, std::abs(traj.states(k, 1) + std::sin(t)));
  }
  return err;
}

}  // namespace

TEST_CASE("equilibrium of the diamond network is a constant trajectory") {
  const Network net = builtin_instance("diamond");
  const PhsSystem sys = flow_phs(net);
  const TimeGrid grid{1.0, 64};
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(8);
  z0.tail(4) << 4, 0, 4, 0;
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(65, 8);
  u.leftCols(4).rowwise() = (-net.supply).transpose();
  const Trajectory traj = integrate_forward(sys, grid, z0, u);
  CHECK_FALSE(traj.explicit_euler);
  for (int k = 0; k <= 64; ++k)
    CHECK((traj.states.row(k).transpose() - z0).cwiseAbs().maxCoeff() ==
          doctest::Approx(0.0));
}

TEST_CASE("zero data stays at zero") {
  const PhsSystem sys = flow_phs(builtin_instance("fig1"));
  const Trajectory traj =
      integrate_forward(sys, TimeGrid{1.0, 16}, Eigen::VectorXd::Zero(12),
                        Eigen::MatrixXd::Zero(17, 12));
  CHECK(traj.states.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("node-block mass obeys the discrete conservation law") {
  const Network net = builtin_instance("ep1");
  const PhsSystem sys = flow_phs(net, true);
  const int n = sys.dim_state, nv = net.node_count;
  const TimeGrid grid{1.0, 40};
  SplitMix rng{3};
  const Eigen::VectorXd z0 = rng.matrix(n, 1);
  const Eigen::MatrixXd u = rng.matrix(41, n);
  const Trajectory traj = integrate_forward(sys, grid, z0, u);
  // columns of A sum to zero, so 1^T rho changes only through the input
  for (int k = 0; k < 40; ++k) {
    const double lhs = traj.states.row(k + 1).head(nv).sum();
    const double rhs =
        traj.states.row(k).head(nv).sum() + grid.dt() * u.row(k).head(nv).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("semi-implicit step satisfies its defining equations exactly") {
  const Network net = builtin_instance("ep2");
  const PhsSystem sys = flow_phs(net, true);
  const Eigen::MatrixXd A = incidence(net).full;
  const int nv = net.node_count, ne = net.edge_count();
  const TimeGrid grid{0.7, 25};
  const double dt = grid.dt();
  SplitMix rng{5};
  const Eigen::VectorXd z0 = rng.matrix(nv + ne, 1);
  const Eigen::MatrixXd u = rng.matrix(26, nv + ne);
  const Trajectory traj = integrate_forward(sys, grid, z0, u);
  for (int k = 0; k < 25; ++k) {
    const Eigen::VectorXd rho_k = traj.states.row(k).head(nv).transpose();
    const Eigen::VectorXd x_k = traj.states.row(k).tail(ne).transpose();
    const Eigen::VectorXd rho_n = traj.states.row(k + 1).head(nv).transpose();
    const Eigen::VectorXd x_n = traj.states.row(k + 1).tail(ne).transpose();
    const Eigen::VectorXd u_rho = u.row(k).head(nv).transpose();
    const Eigen::VectorXd u_x = u.row(k).tail(ne).transpose();
    CHECK((rho_n - rho_k - dt * (A * x_k + u_rho)).cwiseAbs().maxCoeff() <=
          1e-12);
    CHECK((x_n - x_k - dt * (-A.transpose() * rho_n + u_x))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
  // the step is exactly invertible: undo it and recover the previous state
  for (int k = 24; k >= 0; --k) {
    const Eigen::VectorXd rho_n = traj.states.row(k + 1).head(nv).transpose();
    const Eigen::VectorXd x_n = traj.states.row(k + 1).tail(ne).transpose();
    const Eigen::VectorXd u_rho = u.row(k).head(nv).transpose();
    const Eigen::VectorXd u_x = u.row(k).tail(ne).transpose();
    const Eigen::VectorXd x_back = x_n - dt * (-A.transpose() * rho_n + u_x);
    const Eigen::VectorXd rho_back = rho_n - dt * (A * x_back + u_rho);
    CHECK((x_back - traj.states.row(k).tail(ne).transpose())
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK((rho_back - traj.states.row(k).head(nv).transpose())
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
}

TEST_CASE("first-order convergence on the harmonic oscillator") {
  const PhsSystem sys = oscillator();
  const double e1 = endpoint_error(sys, 512);
  const double e2 = endpoint_error(sys, 1024);
  const double rate = e1 / e2;
  CHECK(rate > 1.7);
  CHECK(rate < 2.3);
}

TEST_CASE("energy drift over a full period halves with the step size") {
  const PhsSystem sys = oscillator();
  const double d1 = max_energy_drift(sys, 1000);
  const double d2 = max_energy_drift(sys, 2000);
  const double ratio = d2 / d1;
  CHECK(ratio > 0.4);
  CHECK(ratio < 0.6);
}

TEST_CASE("systems without a two-block split fall back to explicit Euler") {
  Eigen::MatrixXd J(2, 2);
  J << 0, 1, -1, 0;
  Eigen::MatrixXd R(2, 2);
  R << 0.1, 0, 0, 0.1;
  const PhsSystem sys = make_constant_phs(
      J, R, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2));
  const TimeGrid grid{1.0, 10};
  Eigen::VectorXd z0(2);
  z0 << 1, 0;
  const Trajectory traj =
      integrate_forward(sys, grid, z0, Eigen::MatrixXd::Zero(11, 2));
  CHECK(traj.explicit_euler);
  // explicit Euler recursion reproduced by hand
  Eigen::VectorXd z = z0;
  for (int k = 0; k < 10; ++k) {
    z = z + grid.dt() * ((sys.J - sys.R) * z);
    CHECK((traj.states.row(k + 1).transpose() - z).cwiseAbs().maxCoeff() <=
          1e-14);
  }
}

TEST_CASE("non-finite states are reported with the failing step") {
  const PhsSystem sys = flow_phs(builtin_instance("diamond"));
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(9, 8);
  u(3, 0) = std::numeric_limits<double>::infinity();
  bool threw = false;
  try {
    integrate_forward(sys, TimeGrid{1.0, 8}, Eigen::VectorXd::Zero(8), u);
  } catch (const std::runtime_error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("zero cost derivatives give a zero adjoint") {
  const PhsSystem sys = flow_phs(builtin_instance("fig1"), true);
  const TimeGrid grid{1.0, 20};
  SplitMix rng{9};
  const Trajectory traj = integrate_forward(
      sys, grid, rng.matrix(12, 1), rng.matrix(21, 12));
  CostDerivatives cost;
  cost.running = [](int, const Eigen::VectorXd& z) {
    return Eigen::VectorXd::Zero(z.size()).eval();
  };
  const AdjointTrajectory adj = integrate_adjoint(sys, grid, traj, cost);
  CHECK(adj.costates.cwiseAbs().maxCoeff() == 0.0);
  CHECK(adj.control_costates.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint of a constant system ignores the control signal") {
  const PhsSystem sys = flow_phs(builtin_instance("ep2"), true);
  const int n = sys.dim_state;
  const TimeGrid grid{1.0, 30};
  SplitMix rng{13};
  const Eigen::VectorXd c = rng.matrix(n, 1);
  CostDerivatives cost;
  cost.running = [&](int, const Eigen::VectorXd&) { return c; };
  const Trajectory a = integrate_forward(sys, grid, rng.matrix(n, 1),
                                         rng.matrix(31, n));
  const Trajectory b = integrate_forward(sys, grid, rng.matrix(n, 1),
                                         rng.matrix(31, n));
  const AdjointTrajectory adj_a = integrate_adjoint(sys, grid, a, cost);
  const AdjointTrajectory adj_b = integrate_adjoint(sys, grid, b, cost);
  CHECK((adj_a.costates - adj_b.costates).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint gradient matches finite differences of the objective") {
  const Network net = builtin_instance("diamond");
  const PhsSystem sys = flow_phs(net, true);
  const int n = sys.dim_state;
  const TimeGrid grid{1.0, 50};
  const double dt = grid.dt();
  SplitMix rng{17};
  const Eigen::VectorXd z0 = rng.matrix(n, 1);
  const Eigen::MatrixXd u = rng.matrix(51, n);

  // objective: sum_k dt * |z_k|^2 / 2 over k = 0..N-1 plus |z_N|^2 / 2
  const auto objective = [&](const Eigen::MatrixXd& ctrl) {
    const Trajectory traj = integrate_forward(sys, grid, z0, ctrl);
    double val = 0.0;
    for (int k = 0; k < grid.steps; ++k)
      val += dt * 0.5 * traj.states.row(k).squaredNorm();
    return val + 0.5 * traj.states.row(grid.steps).squaredNorm();
  };
  CostDerivatives cost;
  cost.running = [](int, const Eigen::VectorXd& z) { return z; };
  cost.terminal = [](const Eigen::VectorXd& z) { return z; };

  const Trajectory traj = integrate_forward(sys, grid, z0, u);
  const AdjointTrajectory adj = integrate_adjoint(sys, grid, traj, cost);

  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXd dir = rng.matrix(51, n);
    dir.row(grid.steps).setZero();  // u_N never enters the forward map
    double adjoint_dir = 0.0;
    for (int k = 0; k < grid.steps; ++k)
      adjoint_dir += dt * (sys.B.transpose() *
                           adj.control_costates.row(k).transpose())
                              .dot(dir.row(k).transpose());
    const double h = 1e-6;
    const double fd = (objective(u + h * dir) - objective(u - h * dir)) /
                      (2.0 * h);
    CHECK(adjoint_dir ==
          doctest::Approx(fd).epsilon(1e-8).scale(std::abs(fd) + 1.0));
  }
}

TEST_CASE("trajectory export uses the documented CSV layout") {
  const PhsSystem sys = flow_phs(builtin_instance("diamond"));
  const TimeGrid grid{1.0, 4};
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(8);
  z0.tail(4) << 4, 0, 4, 0;
  const Trajectory traj =
      integrate_forward(sys, grid, z0, Eigen::MatrixXd::Zero(5, 8));
  std::stringstream out;
  write_trajectory_csv(out, traj);
  std::string header;
  std::getline(out, header);
  CHECK(header == "t,z_1,z_2,z_3,z_4,z_5,z_6,z_7,z_8,u_1,u_2,u_3,u_4,u_5,u_6,u_7,u_8");
  int rows = 0;
  std::string line;
  while (std::getline(out, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 5);
}

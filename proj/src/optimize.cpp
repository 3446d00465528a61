#include "phflow/optimize.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "phflow/lp.hpp"

namespace phflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// ---------------------------------------------------------------------------
// Barrier term
// ---------------------------------------------------------------------------

double barrier_value(const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                     const Eigen::VectorXd& upper, double alpha, double eps) {
  if (alpha == 0.0) return 0.0;
  double sum = 0.0;
  for (int e = 0; e < x.size(); ++e) {
    const double a1 = upper[e] - x[e] + eps;
    const double a2 = x[e] - lower[e] + eps;
    if (a1 <= 0.0 || a2 <= 0.0)
      throw std::domain_error("barrier domain violation at edge " +
                              std::to_string(e));
    sum += std::log(a1) + std::log(a2);
  }
  return -alpha * sum;
}

double barrier_value_or_inf(const Eigen::VectorXd& x,
                            const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, double alpha,
                            double eps) {
  if (alpha == 0.0) return 0.0;
  double sum = 0.0;
  for (int e = 0; e < x.size(); ++e) {
    const double a1 = upper[e] - x[e] + eps;
    const double a2 = x[e] - lower[e] + eps;
    if (a1 <= 0.0 || a2 <= 0.0) return kInf;
    sum += std::log(a1) + std::log(a2);
  }
  return -alpha * sum;
}

Eigen::VectorXd barrier_grad(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, double alpha,
                             double eps) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  if (alpha == 0.0) return g;
  for (int e = 0; e < x.size(); ++e) {
    const double a1 = upper[e] - x[e] + eps;
    const double a2 = x[e] - lower[e] + eps;
    if (a1 <= 0.0 || a2 <= 0.0)
      throw std::domain_error("barrier domain violation at edge " +
                              std::to_string(e));
    g[e] = alpha * (1.0 / a1 - 1.0 / a2);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

CirculationProjector::CirculationProjector(const Eigen::MatrixXd& A_reduced)
    : A_(A_reduced) {
  const Eigen::Index rows = A_.rows();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A_);
  if (lu.rank() < rows)
    throw std::invalid_argument(
        "projection matrix is row-rank deficient; pass the reduced "
        "incidence matrix");
  llt_.compute(A_ * A_.transpose());
  if (llt_.info() != Eigen::Success)
    throw std::invalid_argument("Cholesky of A A^T failed");
}

Eigen::VectorXd CirculationProjector::apply(const Eigen::VectorXd& g) const {
  return g - A_.transpose() * llt_.solve(A_ * g);
}

Eigen::MatrixXd CirculationProjector::apply_rows(
    const Eigen::MatrixXd& g) const {
  // Rows are time samples: project all of them with the one factorization.
  return g - (llt_.solve(A_ * g.transpose())).transpose() * A_;
}

Eigen::VectorXd project_circulation(const Eigen::MatrixXd& A_reduced,
                                    const Eigen::VectorXd& g) {
  return CirculationProjector(A_reduced).apply(g);
}

KktDirection project_kkt_lp(const Network& net, const Eigen::VectorXd& x_hat,
                            const Eigen::VectorXd& grad) {
  const FeasibilityReport rep = check_feasible(net, x_hat, 1e-7);
  if (!rep.feasible)
    throw std::invalid_argument("project_kkt_lp: infeasible current flow");

  LpProblem lp;
  lp.A = incidence(net).reduced();
  lp.b = Eigen::VectorXd::Zero(lp.A.rows());
  lp.c = grad;
  lp.lower = net.lower - x_hat;
  lp.upper = net.upper - x_hat;
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal)
    throw std::runtime_error("project_kkt_lp: direction LP did not solve");

  KktDirection dir;
  dir.h = sol.x;
  dir.objective = sol.objective;
  return dir;
}

// ---------------------------------------------------------------------------
// Armijo line search
// ---------------------------------------------------------------------------

ArmijoResult armijo(const std::function<double(double)>& evaluate,
                    double base_cost, double directional_derivative,
                    const ArmijoParams& params) {
  ArmijoResult res;
  if (!(directional_derivative < 0.0)) {
    res.status = ArmijoStatus::NotDescent;
    return res;
  }
  double sigma = params.sigma0;
  for (int j = 0; j < params.max_backtracks; ++j) {
    const double value = evaluate(sigma);
    if (std::isfinite(value) &&
        value <= base_cost + params.c1 * sigma * directional_derivative) {
      res.status = ArmijoStatus::Accepted;
      res.sigma = sigma;
      res.value = value;
      return res;
    }
    sigma *= params.factor;
  }
  res.status = ArmijoStatus::Exhausted;
  return res;
}

// ---------------------------------------------------------------------------
// H^1(lambda) Riesz identification
// ---------------------------------------------------------------------------

Eigen::MatrixXd stiffness_apply(const TimeGrid& grid,
                                const Eigen::MatrixXd& u_signal) {
  const int N = grid.steps;
  if (u_signal.rows() != N + 1)
    throw std::invalid_argument("signal rows must equal steps+1");
  const double dt = grid.dt();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(u_signal.rows(),
                                              u_signal.cols());
  // S = dt * D^T D with D the forward difference divided by dt, so the
  // interval factor and the 1/dt^2 cancel to 1/dt.
  for (int k = 0; k < N; ++k) {
    const Eigen::RowVectorXd du =
        (u_signal.row(k + 1) - u_signal.row(k)) / dt;
    out.row(k) -= du;
    out.row(k + 1) += du;
  }
  return out;
}

Eigen::MatrixXd riesz_h1_matrix(const TimeGrid& grid, double lambda) {
  const int N = grid.steps;
  const double dt = grid.dt();
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(N, N);
  const double off = -lambda / dt;
  for (int i = 0; i < N; ++i) {
    op(i, i) = dt + (i == N - 1 ? 1.0 : 2.0) * lambda / dt;
    if (i + 1 < N) {
      op(i, i + 1) = off;
      op(i + 1, i) = off;
    }
  }
  return op;
}

Eigen::MatrixXd riesz_h1(const TimeGrid& grid, double lambda,
                         const Eigen::MatrixXd& u_signal,
                         const Eigen::MatrixXd& p_signal) {
  if (lambda <= 0.0) throw std::invalid_argument("riesz_h1 requires lambda > 0");
  const int N = grid.steps;
  const int m = static_cast<int>(u_signal.cols());
  if (u_signal.rows() != N + 1 || p_signal.rows() != N + 1 ||
      p_signal.cols() != m)
    throw std::invalid_argument("riesz_h1 signal shape mismatch");
  const double dt = grid.dt();

  const Eigen::MatrixXd rhs_full =
      dt * p_signal + lambda * stiffness_apply(grid, u_signal);

  // Thomas algorithm on the constant tridiagonal (M + lambda S), nodes 1..N.
  const double off = -lambda / dt;
  Eigen::VectorXd diag(N);
  for (int i = 0; i < N; ++i)
    diag[i] = dt + (i == N - 1 ? 1.0 : 2.0) * lambda / dt;

  Eigen::VectorXd cp(N);  // modified superdiagonal
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(N + 1, m);
  Eigen::MatrixXd d = rhs_full.bottomRows(N);
  cp[0] = off / diag[0];
  d.row(0) /= diag[0];
  for (int i = 1; i < N; ++i) {
    const double denom = diag[i] - off * cp[i - 1];
    if (denom == 0.0) throw std::logic_error("riesz_h1: singular tridiagonal");
    if (i + 1 < N) cp[i] = off / denom;
    d.row(i) = (d.row(i) - off * d.row(i - 1)) / denom;
  }
  g.row(N) = d.row(N - 1);
  for (int i = N - 2; i >= 0; --i)
    g.row(i + 1) = d.row(i) - cp[i] * g.row(i + 2);
  return g;
}

// ---------------------------------------------------------------------------
// Reduced cost and gradient
// ---------------------------------------------------------------------------

namespace {

void require_split(const PhsSystem& sys) {
  if (sys.split <= 0 || sys.split >= sys.dim_state)
    throw std::invalid_argument("cost functional needs a two-block system");
}

double penalty_term(const TimeGrid& grid, double lambda,
                    const Eigen::MatrixXd& u) {
  if (lambda == 0.0) return 0.0;
  const double dt = grid.dt();
  double acc = 0.0;
  for (int k = 0; k < grid.steps; ++k)
    acc += ((u.row(k + 1) - u.row(k)) / dt).squaredNorm() * dt;
  return 0.5 * lambda * acc;
}

}  // namespace

double reduced_cost(const PhsSystem& sys, const TimeGrid& grid,
                    const ControlPoint& w, const CostFunctional& cost) {
  require_split(sys);
  const int ne = sys.dim_state - sys.split;

  if (cost.flavor == CostFlavor::StaticLinear) {
    const Eigen::VectorXd x_hat = w.z0.tail(ne);
    double value = cost.linear_cost.dot(x_hat);
    if (cost.alpha > 0.0)
      value += barrier_value_or_inf(x_hat, cost.lower, cost.upper, cost.alpha,
                                    cost.eps);
    return value;
  }

  const Trajectory traj = integrate_forward(sys, grid, w.z0, w.u);
  const double dt = grid.dt();
  double value = 0.0;
  for (int k = 0; k < grid.steps; ++k) {
    const Eigen::VectorXd x = traj.states.row(k).tail(ne).transpose();
    double theta = 0.0;
    if (cost.alpha > 0.0) {
      theta = barrier_value_or_inf(x, cost.lower, cost.upper, cost.alpha,
                                   cost.eps);
      if (!std::isfinite(theta)) return kInf;
    }
    value += dt * (cost.tracking.row(k).dot(x) + theta);
  }
  return value + penalty_term(grid, cost.lambda, w.u);
}

Gradient gradient(const PhsSystem& sys, const TimeGrid& grid,
                  const ControlPoint& w, const CostFunctional& cost) {
  require_split(sys);
  const int n = sys.dim_state;
  const int nv = sys.split;
  const int ne = n - nv;
  const double dt = grid.dt();

  const Trajectory traj = integrate_forward(sys, grid, w.z0, w.u);

  CostDerivatives deriv;
  if (cost.flavor == CostFlavor::StaticLinear) {
    deriv.running = [&](int, const Eigen::VectorXd& z) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd cx = cost.linear_cost;
      if (cost.alpha > 0.0)
        cx += barrier_grad(z.tail(ne), cost.lower, cost.upper, cost.alpha,
                           cost.eps);
      g.tail(ne) = cx / grid.horizon;  // time average of the constant flow
      return g;
    };
  } else {
    deriv.running = [&](int k, const Eigen::VectorXd& z) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd cx = cost.tracking.row(k).transpose();
      if (cost.alpha > 0.0)
        cx += barrier_grad(z.tail(ne), cost.lower, cost.upper, cost.alpha,
                           cost.eps);
      g.tail(ne) = cx;
      return g;
    };
  }

  const AdjointTrajectory adj = integrate_adjoint(sys, grid, traj, deriv);

  // Per-sample costate pairing: dJ/du_k = dt * B^T phi_{k+1}.
  Eigen::MatrixXd ptil(grid.steps + 1, sys.dim_input);
  for (int k = 0; k <= grid.steps; ++k)
    ptil.row(k) = (sys.B_at(traj.states.row(k).transpose()).transpose() *
                   adj.control_costates.row(k).transpose())
                      .transpose();

  Gradient out;
  out.initial = cost.lambda * w.z0 + adj.costates.row(0).transpose();
  if (cost.flavor == CostFlavor::StaticLinear) {
    out.control = cost.lambda * w.u + ptil;
    out.raw = dt * out.control;
  } else {
    out.raw = dt * ptil + cost.lambda * stiffness_apply(grid, w.u);
    out.control = riesz_h1(grid, cost.lambda, w.u, ptil);
  }
  return out;
}

double fd_gradient_check(const PhsSystem& sys, const TimeGrid& grid,
                         const ControlPoint& w, const CostFunctional& cost,
                         const std::vector<ControlPoint>& directions,
                         double fd_step) {
  const Gradient g = gradient(sys, grid, w, cost);
  double worst = 0.0;
  for (const ControlPoint& d : directions) {
    const double norm = d.u.norm() + d.z0.norm();
    if (norm == 0.0)
      throw std::invalid_argument("fd_gradient_check: zero direction");

    double pairing = g.initial.dot(d.z0);
    pairing += (g.raw.array() * d.u.array()).sum();

    ControlPoint plus{w.u + fd_step * d.u, w.z0 + fd_step * d.z0};
    ControlPoint minus{w.u - fd_step * d.u, w.z0 - fd_step * d.z0};
    const double fd = (reduced_cost(sys, grid, plus, cost) -
                       reduced_cost(sys, grid, minus, cost)) /
                      (2.0 * fd_step);

    const double scale = std::max(std::abs(pairing), std::abs(fd));
    const double err = scale < 1e-12 ? 0.0 : std::abs(pairing - fd) / scale;
    worst = std::max(worst, err);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

OptimizerRun run_static_kkt(const Network& net, const Eigen::VectorXd& x0,
                            double eps_stop, int max_iters) {
  if (!check_feasible(net, x0, 1e-7).feasible)
    throw std::invalid_argument("run_static_kkt: infeasible start");

  OptimizerRun run;
  Eigen::VectorXd x = x0;
  ArmijoParams ap;  // sigma0 = 1: the LP direction end point stays feasible
  for (int k = 0; k < max_iters; ++k) {
    const KktDirection dir = project_kkt_lp(net, x, net.cost);
    if (dir.objective >= -eps_stop) {
      run.termination = Termination::Tolerance;
      break;
    }
    const double base = net.cost.dot(x);
    const ArmijoResult ar = armijo(
        [&](double sigma) { return net.cost.dot(x + sigma * dir.h); }, base,
        dir.objective, ap);
    IterRecord rec;
    rec.iter = k;
    rec.proj_grad_norm = -dir.objective;
    rec.objective_before = base;
    if (ar.status == ArmijoStatus::Accepted) {
      x += ar.sigma * dir.h;
      rec.sigma = ar.sigma;
      rec.accepted = true;
      rec.objective_after = ar.value;
      ++run.accepted_steps;
    } else {
      ++run.line_search_failures;
      rec.objective_after = base;
      run.history.push_back(rec);
      run.termination = Termination::LineSearchFailure;
      ++run.iterations;
      break;
    }
    rec.cost = net.cost.dot(x);
    run.history.push_back(rec);
    ++run.iterations;
  }
  run.flow = x;
  run.final_cost = net.cost.dot(x);
  return run;
}

OptimizerRun run_static_barrier(const Network& net, const BarrierParams& bp,
                                const ArmijoParams& ap, int max_iters,
                                double eps_stop,
                                const std::optional<Eigen::VectorXd>& start) {
  Eigen::VectorXd x;
  if (start) {
    x = *start;
  } else {
    const McfSolution worst = worst_case_flow(net);
    if (!worst.feasible())
      throw std::runtime_error("run_static_barrier: no feasible start");
    x = worst.flow;
  }
  double alpha = bp.alpha0;
  double eps = bp.eps0;
  if (!std::isfinite(
          barrier_value_or_inf(x, net.lower, net.upper, alpha, eps)))
    throw std::domain_error("run_static_barrier: start outside barrier domain");

  const Eigen::VectorXd cb = net.cost / net.cost.maxCoeff();
  const CirculationProjector proj(incidence(net).reduced());

  OptimizerRun run;
  run.termination = Termination::MaxIterations;
  for (int k = 0; k < max_iters; ++k) {
    const Eigen::VectorXd g =
        cb + barrier_grad(x, net.lower, net.upper, alpha, eps);
    const Eigen::VectorXd pg = proj.apply(g);
    const double pgn = pg.lpNorm<1>();
    if (pgn < eps_stop) {
      run.termination = Termination::Tolerance;
      break;
    }
    const Eigen::VectorXd d = -pg;
    const double dd = g.dot(d);
    auto objective = [&](const Eigen::VectorXd& y) {
      return cb.dot(y) +
             barrier_value_or_inf(y, net.lower, net.upper, alpha, eps);
    };
    const double base = objective(x);
    const ArmijoResult ar = armijo(
        [&](double sigma) { return objective(x + sigma * d); }, base, dd, ap);

    IterRecord rec;
    rec.iter = k;
    rec.proj_grad_norm = pgn;
    rec.alpha = alpha;
    rec.eps = eps;
    rec.objective_before = base;
    rec.objective_after = base;
    if (ar.status == ArmijoStatus::Accepted) {
      x += ar.sigma * d;
      rec.sigma = ar.sigma;
      rec.accepted = true;
      rec.objective_after = ar.value;
      ++run.accepted_steps;
    } else {
      ++run.line_search_failures;
    }
    rec.cost = net.cost.dot(x);
    run.history.push_back(rec);
    ++run.iterations;

    // Coupled geometric schedules, frozen together at the alpha floor; then
    // enlarge eps only as far as the iterate requires to stay in the domain.
    if (bp.alpha_factor * alpha >= bp.alpha_min) {
      alpha *= bp.alpha_factor;
      eps *= bp.eps_factor;
    }
    const double needed = std::max(
        {0.0, (x - net.upper).maxCoeff(), (net.lower - x).maxCoeff()});
    eps = std::max(eps, needed * 1.001 + 1e-12);
  }
  run.flow = x;
  run.final_cost = net.cost.dot(x);
  return run;
}

OptimizerRun run_dynamic(const Network& net, const EdgeCostFunction& tc,
                         const DynamicParams& params) {
  const int nv = net.node_count;
  const int ne = net.edge_count();
  if (tc.edge_count() != ne)
    throw std::invalid_argument("run_dynamic: cost table edge count mismatch");
  const PhsSystem sys = flow_phs(net, /*dynamic=*/true);
  const TimeGrid& grid = params.grid;
  const int N = grid.steps;
  const double dt = grid.dt();

  Eigen::VectorXd x0;
  if (params.initial_flow) {
    x0 = *params.initial_flow;
  } else {
    Network snap = net;
    snap.cost = tc.value(0.0);
    const McfSolution s = solve_mcf(snap);
    if (!s.feasible())
      throw std::runtime_error("run_dynamic: instance infeasible at t = 0");
    x0 = s.flow;
  }
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(nv + ne);
  z0.tail(ne) = x0;

  CostFunctional cost;
  cost.flavor = CostFlavor::DynamicTracking;
  cost.tracking.resize(N + 1, ne);
  for (int k = 0; k <= N; ++k)
    cost.tracking.row(k) = tc.value(grid.node(k)).transpose();
  cost.lambda = params.lambda;
  cost.alpha = params.barrier.alpha0;
  cost.eps = params.barrier.eps0;
  cost.lower = net.lower;
  cost.upper = net.upper;

  // Fixed exogenous node input -b keeps rho = 0 along feasible iterates.
  auto assemble = [&](const Eigen::MatrixXd& ux) {
    Eigen::MatrixXd u(N + 1, nv + ne);
    u.leftCols(nv) = (-net.supply).transpose().replicate(N + 1, 1);
    u.rightCols(ne) = ux;
    return u;
  };

  const CirculationProjector proj(incidence(net).reduced());
  Eigen::MatrixXd ux = Eigen::MatrixXd::Zero(N + 1, ne);

  auto true_cost = [&](const Trajectory& traj) {
    double acc = 0.0;
    for (int k = 0; k < N; ++k)
      acc += dt * cost.tracking.row(k).dot(traj.states.row(k).tail(ne));
    return acc;
  };

  OptimizerRun run;
  run.grid = grid;
  run.termination = Termination::MaxIterations;
  for (int k = 0; k < params.max_iters; ++k) {
    const ControlPoint w{assemble(ux), z0};
    const Gradient grad = gradient(sys, grid, w, cost);

    Eigen::MatrixXd g = proj.apply_rows(grad.control.rightCols(ne));
    g.row(0).setZero();  // the control cannot change the t = 0 sample
    const double pgn = g.cwiseAbs().sum() * dt;
    if (pgn < params.eps_stop) {
      run.termination = Termination::Tolerance;
      break;
    }
    const Eigen::MatrixXd d = -g;
    const double dd = (grad.raw.rightCols(ne).array() * d.array()).sum();

    const double base = reduced_cost(sys, grid, w, cost);
    const ArmijoResult ar = armijo(
        [&](double sigma) {
          return reduced_cost(sys, grid, {assemble(ux + sigma * d), z0},
                              cost);
        },
        base, dd, params.armijo);

    IterRecord rec;
    rec.iter = k;
    rec.proj_grad_norm = pgn;
    rec.alpha = cost.alpha;
    rec.eps = cost.eps;
    rec.objective_before = base;
    rec.objective_after = base;
    if (ar.status == ArmijoStatus::Accepted) {
      ux += ar.sigma * d;
      rec.sigma = ar.sigma;
      rec.accepted = true;
      rec.objective_after = ar.value;
      ++run.accepted_steps;
    } else {
      ++run.line_search_failures;
    }

    const Trajectory traj = integrate_forward(sys, grid, z0, assemble(ux));
    rec.cost = true_cost(traj);
    run.history.push_back(rec);
    ++run.iterations;

    if (params.barrier.alpha_factor * cost.alpha >= params.barrier.alpha_min) {
      cost.alpha *= params.barrier.alpha_factor;
      cost.eps *= params.barrier.eps_factor;
    }
    double needed = 0.0;
    for (int r = 0; r <= N; ++r) {
      const Eigen::VectorXd xr = traj.states.row(r).tail(ne).transpose();
      needed = std::max(
          {needed, (xr - net.upper).maxCoeff(), (net.lower - xr).maxCoeff()});
    }
    cost.eps = std::max(cost.eps, needed * 1.001 + 1e-12);
  }

  const Trajectory traj = integrate_forward(sys, grid, z0, assemble(ux));
  run.control = ux;
  run.flow_trajectory = traj.states.rightCols(ne);
  run.flow = traj.states.row(N).tail(ne).transpose();
  run.final_cost = true_cost(traj);
  return run;
}

}  // namespace phflow

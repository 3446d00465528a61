#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "phflow/integrate.hpp"
#include "phflow/mcf.hpp"
#include "phflow/network.hpp"
#include "phflow/phs.hpp"

namespace phflow {

// ---------------------------------------------------------------------------
// Parameters and run records
// ---------------------------------------------------------------------------

struct BarrierParams {
  double alpha0 = 1.0;
  double eps0 = 1.0;
  double alpha_factor = 0.9;
  double eps_factor = 0.99;
  double alpha_min = 0.01;
};

struct ArmijoParams {
  double sigma0 = 1.0;
  double factor = 0.5;          // backtracking factor
  double c1 = 1e-4;             // sufficient-decrease constant
  int max_backtracks = 20;
};

enum class ArmijoStatus { Accepted, NotDescent, Exhausted };

struct ArmijoResult {
  ArmijoStatus status = ArmijoStatus::Exhausted;
  double sigma = 0.0;
  double value = 0.0;  // objective at the accepted step
};

// Backtracking line search: largest sigma = sigma0 * factor^j satisfying
// evaluate(sigma) <= base_cost + c1 * sigma * directional_derivative.
// The callback must return +infinity for barrier-domain violations.
// A nonnegative directional derivative is reported as NotDescent, distinct
// from backtrack exhaustion.
ArmijoResult armijo(const std::function<double(double)>& evaluate,
                    double base_cost, double directional_derivative,
                    const ArmijoParams& params);

enum class Termination { Tolerance, MaxIterations, LineSearchFailure };

struct IterRecord {
  int iter = 0;
  double cost = 0.0;            // raw flow cost (no normalization, no barrier)
  double proj_grad_norm = 0.0;  // 1-norm of the projected gradient
  double sigma = 0.0;           // accepted step (0 on line-search failure)
  double alpha = 0.0;
  double eps = 0.0;
  bool accepted = false;
  double objective_before = 0.0;  // line-search objective at current params
  double objective_after = 0.0;
};

struct OptimizerRun {
  std::vector<IterRecord> history;
  Termination termination = Termination::MaxIterations;
  int iterations = 0;        // gradient steps performed
  int accepted_steps = 0;
  int line_search_failures = 0;
  double final_cost = 0.0;   // c^T x (static) / integral running cost (dynamic)

  Eigen::VectorXd flow;             // static drivers: final flow
  TimeGrid grid;                    // dynamic driver
  Eigen::MatrixXd control;          // dynamic: final u^x, (N_t+1) x ne
  Eigen::MatrixXd flow_trajectory;  // dynamic: x(t), (N_t+1) x ne
};

// ---------------------------------------------------------------------------
// Barrier term
// ---------------------------------------------------------------------------

// Theta(x) = -alpha * sum_e [ln(upper_e - x_e + eps) + ln(x_e - lower_e + eps)].
// Throws std::domain_error naming the offending edge when a log argument
// is <= 0.
double barrier_value(const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
                     const Eigen::VectorXd& upper, double alpha, double eps);

// Component e: alpha * [1/(upper_e - x_e + eps) - 1/(x_e - lower_e + eps)].
Eigen::VectorXd barrier_grad(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, double alpha,
                             double eps);

// Non-throwing variant for line-search callbacks: +infinity out of domain.
double barrier_value_or_inf(const Eigen::VectorXd& x,
                            const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, double alpha,
                            double eps);

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

// Euclidean-orthogonal projector onto {h : A_reduced h = 0} with a cached
// Cholesky factorization of A_reduced A_reduced^T, reusable across time
// samples. Throws std::invalid_argument when A_reduced is row-rank deficient
// (the unreduced incidence matrix would be).
class CirculationProjector {
 public:
  explicit CirculationProjector(const Eigen::MatrixXd& A_reduced);

  Eigen::VectorXd apply(const Eigen::VectorXd& g) const;
  // Row-wise application (one time sample per row).
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& g) const;

 private:
  Eigen::MatrixXd A_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

Eigen::VectorXd project_circulation(const Eigen::MatrixXd& A_reduced,
                                    const Eigen::VectorXd& g);

// Direction from the KKT linear program
//   min grad^T h  s.t.  A h = 0,  lower - x_hat <= h <= upper - x_hat.
struct KktDirection {
  Eigen::VectorXd h;
  double objective = 0.0;  // always <= 0 (h = 0 is feasible)
};

KktDirection project_kkt_lp(const Network& net, const Eigen::VectorXd& x_hat,
                            const Eigen::VectorXd& grad);

// ---------------------------------------------------------------------------
// H^1(lambda) Riesz identification
// ---------------------------------------------------------------------------

// Gradient representative in the H^1(lambda) inner product on the grid, one
// component per column. Node 0 is pinned to zero (the control cannot change
// the initial sample); for the interior nodes the tridiagonal system
// (M + lambda*S) g = M p + lambda*S u is solved by the Thomas algorithm,
// with M the lumped mass matrix (dt) and S the forward-difference stiffness
// matrix with a natural boundary at t = T. The discrete weak identity
//   sum dt g h + lambda sum dt g' h' = sum dt p h + lambda sum dt u' h'
// holds exactly for every test signal h with h_0 = 0.
Eigen::MatrixXd riesz_h1(const TimeGrid& grid, double lambda,
                         const Eigen::MatrixXd& u_signal,
                         const Eigen::MatrixXd& p_signal);

// Dense (M + lambda*S) on nodes 1..N_t, for spectrum checks.
Eigen::MatrixXd riesz_h1_matrix(const TimeGrid& grid, double lambda);

// S * u with S = forward-difference stiffness (dt * D^T D, D = diff/dt).
Eigen::MatrixXd stiffness_apply(const TimeGrid& grid,
                                const Eigen::MatrixXd& u_signal);

// ---------------------------------------------------------------------------
// Reduced cost functional and its gradient
// ---------------------------------------------------------------------------

enum class CostFlavor { StaticLinear, DynamicTracking };

struct CostFunctional {
  CostFlavor flavor = CostFlavor::StaticLinear;
  // StaticLinear: J = linear_cost^T x_hat (+ barrier), x_hat = edge block
  // of the initial state.
  Eigen::VectorXd linear_cost;
  // DynamicTracking: J = sum_{k<N} dt (tracking_k . x_k + Theta(x_k))
  //                      + (lambda/2) sum_k dt |du/dt|_k^2,
  // tracking is (N_t+1) x ne.
  Eigen::MatrixXd tracking;
  double lambda = 0.0;
  // Barrier attachment at the current schedule point; alpha = 0 disables.
  double alpha = 0.0;
  double eps = 0.0;
  Eigen::VectorXd lower, upper;
};

// Control/initial-condition point w = (u, z0).
struct ControlPoint {
  Eigen::MatrixXd u;    // (N_t+1) x dim_input
  Eigen::VectorXd z0;
};

// Evaluates the discretized reduced objective (left-endpoint quadrature);
// returns +infinity when a barrier term leaves its domain. The static
// flavor evaluates linear_cost^T x_hat (+ barrier) exactly.
double reduced_cost(const PhsSystem& sys, const TimeGrid& grid,
                    const ControlPoint& w, const CostFunctional& cost);

struct Gradient {
  // Gradient representative per control sample: L2 samples
  // lambda*u_k + B^T phi_{k+1} for the static flavor, the H^1(lambda)
  // Riesz representative for the dynamic flavor.
  Eigen::MatrixXd control;
  // Raw duality data: dJ[h] = sum_k raw_k . h_k for control variations h.
  Eigen::MatrixXd raw;
  // Initial-condition component lambda*z0 + phi_0.
  Eigen::VectorXd initial;
};

Gradient gradient(const PhsSystem& sys, const TimeGrid& grid,
                  const ControlPoint& w, const CostFunctional& cost);

// Compares adjoint-assembled directional derivatives against central finite
// differences of reduced_cost along the given admissible directions;
// returns the worst relative error. Throws on a zero-norm direction.
double fd_gradient_check(const PhsSystem& sys, const TimeGrid& grid,
                         const ControlPoint& w, const CostFunctional& cost,
                         const std::vector<ControlPoint>& directions,
                         double fd_step = 1e-5);

// ---------------------------------------------------------------------------
// Experiment drivers (Algorithm 1)
// ---------------------------------------------------------------------------

// Projected gradient descent with the KKT-LP direction; for a linear static
// cost one step reaches the oracle optimum. Stops when the LP optimal
// objective is >= -eps_stop.
OptimizerRun run_static_kkt(const Network& net, const Eigen::VectorXd& x0,
                            double eps_stop = 1e-9, int max_iters = 50);

// Barrier path: normalized costs c/max(c), direction -P(c_norm + grad Theta),
// geometric alpha/eps schedules (frozen together once alpha would drop below
// alpha_min, then eps enlarged only as needed to keep the iterate in the
// barrier domain). Start defaults to the worst-case flow.
OptimizerRun run_static_barrier(
    const Network& net, const BarrierParams& bp, const ArmijoParams& ap,
    int max_iters = 300, double eps_stop = 1e-6,
    const std::optional<Eigen::VectorXd>& start = std::nullopt);

struct DynamicParams {
  TimeGrid grid{1.0, 1000};
  double lambda = 0.001;
  BarrierParams barrier{1.0, 0.001, 0.9, 0.99, 0.01};
  ArmijoParams armijo{1000.0, 0.5, 1e-4, 20};
  int max_iters = 50;
  double eps_stop = 1e-6;
  std::optional<Eigen::VectorXd> initial_flow;  // default: min-cost at t = 0
};

// Dynamic control path on a network with a time-dependent edge cost:
// control u^x on circulations (u^x(0) = 0), fixed exogenous node input -b,
// gradient via the discrete adjoint and riesz_h1, pointwise-in-time
// circulation projection. Line-search failures are recorded and the run
// continues with tighter schedules.
OptimizerRun run_dynamic(const Network& net, const EdgeCostFunction& tc,
                         const DynamicParams& params);

}  // namespace phflow

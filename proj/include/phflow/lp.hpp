#pragma once

#include <Eigen/Dense>

namespace phflow {

// min c^T x  subject to  A x = b,  lower <= x <= upper.
// Lower bounds must be finite; upper bounds may be +infinity.
struct LpProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  Eigen::VectorXd x;
  Eigen::VectorXd duals;          // row multipliers y (valid when optimal)
  Eigen::VectorXd reduced_costs;  // c - A^T y
  double objective = 0.0;
  int iterations = 0;
};

// Bounded-variable primal simplex with Bland's rule (two phases, dense
// basis factorization). Deterministic: ties break on smallest index.
// An optimal result is revalidated against the constraints before being
// returned; failure to revalidate throws std::runtime_error.
LpSolution solve_lp(const LpProblem& prob, int max_iterations = 0);

}  // namespace phflow

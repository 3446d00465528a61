#include "phflow/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace phflow {

namespace {

constexpr double kTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Tableau {
  Eigen::MatrixXd A;       // m x (n + m), structural then artificial columns
  Eigen::VectorXd b;
  Eigen::VectorXd lower;   // n + m
  Eigen::VectorXd upper;
  Eigen::VectorXd cost;    // current phase objective
  Eigen::VectorXd x;       // current values, all n + m variables
  std::vector<int> basis;  // m basic variable indices
  std::vector<char> at_upper;  // nonbasic rest position
  int iterations = 0;
};

// One phase of the bounded-variable primal simplex, Bland's rule.
// Returns Optimal / Unbounded / IterationLimit.
LpStatus simplex_phase(Tableau& t, int max_iterations) {
  const int m = static_cast<int>(t.A.rows());
  const int total = static_cast<int>(t.A.cols());
  std::vector<char> in_basis(total, 0);
  for (int i : t.basis) in_basis[i] = 1;

  while (true) {
    if (t.iterations >= max_iterations) return LpStatus::IterationLimit;
    ++t.iterations;

    Eigen::MatrixXd B(m, m);
    for (int i = 0; i < m; ++i) B.col(i) = t.A.col(t.basis[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);

    // Recompute basic values from the nonbasic rest positions.
    Eigen::VectorXd rhs = t.b;
    for (int j = 0; j < total; ++j)
      if (!in_basis[j]) rhs -= t.A.col(j) * t.x[j];
    Eigen::VectorXd xb = lu.solve(rhs);
    for (int i = 0; i < m; ++i) t.x[t.basis[i]] = xb[i];

    Eigen::VectorXd cb(m);
    for (int i = 0; i < m; ++i) cb[i] = t.cost[t.basis[i]];
    const Eigen::VectorXd y = lu.transpose().solve(cb);

    // Bland entering rule: smallest index with an improving reduced cost.
    int enter = -1;
    double s = 1.0;  // +1 if the entering variable increases
    for (int j = 0; j < total; ++j) {
      if (in_basis[j]) continue;
      if (t.upper[j] - t.lower[j] <= kTol) continue;  // fixed, cannot move
      const double dj = t.cost[j] - t.A.col(j).dot(y);
      if (!t.at_upper[j] && dj < -kTol) {
        enter = j;
        s = 1.0;
        break;
      }
      if (t.at_upper[j] && dj > kTol) {
        enter = j;
        s = -1.0;
        break;
      }
    }
    if (enter < 0) return LpStatus::Optimal;

    const Eigen::VectorXd w = lu.solve(t.A.col(enter));

    // Ratio test: how far the entering variable can move.
    double span = t.upper[enter] - t.lower[enter];
    double best = span;  // moving all the way flips the bound
    int leave = -1;      // row index of the leaving basic variable
    for (int i = 0; i < m; ++i) {
      const double sw = s * w[i];
      const int bi = t.basis[i];
      double limit = kInf;
      if (sw > kTol)
        limit = (t.x[bi] - t.lower[bi]) / sw;
      else if (sw < -kTol && std::isfinite(t.upper[bi]))
        limit = (t.upper[bi] - t.x[bi]) / (-sw);
      if (limit < best - kTol) {
        best = limit;
        leave = i;
      } else if (limit < best + kTol && leave >= 0 && bi < t.basis[leave]) {
        // Bland tie-break on the smallest leaving variable index.
        leave = i;
      }
    }
    if (std::isinf(best)) return LpStatus::Unbounded;
    if (best < 0.0) best = 0.0;

    // Apply the step.
    t.x[enter] += s * best;
    for (int i = 0; i < m; ++i) t.x[t.basis[i]] -= s * best * w[i];

    if (leave < 0) {
      // Bound flip: the entering variable stays nonbasic at its other bound.
      t.at_upper[enter] = !t.at_upper[enter];
      t.x[enter] = t.at_upper[enter] ? t.upper[enter] : t.lower[enter];
    } else {
      const int out = t.basis[leave];
      const double sw = s * w[leave];
      t.at_upper[out] = sw < 0.0;
      t.x[out] = t.at_upper[out] ? t.upper[out] : t.lower[out];
      in_basis[out] = 0;
      in_basis[enter] = 1;
      t.basis[leave] = enter;
      t.at_upper[enter] = 0;
    }
  }
}

}  // namespace

LpSolution solve_lp(const LpProblem& prob, int max_iterations) {
  const int m = static_cast<int>(prob.A.rows());
  const int n = static_cast<int>(prob.A.cols());
  if (prob.b.size() != m || prob.c.size() != n || prob.lower.size() != n ||
      prob.upper.size() != n)
    throw std::invalid_argument("lp dimension mismatch");
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(prob.lower[j]))
      throw std::invalid_argument("lp lower bounds must be finite");
    if (prob.lower[j] > prob.upper[j]) {
      LpSolution sol;
      sol.status = LpStatus::Infeasible;
      return sol;
    }
  }
  if (max_iterations <= 0) max_iterations = 10000 + 200 * (n + m);

  LpSolution sol;
  if (m == 0) {
    // No equality rows: each variable sits at the bound its cost prefers.
    sol.x.resize(n);
    for (int j = 0; j < n; ++j) {
      if (prob.c[j] >= 0.0) {
        sol.x[j] = prob.lower[j];
      } else if (std::isfinite(prob.upper[j])) {
        sol.x[j] = prob.upper[j];
      } else {
        sol.status = LpStatus::Unbounded;
        return sol;
      }
    }
    sol.status = LpStatus::Optimal;
    sol.duals.resize(0);
    sol.reduced_costs = prob.c;
    sol.objective = prob.c.dot(sol.x);
    return sol;
  }

  Tableau t;
  t.A.resize(m, n + m);
  t.A.leftCols(n) = prob.A;
  t.b = prob.b;
  t.lower.resize(n + m);
  t.upper.resize(n + m);
  t.lower.head(n) = prob.lower;
  t.upper.head(n) = prob.upper;
  t.lower.tail(m).setZero();
  t.upper.tail(m).setConstant(kInf);
  t.x.resize(n + m);
  t.at_upper.assign(n + m, 0);

  // Structural variables start at their lower bound; artificial variables
  // absorb the residual with a sign chosen to keep them nonnegative.
  for (int j = 0; j < n; ++j) t.x[j] = prob.lower[j];
  Eigen::VectorXd resid = prob.b - prob.A * t.x.head(n);
  t.A.rightCols(m).setZero();
  t.basis.resize(m);
  for (int i = 0; i < m; ++i) {
    t.A(i, n + i) = resid[i] >= 0.0 ? 1.0 : -1.0;
    t.x[n + i] = std::abs(resid[i]);
    t.basis[i] = n + i;
  }

  // Phase 1: drive the artificial variables to zero.
  t.cost = Eigen::VectorXd::Zero(n + m);
  t.cost.tail(m).setOnes();
  LpStatus st = simplex_phase(t, max_iterations);
  sol.iterations = t.iterations;
  if (st == LpStatus::IterationLimit) {
    sol.status = st;
    return sol;
  }
  double infeas = 0.0;
  for (int i = 0; i < m; ++i) infeas += t.x[n + i];
  if (infeas > 1e-7) {
    sol.status = LpStatus::Infeasible;
    return sol;
  }

  // Phase 2: pin artificials at zero and optimize the real objective.
  t.upper.tail(m).setZero();
  t.x.tail(m).setZero();
  t.cost.setZero();
  t.cost.head(n) = prob.c;
  st = simplex_phase(t, max_iterations);
  sol.iterations = t.iterations;
  sol.status = st;
  if (st != LpStatus::Optimal) return sol;

  sol.x = t.x.head(n);

  // Recover duals from the final basis.
  Eigen::MatrixXd B(m, m);
  Eigen::VectorXd cb(m);
  for (int i = 0; i < m; ++i) {
    B.col(i) = t.A.col(t.basis[i]);
    cb[i] = t.cost[t.basis[i]];
  }
  sol.duals = B.transpose().partialPivLu().solve(cb);
  sol.reduced_costs = prob.c - prob.A.transpose() * sol.duals;
  sol.objective = prob.c.dot(sol.x);

  // Revalidate before reporting optimal.
  const double scale = 1.0 + prob.b.cwiseAbs().maxCoeff() +
                       sol.x.cwiseAbs().maxCoeff();
  if ((prob.A * sol.x - prob.b).cwiseAbs().maxCoeff() > 1e-7 * scale)
    throw std::runtime_error("lp revalidation failed: equality residual");
  for (int j = 0; j < n; ++j) {
    if (sol.x[j] < prob.lower[j] - 1e-7 * scale ||
        sol.x[j] > prob.upper[j] + 1e-7 * scale)
      throw std::runtime_error("lp revalidation failed: bound violation");
  }
  return sol;
}

}  // namespace phflow

#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "phflow/network.hpp"

namespace phflow {

enum class McfStatus { Optimal, Infeasible, Unbounded };

struct McfSolution {
  McfStatus status = McfStatus::Infeasible;
  Eigen::VectorXd flow;
  Eigen::VectorXd potentials;     // node duals pi
  Eigen::VectorXd reduced_costs;  // c_e + pi[tail] - pi[head]
  double cost = 0.0;
  // When infeasible: a node set S with positive surplus whose outgoing
  // residual capacity is exhausted (deficient cut certificate).
  std::vector<int> cut;

  bool feasible() const { return status == McfStatus::Optimal; }
};

// Minimum-cost flow by successive shortest paths with node potentials
// (Bellman-Ford initialization, then Dijkstra with reduced costs).
// General lower bounds are translated away; negative-cost edges are
// pre-saturated. Deterministic: ties break on the smallest node index.
McfSolution solve_mcf(const Network& net);

// Feasible flow maximizing the cost (solved as min-cost flow on -c);
// `cost` and `reduced_costs` report the original objective c^T x.
McfSolution worst_case_flow(const Network& net);

// Exact integral of the instantaneous-switching lower bound
// t -> min { c(t)^T x : A x = b, lower <= x <= upper } over [0, T].
// The minimum of finitely many affine functions is piecewise linear, so the
// integral is an exact trapezoid sum on segments between breakpoints; each
// segment is validated to be affine via its midpoint.
double switching_reference_cost(const Network& net, const EdgeCostFunction& tc,
                                const std::vector<double>& breakpoints = {
                                    0.0, 0.25, 0.5, 0.75, 1.0});

// Header edge,tail,head,flow,reduced_cost; 17 significant digits,
// 1-based node ids.
void write_mcf_csv(std::ostream& out, const Network& net,
                   const McfSolution& sol);

}  // namespace phflow

#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace phflow {

// Time-dependent edge cost c_e(t) on [0, T]. Constant costs ignore t.
enum class CostKind { Constant, LinearInTime, Hat };

struct EdgeCostFunction {
  CostKind kind = CostKind::Constant;
  // One row per edge.
  //   Constant:     params(e,0)
  //   LinearInTime: params(e,0) + params(e,1)*t
  //   Hat:          params(e,0) + params(e,1)*t  for t <  1/2
  //                 params(e,2) + params(e,3)*t  for t >= 1/2
  Eigen::MatrixXd params;

  double value(int edge, double t) const;
  Eigen::VectorXd value(double t) const;
  int edge_count() const { return static_cast<int>(params.rows()); }
};

struct Edge {
  int tail = 0;  // 0-based
  int head = 0;
};

// Directed graph with supplies/demands, per-edge costs and flow bounds.
// Immutable after construction; validated by make_network.
struct Network {
  int node_count = 0;
  std::vector<Edge> edges;
  Eigen::VectorXd supply;  // b, length node_count, sums to zero
  Eigen::VectorXd cost;    // c, length edge_count
  Eigen::VectorXd lower;   // x^l
  Eigen::VectorXd upper;   // x^u
  std::optional<EdgeCostFunction> time_cost;

  int edge_count() const { return static_cast<int>(edges.size()); }
};

// Validates balance, bounds, self-loops and (undirected) connectivity.
// Throws std::invalid_argument on violation.
Network make_network(int node_count, std::vector<Edge> edges,
                     Eigen::VectorXd supply, Eigen::VectorXd cost,
                     Eigen::VectorXd lower, Eigen::VectorXd upper,
                     std::optional<EdgeCostFunction> time_cost = std::nullopt);

// Node-arc incidence matrix: column e of edge (i,j) has +1 at i, -1 at j.
struct IncidenceMatrix {
  Eigen::MatrixXd full;  // node_count x edge_count
  int drop_row = 0;      // row omitted by reduced(); always the last row

  Eigen::MatrixXd reduced() const { return full.topRows(full.rows() - 1); }
};

IncidenceMatrix incidence(const Network& net);

struct FeasibilityReport {
  double conservation_residual = 0.0;  // max_i |(A x - b)_i|
  double bound_violation = 0.0;        // max_e max(x^l-x, x-x^u, 0)
  bool feasible = false;
};

FeasibilityReport check_feasible(const Network& net, const Eigen::VectorXd& x,
                                 double tol = 1e-9);

// Instances from the built-in catalogue: "fig1", "ep1", "ep2", "ep3",
// "diamond". The diamond instance carries a linear time cost by default;
// use diamond_cost to switch.
Network builtin_instance(const std::string& name);

// Time cost table for the diamond instance, kind "linear" or "hat".
EdgeCostFunction diamond_cost(const std::string& kind);

// DIMACS min-cost-flow exchange format.
Network parse_dimacs(std::istream& in);
void serialize_dimacs(const Network& net, std::ostream& out);

}  // namespace phflow

#include "phflow/network.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace phflow {

double EdgeCostFunction::value(int edge, double t) const {
  switch (kind) {
    case CostKind::Constant:
      return params(edge, 0);
    case CostKind::LinearInTime:
      return params(edge, 0) + params(edge, 1) * t;
    case CostKind::Hat:
      if (t < 0.5) return params(edge, 0) + params(edge, 1) * t;
      return params(edge, 2) + params(edge, 3) * t;
  }
  throw std::logic_error("unreachable cost kind");
}

Eigen::VectorXd EdgeCostFunction::value(double t) const {
  Eigen::VectorXd v(edge_count());
  for (int e = 0; e < edge_count(); ++e) v[e] = value(e, t);
  return v;
}

namespace {

void check_connected(int node_count, const std::vector<Edge>& edges) {
  if (node_count <= 0) throw std::invalid_argument("network has no nodes");
  std::vector<std::vector<int>> adj(node_count);
  for (const Edge& e : edges) {
    adj[e.tail].push_back(e.head);
    adj[e.head].push_back(e.tail);
  }
  std::vector<char> seen(node_count, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  if (count != node_count)
    throw std::invalid_argument("network graph is not connected");
}

}  // namespace

Network make_network(int node_count, std::vector<Edge> edges,
                     Eigen::VectorXd supply, Eigen::VectorXd cost,
                     Eigen::VectorXd lower, Eigen::VectorXd upper,
                     std::optional<EdgeCostFunction> time_cost) {
  const int ne = static_cast<int>(edges.size());
  if (supply.size() != node_count)
    throw std::invalid_argument("supply vector length != node count");
  if (cost.size() != ne || lower.size() != ne || upper.size() != ne)
    throw std::invalid_argument("edge vector length != edge count");
  if (std::abs(supply.sum()) > 1e-9)
    throw std::invalid_argument("unbalanced supplies: sum b != 0");
  for (int e = 0; e < ne; ++e) {
    const Edge& ed = edges[e];
    if (ed.tail < 0 || ed.tail >= node_count || ed.head < 0 ||
        ed.head >= node_count)
      throw std::invalid_argument("edge endpoint out of range");
    if (ed.tail == ed.head)
      throw std::invalid_argument("self-loop edges are not allowed");
    if (lower[e] > upper[e])
      throw std::invalid_argument("lower bound exceeds upper bound");
  }
  check_connected(node_count, edges);
  if (time_cost && time_cost->edge_count() != ne)
    throw std::invalid_argument("time cost table edge count mismatch");

  Network net;
  net.node_count = node_count;
  net.edges = std::move(edges);
  net.supply = std::move(supply);
  net.cost = std::move(cost);
  net.lower = std::move(lower);
  net.upper = std::move(upper);
  net.time_cost = std::move(time_cost);
  return net;
}

IncidenceMatrix incidence(const Network& net) {
  IncidenceMatrix inc;
  inc.full = Eigen::MatrixXd::Zero(net.node_count, net.edge_count());
  for (int e = 0; e < net.edge_count(); ++e) {
    inc.full(net.edges[e].tail, e) = 1.0;
    inc.full(net.edges[e].head, e) = -1.0;
  }
  inc.drop_row = net.node_count - 1;
  return inc;
}

FeasibilityReport check_feasible(const Network& net, const Eigen::VectorXd& x,
                                 double tol) {
  if (x.size() != net.edge_count())
    throw std::invalid_argument("flow vector length != edge count");
  const IncidenceMatrix inc = incidence(net);
  FeasibilityReport rep;
  rep.conservation_residual =
      (inc.full * x - net.supply).cwiseAbs().maxCoeff();
  rep.bound_violation = 0.0;
  for (int e = 0; e < net.edge_count(); ++e) {
    const double v =
        std::max({net.lower[e] - x[e], x[e] - net.upper[e], 0.0});
    rep.bound_violation = std::max(rep.bound_violation, v);
  }
  rep.feasible =
      rep.conservation_residual <= tol && rep.bound_violation <= tol;
  return rep;
}

namespace {

Network build(int nv, std::vector<Edge> edges, std::vector<double> b,
              std::vector<double> c, std::vector<double> xu,
              std::optional<EdgeCostFunction> tc = std::nullopt) {
  const int ne = static_cast<int>(edges.size());
  Eigen::VectorXd supply = Eigen::Map<Eigen::VectorXd>(b.data(), nv);
  Eigen::VectorXd cost = Eigen::Map<Eigen::VectorXd>(c.data(), ne);
  Eigen::VectorXd upper = Eigen::Map<Eigen::VectorXd>(xu.data(), ne);
  return make_network(nv, std::move(edges), supply, cost,
                      Eigen::VectorXd::Zero(ne), upper, std::move(tc));
}

}  // namespace

EdgeCostFunction diamond_cost(const std::string& kind) {
  EdgeCostFunction f;
  f.params.resize(4, 4);
  if (kind == "linear") {
    f.kind = CostKind::LinearInTime;
    // upper path edges (1,2),(2,4): 100(1+t); lower (1,3),(3,4): 100(2-t)
    f.params.row(0) << 100.0, 100.0, 0.0, 0.0;
    f.params.row(1) << 200.0, -100.0, 0.0, 0.0;
    f.params.row(2) << 100.0, 100.0, 0.0, 0.0;
    f.params.row(3) << 200.0, -100.0, 0.0, 0.0;
  } else if (kind == "hat") {
    f.kind = CostKind::Hat;
    // upper: 100(1+2t) then 100(3-2t); lower: 100(2-2t) then 100(2t)
    f.params.row(0) << 100.0, 200.0, 300.0, -200.0;
    f.params.row(1) << 200.0, -200.0, 0.0, 200.0;
    f.params.row(2) << 100.0, 200.0, 300.0, -200.0;
    f.params.row(3) << 200.0, -200.0, 0.0, 200.0;
  } else {
    throw std::invalid_argument("unknown diamond cost kind: " + kind);
  }
  return f;
}

Network builtin_instance(const std::string& name) {
  if (name == "fig1") {
    return build(5,
                 {{0, 1}, {0, 3}, {1, 2}, {2, 0}, {2, 3}, {3, 4}, {4, 0}},
                 {4, -1, -1, -1, -1}, {1, 4, 1, 2, 1, 1, 1},
                 {4, 4, 3, 2, 3, 3, 1});
  }
  if (name == "ep1") {
    return build(8,
                 {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 1}, {2, 3}, {2, 4},
                  {3, 5}, {3, 6}, {3, 7}, {4, 5}, {4, 6}, {4, 7}, {5, 7},
                  {6, 7}},
                 {20, 0, 20, 0, 0, -10, -10, -20},
                 {2, 5, 1, 2, 2, 2, 2, 2, 3, 4, 3, 1, 4, 3, 3},
                 std::vector<double>(15, 20.0));
  }
  if (name == "ep2") {
    return build(6,
                 {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {2, 4}, {2, 5},
                  {3, 5}, {4, 5}},
                 {30, 0, 0, -10, -10, -10}, {4, 3, 2, 2, 2, 3, 5, 5, 2},
                 std::vector<double>(9, 20.0));
  }
  if (name == "ep3") {
    return build(10,
                 {{0, 1}, {0, 2}, {1, 4}, {1, 5}, {1, 6}, {2, 3}, {2, 4},
                  {2, 5}, {2, 8}, {3, 5}, {3, 8}, {4, 3}, {4, 6}, {4, 7},
                  {5, 7}, {5, 9}, {6, 5}, {6, 7}, {8, 5}, {8, 9}},
                 {20, 10, 10, 0, 0, -5, 0, -5, 0, -30},
                 {4, 6, 2, 3, 5, 4, 2, 6, 3, 1, 4, 3, 3, 5, 3, 4, 3, 3, 3, 5},
                 std::vector<double>(20, 20.0));
  }
  if (name == "diamond") {
    return build(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, {4, 0, 0, -4},
                 {100, 200, 100, 200},  // c^1 at t=0
                 {4, 4, 4, 4}, diamond_cost("linear"));
  }
  throw std::invalid_argument("unknown builtin instance: " + name);
}

Network parse_dimacs(std::istream& in) {
  std::string line;
  int lineno = 0;
  int nv = -1, ne = -1;
  std::vector<Edge> edges;
  std::vector<double> low, cap, cost;
  Eigen::VectorXd supply;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("dimacs line " + std::to_string(lineno) + ": " +
                             msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    char tag;
    ls >> tag;
    if (tag == 'c') continue;
    if (tag == 'p') {
      if (nv >= 0) fail("duplicate problem line");
      std::string kind;
      if (!(ls >> kind >> nv >> ne) || kind != "min" || nv <= 0 || ne < 0)
        fail("malformed problem line");
      supply = Eigen::VectorXd::Zero(nv);
    } else if (tag == 'n') {
      if (nv < 0) fail("node line before problem line");
      int id;
      double b;
      if (!(ls >> id >> b)) fail("malformed node line");
      if (id < 1 || id > nv) fail("node id out of range");
      supply[id - 1] = b;
    } else if (tag == 'a') {
      if (nv < 0) fail("arc line before problem line");
      int tail, head;
      double lo, hi, c;
      if (!(ls >> tail >> head >> lo >> hi >> c)) fail("malformed arc line");
      if (tail < 1 || tail > nv || head < 1 || head > nv)
        fail("node id out of range");
      edges.push_back({tail - 1, head - 1});
      low.push_back(lo);
      cap.push_back(hi);
      cost.push_back(c);
    } else {
      fail("unknown line tag");
    }
  }
  if (nv < 0) throw std::runtime_error("dimacs: missing problem line");
  if (static_cast<int>(edges.size()) != ne)
    throw std::runtime_error("dimacs: arc count differs from problem line");
  const int m = static_cast<int>(edges.size());
  return make_network(nv, std::move(edges), supply,
                      Eigen::Map<Eigen::VectorXd>(cost.data(), m),
                      Eigen::Map<Eigen::VectorXd>(low.data(), m),
                      Eigen::Map<Eigen::VectorXd>(cap.data(), m));
}

void serialize_dimacs(const Network& net, std::ostream& out) {
  out << "c phflow network\n";
  out << "p min " << net.node_count << " " << net.edge_count() << "\n";
  out.precision(17);
  for (int i = 0; i < net.node_count; ++i) {
    if (net.supply[i] != 0.0)
      out << "n " << (i + 1) << " " << net.supply[i] << "\n";
  }
  for (int e = 0; e < net.edge_count(); ++e) {
    out << "a " << (net.edges[e].tail + 1) << " " << (net.edges[e].head + 1)
        << " " << net.lower[e] << " " << net.upper[e] << " " << net.cost[e]
        << "\n";
  }
}

}  // namespace phflow

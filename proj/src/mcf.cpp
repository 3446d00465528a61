#include "phflow/mcf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <vector>

namespace phflow {

namespace {

constexpr double kTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

McfSolution solve_with_costs(const Network& net, const Eigen::VectorXd& c) {
  const int nv = net.node_count;
  const int ne = net.edge_count();

  // Translate lower bounds away: work with x' = x - l in [0, u - l].
  Eigen::VectorXd span = net.upper - net.lower;
  Eigen::VectorXd excess = net.supply;
  for (int e = 0; e < ne; ++e) {
    excess[net.edges[e].tail] -= net.lower[e];
    excess[net.edges[e].head] += net.lower[e];
  }

  // Residual graph: arc 2e is edge e forward, arc 2e+1 its reverse.
  std::vector<int> to(2 * ne);
  std::vector<double> cap(2 * ne), cost(2 * ne);
  std::vector<std::vector<int>> out(nv);
  McfSolution sol;
  for (int e = 0; e < ne; ++e) {
    const int u = net.edges[e].tail;
    const int v = net.edges[e].head;
    to[2 * e] = v;
    cost[2 * e] = c[e];
    to[2 * e + 1] = u;
    cost[2 * e + 1] = -c[e];
    if (c[e] < 0.0) {
      if (std::isinf(span[e])) {
        sol.status = McfStatus::Unbounded;
        return sol;
      }
      // Pre-saturate so every residual arc carries nonnegative cost.
      cap[2 * e] = 0.0;
      cap[2 * e + 1] = span[e];
      excess[u] -= span[e];
      excess[v] += span[e];
    } else {
      cap[2 * e] = span[e];
      cap[2 * e + 1] = 0.0;
    }
    out[u].push_back(2 * e);
    out[v].push_back(2 * e + 1);
  }

  // Bellman-Ford initialization of the potentials over the residual graph,
  // anchored at every surplus node. After pre-saturation all residual costs
  // are nonnegative, so this converges quickly and keeps every subsequent
  // Dijkstra pass valid.
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(nv);
  {
    std::vector<double> d(nv, kInf);
    for (int i = 0; i < nv; ++i)
      if (excess[i] > kTol) d[i] = 0.0;
    for (int round = 0; round < nv; ++round) {
      bool changed = false;
      for (int a = 0; a < 2 * ne; ++a) {
        if (cap[a] <= kTol) continue;
        const int u = to[a ^ 1];
        const int v = to[a];
        if (std::isfinite(d[u]) && d[u] + cost[a] < d[v] - 1e-12) {
          d[v] = d[u] + cost[a];
          changed = true;
        }
      }
      if (!changed) break;
    }
    double dmax = 0.0;
    for (int i = 0; i < nv; ++i)
      if (std::isfinite(d[i])) dmax = std::max(dmax, d[i]);
    for (int i = 0; i < nv; ++i)
      pi[i] = std::isfinite(d[i]) ? d[i] : dmax;
  }

  std::vector<double> dist(nv);
  std::vector<int> pred(nv);
  const long max_augment = 16L * nv * ne + 1024;
  for (long round = 0;; ++round) {
    if (round > max_augment)
      throw std::runtime_error("mcf: augmentation limit exceeded");

    int source = -1;
    for (int i = 0; i < nv; ++i)
      if (excess[i] > kTol) {
        source = i;
        break;
      }
    if (source < 0) break;  // all surplus routed

    // Dijkstra with reduced costs from the surplus node.
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(pred.begin(), pred.end(), -1);
    dist[source] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    pq.push({0.0, source});
    std::vector<char> done(nv, 0);
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (done[u]) continue;
      done[u] = 1;
      for (int a : out[u]) {
        if (cap[a] <= kTol) continue;
        const int v = to[a];
        const double rc = std::max(cost[a] + pi[u] - pi[v], 0.0);
        if (dist[u] + rc < dist[v] - 1e-12) {
          dist[v] = dist[u] + rc;
          pred[v] = a;
          pq.push({dist[v], v});
        }
      }
    }

    int sink = -1;
    double best = kInf;
    for (int i = 0; i < nv; ++i)
      if (excess[i] < -kTol && dist[i] < best - 1e-12) {
        best = dist[i];
        sink = i;
      }
    if (sink < 0) {
      // No deficit node reachable: the reachable set certifies infeasibility.
      sol.status = McfStatus::Infeasible;
      for (int i = 0; i < nv; ++i)
        if (std::isfinite(dist[i])) sol.cut.push_back(i);
      return sol;
    }

    double push = std::min(excess[source], -excess[sink]);
    for (int v = sink; v != source; v = to[pred[v] ^ 1])
      push = std::min(push, cap[pred[v]]);
    for (int v = sink; v != source; v = to[pred[v] ^ 1]) {
      cap[pred[v]] -= push;
      cap[pred[v] ^ 1] += push;
    }
    excess[source] -= push;
    excess[sink] += push;

    const double cap_dist = dist[sink];
    for (int i = 0; i < nv; ++i)
      pi[i] += std::isfinite(dist[i]) ? std::min(dist[i], cap_dist) : cap_dist;
  }

  sol.status = McfStatus::Optimal;
  sol.flow.resize(ne);
  for (int e = 0; e < ne; ++e)
    sol.flow[e] = net.lower[e] + (span[e] - cap[2 * e]);
  sol.potentials = pi;
  sol.reduced_costs.resize(ne);
  for (int e = 0; e < ne; ++e)
    sol.reduced_costs[e] =
        c[e] + pi[net.edges[e].tail] - pi[net.edges[e].head];
  sol.cost = net.cost.dot(sol.flow);
  return sol;
}

}  // namespace

McfSolution solve_mcf(const Network& net) {
  return solve_with_costs(net, net.cost);
}

McfSolution worst_case_flow(const Network& net) {
  McfSolution sol = solve_with_costs(net, -net.cost);
  if (sol.feasible()) {
    sol.cost = net.cost.dot(sol.flow);
    sol.reduced_costs = -sol.reduced_costs;
  }
  return sol;
}

double switching_reference_cost(const Network& net, const EdgeCostFunction& tc,
                                const std::vector<double>& breakpoints) {
  if (breakpoints.size() < 2)
    throw std::invalid_argument("need at least two breakpoints");
  auto value_at = [&](double t) {
    Network snap = net;
    snap.cost = tc.value(t);
    const McfSolution s = solve_mcf(snap);
    if (!s.feasible())
      throw std::runtime_error("switching reference: instance infeasible");
    return snap.cost.dot(s.flow);
  };
  double total = 0.0;
  for (size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double a = breakpoints[i];
    const double b = breakpoints[i + 1];
    if (b <= a) throw std::invalid_argument("breakpoints must increase");
    const double va = value_at(a);
    const double vb = value_at(b);
    const double vm = value_at(0.5 * (a + b));
    const double scale = 1.0 + std::abs(va) + std::abs(vb);
    if (std::abs(vm - 0.5 * (va + vb)) > 1e-9 * scale)
      throw std::runtime_error(
          "switching reference: cost not affine between breakpoints");
    total += 0.5 * (va + vb) * (b - a);
  }
  return total;
}

void write_mcf_csv(std::ostream& out, const Network& net,
                   const McfSolution& sol) {
  out << "edge,tail,head,flow,reduced_cost\n";
  out.precision(17);
  for (int e = 0; e < net.edge_count(); ++e) {
    out << (e + 1) << "," << (net.edges[e].tail + 1) << ","
        << (net.edges[e].head + 1) << "," << sol.flow[e] << ","
        << sol.reduced_costs[e] << "\n";
  }
}

}  // namespace phflow

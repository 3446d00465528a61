#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "phflow/lp.hpp"
#include "phflow/mcf.hpp"
#include "phflow/network.hpp"

using namespace phflow;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SplitMix {
  std::uint64_t state;
  std::uint64_t next_raw() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  // uniform integer in [lo, hi]
  int uniform(int lo, int hi) {
    return lo + static_cast<int>(next_raw() %
                                 static_cast<std::uint64_t>(hi - lo + 1));
  }
};

// Random connected instance with integer data and a known feasible flow
// (supplies are induced from it, so the instance is always feasible).
Network random_instance(SplitMix& rng) {
  const int nv = rng.uniform(2, 12);
  std::vector<Edge> edges;
  for (int v = 1; v < nv; ++v) {
    // spanning-tree edge in a random orientation
    const int other = rng.uniform(0, v - 1);
    if (rng.uniform(0, 1) == 0)
      edges.push_back({other, v});
    else
      edges.push_back({v, other});
  }
  const int extra = rng.uniform(0, 2 * nv);
  for (int e = 0; e < extra; ++e) {
    const int a = rng.uniform(0, nv - 1);
    const int b = rng.uniform(0, nv - 1);
    if (a != b) edges.push_back({a, b});
  }
  const int ne = static_cast<int>(edges.size());
  Eigen::VectorXd lower(ne), upper(ne), cost(ne), xstar(ne);
  for (int e = 0; e < ne; ++e) {
    lower[e] = rng.uniform(-3, 0);
    upper[e] = lower[e] + rng.uniform(0, 6);
    xstar[e] = rng.uniform(static_cast<int>(lower[e]),
                           static_cast<int>(upper[e]));
    cost[e] = rng.uniform(-10, 10);
  }
  Eigen::VectorXd supply = Eigen::VectorXd::Zero(nv);
  for (int e = 0; e < ne; ++e) {
    supply[edges[e].tail] += xstar[e];
    supply[edges[e].head] -= xstar[e];
  }
  return make_network(nv, edges, supply, cost, lower, upper);
}

LpProblem flow_lp(const Network& net) {
  LpProblem prob;
  prob.A = incidence(net).reduced();
  prob.b = net.supply.head(net.node_count - 1);
  prob.c = net.cost;
  prob.lower = net.lower;
  prob.upper = net.upper;
  return prob;
}

void check_optimality_certificates(const Network& net, const McfSolution& sol,
                                   double scale) {
  REQUIRE(sol.feasible());
  const FeasibilityReport rep = check_feasible(net, sol.flow, 1e-7 * scale);
  CHECK(rep.feasible);
  // complementary slackness
  double dual_bound_terms = 0.0;
  for (int e = 0; e < net.edge_count(); ++e) {
    const double r = sol.reduced_costs[e];
    if (r > 1e-7 * scale)
      CHECK(sol.flow[e] == doctest::Approx(net.lower[e]).epsilon(1e-7));
    if (r < -1e-7 * scale)
      CHECK(sol.flow[e] == doctest::Approx(net.upper[e]).epsilon(1e-7));
    dual_bound_terms += std::max(r, 0.0) * net.lower[e] +
                        std::min(r, 0.0) * net.upper[e];
  }
  // strong duality: c^T x = -pi^T b + sum of active bound terms
  const double primal = net.cost.dot(sol.flow);
  const double dual = -sol.potentials.dot(net.supply) + dual_bound_terms;
  CHECK(primal == doctest::Approx(dual).epsilon(1e-7).scale(scale));
}

}  // namespace

TEST_CASE("frozen optima of the built-in instances") {
  CHECK(solve_mcf(builtin_instance("fig1")).cost == doctest::Approx(10.0));
  CHECK(solve_mcf(builtin_instance("ep1")).cost == doctest::Approx(210.0));
  CHECK(solve_mcf(builtin_instance("ep2")).cost == doctest::Approx(200.0));
  CHECK(solve_mcf(builtin_instance("ep3")).cost == doctest::Approx(365.0));
}

TEST_CASE("worst-case flows of the built-in instances") {
  const McfSolution w1 = worst_case_flow(builtin_instance("ep1"));
  CHECK(w1.cost == doctest::Approx(400.0));
  CHECK(check_feasible(builtin_instance("ep1"), w1.flow).feasible);
  CHECK(worst_case_flow(builtin_instance("ep2")).cost ==
        doctest::Approx(270.0));
  CHECK(worst_case_flow(builtin_instance("ep3")).cost ==
        doctest::Approx(625.0));
  // the worst case never beats the optimum
  const Network fig1 = builtin_instance("fig1");
  const McfSolution wf = worst_case_flow(fig1);
  CHECK(check_feasible(fig1, wf.flow).feasible);
  CHECK(wf.cost >= solve_mcf(fig1).cost);
}

TEST_CASE("diamond instance at t = 0") {
  const Network net = builtin_instance("diamond");
  const McfSolution best = solve_mcf(net);
  REQUIRE(best.feasible());
  CHECK(best.cost == doctest::Approx(800.0));
  Eigen::VectorXd expect(4);
  expect << 4, 0, 4, 0;
  CHECK((best.flow - expect).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  const McfSolution worst = worst_case_flow(net);
  CHECK(worst.cost == doctest::Approx(1600.0));
  expect << 0, 4, 0, 4;
  CHECK((worst.flow - expect).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("zero supplies with nonnegative costs give the zero flow") {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd c(3), lo = Eigen::VectorXd::Zero(3), up(3);
  c << 1, 2, 3;
  up << 5, 5, 5;
  const Network net = make_network(3, {{0, 1}, {1, 2}, {2, 0}}, b, c, lo, up);
  const McfSolution sol = solve_mcf(net);
  REQUIRE(sol.feasible());
  CHECK(sol.flow.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.cost == 0.0);
}

TEST_CASE("infeasible instance yields a deficient cut certificate") {
  Eigen::VectorXd b(2), c(1), lo(1), up(1);
  b << 3, -3;
  c << 1;
  lo << 0;
  up << 2;  // capacity 2 < demand 3
  const Network net = make_network(2, {{0, 1}}, b, c, lo, up);
  const McfSolution sol = solve_mcf(net);
  CHECK(sol.status == McfStatus::Infeasible);
  REQUIRE_FALSE(sol.cut.empty());
  // certificate: surplus inside the cut exceeds the capacity leaving it
  std::vector<bool> in_cut(net.node_count, false);
  for (int v : sol.cut) in_cut[v] = true;
  double surplus = 0.0;
  for (int v = 0; v < net.node_count; ++v)
    if (in_cut[v]) surplus += net.supply[v];
  double capacity = 0.0;
  for (int e = 0; e < net.edge_count(); ++e) {
    if (in_cut[net.edges[e].tail] && !in_cut[net.edges[e].head])
      capacity += net.upper[e];
    if (!in_cut[net.edges[e].tail] && in_cut[net.edges[e].head])
      capacity -= net.lower[e];
  }
  CHECK(surplus > capacity + 1e-9);
}

TEST_CASE("negative cycles within finite bounds are handled") {
  // zero supplies, one negative-cost cycle: the optimum saturates it
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd c(2), lo = Eigen::VectorXd::Zero(2), up(2);
  c << -5, 1;
  up << 3, 3;
  const Network net =
      make_network(2, {{0, 1}, {1, 0}}, b, c, lo, up);
  const McfSolution sol = solve_mcf(net);
  REQUIRE(sol.feasible());
  CHECK(sol.cost == doctest::Approx(-12.0));  // 3 units around the cycle
  check_optimality_certificates(net, sol, 10.0);
}

TEST_CASE("simplex solves box-only problems") {
  {
    LpProblem prob;  // min -h, h in [0,1], no equality rows
    prob.A.resize(0, 1);
    prob.b.resize(0);
    prob.c.resize(1);
    prob.c << -1;
    prob.lower.resize(1);
    prob.lower << 0;
    prob.upper.resize(1);
    prob.upper << 1;
    const LpSolution sol = solve_lp(prob);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(1.0));
    CHECK(sol.objective == doctest::Approx(-1.0));
  }
  {
    LpProblem prob;  // min -h, h unbounded above
    prob.A.resize(0, 1);
    prob.b.resize(0);
    prob.c.resize(1);
    prob.c << -1;
    prob.lower.resize(1);
    prob.lower << 0;
    prob.upper.resize(1);
    prob.upper << kInf;
    CHECK(solve_lp(prob).status == LpStatus::Unbounded);
  }
  {
    LpProblem prob;  // h = 1 with h in [0, 0.5]
    prob.A.resize(1, 1);
    prob.A << 1;
    prob.b.resize(1);
    prob.b << 1;
    prob.c.resize(1);
    prob.c << 0;
    prob.lower.resize(1);
    prob.lower << 0;
    prob.upper.resize(1);
    prob.upper << 0.5;
    CHECK(solve_lp(prob).status == LpStatus::Infeasible);
  }
}

TEST_CASE("direction-finding subproblem at the fig1 reference flow") {
  const Network net = builtin_instance("fig1");
  Eigen::VectorXd xhat(7);
  xhat << 4, 2, 3, 2, 0, 1, 0;  // feasible, cost 20
  LpProblem prob;
  prob.A = incidence(net).reduced();
  prob.b = Eigen::VectorXd::Zero(net.node_count - 1);
  prob.c = net.cost;
  prob.lower = net.lower - xhat;
  prob.upper = net.upper - xhat;
  const LpSolution sol = solve_lp(prob);
  REQUIRE(sol.status == LpStatus::Optimal);
  // best descent step reaches the optimum: 10 - 20 = -10
  CHECK(sol.objective == doctest::Approx(-10.0));
  CHECK(check_feasible(net, xhat + sol.x).feasible);
}

TEST_CASE("oracle agrees with the simplex on the built-in instances") {
  for (const char* name : {"fig1", "ep1", "ep2", "ep3", "diamond"}) {
    const Network net = builtin_instance(name);
    const McfSolution mcf = solve_mcf(net);
    REQUIRE(mcf.feasible());
    const LpSolution lp = solve_lp(flow_lp(net));
    REQUIRE(lp.status == LpStatus::Optimal);
    CHECK(mcf.cost == doctest::Approx(lp.objective).epsilon(1e-7));
    check_optimality_certificates(net, mcf, std::abs(mcf.cost) + 1.0);
    // integer data: the successive-shortest-path optimum is integral
    for (int e = 0; e < net.edge_count(); ++e)
      CHECK(mcf.flow[e] == std::round(mcf.flow[e]));
  }
}

TEST_CASE("oracle agrees with the simplex on 100 random instances") {
  SplitMix rng{0x5eedULL};
  for (int trial = 0; trial < 100; ++trial) {
    const Network net = random_instance(rng);
    const McfSolution mcf = solve_mcf(net);
    REQUIRE(mcf.feasible());
    const LpSolution lp = solve_lp(flow_lp(net));
    REQUIRE(lp.status == LpStatus::Optimal);
    const double scale = std::abs(lp.objective) + 1.0;
    CHECK(mcf.cost ==
          doctest::Approx(lp.objective).epsilon(1e-7).scale(scale));
    check_optimality_certificates(net, mcf, scale);
    for (int e = 0; e < net.edge_count(); ++e)
      CHECK(mcf.flow[e] == std::round(mcf.flow[e]));
    // the worst-case flow is feasible and bounds the optimum from above
    const McfSolution worst = worst_case_flow(net);
    REQUIRE(worst.feasible());
    CHECK(check_feasible(net, worst.flow, 1e-7 * scale).feasible);
    CHECK(worst.cost >= mcf.cost - 1e-7 * scale);
  }
}

TEST_CASE("switching lower bound for the diamond time costs") {
  const Network net = builtin_instance("diamond");
  CHECK(switching_reference_cost(net, diamond_cost("linear")) ==
        doctest::Approx(1000.0).epsilon(1e-12));
  CHECK(switching_reference_cost(net, diamond_cost("hat")) ==
        doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("flow export uses the documented CSV layout") {
  const Network net = builtin_instance("diamond");
  const McfSolution sol = solve_mcf(net);
  std::stringstream out;
  write_mcf_csv(out, net, sol);
  std::string header;
  std::getline(out, header);
  CHECK(header == "edge,tail,head,flow,reduced_cost");
  int rows = 0;
  std::string line;
  while (std::getline(out, line))
    if (!line.empty()) ++rows;
  CHECK(rows == net.edge_count());
}

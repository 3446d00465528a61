#include "phflow/experiment.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "phflow/integrate.hpp"
#include "phflow/mcf.hpp"
#include "phflow/network.hpp"
#include "phflow/optimize.hpp"
#include "phflow/phs.hpp"

namespace phflow {

namespace fs = std::filesystem;

namespace {

bool is_builtin(const std::string& name) {
  return name == "fig1" || name == "ep1" || name == "ep2" || name == "ep3" ||
         name == "diamond";
}

Network resolve_instance(const std::string& instance) {
  if (instance.empty())
    throw std::invalid_argument("no instance specified");
  if (is_builtin(instance)) return builtin_instance(instance);
  std::ifstream in(instance);
  if (!in) throw IoError("cannot open instance file: " + instance);
  return parse_dimacs(in);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Tolerance:
      return "tolerance";
    case Termination::MaxIterations:
      return "max_iters";
    case Termination::LineSearchFailure:
      return "line_search_failure";
  }
  return "unknown";
}

void write_history(const fs::path& dir, const std::vector<IterRecord>& hist) {
  auto out = open_output(dir / "history.csv");
  out << "iter,cost,proj_grad_norm,sigma,alpha,eps\n";
  for (const IterRecord& r : hist)
    out << r.iter << "," << r.cost << "," << r.proj_grad_norm << ","
        << r.sigma << "," << r.alpha << "," << r.eps << "\n";
}

void write_static_flow(const fs::path& dir, const Eigen::VectorXd& flow) {
  auto out = open_output(dir / "flow.csv");
  out << "t";
  for (int e = 0; e < flow.size(); ++e) out << ",x_" << (e + 1);
  out << "\n0";
  for (int e = 0; e < flow.size(); ++e) out << "," << flow[e];
  out << "\n";
}

void write_signal(const fs::path& dir, const std::string& file,
                  const std::string& prefix, const TimeGrid& grid,
                  const Eigen::MatrixXd& signal) {
  auto out = open_output(dir / file);
  out << "t";
  for (int e = 0; e < signal.cols(); ++e) out << "," << prefix << (e + 1);
  out << "\n";
  for (int k = 0; k < signal.rows(); ++k) {
    out << grid.node(k);
    for (int e = 0; e < signal.cols(); ++e) out << "," << signal(k, e);
    out << "\n";
  }
}

void write_empty_csv(const fs::path& dir, const std::string& file) {
  auto out = open_output(dir / file);
  out << "t\n";
}

double relative_error(double final_cost, double oracle_cost) {
  const double denom = std::abs(oracle_cost) > 0.0 ? std::abs(oracle_cost) : 1.0;
  return std::abs(final_cost - oracle_cost) / denom;
}

void write_summary(const fs::path& dir,
                   const std::map<std::string, double>& summary,
                   const std::string& termination) {
  auto out = open_output(dir / "summary");
  for (const auto& [key, value] : summary) out << key << "=" << value << "\n";
  out << "termination=" << termination << "\n";
}

// Deterministic pseudo-random stream independent of library internals.
struct SplitMix {
  std::uint64_t state;
  explicit SplitMix(std::uint64_t seed) : state(seed) {}
  double next() {  // uniform in [-1, 1]
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return 2.0 * (static_cast<double>(z >> 11) / 9007199254740992.0) - 1.0;
  }
};

BarrierParams barrier_defaults(const ExperimentConfig& cfg) {
  double alpha0 = 1.0;
  double eps0 = 1.0;
  if (cfg.instance == "ep1") {
    alpha0 = 0.7;
    eps0 = 1.3;
  } else if (cfg.instance == "ep2") {
    alpha0 = 1.0;
    eps0 = 2.0;
  } else if (cfg.instance == "ep3") {
    alpha0 = 0.7;
    eps0 = 1.1;
  }
  BarrierParams bp;
  bp.alpha0 = cfg.get("alpha0", alpha0);
  bp.eps0 = cfg.get("eps0", eps0);
  bp.alpha_factor = cfg.get("alpha_factor", 0.9);
  bp.eps_factor = cfg.get("eps_factor", 0.99);
  bp.alpha_min = cfg.get("alpha_min", 0.01);
  return bp;
}

std::map<std::string, double> run_oracle(const ExperimentConfig& cfg,
                                         const Network& net,
                                         const fs::path& dir) {
  const McfSolution sol = solve_mcf(net);
  if (!sol.feasible()) throw std::runtime_error("oracle: instance infeasible");
  {
    auto out = open_output(dir / "flow.csv");
    write_mcf_csv(out, net, sol);
  }
  write_empty_csv(dir, "control.csv");
  write_history(dir, {});
  std::map<std::string, double> summary;
  summary["final_cost"] = sol.cost;
  summary["oracle_cost"] = sol.cost;
  summary["relative_error"] = 0.0;
  summary["iterations"] = 0;
  write_summary(dir, summary, "tolerance");
  return summary;
}

std::map<std::string, double> run_static(const ExperimentConfig& cfg,
                                         const Network& net,
                                         const fs::path& dir) {
  const McfSolution oracle = solve_mcf(net);
  if (!oracle.feasible())
    throw std::runtime_error("static run: instance infeasible");
  const McfSolution worst = worst_case_flow(net);

  OptimizerRun run;
  if (cfg.mode == "static-kkt") {
    run = run_static_kkt(net, worst.flow, cfg.get("eps_stop", 1e-9),
                         static_cast<int>(cfg.get("max_iters", 50)));
  } else {
    ArmijoParams ap;
    ap.sigma0 = cfg.get("sigma0", 1000.0);
    ap.max_backtracks = static_cast<int>(cfg.get("max_backtracks", 20));
    run = run_static_barrier(net, barrier_defaults(cfg), ap,
                             static_cast<int>(cfg.get("max_iters", 300)),
                             cfg.get("eps_stop", 1e-6));
  }

  write_history(dir, run.history);
  write_static_flow(dir, run.flow);
  write_empty_csv(dir, "control.csv");
  std::map<std::string, double> summary;
  summary["final_cost"] = run.final_cost;
  summary["oracle_cost"] = oracle.cost;
  summary["relative_error"] = relative_error(run.final_cost, oracle.cost);
  summary["iterations"] = run.iterations;
  write_summary(dir, summary, termination_name(run.termination));
  return summary;
}

std::map<std::string, double> run_dynamic_mode(const ExperimentConfig& cfg,
                                               const Network& net,
                                               const fs::path& dir) {
  EdgeCostFunction tc;
  if (cfg.instance == "diamond") {
    tc = diamond_cost(cfg.mode == "dynamic-hat" ? "hat" : "linear");
  } else if (net.time_cost) {
    tc = *net.time_cost;
  } else {
    throw std::invalid_argument(
        "dynamic mode needs an instance with a time-dependent edge cost");
  }

  DynamicParams params;
  params.grid.horizon = cfg.get("T", 1.0);
  params.grid.steps = static_cast<int>(cfg.get("nt", 1000));
  params.lambda = cfg.get("lambda", 0.001);
  params.barrier.alpha0 = cfg.get("alpha0", 1.0);
  params.barrier.eps0 = cfg.get("eps0", 0.001);
  params.barrier.alpha_factor = cfg.get("alpha_factor", 0.9);
  params.barrier.eps_factor = cfg.get("eps_factor", 0.99);
  params.barrier.alpha_min = cfg.get("alpha_min", 0.01);
  params.armijo.sigma0 = cfg.get("sigma0", 1000.0);
  params.armijo.max_backtracks = static_cast<int>(cfg.get("max_backtracks", 20));
  params.max_iters = static_cast<int>(cfg.get("max_iters", 50));
  params.eps_stop = cfg.get("eps_stop", 1e-6);

  const OptimizerRun run = run_dynamic(net, tc, params);
  const double reference = switching_reference_cost(net, tc);

  write_history(dir, run.history);
  write_signal(dir, "flow.csv", "x_", run.grid, run.flow_trajectory);
  write_signal(dir, "control.csv", "u_", run.grid, run.control);

  std::map<std::string, double> summary;
  summary["final_cost"] = run.final_cost;
  summary["oracle_cost"] = reference;
  summary["relative_error"] = relative_error(run.final_cost, reference);
  summary["iterations"] = run.iterations;
  const int mid = run.grid.steps / 2;
  for (int e = 0; e < run.flow_trajectory.cols(); ++e) {
    summary["x_final_" + std::to_string(e + 1)] =
        run.flow_trajectory(run.grid.steps, e);
    summary["x_mid_" + std::to_string(e + 1)] = run.flow_trajectory(mid, e);
  }
  write_summary(dir, summary, termination_name(run.termination));
  return summary;
}

std::map<std::string, double> run_gradcheck(const ExperimentConfig& cfg,
                                            const Network& net,
                                            const fs::path& dir) {
  const int nv = net.node_count;
  const int ne = net.edge_count();
  const int n_dirs = static_cast<int>(cfg.get("n_directions", 5));
  SplitMix rng(static_cast<std::uint64_t>(cfg.get("seed", 42)));
  const CirculationProjector proj(incidence(net).reduced());

  double worst = 0.0;

  // Static flavor: perturb the initial flow along circulations.
  {
    const PhsSystem sys = flow_phs(net, false);
    const TimeGrid grid{1.0, static_cast<int>(cfg.get("nt_static", 50))};
    const McfSolution start = solve_mcf(net);
    if (!start.feasible())
      throw std::runtime_error("gradcheck: instance infeasible");
    ControlPoint w;
    w.u = Eigen::MatrixXd::Zero(grid.steps + 1, nv + ne);
    w.u.leftCols(nv) = (-net.supply).transpose().replicate(grid.steps + 1, 1);
    w.z0 = Eigen::VectorXd::Zero(nv + ne);
    w.z0.tail(ne) = start.flow;

    CostFunctional cost;
    cost.flavor = CostFlavor::StaticLinear;
    cost.linear_cost = net.cost;

    std::vector<ControlPoint> dirs;
    for (int i = 0; i < n_dirs; ++i) {
      Eigen::VectorXd raw(ne);
      for (int e = 0; e < ne; ++e) raw[e] = rng.next();
      ControlPoint d;
      d.u = Eigen::MatrixXd::Zero(grid.steps + 1, nv + ne);
      d.z0 = Eigen::VectorXd::Zero(nv + ne);
      d.z0.tail(ne) = proj.apply(raw);
      dirs.push_back(d);
    }
    worst = std::max(
        worst, fd_gradient_check(sys, grid, w, cost, dirs,
                                 cfg.get("fd_step", 1e-5)));
  }

  // Dynamic flavor: perturb the edge control on circulations (when the
  // instance carries a time-dependent cost).
  if (net.time_cost) {
    const PhsSystem sys = flow_phs(net, true);
    const TimeGrid grid{1.0, static_cast<int>(cfg.get("nt", 200))};
    const EdgeCostFunction& tc = *net.time_cost;

    Network snap = net;
    snap.cost = tc.value(0.0);
    const McfSolution start = solve_mcf(snap);
    if (!start.feasible())
      throw std::runtime_error("gradcheck: instance infeasible");

    ControlPoint w;
    w.u = Eigen::MatrixXd::Zero(grid.steps + 1, nv + ne);
    w.u.leftCols(nv) = (-net.supply).transpose().replicate(grid.steps + 1, 1);
    w.z0 = Eigen::VectorXd::Zero(nv + ne);
    w.z0.tail(ne) = start.flow;

    CostFunctional cost;
    cost.flavor = CostFlavor::DynamicTracking;
    cost.tracking.resize(grid.steps + 1, ne);
    for (int k = 0; k <= grid.steps; ++k)
      cost.tracking.row(k) = tc.value(grid.node(k)).transpose();
    cost.lambda = cfg.get("lambda", 0.001);
    cost.alpha = cfg.get("alpha0", 1.0);
    cost.eps = cfg.get("eps0", 0.001);
    cost.lower = net.lower;
    cost.upper = net.upper;

    std::vector<ControlPoint> dirs;
    for (int i = 0; i < n_dirs; ++i) {
      Eigen::MatrixXd raw(grid.steps + 1, ne);
      for (int k = 0; k <= grid.steps; ++k)
        for (int e = 0; e < ne; ++e) raw(k, e) = rng.next();
      ControlPoint d;
      d.u = Eigen::MatrixXd::Zero(grid.steps + 1, nv + ne);
      d.u.rightCols(ne) = proj.apply_rows(raw);
      d.u.row(0).setZero();
      d.z0 = Eigen::VectorXd::Zero(nv + ne);
      dirs.push_back(d);
    }
    worst = std::max(
        worst, fd_gradient_check(sys, grid, w, cost, dirs,
                                 cfg.get("fd_step", 1e-5)));
  }

  write_history(dir, {});
  write_empty_csv(dir, "flow.csv");
  write_empty_csv(dir, "control.csv");
  std::map<std::string, double> summary;
  summary["final_cost"] = worst;
  summary["oracle_cost"] = 0.0;
  summary["relative_error"] = relative_error(worst, 0.0);
  summary["iterations"] = n_dirs;
  // Default tolerance leaves headroom for central-difference noise against
  // the sharp (eps = 0.001) barrier; tighten via --param tolerance=... when
  // checking smooth configurations.
  const bool ok = worst <= cfg.get("tolerance", 1e-5);
  write_summary(dir, summary, ok ? "tolerance" : "line_search_failure");
  if (!ok)
    throw std::runtime_error("gradient check failed: worst error " +
                             std::to_string(worst));
  return summary;
}

}  // namespace

double ExperimentConfig::get(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "mode") {
    cfg.mode = value;
  } else if (key == "instance") {
    cfg.instance = value;
  } else if (key == "out") {
    cfg.out_dir = value;
  } else {
    std::size_t used = 0;
    double parsed = 0.0;
    try {
      parsed = std::stod(value, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("parameter " + key +
                                  " needs a numeric value, got: " + value);
    }
    if (used != value.size())
      throw std::invalid_argument("parameter " + key +
                                  " needs a numeric value, got: " + value);
    cfg.params[key] = parsed;
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_override(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  return cfg;
}

std::map<std::string, double> run_experiment(const ExperimentConfig& cfg) {
  const Network net = resolve_instance(cfg.instance);
  if (cfg.out_dir.empty())
    throw std::invalid_argument("no output directory specified");
  fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir.string());

  if (cfg.mode == "oracle") return run_oracle(cfg, net, dir);
  if (cfg.mode == "static-kkt" || cfg.mode == "static-barrier")
    return run_static(cfg, net, dir);
  if (cfg.mode == "dynamic-linear" || cfg.mode == "dynamic-hat")
    return run_dynamic_mode(cfg, net, dir);
  if (cfg.mode == "gradcheck") return run_gradcheck(cfg, net, dir);
  throw std::invalid_argument("unknown mode: " + cfg.mode);
}

std::vector<ReproCase> reproduce_cases(const std::string& out_root,
                                       bool quick) {
  const fs::path root(out_root);
  auto make = [&](const std::string& name, const std::string& mode,
                  const std::string& instance) {
    ReproCase c;
    c.name = name;
    c.config.mode = mode;
    c.config.instance = instance;
    c.config.out_dir = (root / name).string();
    if (quick) {
      if (mode == "static-barrier") c.config.params["max_iters"] = 10;
      if (mode == "dynamic-linear" || mode == "dynamic-hat") {
        c.config.params["nt"] = 100;
        c.config.params["max_iters"] = 10;
      }
    }
    return c;
  };
  return {
      make("fig1-kkt", "static-kkt", "fig1"),
      make("ep1-barrier", "static-barrier", "ep1"),
      make("ep2-barrier", "static-barrier", "ep2"),
      make("ep3-barrier", "static-barrier", "ep3"),
      make("diamond-linear", "dynamic-linear", "diamond"),
      make("diamond-hat", "dynamic-hat", "diamond"),
  };
}

namespace {

double fetch(const std::map<std::string, double>& summary,
             const std::string& key) {
  const auto it = summary.find(key);
  if (it == summary.end())
    throw std::invalid_argument("summary missing key: " + key);
  return it->second;
}

CheckResult check_value(double got, double want, double tol,
                        const std::string& label) {
  CheckResult r;
  std::ostringstream os;
  os.precision(6);
  r.pass = std::isfinite(got) && std::abs(got - want) <= tol;
  os << label << "=" << got << " (want " << want << " +/- " << tol << ")";
  r.detail = os.str();
  return r;
}

CheckResult merge(std::initializer_list<CheckResult> parts) {
  CheckResult all;
  all.pass = true;
  for (const CheckResult& p : parts) {
    all.pass = all.pass && p.pass;
    if (!all.detail.empty()) all.detail += "; ";
    all.detail += p.detail;
  }
  return all;
}

CheckResult check_dynamic(const std::map<std::string, double>& summary,
                          const std::vector<double>& x_final,
                          const std::vector<double>& x_mid, bool quick) {
  const double cost = fetch(summary, "final_cost");
  if (quick) {
    // Coarse grid, few iterations: require descent from the uncontrolled
    // cost (1200) while staying above the analytic optimum.
    return check_value(cost, 1099.5, 100.5, "final_cost");
  }
  std::vector<CheckResult> parts;
  parts.push_back(check_value(cost, 1050.0, 50.0, "final_cost"));
  for (size_t e = 0; e < x_final.size(); ++e)
    parts.push_back(check_value(
        fetch(summary, "x_final_" + std::to_string(e + 1)), x_final[e], 0.05,
        "x_final_" + std::to_string(e + 1)));
  for (size_t e = 0; e < x_mid.size(); ++e)
    parts.push_back(check_value(
        fetch(summary, "x_mid_" + std::to_string(e + 1)), x_mid[e], 0.05,
        "x_mid_" + std::to_string(e + 1)));
  CheckResult all;
  all.pass = true;
  for (const CheckResult& p : parts) {
    all.pass = all.pass && p.pass;
    if (!all.detail.empty()) all.detail += "; ";
    all.detail += p.detail;
  }
  return all;
}

}  // namespace

CheckResult evaluate_expectation(const std::string& name,
                                 const std::map<std::string, double>& summary,
                                 bool quick) {
  if (name == "fig1-kkt") {
    return merge({check_value(fetch(summary, "relative_error"), 0.0, 1e-9,
                              "relative_error"),
                  check_value(fetch(summary, "iterations"), 1.0, 0.5,
                              "iterations")});
  }
  if (name == "ep1-barrier" || name == "ep2-barrier" ||
      name == "ep3-barrier") {
    const double target = name == "ep1-barrier"   ? 0.0392
                          : name == "ep2-barrier" ? 0.0277
                                                  : 0.0430;
    if (quick) {
      // 10 iterations: only require clear improvement from the worst-case
      // start (relative error at the start is 0.90 / 0.35 / 0.71).
      const double start_rel = name == "ep1-barrier"   ? 0.9048
                               : name == "ep2-barrier" ? 0.35
                                                       : 0.7123;
      return check_value(fetch(summary, "relative_error"), 0.0,
                         0.9 * start_rel, "relative_error");
    }
    return check_value(fetch(summary, "relative_error"), target, 0.02,
                       "relative_error");
  }
  if (name == "diamond-linear") {
    return check_dynamic(summary, {0.0213, 3.9787, 0.0213, 3.9787}, {}, quick);
  }
  if (name == "diamond-hat") {
    return check_dynamic(summary, {3.9984, 0.0016, 3.9984, 0.0016},
                         {0.0011, 3.9989, 0.0011, 3.9989}, quick);
  }
  throw std::invalid_argument("unknown reproduction case: " + name);
}

bool reproduce(const std::string& out_root, bool quick, std::ostream& report) {
  const std::vector<ReproCase> cases = reproduce_cases(out_root, quick);
  std::ostringstream table;
  bool all_pass = true;
  for (const ReproCase& c : cases) {
    CheckResult res;
    try {
      const auto summary = run_experiment(c.config);
      res = evaluate_expectation(c.name, summary, quick);
    } catch (const std::exception& ex) {
      res.pass = false;
      res.detail = std::string("error: ") + ex.what();
    }
    all_pass = all_pass && res.pass;
    table << (res.pass ? "PASS" : "FAIL") << "  " << c.name << "  "
          << res.detail << "\n";
  }
  table << (all_pass ? "ALL PASS" : "BATCH FAILED") << "\n";
  report << table.str();
  auto file = open_output(fs::path(out_root) / "report.txt");
  file << table.str();
  return all_pass;
}

}  // namespace phflow

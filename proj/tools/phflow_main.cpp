#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phflow/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kNumericalError = 2;
constexpr int kIoError = 3;

int dispatch(const std::string& mode, const std::string& config_file,
             const std::string& instance,
             const std::vector<std::string>& params, const std::string& out,
             bool quick) {
  if (mode == "reproduce") {
    const std::string root = out.empty() ? "reproduce_out" : out;
    return phflow::reproduce(root, quick, std::cout) ? kOk : kNumericalError;
  }

  phflow::ExperimentConfig cfg;
  if (!config_file.empty()) cfg = phflow::load_config_file(config_file);
  cfg.mode = mode;
  if (!instance.empty()) cfg.instance = instance;
  if (!out.empty()) cfg.out_dir = out;
  for (const std::string& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--param expects key=value, got: " + p);
    phflow::apply_override(cfg, p.substr(0, eq), p.substr(eq + 1));
  }
  phflow::run_experiment(cfg);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phflow: port-Hamiltonian network flow optimal control"};

  std::string mode;
  std::string instance;
  std::string out;
  std::string config_file;
  std::vector<std::string> params;
  bool quick = false;

  app.add_option("mode", mode,
                 "static-kkt | static-barrier | dynamic-linear | dynamic-hat "
                 "| oracle | gradcheck | reproduce")
      ->required();
  app.add_option("--instance", instance, "builtin name or DIMACS file path");
  app.add_option("--config", config_file, "key=value configuration file");
  app.add_option("--param", params, "parameter override key=value");
  app.add_option("--out", out, "output directory");
  app.add_flag("--quick", quick, "reproduce: coarse grid, few iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    return dispatch(mode, config_file, instance, params, out, quick);
  } catch (const phflow::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  }
}

#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace phflow {

// Thrown for filesystem problems so the CLI can map them to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key=value configuration. Recognized string keys: mode, instance, out;
// every other key must parse as a number. CLI --param overrides win over the
// config file.
struct ExperimentConfig {
  std::string mode;      // static-kkt | static-barrier | dynamic-linear |
                         // dynamic-hat | oracle | gradcheck
  std::string instance;  // builtin name or DIMACS file path
  std::string out_dir;
  std::map<std::string, double> params;

  // Numeric parameter with a per-mode/per-instance default.
  double get(const std::string& key, double fallback) const;
};

ExperimentConfig load_config_file(const std::string& path);
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// Executes the configured driver and returns the summary key=value map
// (also written to <out>/summary along with history.csv, flow.csv,
// control.csv). Throws std::invalid_argument for usage errors, IoError for
// filesystem errors, and std::runtime_error/std::domain_error for numerical
// failures.
std::map<std::string, double> run_experiment(const ExperimentConfig& cfg);

// One row of the reproduction batch.
struct ReproCase {
  std::string name;
  ExperimentConfig config;
};

std::vector<ReproCase> reproduce_cases(const std::string& out_root,
                                       bool quick);

struct CheckResult {
  bool pass = false;
  std::string detail;
};

// Pure expectation check against a summary map, so corrupted results can be
// exercised in tests without running the drivers.
CheckResult evaluate_expectation(const std::string& name,
                                 const std::map<std::string, double>& summary,
                                 bool quick);

// Runs all canonical configurations under out_root, prints a pass/fail table
// to `report` and writes the same table to <out_root>/report.txt.
// Returns true when every row passes.
bool reproduce(const std::string& out_root, bool quick, std::ostream& report);

}  // namespace phflow

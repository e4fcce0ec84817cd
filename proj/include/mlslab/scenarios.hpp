#pragma once

// Named experiments. Each one reads an ExperimentConfig, writes CSV tables
// into an output directory and records one verdict per acceptance item it
// covers.

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mlslab/config.hpp"

namespace mlslab {

struct Verdict {
  int criterion = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

/// "VERDICT <scenario> criterion=<n> <name> PASS|FAIL <detail>"
std::string verdict_line(const std::string& scenario, const Verdict& v);

class RunContext {
 public:
  explicit RunContext(std::filesystem::path out_dir);

  /// Writes `content` verbatim (LF line endings) to out_dir/name.
  void write_csv(const std::string& name, const std::string& content);
  void verdict(int criterion, const std::string& name, bool pass, const std::string& detail);
  /// Free-form numbers for the manifest.
  void note(const std::string& key, double value) { notes_[key] = value; }

  const std::filesystem::path& out_dir() const { return out_; }
  const std::vector<Verdict>& verdicts() const { return verdicts_; }
  const std::vector<std::string>& files() const { return files_; }
  const std::map<std::string, double>& notes() const { return notes_; }

 private:
  std::filesystem::path out_;
  std::vector<Verdict> verdicts_;
  std::vector<std::string> files_;
  std::map<std::string, double> notes_;
};

struct ScenarioInfo {
  std::string name;
  std::string summary;
  std::vector<int> criteria;
  ScenarioDefaults defaults;
  std::function<void(const ExperimentConfig&, RunContext&)> run;
};

const std::vector<ScenarioInfo>& scenario_registry();
/// Throws ConfigError listing the valid names.
const ScenarioInfo& find_scenario(const std::string& name);

struct RunResult {
  std::vector<Verdict> verdicts;
  double wall_seconds = 0.0;
  bool all_pass = false;
};

/// Runs the scenario and writes manifest.json and verdicts.txt next to its
/// CSV files. Errors from the modules propagate.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Resolves `doc` (after overrides) against the named scenario's defaults.
ExperimentConfig load_experiment(const nlohmann::json& doc);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mlslab

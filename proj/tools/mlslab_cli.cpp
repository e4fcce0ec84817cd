// Command-line runner for the named experiments.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlslab/scenarios.hpp"

using namespace mlslab;

int main(int argc, char** argv) {
  CLI::App app{"mlslab: concentration experiments for lattice spin systems"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "Worker threads for inner loops")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "Run a scenario from a config file");
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Sampler seed (overrides sampler.seed)");
  run->add_option("--set", overrides, "Override key=value (dotted path)")->take_all();

  app.add_subcommand("list", "List the scenarios");
  auto* describe = app.add_subcommand("describe", "Show a scenario's defaults");
  std::string name;
  describe->add_option("name", name, "Scenario name")->required();

  CLI11_PARSE(app, argc, argv);
  set_worker_count(workers);

  try {
    if (app.got_subcommand("list")) {
      for (const auto& s : scenario_registry()) {
        std::string crit;
        for (int c : s.criteria) crit += (crit.empty() ? "" : ",") + std::to_string(c);
        std::cout << s.name << "\tcriteria=" << crit << "\t" << s.summary << '\n';
      }
      return 0;
    }
    if (app.got_subcommand("describe")) {
      const auto& s = find_scenario(name);
      const nlohmann::json d = {{"scenario", s.name},
                                {"model", s.defaults.model},
                                {"orlicz", s.defaults.orlicz},
                                {"sampler", {{"samples", s.defaults.samples}, {"burn_in", s.defaults.burn_in}}},
                                {"knobs", s.defaults.knobs}};
      std::cout << d.dump(2) << '\n';
      return 0;
    }
    auto doc = read_config_file(config_path);
    for (const auto& o : overrides) apply_override(doc, o);
    if (seed) apply_override(doc, "sampler.seed=" + std::to_string(*seed));
    const auto cfg = load_experiment(doc);
    const auto res = run_experiment(cfg, out_dir);
    for (const auto& v : res.verdicts) std::cout << verdict_line(cfg.scenario, v) << '\n';
    std::cout << "wrote " << out_dir << " in " << format_double(res.wall_seconds) << " s\n";
    return res.all_pass ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const BudgetError& e) {
    std::cerr << "budget error: " << e.what() << " (requested " << e.requested() << ", budget "
              << e.budget() << "; use a smaller box or grid)\n";
  } catch (const TailContainmentError& e) {
    std::cerr << "tail containment error: " << e.what() << " (widen model.grid.Lx)\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 2;
}

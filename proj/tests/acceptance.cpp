// Runs every scenario with its default configuration and prints one
// PASS/FAIL line per acceptance criterion.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "mlslab/scenarios.hpp"

using namespace mlslab;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240601;

// Wall-clock limits per criterion, in seconds.
const std::map<int, double> kBudget{{1, 10},  {2, 30},  {3, 30},  {4, 300}, {5, 120},
                                    {6, 300}, {7, 120}, {8, 600}, {9, 900}};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Tally {
  bool pass = true;
  int checks = 0;
  double seconds = 0.0;
  std::string first_failure;
};

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "mlslab_acceptance";
  fs::remove_all(root);
  std::map<int, Tally> tally;
  bool reproducible = true;
  std::string repro_detail;

  for (const auto& info : scenario_registry()) {
    const nlohmann::json doc = {{"scenario", info.name}, {"sampler", {{"seed", kSeed}}}};
    const auto cfg = load_experiment(doc);
    RunResult first, second;
    try {
      set_worker_count(1);
      first = run_experiment(cfg, root / "a" / info.name);
      set_worker_count(2);
      second = run_experiment(cfg, root / "b" / info.name);
      set_worker_count(1);
    } catch (const std::exception& e) {
      for (int c : info.criteria) {
        tally[c].pass = false;
        if (tally[c].first_failure.empty()) tally[c].first_failure = info.name + ": " + e.what();
      }
      reproducible = false;
      continue;
    }
    for (const auto& v : first.verdicts) {
      std::cout << verdict_line(info.name, v) << '\n';
      auto& t = tally[v.criterion];
      ++t.checks;
      if (!v.pass) {
        t.pass = false;
        if (t.first_failure.empty()) t.first_failure = info.name + "/" + v.name + " " + v.detail;
      }
    }
    for (int c : info.criteria) tally[c].seconds += first.wall_seconds;

    const auto manifest = nlohmann::json::parse(slurp(root / "a" / info.name / "manifest.json"));
    for (const auto& f : manifest.at("files")) {
      const auto name = f.get<std::string>();
      if (slurp(root / "a" / info.name / name) != slurp(root / "b" / info.name / name)) {
        reproducible = false;
        repro_detail += " " + info.name + "/" + name;
      }
    }
  }

  bool all = true;
  std::cout << '\n';
  for (int c = 1; c <= 9; ++c) {
    auto& t = tally[c];
    const double limit = kBudget.at(c);
    const bool in_time = t.seconds <= limit;
    const bool ok = t.pass && t.checks > 0 && in_time;
    all = all && ok;
    std::cout << "criterion " << c << ' ' << (ok ? "PASS" : "FAIL") << " checks=" << t.checks
              << " seconds=" << format_double(std::round(t.seconds * 100) / 100) << " limit=" << limit;
    if (!t.first_failure.empty()) std::cout << " first_failure=" << t.first_failure;
    if (!in_time) std::cout << " over-time";
    std::cout << '\n';
  }
  all = all && reproducible;
  std::cout << "criterion 10 " << (reproducible ? "PASS" : "FAIL")
            << " every CSV identical across two runs (1 and 2 workers)";
  if (!repro_detail.empty()) std::cout << " differs:" << repro_detail;
  std::cout << '\n';
  fs::remove_all(root);
  return all ? 0 : 1;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mlslab/scenarios.hpp"

using namespace mlslab;
using nlohmann::json;

namespace {

json minimal(const std::string& scenario) {
  return {{"scenario", scenario}, {"sampler", {{"seed", 7}}}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("registry") {
  const std::set<std::string> want{"orlicz-suite",  "one-site-constants", "tensorisation", "sweep-convergence",
                                   "gradient-sweep", "entropy-decay",     "tail-product",  "tail-gibbs",
                                   "enlargement",   "talagrand",          "perturbation-s3"};
  std::set<std::string> got;
  for (const auto& s : scenario_registry()) {
    got.insert(s.name);
    CHECK_FALSE(s.criteria.empty());
  }
  CHECK(got == want);
  try {
    find_scenario("no-such");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tail-product") != std::string::npos);
  }
}

TEST_CASE("defaults, overrides and strictness") {
  auto doc = minimal("tail-product");
  const auto cfg = load_experiment(doc);
  CHECK(cfg.sampler.seed == 7);
  CHECK(cfg.model.box_radius == 2);
  CHECK(cfg.knob("check_r") == 2.0);

  apply_override(doc, "model.J=0.01");
  apply_override(doc, "model.J0=0.02");
  apply_override(doc, "knobs.r_points=5");
  apply_override(doc, "sampler.samples=12000");
  const auto over = load_experiment(doc);
  CHECK(over.model.J == 0.01);
  CHECK(over.knob_int("r_points") == 5);
  CHECK(over.sampler.samples == 12000);
  // Unchanged keys keep their defaults.
  CHECK(over.model.box_radius == 2);

  auto bad = minimal("tail-product");
  apply_override(bad, "knobs.nonsense=1");
  CHECK_THROWS_AS(load_experiment(bad), ConfigError);
  bad = minimal("tail-product");
  bad["extra"] = 1;
  CHECK_THROWS_AS(load_experiment(bad), ConfigError);
  bad = minimal("tail-product");
  apply_override(bad, "model.phase.colour=red");
  CHECK_THROWS_AS(load_experiment(bad), ConfigError);
  bad = minimal("tail-product");
  apply_override(bad, "knobs.check_r=two");
  CHECK_THROWS_AS(load_experiment(bad), ConfigError);
  bad = minimal("tail-product");
  bad["sampler"].erase("seed");
  CHECK_THROWS_AS(load_experiment(bad), ConfigError);
  CHECK_THROWS_AS(apply_override(bad, "novalue"), ConfigError);
  CHECK_THROWS_AS(load_experiment(json{{"scenario", "missing"}, {"sampler", {{"seed", 1}}}}), ConfigError);
}

TEST_CASE("config files") {
  const auto dir = std::filesystem::temp_directory_path() / "mlslab_config_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "broken.json") << "{\"scenario\": ";
  CHECK_THROWS_AS(read_config_file((dir / "broken.json").string()), ConfigError);
  CHECK_THROWS_AS(read_config_file((dir / "absent.json").string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("content hash") {
  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") == "af63dc4c8601ec8c");
}

TEST_CASE("run writes manifest, verdicts and reproducible CSVs") {
  const auto base = std::filesystem::temp_directory_path() / "mlslab_run_test";
  std::filesystem::remove_all(base);
  auto doc = minimal("orlicz-suite");
  apply_override(doc, "knobs.young_pairs=500");
  const auto cfg = load_experiment(doc);
  const auto a = run_experiment(cfg, base / "a");
  set_worker_count(3);
  const auto b = run_experiment(cfg, base / "b");
  set_worker_count(1);
  CHECK(a.all_pass);
  CHECK(b.all_pass);
  const auto manifest = json::parse(slurp(base / "a" / "manifest.json"));
  CHECK(manifest.at("scenario") == "orlicz-suite");
  CHECK(manifest.at("input_hash").get<std::string>().size() == 16);
  CHECK(manifest.at("config").at("sampler").at("seed") == 7);
  for (const auto& f : manifest.at("files")) {
    const auto name = f.get<std::string>();
    const auto text = slurp(base / "a" / name);
    CHECK(text == slurp(base / "b" / name));
    CHECK(text.find('\r') == std::string::npos);
  }
  CHECK(slurp(base / "a" / "verdicts.txt").rfind("VERDICT orlicz-suite criterion=1", 0) == 0);
  std::filesystem::remove_all(base);
}

TEST_CASE("no-interaction sweep reports a below-floor rate") {
  const auto base = std::filesystem::temp_directory_path() / "mlslab_sweep_j0";
  auto doc = minimal("sweep-convergence");
  apply_override(doc, "model.J=0");
  apply_override(doc, "sampler.samples=2000");
  const auto res = run_experiment(load_experiment(doc), base);
  REQUIRE_FALSE(res.verdicts.empty());
  CHECK(res.verdicts.front().detail.find("below-floor") != std::string::npos);
  CHECK(res.all_pass);
  std::filesystem::remove_all(base);
}

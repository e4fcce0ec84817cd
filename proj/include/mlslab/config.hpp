#pragma once

// Experiment configuration: strict JSON documents, dotted-path overrides and
// resolution against per-scenario defaults.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mlslab/orlicz.hpp"
#include "mlslab/specification.hpp"

namespace mlslab {

struct SamplerSpec {
  int samples = 10000;
  int burn_in = 200;
  std::uint64_t seed = 0;
};

/// What a scenario falls back to for every key the config leaves out.
struct ScenarioDefaults {
  nlohmann::json model = nlohmann::json::object();
  nlohmann::json orlicz = {{"kind", "power"}, {"p", 2.0}};
  int samples = 10000;
  int burn_in = 200;
  nlohmann::json knobs = nlohmann::json::object();
};

struct ExperimentConfig {
  std::string scenario;
  spec::SpinModel model;
  orlicz::YoungFunction phi = orlicz::YoungFunction::power(2.0);
  SamplerSpec sampler;
  nlohmann::json knobs = nlohmann::json::object();
  /// Fully resolved document, echoed into the manifest.
  nlohmann::json resolved;

  double knob(const std::string& name) const;
  int knob_int(const std::string& name) const;
  std::vector<double> knob_list(const std::string& name) const;
};

/// Parses a JSON file; syntax errors become ConfigError with the position.
nlohmann::json read_config_file(const std::string& path);

/// Applies "a.b.c=value". The value is read as JSON when it parses, else as
/// a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Reads the scenario name without validating anything else.
std::string scenario_name(const nlohmann::json& doc);

/// Validates `doc` against the top-level schema and the scenario's knob
/// set, fills defaults and builds the typed configuration. Unknown keys,
/// wrong types and a missing seed are ConfigErrors.
ExperimentConfig resolve_config(const nlohmann::json& doc, const ScenarioDefaults& defaults);

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string content_hash(std::string_view text);

}  // namespace mlslab

#include "mlslab/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mlslab {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  require_object(j, where);
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

bool same_shape(const json& want, const json& got) {
  if (want.is_number()) return got.is_number();
  if (want.is_array()) {
    if (!got.is_array()) return false;
    if (want.empty()) return true;
    for (const auto& e : got)
      if (!same_shape(want.front(), e)) return false;
    return true;
  }
  return want.type() == got.type();
}

const char* type_name(const json& j) {
  if (j.is_number()) return "number";
  if (j.is_array()) return "array";
  return j.type_name();
}

}  // namespace

double ExperimentConfig::knob(const std::string& name) const {
  if (!knobs.contains(name)) throw ConfigError("scenario has no knob '" + name + "'");
  return knobs.at(name).get<double>();
}

int ExperimentConfig::knob_int(const std::string& name) const {
  const double v = knob(name);
  if (v != static_cast<int>(v)) throw ConfigError("knob '" + name + "' must be an integer");
  return static_cast<int>(v);
}

std::vector<double> ExperimentConfig::knob_list(const std::string& name) const {
  if (!knobs.contains(name)) throw ConfigError("scenario has no knob '" + name + "'");
  return knobs.at(name).get<std::vector<double>>();
}

json read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override must look like key=value: '" + std::string(assignment) + "'");
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("empty component in override path '" + path + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override path '" + path + "' runs through a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string scenario_name(const json& doc) {
  require_object(doc, "config");
  if (!doc.contains("scenario") || !doc.at("scenario").is_string())
    throw ConfigError("config needs a string 'scenario'");
  return doc.at("scenario").get<std::string>();
}

ExperimentConfig resolve_config(const json& doc, const ScenarioDefaults& defaults) {
  try {
    reject_unknown(doc, {"scenario", "model", "orlicz", "sampler", "knobs"}, "config");
    ExperimentConfig cfg;
    cfg.scenario = scenario_name(doc);

    json model = defaults.model;
    if (doc.contains("model")) {
      require_object(doc.at("model"), "model");
      model.merge_patch(doc.at("model"));
    }
    cfg.model = spec::SpinModel::from_json(model);
    cfg.model.validate();

    const json orlicz = doc.contains("orlicz") ? doc.at("orlicz") : defaults.orlicz;
    cfg.phi = orlicz::YoungFunction::from_json(orlicz);

    json sampler = json::object();
    if (doc.contains("sampler")) sampler = doc.at("sampler");
    reject_unknown(sampler, {"samples", "burn_in", "seed"}, "sampler");
    if (!sampler.contains("seed"))
      throw ConfigError("sampler.seed is mandatory (set it in the file or pass --seed)");
    const json& seed = sampler.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<long long>() < 0))
      throw ConfigError("sampler.seed must be a nonnegative integer");
    cfg.sampler.seed = sampler.at("seed").get<std::uint64_t>();
    cfg.sampler.samples = sampler.value("samples", defaults.samples);
    cfg.sampler.burn_in = sampler.value("burn_in", defaults.burn_in);
    if (cfg.sampler.samples < 1) throw ConfigError("sampler.samples must be positive");
    if (cfg.sampler.burn_in < 0) throw ConfigError("sampler.burn_in must be nonnegative");

    cfg.knobs = defaults.knobs;
    if (doc.contains("knobs")) {
      const json& k = doc.at("knobs");
      require_object(k, "knobs");
      for (const auto& [name, v] : k.items()) {
        if (!defaults.knobs.contains(name)) {
          std::string known;
          for (const auto& [n, d] : defaults.knobs.items()) known += (known.empty() ? "" : ", ") + n;
          throw ConfigError("unknown knob '" + name + "' for scenario " + cfg.scenario +
                            " (known: " + known + ")");
        }
        if (!same_shape(defaults.knobs.at(name), v))
          throw ConfigError("knob '" + name + "' must be a " + type_name(defaults.knobs.at(name)));
        cfg.knobs[name] = v;
      }
    }

    cfg.resolved = {{"scenario", cfg.scenario},
                    {"model", cfg.model.to_json()},
                    {"orlicz", cfg.phi.to_json()},
                    {"sampler",
                     {{"samples", cfg.sampler.samples},
                      {"burn_in", cfg.sampler.burn_in},
                      {"seed", cfg.sampler.seed}}},
                    {"knobs", cfg.knobs}};
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
  }
}

std::string content_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace mlslab

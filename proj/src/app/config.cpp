#include "windloss/app/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace windloss::app {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

ColumnMapping mapping_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object of field -> header");
  ColumnMapping m;
  for (const auto& item : j.items()) m[item.key()] = item.value().get<std::string>();
  return m;
}

ModelChoice model_from_json(const nlohmann::json& j) {
  ModelChoice m;
  if (j.is_object()) {
    m.source = ModelChoice::Source::explicit_params;
    m.params = forest_params_from_json(j);
    return m;
  }
  const auto name = j.get<std::string>();
  if (name == "default") {
    m.source = ModelChoice::Source::defaults;
  } else if (name == "reference_tuned") {
    m.source = ModelChoice::Source::reference_tuned;
  } else if (name == "tuned") {
    m.source = ModelChoice::Source::tuned;
  } else {
    throw ConfigError("model must be \"default\", \"reference_tuned\", \"tuned\" or a parameter object, got \"" +
                      name + "\"");
  }
  return m;
}

nlohmann::json model_to_json(const ModelChoice& m) {
  switch (m.source) {
    case ModelChoice::Source::defaults: return "default";
    case ModelChoice::Source::reference_tuned: return "reference_tuned";
    case ModelChoice::Source::tuned: return "tuned";
    case ModelChoice::Source::explicit_params: return to_json(m.params);
  }
  return nullptr;
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

SplitOptions RunConfig::split_options() const {
  return {test_fraction, split_seed.value_or(seed), stratified};
}

ParamGrid default_grid() {
  ParamGrid g;
  g.n_estimators = {100, 1135};
  g.min_samples_split = {2, 5};
  g.min_samples_leaf = {1, 4};
  g.max_features = {MaxFeatures{}};
  g.max_depth = {std::nullopt, 100, 10};
  g.criterion = {Criterion::gini};
  return g;
}

RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  c.grid = default_grid();
  reject_unknown(j,
                 {"inputs", "columns", "study_window", "labeling", "split", "model", "tuning", "output_dir", "threads",
                  "seed", "synth"},
                 "config");
  try {
    if (j.contains("inputs")) {
      const auto& in = j["inputs"];
      reject_unknown(in, {"events", "meteo", "resilience"}, "inputs");
      c.events_path = in.value("events", c.events_path);
      c.meteo_path = in.value("meteo", c.meteo_path);
      c.resilience_path = in.value("resilience", c.resilience_path);
    }
    if (j.contains("columns")) {
      const auto& cols = j["columns"];
      reject_unknown(cols, {"events", "meteo", "resilience"}, "columns");
      if (cols.contains("events")) c.events_columns = mapping_from_json(cols["events"], "columns.events");
      if (cols.contains("meteo")) c.meteo_columns = mapping_from_json(cols["meteo"], "columns.meteo");
      if (cols.contains("resilience")) {
        c.resilience_columns = mapping_from_json(cols["resilience"], "columns.resilience");
      }
    }
    if (j.contains("study_window")) {
      const auto& w = j["study_window"];
      reject_unknown(w, {"first_year", "last_year"}, "study_window");
      c.window.first_year = w.value("first_year", c.window.first_year);
      c.window.last_year = w.value("last_year", c.window.last_year);
    }
    if (j.contains("labeling")) {
      const auto& l = j["labeling"];
      reject_unknown(l, {"min_massive_events"}, "labeling");
      c.min_massive_events = l.value("min_massive_events", c.min_massive_events);
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      reject_unknown(s, {"test_fraction", "stratified", "seed"}, "split");
      c.test_fraction = s.value("test_fraction", c.test_fraction);
      c.stratified = s.value("stratified", c.stratified);
      if (s.contains("seed")) c.split_seed = s["seed"].get<std::uint64_t>();
    }
    if (j.contains("model")) c.model = model_from_json(j["model"]);
    if (j.contains("tuning")) {
      const auto& t = j["tuning"];
      reject_unknown(t, {"grid", "folds", "metric"}, "tuning");
      if (t.contains("grid")) c.grid = param_grid_from_json(t["grid"]);
      c.cv_folds = t.value("folds", c.cv_folds);
      if (t.contains("metric")) {
        const auto metric = parse_selection_metric(t["metric"].get<std::string>());
        if (!metric) throw ConfigError("unknown selection metric " + t["metric"].dump());
        c.selection_metric = *metric;
      }
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.threads = j.value("threads", c.threads);
    c.seed = j.value("seed", c.seed);
    if (j.contains("synth")) {
      if (j["synth"].contains("seed")) throw ConfigError("synth.seed is not allowed; the top-level seed drives synth");
      c.synth = synth_config_from_json(j["synth"]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return config_from_json(j, base);
}

namespace {

// The top-level seed drives generation, so the synth block carries none.
nlohmann::json synth_json(const SynthConfig& synth) {
  auto j = to_json(synth);
  j.erase("seed");
  return j;
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json split{{"test_fraction", c.test_fraction}, {"stratified", c.stratified}};
  if (c.split_seed) split["seed"] = *c.split_seed;
  return {{"inputs", {{"events", c.events_path}, {"meteo", c.meteo_path}, {"resilience", c.resilience_path}}},
          {"columns",
           {{"events", c.events_columns}, {"meteo", c.meteo_columns}, {"resilience", c.resilience_columns}}},
          {"study_window", {{"first_year", c.window.first_year}, {"last_year", c.window.last_year}}},
          {"labeling", {{"min_massive_events", c.min_massive_events}}},
          {"split", std::move(split)},
          {"model", model_to_json(c.model)},
          {"tuning", {{"grid", to_json(c.grid)}, {"folds", c.cv_folds}, {"metric", to_string(c.selection_metric)}}},
          {"output_dir", c.output_dir},
          {"threads", c.threads},
          {"seed", c.seed},
          {"synth", synth_json(c.synth)}};
}

void apply(RunConfig& config, const Overrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.threads) config.threads = *overrides.threads;
  if (overrides.output_dir) {
    // Flag paths are relative to the working directory, not the config file.
    config.output_dir = std::filesystem::absolute(*overrides.output_dir).string();
  }
  validate(config);
}

void validate(const RunConfig& c) {
  if (c.window.first_year > c.window.last_year) throw ConfigError("study_window: first_year after last_year");
  if (c.min_massive_events < 3) throw ConfigError("labeling.min_massive_events must be at least 3");
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("split.test_fraction must lie in (0, 1)");
  if (c.cv_folds < 2) throw ConfigError("tuning.folds must be at least 2");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  try {
    c.grid.validate();
    c.synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void require_inputs(const RunConfig& c) {
  const std::pair<const char*, const std::string*> inputs[] = {
      {"events", &c.events_path}, {"meteo", &c.meteo_path}, {"resilience", &c.resilience_path}};
  for (const auto& [name, path] : inputs) {
    if (path->empty()) throw ConfigError(std::string("inputs.") + name + " is not set");
    const auto resolved = c.resolve(*path);
    if (!std::filesystem::is_regular_file(resolved)) {
      throw ConfigError(std::string(name) + " input not found: " + resolved.string());
    }
  }
}

std::string config_hash(const RunConfig& config) {
  auto canonical = to_json(config);
  canonical.erase("output_dir");
  canonical.erase("threads");
  const auto text = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace windloss::app

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "windloss/data_model.hpp"
#include "windloss/forest.hpp"
#include "windloss/labeling.hpp"
#include "windloss/synth.hpp"
#include "windloss/tuning.hpp"

namespace windloss::app {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Which hyperparameters `train` uses.
struct ModelChoice {
  enum class Source : std::uint8_t { defaults, reference_tuned, tuned, explicit_params };
  Source source = Source::defaults;
  ForestHyperparams params;  ///< only for explicit_params
};

/// Everything one pipeline run needs. Relative paths resolve against `base_dir`.
struct RunConfig {
  std::filesystem::path base_dir = ".";

  std::string events_path;
  std::string meteo_path;
  std::string resilience_path;
  ColumnMapping events_columns;
  ColumnMapping meteo_columns;
  ColumnMapping resilience_columns;
  StudyWindow window;

  std::size_t min_massive_events = 12;
  double test_fraction = 0.25;
  bool stratified = true;
  std::optional<std::uint64_t> split_seed;  ///< falls back to `seed`

  ModelChoice model;
  ParamGrid grid;
  int cv_folds = 5;
  SelectionMetric selection_metric = SelectionMetric::macro_f1;

  std::string output_dir = "out";
  int threads = 1;
  std::uint64_t seed = 42;
  SynthConfig synth;

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path output() const { return resolve(output_dir); }
  SplitOptions split_options() const;
};

/// 24 combinations: trees {100, 1135} x split {2, 5} x leaf {1, 4} x depth
/// {unlimited, 100, 10}, sqrt features, gini. Contains reference_tuned_params().
ParamGrid default_grid();

/// Missing keys keep their defaults; unknown keys are an error.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output_dir;
};

void apply(RunConfig& config, const Overrides& overrides);

/// Throws ConfigError for out-of-range settings.
void validate(const RunConfig& config);
/// Throws ConfigError naming the first input file that does not exist.
void require_inputs(const RunConfig& config);

/// 16 hex digits of FNV-1a over the canonical JSON form, without output_dir and
/// threads (neither changes any result).
std::string config_hash(const RunConfig& config);

}  // namespace windloss::app

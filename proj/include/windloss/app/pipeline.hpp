#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "windloss/app/config.hpp"

namespace windloss::app {

/// A stage cannot run, e.g. because an upstream artifact is missing.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

namespace artifacts {
inline constexpr const char* joined = "joined.csv";
inline constexpr const char* drop_report = "drop_report.json";
inline constexpr const char* correlation = "correlation.csv";
inline constexpr const char* labeled = "labeled.csv";
inline constexpr const char* levels = "levels.json";
inline constexpr const char* split = "split.json";
inline constexpr const char* model = "model.json";
inline constexpr const char* tuning_table = "tuning.csv";
inline constexpr const char* tuning = "tuning.json";
inline constexpr const char* evaluation = "evaluation.json";
inline constexpr const char* confusion = "confusion.csv";
inline constexpr const char* importance_table = "importance.csv";
inline constexpr const char* importance = "importance.json";
inline constexpr const char* report = "report.json";
inline constexpr const char* report_text = "report.txt";
inline constexpr const char* synth = "synth.json";
}  // namespace artifacts

struct StageResult {
  std::string stage;
  std::vector<std::filesystem::path> outputs;
  std::string summary;
};

StageResult run_ingest(const RunConfig& config);
StageResult run_label(const RunConfig& config);
StageResult run_train(const RunConfig& config);
StageResult run_tune(const RunConfig& config);
StageResult run_evaluate(const RunConfig& config);
StageResult run_importance(const RunConfig& config);
StageResult run_report(const RunConfig& config);
StageResult run_synth(const RunConfig& config);

/// ingest, label, train, tune, evaluate, importance, report, synth.
const std::vector<std::string>& stage_names();

/// Dispatches by name; throws StageError for an unknown stage.
StageResult run_stage(std::string_view name, const RunConfig& config);

/// Header fields shared by every JSON artifact.
nlohmann::json provenance(std::string_view artifact, const RunConfig& config);

/// Copy of a JSON artifact without its timestamp, for determinism comparisons.
nlohmann::json without_timestamp(nlohmann::json artifact);

}  // namespace windloss::app

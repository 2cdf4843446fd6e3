#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "windloss/forest.hpp"
#include "windloss/labeling.hpp"
#include "windloss/metrics.hpp"

namespace windloss {

/// scikit-learn's RandomForestClassifier defaults: 100 trees, min_samples_split 2,
/// min_samples_leaf 1, max_features sqrt ("auto"), unlimited depth, gini.
ForestHyperparams default_params();

/// Published tuned setting: 1135 trees, min_samples_split 5, min_samples_leaf 4,
/// max_features auto (= sqrt), max_depth 100, gini.
ForestHyperparams reference_tuned_params();

struct ParamGrid {
  std::vector<int> n_estimators;
  std::vector<int> min_samples_split;
  std::vector<int> min_samples_leaf;
  std::vector<MaxFeatures> max_features;
  std::vector<std::optional<int>> max_depth;
  std::vector<Criterion> criterion;

  /// Product of the list lengths.
  std::size_t size() const;
  /// Throws std::invalid_argument when a list is empty or a value is invalid.
  void validate() const;
  /// Cartesian product, criterion varying fastest and n_estimators slowest.
  /// Every combination gets combination_seed(seed, params).
  std::vector<ForestHyperparams> combinations(std::uint64_t seed) const;
};

/// Forest seed for a combination, derived from its parameter values so that a
/// combination scores the same in any grid that contains it.
std::uint64_t combination_seed(std::uint64_t seed, const ForestHyperparams& params);

nlohmann::json to_json(const ParamGrid& grid);
ParamGrid param_grid_from_json(const nlohmann::json& j);

enum class SelectionMetric : std::uint8_t {
  macro_f1,
  weighted_f1,
  accuracy,
  macro_precision,
  macro_recall,
  weighted_precision,
  weighted_recall
};

std::string_view to_string(SelectionMetric metric);
std::optional<SelectionMetric> parse_selection_metric(std::string_view text);
double score(const EvaluationReport& report, SelectionMetric metric);

/// The held-out partition. It can be opened once; grid_search opens it after
/// model selection is complete.
class SealedTestSet {
 public:
  explicit SealedTestSet(Partition test) : test_(std::move(test)) {}

  const Partition& open();
  bool opened() const { return opens_ > 0; }
  int times_opened() const { return opens_; }

 private:
  Partition test_;
  int opens_ = 0;
};

/// Class-stratified assignment of each row to one of k folds: every class is
/// shuffled and dealt round-robin. Returns the fold index per row.
std::vector<int> stratified_folds(std::span<const int> labels, int n_classes, int folds, std::uint64_t seed);

struct CvRecord {
  ForestHyperparams params;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
};

struct TuningOptions {
  int folds = 5;
  SelectionMetric metric = SelectionMetric::macro_f1;
  std::uint64_t seed = 42;
  int threads = 1;
  int n_classes = kLossLevelCount;
};

struct TuningResult {
  std::vector<CvRecord> table;  ///< one entry per combination, in grid order
  std::size_t best_index = 0;
  ForestHyperparams best;
  SelectionMetric metric = SelectionMetric::macro_f1;
  int folds = 0;
  CvRecord default_reference;  ///< default_params() scored with the same folds
  EvaluationReport test_report;
  Forest final_model;
};

/// Cross-validated exhaustive search on `train`. The best combination (highest
/// mean fold score; ties to fewer trees, then shallower max_depth, then grid
/// order) is refit on all of `train` and evaluated once on `test`.
TuningResult grid_search(const Partition& train, SealedTestSet& test, const ParamGrid& grid,
                         const TuningOptions& options, const std::vector<std::string>& columns = {},
                         const std::vector<std::string>& class_names = {});

/// Index of the winning row under the selection and tie rules above.
std::size_t select_best(const std::vector<CvRecord>& table);

/// Per-fold rows (fold = 0..k-1) followed by one summary row (fold = "mean") per combination.
void write_tuning_csv(std::ostream& out, const TuningResult& result);
nlohmann::json to_json(const TuningResult& result, const std::vector<std::string>& class_names = {});

}  // namespace windloss

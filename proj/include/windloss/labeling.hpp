#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "windloss/data_model.hpp"

namespace windloss {

/// Ordered by loss magnitude; the underlying value is the class index.
enum class LossLevel : int { level1 = 0, level2 = 1, level3 = 2 };

inline constexpr int kLossLevelCount = 3;

std::string_view to_string(LossLevel level);           ///< "Level1" ...
std::string_view description(LossLevel level);         ///< "moderate", "severe", "catastrophic"
std::vector<std::string> loss_level_names();

struct LevelBoundary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

struct LabeledDataset {
  FeatureTable features;
  std::vector<int> labels;  ///< LossLevel class index per row
  std::array<LevelBoundary, kLossLevelCount> boundaries{};

  std::size_t size() const { return labels.size(); }
};

/// The top equal-frequency quartile of loss_eur, in input order.
std::vector<JoinedEvent> filter_massive_losses(std::span<const JoinedEvent> joined);

/// Equal-frequency tertiles of loss_eur (remainder to the lowest levels) joined
/// with the vectorized features. Rows keep input order.
LabeledDataset assign_loss_levels(std::span<const JoinedEvent> massive);

struct SplitOptions {
  double test_fraction = 0.25;
  std::uint64_t seed = 42;
  bool stratified = true;
};

struct SplitDataset {
  std::vector<std::size_t> train;  ///< ascending row indices
  std::vector<std::size_t> test;   ///< ascending row indices
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
  bool stratified = true;
};

/// Shuffle split with round(n * test_fraction) test rows. When stratified, the
/// per-class test counts are the largest-remainder apportionment of that total.
SplitDataset split(std::span<const int> labels, int n_classes, const SplitOptions& options);
SplitDataset split(const LabeledDataset& dataset, const SplitOptions& options);

struct Partition {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

Partition take_rows(const Eigen::MatrixXd& features, std::span<const int> labels,
                    std::span<const std::size_t> rows);

// --- persistence ---------------------------------------------------------------------

/// Feature columns followed by "loss_level" (1, 2 or 3).
void write_labeled_csv(std::ostream& out, const LabeledDataset& dataset);
/// Boundaries are not stored in the CSV; see boundaries_to_json.
LabeledDataset read_labeled_csv(const CsvTable& table);

nlohmann::json boundaries_to_json(const std::array<LevelBoundary, kLossLevelCount>& boundaries);
nlohmann::json to_json(const SplitDataset& split);
SplitDataset split_from_json(const nlohmann::json& j);

}  // namespace windloss

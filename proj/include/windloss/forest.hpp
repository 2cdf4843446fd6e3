#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "windloss/cart.hpp"
#include "windloss/rng.hpp"

namespace windloss {

struct ForestHyperparams {
  int n_estimators = 100;
  TreeHyperparams tree{};
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const ForestHyperparams&) const = default;
};

nlohmann::json to_json(const ForestHyperparams& params);
ForestHyperparams forest_params_from_json(const nlohmann::json& j);

class Forest {
 public:
  Forest() = default;
  Forest(std::vector<DecisionTree> trees, ForestHyperparams params, int n_classes,
         std::vector<std::string> columns, std::vector<std::string> class_names);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestHyperparams& params() const { return params_; }
  int n_classes() const { return n_classes_; }
  int n_features() const { return static_cast<int>(columns_.size()); }
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

 private:
  std::vector<DecisionTree> trees_;
  ForestHyperparams params_;
  int n_classes_ = 0;
  std::vector<std::string> columns_;
  std::vector<std::string> class_names_;
};

/// Random stream used for tree `index` of a forest seeded with `seed`.
inline Rng tree_stream(std::uint64_t seed, std::size_t index) { return Rng(derive_seed(seed, index)); }

/// n draws with replacement from [0, n).
std::vector<std::size_t> bootstrap_sample(std::size_t n, Rng& rng);

/// Tree i is grown on a bootstrap resample drawn from tree_stream(seed, i), so the
/// result does not depend on `threads` (0 = hardware concurrency).
/// Empty `columns` / `class_names` are filled with generic names.
Forest fit_forest(const Eigen::MatrixXd& features, std::span<const int> labels, int n_classes,
                  const ForestHyperparams& params, std::vector<std::string> columns = {},
                  std::vector<std::string> class_names = {}, int threads = 1);

/// Mean of the per-tree leaf distributions; one row per input row.
Eigen::MatrixXd predict_proba(const Forest& forest, const Eigen::MatrixXd& rows, int threads = 1);

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived>
int argmax_lowest(const Eigen::DenseBase<Derived>& v) {
  int best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = static_cast<int>(k);
  }
  return best;
}

std::vector<int> predict(const Forest& forest, const Eigen::MatrixXd& rows, int threads = 1);

struct FeatureImportance {
  std::string name;
  std::string category;
  double importance = 0.0;
};

struct FeatureImportanceReport {
  std::vector<FeatureImportance> features;  ///< sorted by importance, descending
  std::map<std::string, double> by_category;

  double total() const;
};

/// Mean decrease in impurity: each split adds n_node/n_root times its impurity
/// decrease to its feature; each tree is normalised to sum 1, trees are averaged,
/// and the result normalised again. All zero when no tree has a split.
FeatureImportanceReport feature_importance(const Forest& forest, const std::vector<std::string>& columns,
                                           const std::map<std::string, std::string>& categories);

/// Raw importance vector in column order.
Eigen::VectorXd impurity_importance(const Forest& forest);

/// Version-tagged envelope: format, version, hyperparams, classes, class_names, columns, trees.
nlohmann::json to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& j);

void write_importance_csv(std::ostream& out, const FeatureImportanceReport& report);
nlohmann::json to_json(const FeatureImportanceReport& report);

}  // namespace windloss

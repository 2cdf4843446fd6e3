#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "windloss/rng.hpp"

namespace windloss {

enum class Criterion : std::uint8_t { gini, entropy };

std::string_view to_string(Criterion criterion);
std::optional<Criterion> parse_criterion(std::string_view text);

/// Number of features examined per split.
struct MaxFeatures {
  enum class Kind : std::uint8_t { all, sqrt, log2, fraction };

  Kind kind = Kind::sqrt;
  double fraction = 1.0;  ///< used when kind == fraction, in (0, 1]

  /// "sqrt", "auto" (alias of sqrt), "log2", "all"/"none", or a fraction such as "0.5".
  static MaxFeatures parse(std::string_view text);
  std::string to_string() const;
  /// Always in [1, n_features].
  int resolve(int n_features) const;

  bool operator==(const MaxFeatures&) const = default;
};

struct TreeHyperparams {
  std::optional<int> max_depth;  ///< nullopt = unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  MaxFeatures max_features{};
  Criterion criterion = Criterion::gini;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  bool operator==(const TreeHyperparams&) const = default;
};

/// Gini: 1 - sum p^2. Entropy: -sum p log2 p. Zero exactly for pure nodes.
double impurity(std::span<const int> class_counts, Criterion criterion);

struct Split {
  int feature = -1;
  double threshold = 0.0;    ///< rows with value <= threshold go left
  double improvement = 0.0;  ///< parent impurity minus sample-weighted child impurity
};

/// Splits whose improvement differs by less than this are treated as ties.
inline constexpr double kSplitTolerance = 1e-12;

/// Best midpoint split of `samples` (row indices, repeats allowed) over the
/// candidate `features`. Candidates are scanned by ascending feature index and
/// threshold; a later candidate wins only if it improves by more than
/// kSplitTolerance. Returns nullopt if no split leaves min_samples_leaf on each
/// side and improves impurity.
std::optional<Split> best_split(const Eigen::MatrixXd& features, std::span<const int> labels, int n_classes,
                                std::span<const std::size_t> samples, std::span<const int> candidate_features,
                                const TreeHyperparams& params);

struct TreeNode {
  int feature = -1;  ///< -1 on leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double impurity = 0.0;
  std::vector<int> class_counts;

  bool is_leaf() const { return feature < 0; }
  int samples() const;
};

/// Immutable trained CART classifier. Nodes are stored in pre-order; node 0 is the root.
class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, int n_classes, int n_features);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int n_classes() const { return n_classes_; }
  int n_features() const { return n_features_; }
  int depth() const;
  std::size_t leaf_count() const;

  template <typename Derived>
  const TreeNode& leaf(const Eigen::DenseBase<Derived>& row) const {
    if (row.size() != n_features_) {
      throw std::invalid_argument("row width " + std::to_string(row.size()) + " does not match tree width " +
                                  std::to_string(n_features_));
    }
    const TreeNode* node = &nodes_.front();
    while (!node->is_leaf()) {
      node = &nodes_[static_cast<std::size_t>(row(node->feature) <= node->threshold ? node->left : node->right)];
    }
    return *node;
  }

  /// Adds this tree's leaf distribution for `row` into `acc` (length n_classes).
  template <typename Derived, typename Acc>
  void accumulate_proba(const Eigen::DenseBase<Derived>& row, Eigen::DenseBase<Acc>& acc) const {
    const auto& l = leaf(row);
    const double total = l.samples();
    for (int k = 0; k < n_classes_; ++k) acc(k) += l.class_counts[static_cast<std::size_t>(k)] / total;
  }

  bool operator==(const DecisionTree&) const;

 private:
  std::vector<TreeNode> nodes_;
  int n_classes_ = 0;
  int n_features_ = 0;
};

bool operator==(const TreeNode& a, const TreeNode& b);

/// Greedy recursive CART on all rows of `features`.
DecisionTree fit_tree(const Eigen::MatrixXd& features, std::span<const int> labels, int n_classes,
                      const TreeHyperparams& params, Rng& rng);
/// As above, restricted to `samples` (row indices; repeats act as weights).
DecisionTree fit_tree(const Eigen::MatrixXd& features, std::span<const int> labels, int n_classes,
                      std::span<const std::size_t> samples, const TreeHyperparams& params, Rng& rng);

/// Leaf class counts normalised to sum 1.
template <typename Derived>
Eigen::VectorXd predict_proba_tree(const DecisionTree& tree, const Eigen::DenseBase<Derived>& row) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(tree.n_classes());
  tree.accumulate_proba(row, p);
  return p;
}

nlohmann::json to_json(const TreeHyperparams& params);
TreeHyperparams tree_params_from_json(const nlohmann::json& j);

/// {"n_features": p, "classes": [0..K-1], "nodes": [...]}; split nodes carry
/// feature/threshold/left/right/impurity/counts, leaves carry impurity/counts.
nlohmann::json to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& j);

}  // namespace windloss

#include "windloss/cart.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "windloss/csv.hpp"

namespace windloss {

std::string_view to_string(Criterion criterion) {
  return criterion == Criterion::gini ? "gini" : "entropy";
}

std::optional<Criterion> parse_criterion(std::string_view text) {
  if (text == "gini") return Criterion::gini;
  if (text == "entropy") return Criterion::entropy;
  return std::nullopt;
}

MaxFeatures MaxFeatures::parse(std::string_view text) {
  text = trim(text);
  if (text == "sqrt" || text == "auto") return {Kind::sqrt, 1.0};
  if (text == "log2") return {Kind::log2, 1.0};
  if (text == "all" || text == "none" || text == "None") return {Kind::all, 1.0};
  if (const auto f = parse_double(text); f && *f > 0.0 && *f <= 1.0) return {Kind::fraction, *f};
  throw std::invalid_argument("max_features: expected sqrt, auto, log2, all or a fraction in (0, 1], got '" +
                              std::string(text) + "'");
}

std::string MaxFeatures::to_string() const {
  switch (kind) {
    case Kind::all: return "all";
    case Kind::sqrt: return "sqrt";
    case Kind::log2: return "log2";
    case Kind::fraction: return format_double(fraction);
  }
  return "?";
}

int MaxFeatures::resolve(int n_features) const {
  int k = n_features;
  switch (kind) {
    case Kind::all: break;
    case Kind::sqrt: k = static_cast<int>(std::sqrt(static_cast<double>(n_features))); break;
    case Kind::log2: k = static_cast<int>(std::log2(static_cast<double>(n_features))); break;
    case Kind::fraction: k = static_cast<int>(fraction * n_features); break;
  }
  return std::clamp(k, 1, std::max(1, n_features));
}

void TreeHyperparams::validate() const {
  if (max_depth && *max_depth < 1) throw std::invalid_argument("max_depth must be positive or unlimited");
  if (min_samples_split < 2) throw std::invalid_argument("min_samples_split must be at least 2");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be at least 1");
  if (max_features.kind == MaxFeatures::Kind::fraction &&
      !(max_features.fraction > 0.0 && max_features.fraction <= 1.0)) {
    throw std::invalid_argument("max_features fraction must lie in (0, 1]");
  }
}

double impurity(std::span<const int> class_counts, Criterion criterion) {
  double total = 0.0;
  for (int c : class_counts) {
    if (c < 0) throw std::invalid_argument("impurity: negative class count");
    total += c;
  }
  if (total == 0.0) throw std::invalid_argument("impurity: all class counts are zero");
  double value = 0.0;
  if (criterion == Criterion::gini) {
    double sum_sq = 0.0;
    for (int c : class_counts) sum_sq += static_cast<double>(c) * c;
    value = 1.0 - sum_sq / (total * total);
  } else {
    for (int c : class_counts) {
      if (c == 0) continue;
      const double p = c / total;
      value -= p * std::log2(p);
    }
  }
  return std::max(0.0, value);
}

namespace {

double entropy_of(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

// Reusable scratch space for split search at one node.
class SplitSearch {
 public:
  SplitSearch(const Eigen::MatrixXd& x, std::span<const int> y, int n_classes, const TreeHyperparams& params)
      : x_(x), y_(y), k_(static_cast<std::size_t>(n_classes)), params_(params), left_(k_), right_(k_) {}

  std::optional<Split> run(std::span<const std::size_t> samples, std::span<const int> features) {
    const std::size_t n = samples.size();
    if (n < static_cast<std::size_t>(params_.min_samples_split) || n < 2) return std::nullopt;

    std::vector<double> total(k_, 0.0);
    for (auto s : samples) total[static_cast<std::size_t>(y_[s])] += 1.0;
    const double nd = static_cast<double>(n);
    double parent = 0.0;
    double parent_sq = 0.0;
    for (double c : total) parent_sq += c * c;
    if (params_.criterion == Criterion::gini) {
      parent = 1.0 - parent_sq / (nd * nd);
    } else {
      parent = entropy_of(total, nd);
    }
    if (parent <= 0.0) return std::nullopt;

    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    std::optional<Split> best;
    pairs_.resize(n);
    for (int f : features) {
      for (std::size_t i = 0; i < n; ++i) {
        pairs_[i] = {x_(static_cast<Eigen::Index>(samples[i]), f), y_[samples[i]]};
      }
      std::sort(pairs_.begin(), pairs_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (pairs_.front().first == pairs_.back().first) continue;

      std::fill(left_.begin(), left_.end(), 0.0);
      right_ = total;
      double sq_left = 0.0;
      double sq_right = parent_sq;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = static_cast<std::size_t>(pairs_[i].second);
        sq_left += 2.0 * left_[c] + 1.0;
        sq_right -= 2.0 * right_[c] - 1.0;
        left_[c] += 1.0;
        right_[c] -= 1.0;
        const double a = pairs_[i].first;
        const double b = pairs_[i + 1].first;
        if (!(a < b)) continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double nl = static_cast<double>(n_left);
        const double nr = static_cast<double>(n_right);
        double children = 0.0;
        if (params_.criterion == Criterion::gini) {
          children = (nl - sq_left / nl + nr - sq_right / nr) / nd;
        } else {
          children = (nl * entropy_of(left_, nl) + nr * entropy_of(right_, nr)) / nd;
        }
        const double improvement = parent - children;
        const double floor = best ? best->improvement + kSplitTolerance : kSplitTolerance;
        if (improvement > floor) {
          double threshold = a + (b - a) / 2.0;
          if (!(threshold > a && threshold < b)) threshold = a;
          best = Split{f, threshold, improvement};
        }
      }
    }
    return best;
  }

 private:
  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  std::size_t k_;
  const TreeHyperparams& params_;
  std::vector<std::pair<double, int>> pairs_;
  std::vector<double> left_;
  std::vector<double> right_;
};

void check_training_inputs(const Eigen::MatrixXd& x, std::span<const int> y, int n_classes) {
  if (x.rows() == 0 || y.empty()) throw std::invalid_argument("fit_tree: empty training set");
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw std::invalid_argument("fit_tree: feature rows and label count differ");
  }
  if (n_classes < 1) throw std::invalid_argument("fit_tree: n_classes must be positive");
  for (int label : y) {
    if (label < 0 || label >= n_classes) throw std::invalid_argument("fit_tree: label out of range");
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const int> y, int n_classes, const TreeHyperparams& params,
              Rng& rng)
      : x_(x), y_(y), n_classes_(n_classes), params_(params), rng_(rng), search_(x, y, n_classes, params) {
    const auto p = static_cast<int>(x.cols());
    max_features_ = params.max_features.resolve(p);
    order_.resize(static_cast<std::size_t>(p));
  }

  std::vector<TreeNode> build(std::vector<std::size_t> samples) {
    grow(std::move(samples), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> samples, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    {
      TreeNode& node = nodes_.back();
      node.class_counts.assign(static_cast<std::size_t>(n_classes_), 0);
      for (auto s : samples) ++node.class_counts[static_cast<std::size_t>(y_[s])];
      node.impurity = impurity(node.class_counts, params_.criterion);
    }
    const auto n = samples.size();
    const bool stop = nodes_[static_cast<std::size_t>(id)].impurity <= 0.0 ||
                      (params_.max_depth && depth >= *params_.max_depth) ||
                      n < static_cast<std::size_t>(params_.min_samples_split) ||
                      n < 2 * static_cast<std::size_t>(params_.min_samples_leaf);
    if (stop) return id;

    const auto candidates = draw_features(samples);
    const auto split = search_.run(samples, candidates);
    if (!split) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto s : samples) {
      (x_(static_cast<Eigen::Index>(s), split->feature) <= split->threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Features are visited in random order; features constant at this node are
  // skipped until max_features non-constant candidates have been collected.
  std::vector<int> draw_features(const std::vector<std::size_t>& samples) {
    const auto p = order_.size();
    std::iota(order_.begin(), order_.end(), 0);
    const bool sample_all = static_cast<std::size_t>(max_features_) >= p;
    std::vector<int> chosen;
    for (std::size_t t = 0; t < p && chosen.size() < static_cast<std::size_t>(max_features_); ++t) {
      if (!sample_all) std::swap(order_[t], order_[t + rng_.uniform_index(p - t)]);
      const int f = order_[t];
      if (!constant_at(samples, f)) chosen.push_back(f);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  bool constant_at(const std::vector<std::size_t>& samples, int f) const {
    const double first = x_(static_cast<Eigen::Index>(samples.front()), f);
    return std::all_of(samples.begin(), samples.end(),
                       [&](std::size_t s) { return x_(static_cast<Eigen::Index>(s), f) == first; });
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  int n_classes_;
  const TreeHyperparams& params_;
  Rng& rng_;
  SplitSearch search_;
  int max_features_ = 1;
  std::vector<int> order_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

std::optional<Split> best_split(const Eigen::MatrixXd& features, std::span<const int> labels, int n_classes,
                                std::span<const std::size_t> samples, std::span<const int> candidate_features,
                                const TreeHyperparams& params) {
  if (samples.empty()) return std::nullopt;
  std::vector<int> sorted(candidate_features.begin(), candidate_features.end());
  std::sort(sorted.begin(), sorted.end());
  SplitSearch search(features, labels, n_classes, params);
  return search.run(samples, sorted);
}

int TreeNode::samples() const { return std::accumulate(class_counts.begin(), class_counts.end(), 0); }

bool operator==(const TreeNode& a, const TreeNode& b) {
  return a.feature == b.feature && a.threshold == b.threshold && a.left == b.left && a.right == b.right &&
         a.impurity == b.impurity && a.class_counts == b.class_counts;
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, int n_classes, int n_features)
    : nodes_(std::move(nodes)), n_classes_(n_classes), n_features_(n_features) {
  if (nodes_.empty()) throw std::invalid_argument("DecisionTree: no nodes");
  const auto count = static_cast<int>(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    if (node.class_counts.size() != static_cast<std::size_t>(n_classes)) {
      throw std::invalid_argument("DecisionTree: node " + std::to_string(i) + " has wrong class-count width");
    }
    if (node.is_leaf()) continue;
    // Pre-order storage: children always follow their parent.
    if (node.feature >= n_features || node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
        node.left >= count || node.right >= count) {
      throw std::invalid_argument("DecisionTree: node " + std::to_string(i) + " is malformed");
    }
  }
}

int DecisionTree::depth() const {
  std::function<int(int)> walk = [&](int id) -> int {
    const auto& node = nodes_[static_cast<std::size_t>(id)];
    if (node.is_leaf()) return 0;
    return 1 + std::max(walk(node.left), walk(node.right));
  };
  return nodes_.empty() ? 0 : walk(0);
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

bool DecisionTree::operator==(const DecisionTree& other) const {
  return n_classes_ == other.n_classes_ && n_features_ == other.n_features_ && nodes_ == other.nodes_;
}

DecisionTree fit_tree(const Eigen::MatrixXd& features, std::span<const int> labels, int n_classes,
                      const TreeHyperparams& params, Rng& rng) {
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return fit_tree(features, labels, n_classes, all, params, rng);
}

DecisionTree fit_tree(const Eigen::MatrixXd& features, std::span<const int> labels, int n_classes,
                      std::span<const std::size_t> samples, const TreeHyperparams& params, Rng& rng) {
  check_training_inputs(features, labels, n_classes);
  params.validate();
  if (samples.empty()) throw std::invalid_argument("fit_tree: empty training set");
  for (auto s : samples) {
    if (s >= labels.size()) throw std::invalid_argument("fit_tree: sample index out of range");
  }
  TreeBuilder builder(features, labels, n_classes, params, rng);
  auto nodes = builder.build(std::vector<std::size_t>(samples.begin(), samples.end()));
  return DecisionTree(std::move(nodes), n_classes, static_cast<int>(features.cols()));
}

nlohmann::json to_json(const TreeHyperparams& p) {
  return {{"max_depth", p.max_depth ? nlohmann::json(*p.max_depth) : nlohmann::json(nullptr)},
          {"min_samples_split", p.min_samples_split},
          {"min_samples_leaf", p.min_samples_leaf},
          {"max_features", p.max_features.to_string()},
          {"criterion", to_string(p.criterion)}};
}

TreeHyperparams tree_params_from_json(const nlohmann::json& j) {
  TreeHyperparams p;
  if (j.contains("max_depth") && !j.at("max_depth").is_null()) p.max_depth = j.at("max_depth").get<int>();
  p.min_samples_split = j.value("min_samples_split", p.min_samples_split);
  p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
  if (j.contains("max_features")) {
    const auto& mf = j.at("max_features");
    p.max_features = mf.is_number() ? MaxFeatures{MaxFeatures::Kind::fraction, mf.get<double>()}
                                    : MaxFeatures::parse(mf.get<std::string>());
  }
  if (j.contains("criterion")) {
    const auto c = parse_criterion(j.at("criterion").get<std::string>());
    if (!c) throw std::invalid_argument("criterion must be gini or entropy");
    p.criterion = *c;
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const DecisionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf()) {
      nodes.push_back({{"impurity", n.impurity}, {"counts", n.class_counts}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"impurity", n.impurity},
                       {"counts", n.class_counts}});
    }
  }
  std::vector<int> classes(static_cast<std::size_t>(tree.n_classes()));
  std::iota(classes.begin(), classes.end(), 0);
  return {{"n_features", tree.n_features()}, {"classes", classes}, {"nodes", std::move(nodes)}};
}

DecisionTree tree_from_json(const nlohmann::json& j) {
  const auto n_features = j.at("n_features").get<int>();
  const auto n_classes = static_cast<int>(j.at("classes").size());
  std::vector<TreeNode> nodes;
  for (const auto& jn : j.at("nodes")) {
    TreeNode n;
    n.impurity = jn.at("impurity").get<double>();
    n.class_counts = jn.at("counts").get<std::vector<int>>();
    if (jn.contains("feature")) {
      n.feature = jn.at("feature").get<int>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
    }
    nodes.push_back(std::move(n));
  }
  return DecisionTree(std::move(nodes), n_classes, n_features);
}

}  // namespace windloss

#include "windloss/forest.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "windloss/csv.hpp"
#include "windloss/parallel.hpp"

namespace windloss {

namespace {

constexpr std::string_view kForestFormat = "windloss.forest";
constexpr int kForestVersion = 1;

void check_width(const Forest& forest, const Eigen::MatrixXd& rows) {
  if (rows.cols() != forest.n_features()) {
    throw std::invalid_argument("row width " + std::to_string(rows.cols()) + " does not match forest width " +
                                std::to_string(forest.n_features()));
  }
}

}  // namespace

void ForestHyperparams::validate() const {
  if (n_estimators < 1) throw std::invalid_argument("n_estimators must be at least 1");
  tree.validate();
}

nlohmann::json to_json(const ForestHyperparams& p) {
  auto j = to_json(p.tree);
  j["n_estimators"] = p.n_estimators;
  j["bootstrap"] = p.bootstrap;
  j["seed"] = p.seed;
  return j;
}

ForestHyperparams forest_params_from_json(const nlohmann::json& j) {
  ForestHyperparams p;
  p.tree = tree_params_from_json(j);
  p.n_estimators = j.value("n_estimators", p.n_estimators);
  p.bootstrap = j.value("bootstrap", p.bootstrap);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

Forest::Forest(std::vector<DecisionTree> trees, ForestHyperparams params, int n_classes,
               std::vector<std::string> columns, std::vector<std::string> class_names)
    : trees_(std::move(trees)),
      params_(std::move(params)),
      n_classes_(n_classes),
      columns_(std::move(columns)),
      class_names_(std::move(class_names)) {
  if (trees_.empty()) throw std::invalid_argument("Forest: no trees");
  for (const auto& t : trees_) {
    if (t.n_classes() != n_classes_ || t.n_features() != static_cast<int>(columns_.size())) {
      throw std::invalid_argument("Forest: trees disagree on class list or column count");
    }
  }
  if (class_names_.size() != static_cast<std::size_t>(n_classes_)) {
    throw std::invalid_argument("Forest: class name count does not match class count");
  }
}

std::vector<std::size_t> bootstrap_sample(std::size_t n, Rng& rng) {
  std::vector<std::size_t> sample(n);
  for (auto& s : sample) s = static_cast<std::size_t>(rng.uniform_index(n));
  return sample;
}

Forest fit_forest(const Eigen::MatrixXd& features, std::span<const int> labels, int n_classes,
                  const ForestHyperparams& params, std::vector<std::string> columns,
                  std::vector<std::string> class_names, int threads) {
  params.validate();
  if (features.rows() == 0 || labels.empty()) throw std::invalid_argument("fit_forest: empty training set");
  if (columns.empty()) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) columns.push_back("x" + std::to_string(j));
  }
  if (columns.size() != static_cast<std::size_t>(features.cols())) {
    throw std::invalid_argument("fit_forest: column name count does not match feature width");
  }
  if (class_names.empty()) {
    for (int k = 0; k < n_classes; ++k) class_names.push_back(std::to_string(k));
  }

  const auto n = labels.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<DecisionTree> trees(static_cast<std::size_t>(params.n_estimators));
  parallel_for(trees.size(), threads, [&](std::size_t i) {
    auto rng = tree_stream(params.seed, i);
    if (params.bootstrap) {
      const auto sample = bootstrap_sample(n, rng);
      trees[i] = fit_tree(features, labels, n_classes, sample, params.tree, rng);
    } else {
      trees[i] = fit_tree(features, labels, n_classes, all, params.tree, rng);
    }
  });
  return Forest(std::move(trees), params, n_classes, std::move(columns), std::move(class_names));
}

Eigen::MatrixXd predict_proba(const Forest& forest, const Eigen::MatrixXd& rows, int threads) {
  check_width(forest, rows);
  Eigen::MatrixXd proba = Eigen::MatrixXd::Zero(rows.rows(), forest.n_classes());
  const double scale = 1.0 / static_cast<double>(forest.trees().size());
  parallel_for(static_cast<std::size_t>(rows.rows()), threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(forest.n_classes());
    for (const auto& tree : forest.trees()) tree.accumulate_proba(rows.row(r), acc);
    proba.row(r) = acc.transpose() * scale;
  });
  return proba;
}

std::vector<int> predict(const Forest& forest, const Eigen::MatrixXd& rows, int threads) {
  const auto proba = predict_proba(forest, rows, threads);
  std::vector<int> out(static_cast<std::size_t>(proba.rows()));
  for (Eigen::Index i = 0; i < proba.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_lowest(proba.row(i));
  return out;
}

Eigen::VectorXd impurity_importance(const Forest& forest) {
  Eigen::VectorXd total = Eigen::VectorXd::Zero(forest.n_features());
  for (const auto& tree : forest.trees()) {
    const auto& nodes = tree.nodes();
    const double root = nodes.front().samples();
    Eigen::VectorXd per_tree = Eigen::VectorXd::Zero(forest.n_features());
    for (const auto& node : nodes) {
      if (node.is_leaf()) continue;
      const auto& l = nodes[static_cast<std::size_t>(node.left)];
      const auto& r = nodes[static_cast<std::size_t>(node.right)];
      const double decrease = node.samples() * node.impurity - l.samples() * l.impurity - r.samples() * r.impurity;
      per_tree(node.feature) += std::max(0.0, decrease) / root;
    }
    const double sum = per_tree.sum();
    if (sum > 0.0) total += per_tree / sum;
  }
  total /= static_cast<double>(forest.trees().size());
  const double sum = total.sum();
  if (sum > 0.0) total /= sum;
  return total;
}

double FeatureImportanceReport::total() const {
  double s = 0.0;
  for (const auto& f : features) s += f.importance;
  return s;
}

FeatureImportanceReport feature_importance(const Forest& forest, const std::vector<std::string>& columns,
                                           const std::map<std::string, std::string>& categories) {
  if (columns.size() != static_cast<std::size_t>(forest.n_features())) {
    throw std::invalid_argument("feature_importance: column name count does not match forest width");
  }
  const auto values = impurity_importance(forest);
  FeatureImportanceReport report;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto it = categories.find(columns[j]);
    const std::string category = it == categories.end() ? "uncategorized" : it->second;
    report.features.push_back({columns[j], category, values(static_cast<Eigen::Index>(j))});
  }
  // Stable: equal importances keep column order.
  std::stable_sort(report.features.begin(), report.features.end(),
                   [](const auto& a, const auto& b) { return a.importance > b.importance; });
  for (const auto& f : report.features) report.by_category[f.category] += f.importance;
  return report;
}

nlohmann::json to_json(const Forest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : forest.trees()) trees.push_back(to_json(t));
  std::vector<int> classes(static_cast<std::size_t>(forest.n_classes()));
  std::iota(classes.begin(), classes.end(), 0);
  return {{"format", kForestFormat},
          {"version", kForestVersion},
          {"hyperparams", to_json(forest.params())},
          {"classes", classes},
          {"class_names", forest.class_names()},
          {"columns", forest.columns()},
          {"trees", std::move(trees)}};
}

Forest forest_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != kForestFormat) throw std::invalid_argument("not a forest model file");
  if (j.value("version", 0) != kForestVersion) {
    throw std::invalid_argument("unsupported forest model version " + std::to_string(j.value("version", 0)));
  }
  std::vector<DecisionTree> trees;
  for (const auto& jt : j.at("trees")) trees.push_back(tree_from_json(jt));
  return Forest(std::move(trees), forest_params_from_json(j.at("hyperparams")),
                static_cast<int>(j.at("classes").size()), j.at("columns").get<std::vector<std::string>>(),
                j.at("class_names").get<std::vector<std::string>>());
}

void write_importance_csv(std::ostream& out, const FeatureImportanceReport& report) {
  write_csv_row(out, {"rank", "feature", "category", "importance"});
  for (std::size_t i = 0; i < report.features.size(); ++i) {
    const auto& f = report.features[i];
    write_csv_row(out, {std::to_string(i + 1), f.name, f.category, format_double(f.importance)});
  }
}

nlohmann::json to_json(const FeatureImportanceReport& report) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : report.features) {
    features.push_back({{"name", f.name}, {"category", f.category}, {"importance", f.importance}});
  }
  return {{"features", std::move(features)}, {"by_category", report.by_category}};
}

}  // namespace windloss

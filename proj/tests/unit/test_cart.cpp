#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "windloss/cart.hpp"
#include "windloss/rng.hpp"
#include "oracles.hpp"

using namespace windloss;

namespace {

struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> y;
  int classes = 2;
};

Dataset random_dataset(Rng& rng, std::size_t max_rows, int max_features, bool discrete) {
  Dataset d;
  const auto n = 2 + rng.uniform_index(max_rows - 1);
  const auto p = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_features)));
  d.classes = 2 + static_cast<int>(rng.uniform_index(2));
  d.x.resize(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      d.x(i, j) = discrete ? static_cast<double>(rng.uniform_index(5)) : rng.uniform(-10.0, 10.0);
    }
  }
  for (std::size_t i = 0; i < n; ++i) d.y.push_back(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(d.classes))));
  return d;
}

// Rows of the training set that reach each node.
std::vector<std::vector<std::size_t>> route(const DecisionTree& tree, const Eigen::MatrixXd& x,
                                            const std::vector<std::size_t>& samples) {
  std::vector<std::vector<std::size_t>> at(tree.nodes().size());
  for (const auto s : samples) {
    std::size_t node = 0;
    at[node].push_back(s);
    while (!tree.nodes()[node].is_leaf()) {
      const auto& n = tree.nodes()[node];
      node = static_cast<std::size_t>(x(static_cast<Eigen::Index>(s), n.feature) <= n.threshold ? n.left : n.right);
      at[node].push_back(s);
    }
  }
  return at;
}

}  // namespace

TEST_CASE("impurity formulas") {
  CHECK(impurity(std::vector<int>{5, 0, 0}, Criterion::gini) == 0.0);
  CHECK(std::abs(impurity(std::vector<int>{1, 1}, Criterion::gini) - 0.5) <= 1e-12);
  CHECK(std::abs(impurity(std::vector<int>{2, 1}, Criterion::gini) - 4.0 / 9.0) <= 1e-12);
  CHECK(impurity(std::vector<int>{0, 7}, Criterion::entropy) == 0.0);
  CHECK(std::abs(impurity(std::vector<int>{1, 1}, Criterion::entropy) - 1.0) <= 1e-12);
  CHECK(std::abs(impurity(std::vector<int>{1, 1, 1, 1}, Criterion::entropy) - 2.0) <= 1e-12);
  CHECK_THROWS(impurity(std::vector<int>{0, 0}, Criterion::gini));
}

TEST_CASE("hyperparameter parsing and validation") {
  CHECK(MaxFeatures::parse("auto") == MaxFeatures{});
  CHECK(MaxFeatures::parse("sqrt").resolve(29) == 5);
  CHECK(MaxFeatures::parse("log2").resolve(29) == 4);
  CHECK(MaxFeatures::parse("all").resolve(29) == 29);
  CHECK(MaxFeatures::parse("0.5").resolve(29) == 14);
  CHECK(MaxFeatures::parse("sqrt").resolve(1) == 1);
  CHECK_THROWS(MaxFeatures::parse("most"));
  CHECK(parse_criterion("entropy") == Criterion::entropy);
  CHECK_FALSE(parse_criterion("mse").has_value());

  TreeHyperparams p;
  CHECK_NOTHROW(p.validate());
  p.min_samples_split = 1;
  CHECK_THROWS(p.validate());
  p = {};
  p.min_samples_leaf = 0;
  CHECK_THROWS(p.validate());
  p = {};
  p.max_depth = 0;
  CHECK_THROWS(p.validate());
  p = {};
  p.min_samples_split = 2;
  p.min_samples_leaf = 5;  // independent constraints
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("best_split examples") {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 8, 9;
  const std::vector<int> y{0, 0, 1, 1};
  const std::vector<std::size_t> all{0, 1, 2, 3};
  const std::vector<int> f0{0};
  TreeHyperparams p;
  const auto s = best_split(x, y, 2, all, f0, p);
  REQUIRE(s.has_value());
  CHECK(s->feature == 0);
  CHECK(s->threshold == 5.0);
  CHECK(s->improvement == doctest::Approx(0.5));

  CHECK_FALSE(best_split(x, std::vector<int>{1, 1, 1, 1}, 2, all, f0, p).has_value());
  p.min_samples_leaf = 3;
  CHECK_FALSE(best_split(x, y, 2, all, f0, p).has_value());
}

TEST_CASE("best_split equals exhaustive enumeration on random datasets") {
  Rng rng(2024);
  int with_split = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = random_dataset(rng, 20, 4, trial % 2 == 0);
    TreeHyperparams p;
    p.criterion = trial % 3 == 0 ? Criterion::entropy : Criterion::gini;
    p.min_samples_leaf = 1 + static_cast<int>(rng.uniform_index(3));
    std::vector<std::size_t> samples;
    if (trial % 5 == 0) {
      for (Eigen::Index i = 0; i < d.x.rows(); ++i) samples.push_back(rng.uniform_index(static_cast<std::uint64_t>(d.x.rows())));
    } else {
      samples.resize(static_cast<std::size_t>(d.x.rows()));
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    std::vector<int> features;
    for (int f = static_cast<int>(d.x.cols()) - 1; f >= 0; --f) {
      if (rng.bernoulli(0.8)) features.push_back(f);
    }
    const auto got = best_split(d.x, d.y, d.classes, samples, features, p);
    const auto want = oracle::best_split(d.x, d.y, d.classes, samples, features, p);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      ++with_split;
      CHECK(got->feature == want->feature);
      CHECK(got->threshold == want->threshold);
      CHECK(std::abs(got->improvement - want->improvement) <= 1e-12);
    }
  }
  CHECK(with_split > 100);
}

TEST_CASE("fit_tree: separable data, XOR stump, determinism") {
  Rng data_rng(4);
  Eigen::MatrixXd x(60, 3);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < 60; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = data_rng.uniform(0, 1);
    y.push_back(static_cast<int>(data_rng.uniform_index(3)));
  }
  TreeHyperparams p;
  p.max_features = MaxFeatures::parse("all");
  Rng r1(1);
  const auto tree = fit_tree(x, y, 3, p, r1);
  for (Eigen::Index i = 0; i < 60; ++i) {
    const auto proba = predict_proba_tree(tree, x.row(i));
    CHECK(proba(y[static_cast<std::size_t>(i)]) == 1.0);
  }

  p.max_features = MaxFeatures{};
  Rng a(9);
  Rng b(9);
  CHECK(fit_tree(x, y, 3, p, a) == fit_tree(x, y, 3, p, b));

  Eigen::MatrixXd xor_x(4, 2);
  xor_x << 0, 0, 0, 1, 1, 0, 1, 1;
  const std::vector<int> xor_y{0, 1, 1, 0};
  TreeHyperparams stump;
  stump.max_depth = 1;
  stump.max_features = MaxFeatures::parse("all");
  Rng r2(3);
  const auto s = fit_tree(xor_x, xor_y, 2, stump, r2);
  int correct = 0;
  for (Eigen::Index i = 0; i < 4; ++i) {
    const auto proba = predict_proba_tree(s, xor_x.row(i));
    const int pred = proba(1) > proba(0) ? 1 : 0;
    correct += pred == xor_y[static_cast<std::size_t>(i)];
  }
  CHECK(correct <= 3);
  CHECK(s.depth() <= 1);
}

TEST_CASE("structural invariants across 1000 random trees") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_dataset(rng, 40, 5, trial % 2 == 0);
    TreeHyperparams p;
    p.criterion = trial % 2 == 0 ? Criterion::gini : Criterion::entropy;
    if (trial % 3 == 0) p.max_depth = 1 + static_cast<int>(rng.uniform_index(4));
    p.min_samples_split = 2 + static_cast<int>(rng.uniform_index(3));
    p.min_samples_leaf = 1 + static_cast<int>(rng.uniform_index(2));
    p.max_features = trial % 4 == 0 ? MaxFeatures::parse("all") : MaxFeatures{};
    std::vector<std::size_t> samples(static_cast<std::size_t>(d.x.rows()));
    std::iota(samples.begin(), samples.end(), std::size_t{0});
    Rng tree_rng(static_cast<std::uint64_t>(trial));
    const auto tree = fit_tree(d.x, d.y, d.classes, samples, p, tree_rng);

    const auto& nodes = tree.nodes();
    CHECK(nodes.size() <= 2 * samples.size() - 1);
    if (p.max_depth) CHECK(tree.depth() <= *p.max_depth);
    const auto at = route(tree, d.x, samples);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto& node = nodes[k];
      CHECK(node.samples() == static_cast<int>(at[k].size()));
      std::vector<int> counts(static_cast<std::size_t>(d.classes), 0);
      for (const auto s : at[k]) ++counts[static_cast<std::size_t>(d.y[s])];
      CHECK(counts == node.class_counts);
      if (node.is_leaf()) {
        CHECK(node.samples() >= p.min_samples_leaf);
        continue;
      }
      const auto& l = nodes[static_cast<std::size_t>(node.left)];
      const auto& r = nodes[static_cast<std::size_t>(node.right)];
      const double decrease = node.samples() * node.impurity - l.samples() * l.impurity - r.samples() * r.impurity;
      CHECK(decrease > 0.0);
      // The threshold falls strictly inside a gap between observed values at the node.
      double below = -INFINITY;
      double above = INFINITY;
      for (const auto s : at[k]) {
        const double v = d.x(static_cast<Eigen::Index>(s), node.feature);
        if (v <= node.threshold) below = std::max(below, v);
        if (v > node.threshold) above = std::min(above, v);
      }
      CHECK(below <= node.threshold);
      CHECK(node.threshold < above);
      CHECK(std::isfinite(below));
      CHECK(std::isfinite(above));
    }
  }
}

TEST_CASE("probabilities are normalised leaf counts") {
  Rng rng(12);
  const auto d = random_dataset(rng, 40, 4, false);
  TreeHyperparams p;
  p.max_depth = 3;
  Rng tree_rng(5);
  const auto tree = fit_tree(d.x, d.y, d.classes, p, tree_rng);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd row(d.x.cols());
    for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = rng.uniform(-12, 12);
    const auto proba = predict_proba_tree(tree, row);
    CHECK(std::abs(proba.sum() - 1.0) <= 1e-12);
    CHECK(proba.minCoeff() >= 0.0);
  }
  CHECK_THROWS(predict_proba_tree(tree, Eigen::VectorXd::Zero(d.x.cols() + 1)));

  // Leaf counts (3, 1, 0) -> (0.75, 0.25, 0).
  const DecisionTree leaf({TreeNode{-1, 0.0, -1, -1, 0.375, {3, 1, 0}}}, 3, 2);
  const auto q = predict_proba_tree(leaf, Eigen::Vector2d(0, 0));
  CHECK(q(0) == 0.75);
  CHECK(q(1) == 0.25);
  CHECK(q(2) == 0.0);
}

TEST_CASE("a tree with no valid split predicts the training prior") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(6, 2, 1.0);
  const std::vector<int> y{0, 0, 0, 1, 1, 2};
  Rng rng(1);
  const auto tree = fit_tree(x, y, 3, TreeHyperparams{}, rng);
  CHECK(tree.nodes().size() == 1);
  const auto proba = predict_proba_tree(tree, Eigen::Vector2d(-5, 40));
  CHECK(proba(0) == doctest::Approx(0.5));
  CHECK(proba(1) == doctest::Approx(1.0 / 3.0));
  CHECK(proba(2) == doctest::Approx(1.0 / 6.0));
  CHECK_THROWS(fit_tree(Eigen::MatrixXd(0, 2), std::vector<int>{}, 2, TreeHyperparams{}, rng));
}

TEST_CASE("tree and hyperparameter JSON round-trip") {
  Rng rng(31);
  const auto d = random_dataset(rng, 40, 4, false);
  TreeHyperparams p;
  p.max_depth = 4;
  p.criterion = Criterion::entropy;
  p.max_features = MaxFeatures::parse("0.75");
  Rng tree_rng(2);
  const auto tree = fit_tree(d.x, d.y, d.classes, p, tree_rng);
  CHECK(tree_from_json(nlohmann::json::parse(to_json(tree).dump())) == tree);
  CHECK(tree_params_from_json(to_json(p)) == p);
  TreeHyperparams unlimited;
  CHECK(tree_params_from_json(to_json(unlimited)) == unlimited);
}

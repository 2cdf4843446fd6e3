#include "windloss/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "windloss/csv.hpp"
#include "windloss/parallel.hpp"
#include "windloss/rng.hpp"

namespace windloss {

ForestHyperparams default_params() {
  ForestHyperparams p;
  p.n_estimators = 100;
  p.tree.min_samples_split = 2;
  p.tree.min_samples_leaf = 1;
  p.tree.max_features = MaxFeatures::parse("sqrt");
  p.tree.max_depth = std::nullopt;
  p.tree.criterion = Criterion::gini;
  return p;
}

ForestHyperparams reference_tuned_params() {
  ForestHyperparams p;
  p.n_estimators = 1135;
  p.tree.min_samples_split = 5;
  p.tree.min_samples_leaf = 4;
  p.tree.max_features = MaxFeatures::parse("auto");
  p.tree.max_depth = 100;
  p.tree.criterion = Criterion::gini;
  return p;
}

// --- grid ----------------------------------------------------------------------

std::size_t ParamGrid::size() const {
  return n_estimators.size() * min_samples_split.size() * min_samples_leaf.size() * max_features.size() *
         max_depth.size() * criterion.size();
}

void ParamGrid::validate() const {
  if (n_estimators.empty() || min_samples_split.empty() || min_samples_leaf.empty() || max_features.empty() ||
      max_depth.empty() || criterion.empty()) {
    throw std::invalid_argument("parameter grid: every parameter list must be non-empty");
  }
  for (const auto& p : combinations(0)) p.validate();
}

std::uint64_t combination_seed(std::uint64_t seed, const ForestHyperparams& params) {
  const auto& t = params.tree;
  const std::string key = std::to_string(params.n_estimators) + '/' + std::to_string(t.min_samples_split) + '/' +
                          std::to_string(t.min_samples_leaf) + '/' + t.max_features.to_string() + '/' +
                          (t.max_depth ? std::to_string(*t.max_depth) : "none") + '/' +
                          std::string(to_string(t.criterion)) + '/' + (params.bootstrap ? "b" : "nb");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(seed, h);
}

std::vector<ForestHyperparams> ParamGrid::combinations(std::uint64_t seed) const {
  std::vector<ForestHyperparams> out;
  out.reserve(size());
  for (int trees : n_estimators) {
    for (int split : min_samples_split) {
      for (int leaf : min_samples_leaf) {
        for (const auto& features : max_features) {
          for (const auto& depth : max_depth) {
            for (auto crit : criterion) {
              ForestHyperparams p;
              p.n_estimators = trees;
              p.tree.min_samples_split = split;
              p.tree.min_samples_leaf = leaf;
              p.tree.max_features = features;
              p.tree.max_depth = depth;
              p.tree.criterion = crit;
              p.seed = combination_seed(seed, p);
              out.push_back(p);
            }
          }
        }
      }
    }
  }
  return out;
}

nlohmann::json to_json(const ParamGrid& g) {
  nlohmann::json depth = nlohmann::json::array();
  for (const auto& d : g.max_depth) depth.push_back(d ? nlohmann::json(*d) : nlohmann::json(nullptr));
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : g.max_features) features.push_back(f.to_string());
  nlohmann::json criteria = nlohmann::json::array();
  for (auto c : g.criterion) criteria.push_back(to_string(c));
  return {{"n_estimators", g.n_estimators},
          {"min_samples_split", g.min_samples_split},
          {"min_samples_leaf", g.min_samples_leaf},
          {"max_features", std::move(features)},
          {"max_depth", std::move(depth)},
          {"criterion", std::move(criteria)}};
}

ParamGrid param_grid_from_json(const nlohmann::json& j) {
  ParamGrid g;
  g.n_estimators = j.at("n_estimators").get<std::vector<int>>();
  g.min_samples_split = j.at("min_samples_split").get<std::vector<int>>();
  g.min_samples_leaf = j.at("min_samples_leaf").get<std::vector<int>>();
  for (const auto& f : j.at("max_features")) {
    g.max_features.push_back(f.is_number() ? MaxFeatures{MaxFeatures::Kind::fraction, f.get<double>()}
                                           : MaxFeatures::parse(f.get<std::string>()));
  }
  for (const auto& d : j.at("max_depth")) {
    g.max_depth.push_back(d.is_null() ? std::nullopt : std::optional<int>(d.get<int>()));
  }
  for (const auto& c : j.at("criterion")) {
    const auto crit = parse_criterion(c.get<std::string>());
    if (!crit) throw std::invalid_argument("parameter grid: unknown criterion " + c.get<std::string>());
    g.criterion.push_back(*crit);
  }
  g.validate();
  return g;
}

// --- metrics -----------------------------------------------------------------------

std::string_view to_string(SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::macro_f1: return "macro_f1";
    case SelectionMetric::weighted_f1: return "weighted_f1";
    case SelectionMetric::accuracy: return "accuracy";
    case SelectionMetric::macro_precision: return "macro_precision";
    case SelectionMetric::macro_recall: return "macro_recall";
    case SelectionMetric::weighted_precision: return "weighted_precision";
    case SelectionMetric::weighted_recall: return "weighted_recall";
  }
  return "?";
}

std::optional<SelectionMetric> parse_selection_metric(std::string_view text) {
  for (auto m : {SelectionMetric::macro_f1, SelectionMetric::weighted_f1, SelectionMetric::accuracy,
                 SelectionMetric::macro_precision, SelectionMetric::macro_recall,
                 SelectionMetric::weighted_precision, SelectionMetric::weighted_recall}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

double score(const EvaluationReport& r, SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::macro_f1: return r.macro.f1;
    case SelectionMetric::weighted_f1: return r.weighted.f1;
    case SelectionMetric::accuracy: return r.accuracy;
    case SelectionMetric::macro_precision: return r.macro.precision;
    case SelectionMetric::macro_recall: return r.macro.recall;
    case SelectionMetric::weighted_precision: return r.weighted.precision;
    case SelectionMetric::weighted_recall: return r.weighted.recall;
  }
  return 0.0;
}

// --- search -------------------------------------------------------------------------

const Partition& SealedTestSet::open() {
  if (opens_ > 0) throw std::logic_error("the held-out test set has already been consulted");
  ++opens_;
  return test_;
}

std::vector<int> stratified_folds(std::span<const int> labels, int n_classes, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) throw std::invalid_argument("stratified_folds: label out of range");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (!members[c].empty() && members[c].size() < static_cast<std::size_t>(folds)) {
      throw std::invalid_argument("class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                                  " members, fewer than " + std::to_string(folds) + " folds");
    }
  }
  Rng rng(seed);
  std::vector<int> assignment(labels.size(), 0);
  std::size_t dealt = 0;
  for (auto& m : members) {
    rng.shuffle(m.begin(), m.end());
    for (auto i : m) assignment[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return assignment;
}

std::size_t select_best(const std::vector<CvRecord>& table) {
  if (table.empty()) throw std::invalid_argument("select_best: empty result table");
  const auto depth_key = [](const ForestHyperparams& p) {
    return p.tree.max_depth.value_or(std::numeric_limits<int>::max());
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& a = table[i];
    const auto& b = table[best];
    if (a.mean_score > b.mean_score + kSplitTolerance) {
      best = i;
    } else if (std::abs(a.mean_score - b.mean_score) <= kSplitTolerance) {
      if (a.params.n_estimators < b.params.n_estimators ||
          (a.params.n_estimators == b.params.n_estimators && depth_key(a.params) < depth_key(b.params))) {
        best = i;
      }
    }
  }
  return best;
}

namespace {

double fold_score(const Partition& train, const std::vector<int>& fold_of, int fold, const ForestHyperparams& params,
                  const TuningOptions& options) {
  std::vector<std::size_t> fit_rows;
  std::vector<std::size_t> score_rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == fold ? score_rows : fit_rows).push_back(i);
  const auto fit = take_rows(train.features, train.labels, fit_rows);
  const auto held = take_rows(train.features, train.labels, score_rows);
  const auto forest = fit_forest(fit.features, fit.labels, options.n_classes, params);
  const auto predicted = predict(forest, held.features);
  std::vector<int> classes(static_cast<std::size_t>(options.n_classes));
  std::iota(classes.begin(), classes.end(), 0);
  return score(evaluate(confusion(held.labels, predicted, classes)), options.metric);
}

}  // namespace

TuningResult grid_search(const Partition& train, SealedTestSet& test, const ParamGrid& grid,
                         const TuningOptions& options, const std::vector<std::string>& columns,
                         const std::vector<std::string>& class_names) {
  grid.validate();
  if (grid.size() == 0) throw std::invalid_argument("grid_search: empty grid");
  if (test.opened()) throw std::logic_error("grid_search: the test set was consulted before model selection");
  const auto fold_of = stratified_folds(train.labels, options.n_classes, options.folds,
                                        derive_seed(options.seed, 0xF01D5ULL));

  TuningResult result;
  result.metric = options.metric;
  result.folds = options.folds;
  const auto combos = grid.combinations(options.seed);
  result.table.resize(combos.size() + 1);
  for (std::size_t c = 0; c < combos.size(); ++c) result.table[c].params = combos[c];
  auto& reference = result.table.back();
  reference.params = default_params();
  reference.params.seed = combination_seed(options.seed, reference.params);
  for (auto& record : result.table) record.fold_scores.assign(static_cast<std::size_t>(options.folds), 0.0);

  const auto k = static_cast<std::size_t>(options.folds);
  parallel_for(result.table.size() * k, options.threads, [&](std::size_t item) {
    auto& record = result.table[item / k];
    const int fold = static_cast<int>(item % k);
    record.fold_scores[static_cast<std::size_t>(fold)] = fold_score(train, fold_of, fold, record.params, options);
  });
  for (auto& record : result.table) {
    record.mean_score = std::accumulate(record.fold_scores.begin(), record.fold_scores.end(), 0.0) /
                        static_cast<double>(record.fold_scores.size());
  }
  result.default_reference = std::move(result.table.back());
  result.table.pop_back();

  result.best_index = select_best(result.table);
  result.best = result.table[result.best_index].params;
  result.final_model = fit_forest(train.features, train.labels, options.n_classes, result.best, columns,
                                  class_names, options.threads);

  const auto& held_out = test.open();
  const auto predicted = predict(result.final_model, held_out.features, options.threads);
  std::vector<int> classes(static_cast<std::size_t>(options.n_classes));
  std::iota(classes.begin(), classes.end(), 0);
  result.test_report = evaluate(confusion(held_out.labels, predicted, classes));
  return result;
}

void write_tuning_csv(std::ostream& out, const TuningResult& result) {
  write_csv_row(out, {"combination", "fold", "score", "n_estimators", "min_samples_split", "min_samples_leaf",
                      "max_features", "max_depth", "criterion", "seed"});
  const auto describe = [](const ForestHyperparams& p) {
    return std::vector<std::string>{std::to_string(p.n_estimators),
                                    std::to_string(p.tree.min_samples_split),
                                    std::to_string(p.tree.min_samples_leaf),
                                    p.tree.max_features.to_string(),
                                    p.tree.max_depth ? std::to_string(*p.tree.max_depth) : "none",
                                    std::string(to_string(p.tree.criterion)),
                                    std::to_string(p.seed)};
  };
  for (std::size_t c = 0; c < result.table.size(); ++c) {
    const auto& record = result.table[c];
    const auto params = describe(record.params);
    for (std::size_t f = 0; f <= record.fold_scores.size(); ++f) {
      const bool summary = f == record.fold_scores.size();
      std::vector<std::string> row{std::to_string(c), summary ? "mean" : std::to_string(f),
                                   format_double(summary ? record.mean_score : record.fold_scores[f])};
      row.insert(row.end(), params.begin(), params.end());
      write_csv_row(out, row);
    }
  }
}

nlohmann::json to_json(const TuningResult& result, const std::vector<std::string>& class_names) {
  const auto record_json = [](const CvRecord& r) {
    return nlohmann::json{{"params", to_json(r.params)}, {"mean_score", r.mean_score}, {"fold_scores", r.fold_scores}};
  };
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    auto row = record_json(result.table[i]);
    row["index"] = i;
    table.push_back(std::move(row));
  }
  return {{"selection_metric", to_string(result.metric)},
          {"folds", result.folds},
          {"grid_size", result.table.size()},
          {"best_index", result.best_index},
          {"best_params", to_json(result.best)},
          {"best_mean_score", result.table.empty() ? 0.0 : result.table[result.best_index].mean_score},
          {"default_reference", record_json(result.default_reference)},
          {"test_evaluation", to_json(result.test_report, class_names)},
          {"table", std::move(table)}};
}

}  // namespace windloss

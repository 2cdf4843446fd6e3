#include "windloss/metrics.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include "windloss/csv.hpp"

namespace windloss {

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::vector<int> classes) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(truth.size()) + " true labels but " +
                                std::to_string(predicted.size()) + " predictions");
  }
  const auto k = static_cast<Eigen::Index>(classes.size());
  ConfusionMatrix m{CountMatrix::Zero(k, k), std::move(classes)};
  const auto index_of = [&m](int label) {
    const auto it = std::find(m.classes.begin(), m.classes.end(), label);
    if (it == m.classes.end()) throw std::invalid_argument("confusion: unknown label " + std::to_string(label));
    return static_cast<Eigen::Index>(it - m.classes.begin());
  };
  for (std::size_t i = 0; i < truth.size(); ++i) ++m.counts(index_of(truth[i]), index_of(predicted[i]));
  return m;
}

EvaluationReport evaluate(const ConfusionMatrix& confusion) {
  const auto& m = confusion.counts;
  const long long total = m.sum();
  if (m.size() == 0 || total == 0) throw std::invalid_argument("evaluate: empty confusion matrix");

  EvaluationReport r;
  r.confusion = confusion;
  r.accuracy = static_cast<double>(m.trace()) / static_cast<double>(total);
  const Eigen::Index k = m.rows();
  for (Eigen::Index c = 0; c < k; ++c) {
    ClassMetrics cm;
    const auto tp = static_cast<double>(m(c, c));
    const auto predicted = static_cast<double>(m.col(c).sum());
    cm.support = m.row(c).sum();
    if (predicted > 0) {
      cm.precision = tp / predicted;
    } else {
      cm.precision_undefined = true;
    }
    if (cm.support > 0) {
      cm.recall = tp / static_cast<double>(cm.support);
    } else {
      cm.recall_undefined = true;
    }
    if (cm.precision + cm.recall > 0.0) {
      cm.f1 = 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
    } else {
      cm.f1_undefined = true;
    }
    r.zero_division = r.zero_division || cm.precision_undefined || cm.recall_undefined || cm.f1_undefined;
    r.per_class.push_back(cm);
  }
  for (const auto& cm : r.per_class) {
    const double w = static_cast<double>(cm.support) / static_cast<double>(total);
    r.macro.precision += cm.precision / static_cast<double>(k);
    r.macro.recall += cm.recall / static_cast<double>(k);
    r.macro.f1 += cm.f1 / static_cast<double>(k);
    r.weighted.precision += w * cm.precision;
    r.weighted.recall += w * cm.recall;
    r.weighted.f1 += w * cm.f1;
  }
  return r;
}

namespace {

std::string class_label(const ConfusionMatrix& m, const std::vector<std::string>& names, std::size_t i) {
  return i < names.size() ? names[i] : std::to_string(m.classes[i]);
}

}  // namespace

nlohmann::json to_json(const EvaluationReport& r, const std::vector<std::string>& class_names) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t i = 0; i < r.per_class.size(); ++i) {
    const auto& c = r.per_class[i];
    per_class.push_back({{"class", class_label(r.confusion, class_names, i)},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"support", c.support},
                         {"precision_undefined", c.precision_undefined},
                         {"recall_undefined", c.recall_undefined},
                         {"f1_undefined", c.f1_undefined}});
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.counts.rows(); ++i) {
    std::vector<long long> row(r.confusion.counts.row(i).begin(), r.confusion.counts.row(i).end());
    matrix.push_back(row);
  }
  const auto avg = [](const AverageMetrics& a) {
    return nlohmann::json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
  };
  return {{"samples", r.confusion.total()},
          {"accuracy", r.accuracy},
          {"macro", avg(r.macro)},
          {"weighted", avg(r.weighted)},
          {"per_class", std::move(per_class)},
          {"confusion_matrix", std::move(matrix)},
          {"zero_division", r.zero_division}};
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m, const std::vector<std::string>& class_names) {
  std::vector<std::string> row{"true\\predicted"};
  for (std::size_t j = 0; j < m.classes.size(); ++j) row.push_back(class_label(m, class_names, j));
  write_csv_row(out, row);
  for (Eigen::Index i = 0; i < m.counts.rows(); ++i) {
    row.assign({class_label(m, class_names, static_cast<std::size_t>(i))});
    for (Eigen::Index j = 0; j < m.counts.cols(); ++j) row.push_back(std::to_string(m.counts(i, j)));
    write_csv_row(out, row);
  }
}

}  // namespace windloss

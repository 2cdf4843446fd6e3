#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace windloss {

using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

/// counts(i, j) = samples of true class i predicted as class j.
struct ConfusionMatrix {
  CountMatrix counts;
  std::vector<int> classes;

  long long total() const { return counts.sum(); }
};

/// Labels must belong to `classes`; throws std::invalid_argument otherwise or on length mismatch.
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, std::vector<int> classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long support = 0;
  bool precision_undefined = false;  ///< nothing predicted as this class
  bool recall_undefined = false;     ///< class absent from the truth
  bool f1_undefined = false;         ///< precision + recall == 0
};

struct AverageMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvaluationReport {
  ConfusionMatrix confusion;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  AverageMetrics macro;
  AverageMetrics weighted;
  /// True when any metric hit a zero denominator and was reported as 0.
  bool zero_division = false;
};

/// Undefined ratios are reported as 0 and flagged.
EvaluationReport evaluate(const ConfusionMatrix& confusion);

/// `class_names` label the per-class entries; pass {} for the numeric class ids.
nlohmann::json to_json(const EvaluationReport& report, const std::vector<std::string>& class_names = {});
/// Row header "true\\predicted" followed by one column per class.
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& confusion,
                         const std::vector<std::string>& class_names = {});

}  // namespace windloss

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "windloss/csv.hpp"

namespace windloss {

template <typename Scalar>
struct BlockStats {
  Scalar min{};
  Scalar max{};
  double mean = 0.0;
  std::size_t count = 0;
};

template <typename Scalar>
struct EqualFrequencyBins {
  std::vector<BlockStats<Scalar>> blocks;
  /// Block index for every input position, in input order.
  std::vector<int> assignment;
};

/// Sizes of `bins` contiguous rank blocks over n values; the remainder goes to the lowest blocks.
inline std::vector<std::size_t> equal_frequency_sizes(std::size_t n, std::size_t bins) {
  std::vector<std::size_t> sizes(bins, n / bins);
  for (std::size_t b = 0; b < n % bins; ++b) ++sizes[b];
  return sizes;
}

/// Sorts values ascending (ties keep input order) and cuts them into `bins`
/// contiguous rank blocks whose sizes differ by at most one.
template <typename Scalar>
EqualFrequencyBins<Scalar> equal_frequency_bins(std::span<const Scalar> values, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("equal_frequency_bins: bins must be positive");
  if (values.size() < bins) {
    throw std::invalid_argument("equal_frequency_bins: need at least " + std::to_string(bins) + " values, got " +
                                std::to_string(values.size()));
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  EqualFrequencyBins<Scalar> out;
  out.assignment.assign(values.size(), 0);
  const auto sizes = equal_frequency_sizes(values.size(), bins);
  std::size_t rank = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    BlockStats<Scalar> block;
    block.count = sizes[b];
    block.min = values[order[rank]];
    block.max = values[order[rank + sizes[b] - 1]];
    double sum = 0.0;
    for (std::size_t k = 0; k < sizes[b]; ++k, ++rank) {
      sum += static_cast<double>(values[order[rank]]);
      out.assignment[order[rank]] = static_cast<int>(b);
    }
    block.mean = sum / static_cast<double>(sizes[b]);
    out.blocks.push_back(block);
  }
  return out;
}

template <typename Scalar>
struct QuartileSummary {
  Scalar q1_max{};
  Scalar q2_max{};
  Scalar q3_max{};
  std::array<BlockStats<Scalar>, 4> quartiles{};
};

template <typename Scalar>
struct QuartileResult {
  QuartileSummary<Scalar> summary;
  std::vector<int> assignment;  ///< 0..3 for Q1..Q4
};

/// Equal-frequency quartiles of non-negative values (at least four).
template <typename Scalar>
QuartileResult<Scalar> equal_frequency_quartiles(std::span<const Scalar> values) {
  if (std::any_of(values.begin(), values.end(), [](Scalar v) { return !(v >= Scalar{0}); })) {
    throw std::invalid_argument("equal_frequency_quartiles: values must be non-negative");
  }
  auto bins = equal_frequency_bins(values, 4);
  QuartileResult<Scalar> out;
  std::copy(bins.blocks.begin(), bins.blocks.end(), out.summary.quartiles.begin());
  out.summary.q1_max = bins.blocks[0].max;
  out.summary.q2_max = bins.blocks[1].max;
  out.summary.q3_max = bins.blocks[2].max;
  out.assignment = std::move(bins.assignment);
  return out;
}

template <typename Scalar>
QuartileResult<Scalar> equal_frequency_quartiles(const std::vector<Scalar>& values) {
  return equal_frequency_quartiles(std::span<const Scalar>(values));
}

/// Pearson coefficients for the columns of `data`. Constant columns are reported
/// in `zero_variance` and get coefficient 0 against every other column.
template <typename Scalar>
struct Correlation {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> coefficients;
  std::vector<Eigen::Index> zero_variance;
};

template <typename Derived>
Correlation<typename Derived::Scalar> pearson_correlation(const Eigen::MatrixBase<Derived>& data) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (data.rows() < 2) throw std::invalid_argument("pearson_correlation: need at least 2 rows");

  const Matrix centered = data.rowwise() - data.colwise().mean();
  const Matrix cov = centered.transpose() * centered;
  const Eigen::Index p = data.cols();

  Correlation<Scalar> out;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const bool constant = data.col(j).maxCoeff() == data.col(j).minCoeff();
    if (constant) out.zero_variance.push_back(j);
    scale(j) = constant ? Scalar{0} : Scalar{1} / std::sqrt(cov(j, j));
  }
  out.coefficients = (scale.asDiagonal() * cov * scale.asDiagonal()).cwiseMax(Scalar{-1}).cwiseMin(Scalar{1});
  out.coefficients.diagonal().setOnes();
  return out;
}

struct CorrelationMatrix {
  Eigen::MatrixXd coefficients;
  std::vector<std::string> names;
  std::vector<std::string> zero_variance;
};

inline CorrelationMatrix pearson_correlation(const Eigen::MatrixXd& data, const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != data.cols()) {
    throw std::invalid_argument("pearson_correlation: name count does not match column count");
  }
  auto r = pearson_correlation(data);
  CorrelationMatrix out{std::move(r.coefficients), names, {}};
  for (auto j : r.zero_variance) out.zero_variance.push_back(names[static_cast<std::size_t>(j)]);
  return out;
}

/// Header row: "feature" followed by the feature names; one labelled row per feature.
inline void write_correlation_csv(std::ostream& out, const CorrelationMatrix& m) {
  std::vector<std::string> row{"feature"};
  row.insert(row.end(), m.names.begin(), m.names.end());
  write_csv_row(out, row);
  for (Eigen::Index i = 0; i < m.coefficients.rows(); ++i) {
    row.assign({m.names[static_cast<std::size_t>(i)]});
    for (Eigen::Index j = 0; j < m.coefficients.cols(); ++j) row.push_back(format_double(m.coefficients(i, j)));
    write_csv_row(out, row);
  }
}

}  // namespace windloss

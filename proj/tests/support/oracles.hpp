#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "windloss/cart.hpp"

namespace oracle {

// --- exact classification metrics ----------------------------------------------

struct Rational {
  long long num = 0;
  long long den = 1;

  static Rational of(long long n, long long d) {
    if (d == 0) return {0, 1};
    const long long g = std::gcd(n, d);
    return {n / g, d / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline Rational operator+(Rational a, Rational b) { return Rational::of(a.num * b.den + b.num * a.den, a.den * b.den); }
inline Rational operator*(Rational a, Rational b) { return Rational::of(a.num * b.num, a.den * b.den); }

struct Metrics {
  std::vector<Rational> precision;
  std::vector<Rational> recall;
  std::vector<Rational> f1;
  Rational accuracy;
  Rational macro_precision, macro_recall, macro_f1;
  Rational weighted_precision, weighted_recall, weighted_f1;
};

/// Metrics from a row = truth, column = prediction count matrix, in exact arithmetic.
inline Metrics metrics(const std::vector<std::vector<long long>>& m) {
  const auto k = static_cast<long long>(m.size());
  long long total = 0;
  long long trace = 0;
  for (long long i = 0; i < k; ++i) {
    trace += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    for (long long j = 0; j < k; ++j) total += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  Metrics out;
  out.accuracy = Rational::of(trace, total);
  for (long long c = 0; c < k; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    long long row = 0;
    long long col = 0;
    for (long long o = 0; o < k; ++o) {
      row += m[ci][static_cast<std::size_t>(o)];
      col += m[static_cast<std::size_t>(o)][ci];
    }
    const long long tp = m[ci][ci];
    const auto p = Rational::of(tp, col);
    const auto r = Rational::of(tp, row);
    // F1 = 2 tp / (row + col), the harmonic mean written without p and r.
    const auto f = Rational::of(2 * tp, row + col);
    out.precision.push_back(p);
    out.recall.push_back(r);
    out.f1.push_back(f);
    const auto inv_k = Rational::of(1, k);
    const auto share = Rational::of(row, total);
    out.macro_precision = out.macro_precision + p * inv_k;
    out.macro_recall = out.macro_recall + r * inv_k;
    out.macro_f1 = out.macro_f1 + f * inv_k;
    out.weighted_precision = out.weighted_precision + p * share;
    out.weighted_recall = out.weighted_recall + r * share;
    out.weighted_f1 = out.weighted_f1 + f * share;
  }
  return out;
}

/// Fixed confusion matrices, including the half-recall binary case and a
/// 51-sample three-class matrix with 42 correct.
inline std::vector<std::vector<std::vector<long long>>> fixed_confusions() {
  return {
      {{5, 5}, {0, 10}},
      {{10, 0}, {0, 10}},
      {{15, 2, 0}, {3, 13, 1}, {0, 3, 14}},
      {{17, 0, 0}, {0, 17, 0}, {0, 0, 17}},
      {{0, 4}, {0, 6}},
      {{3, 1, 0}, {1, 3, 0}, {0, 0, 0}},
      {{12, 5, 0}, {4, 11, 2}, {1, 3, 13}},
      {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}},
      {{50, 1}, {2, 47}},
      {{8, 0, 0, 0}, {1, 6, 1, 0}, {0, 2, 5, 1}, {0, 0, 3, 5}},
      {{0, 3}, {7, 0}},
      {{13, 2, 2}, {1, 15, 1}, {2, 1, 14}},
  };
}

// --- exhaustive split search -------------------------------------------------------

/// Impurity from explicit proportions; entropy via natural log rescaled to bits.
template <typename Count>
double impurity(const std::vector<Count>& counts, windloss::Criterion c) {
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  double out = c == windloss::Criterion::gini ? 1.0 : 0.0;
  for (const Count k : counts) {
    const double p = static_cast<double>(k) / n;
    if (c == windloss::Criterion::gini) {
      out -= p * p;
    } else if (p > 0) {
      out -= p * std::log(p) / std::log(2.0);
    }
  }
  return out;
}

struct Split {
  int feature = -1;
  double threshold = 0;
  double improvement = 0;
};

/// Scores every (feature, midpoint) pair in ascending (feature, threshold) order;
/// a later pair replaces the incumbent only if it is better by more than the tie tolerance.
inline std::optional<Split> best_split(const Eigen::MatrixXd& x, const std::vector<int>& y, int classes,
                                       const std::vector<std::size_t>& samples, std::vector<int> features,
                                       const windloss::TreeHyperparams& params) {
  std::sort(features.begin(), features.end());
  std::vector<double> parent(static_cast<std::size_t>(classes), 0.0);
  for (const auto s : samples) parent[static_cast<std::size_t>(y[s])] += 1;
  const double n = static_cast<double>(samples.size());
  const double parent_impurity = impurity(parent, params.criterion);
  std::optional<Split> best;
  for (const int f : features) {
    std::set<double> values;
    for (const auto s : samples) values.insert(x(static_cast<Eigen::Index>(s), f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double a = *it;
      const double b = *std::next(it);
      double t = a + (b - a) / 2;
      if (!(t > a && t < b)) t = a;
      std::vector<double> left(static_cast<std::size_t>(classes), 0.0);
      std::vector<double> right(static_cast<std::size_t>(classes), 0.0);
      for (const auto s : samples) {
        (x(static_cast<Eigen::Index>(s), f) <= t ? left : right)[static_cast<std::size_t>(y[s])] += 1;
      }
      const double nl = std::accumulate(left.begin(), left.end(), 0.0);
      const double nr = n - nl;
      if (nl < params.min_samples_leaf || nr < params.min_samples_leaf) continue;
      const double gain = parent_impurity - nl / n * impurity(left, params.criterion) -
                          nr / n * impurity(right, params.criterion);
      const double bar = best ? best->improvement + windloss::kSplitTolerance : windloss::kSplitTolerance;
      if (gain > bar) best = Split{f, t, gain};
    }
  }
  return best;
}

}  // namespace oracle

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "windloss/rng.hpp"
#include "windloss/stats.hpp"
#include "windloss/synth.hpp"

using namespace windloss;

TEST_CASE("quartiles of 1..8") {
  const std::vector<double> v{5, 1, 8, 2, 7, 3, 6, 4};
  const auto q = equal_frequency_quartiles(v);
  CHECK(q.summary.q1_max == 2);
  CHECK(q.summary.q2_max == 4);
  CHECK(q.summary.q3_max == 6);
  CHECK(q.summary.quartiles[3].min == 7);
  CHECK(q.summary.quartiles[3].max == 8);
  CHECK(q.summary.quartiles[3].mean == 7.5);
  CHECK(q.assignment == std::vector<int>{2, 0, 3, 0, 3, 1, 2, 1});
}

TEST_CASE("quartile preconditions") {
  CHECK_THROWS(equal_frequency_quartiles(std::vector<double>{1, 2, 3}));
  CHECK_THROWS(equal_frequency_quartiles(std::vector<double>{1, 2, 3, -4}));
}

TEST_CASE("remainder ranks go to the lowest blocks") {
  CHECK(equal_frequency_sizes(10, 4) == std::vector<std::size_t>{3, 3, 2, 2});
  CHECK(equal_frequency_sizes(756, 4) == std::vector<std::size_t>{189, 189, 189, 189});
  CHECK(equal_frequency_sizes(7, 3) == std::vector<std::size_t>{3, 2, 2});
}

TEST_CASE("quartiles of 1000 random values match a sort-and-slice oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1000 + static_cast<std::size_t>(trial);
    std::vector<double> v(n);
    for (auto& x : v) x = std::floor(std::exp(8.0 + 2.0 * rng.normal()));  // integer losses, so ties occur
    const auto q = equal_frequency_quartiles(v);

    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t base = n / 4;
    const std::size_t extra = n % 4;
    std::size_t start = 0;
    std::size_t total = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      const std::size_t size = base + (b < extra ? 1 : 0);
      const auto& block = q.summary.quartiles[b];
      CHECK(block.count == size);
      CHECK(block.min == sorted[start]);
      CHECK(block.max == sorted[start + size - 1]);
      const double mean = std::accumulate(sorted.begin() + static_cast<long>(start),
                                          sorted.begin() + static_cast<long>(start + size), 0.0) /
                          static_cast<double>(size);
      CHECK(block.mean == doctest::Approx(mean).epsilon(1e-12));
      start += size;
      total += block.count;
    }
    CHECK(total == n);
    CHECK(q.summary.q1_max <= q.summary.q2_max);
    CHECK(q.summary.q2_max <= q.summary.q3_max);
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = static_cast<std::size_t>(q.assignment[i]);
      CHECK(v[i] >= q.summary.quartiles[b].min);
      CHECK(v[i] <= q.summary.quartiles[b].max);
    }
  }
}

TEST_CASE("shuffling inputs leaves the quartile summary unchanged") {
  Rng rng(3);
  std::vector<double> v(403);
  for (auto& x : v) x = rng.uniform(0.0, 1e6);
  const auto a = equal_frequency_quartiles(v).summary;
  for (int k = 0; k < 10; ++k) {
    rng.shuffle(v.begin(), v.end());
    const auto b = equal_frequency_quartiles(v).summary;
    for (std::size_t q = 0; q < 4; ++q) {
      CHECK(a.quartiles[q].min == b.quartiles[q].min);
      CHECK(a.quartiles[q].max == b.quartiles[q].max);
      CHECK(a.quartiles[q].count == b.quartiles[q].count);
      CHECK(a.quartiles[q].mean == doctest::Approx(b.quartiles[q].mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("stable order decides tied values at a block edge") {
  const std::vector<double> v{5, 5, 5, 5, 5, 5, 5, 5};
  const auto q = equal_frequency_quartiles(v);
  CHECK(q.assignment == std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3});
}

TEST_CASE("quartile fixture reproduces the published Q4 block") {
  const auto losses = quartile_fixture_losses();
  REQUIRE(losses.size() == 816);
  const auto q = equal_frequency_quartiles(losses).summary;
  CHECK(q.quartiles[3].min == 45076.0);
  CHECK(q.quartiles[3].max == 19298377.0);
  CHECK(std::abs(q.quartiles[3].mean - 851468.14) <= 0.01);
  CHECK(q.quartiles[3].count == 204);
  CHECK(q.quartiles[0].min == 42.0);
  CHECK(q.quartiles[0].max == 987.0);
  CHECK(std::abs(q.quartiles[0].mean - 492.22) <= 0.01);
  CHECK(q.quartiles[2].max == 44864.0);
}

TEST_CASE("pearson: identity, negation and a hand-computed pair") {
  Eigen::MatrixXd d(4, 3);
  d << 1, 2, -1,  //
      2, 4, -2,   //
      3, 6, -3,   //
      4, 9, -4;
  const auto c = pearson_correlation(d);
  CHECK(c.coefficients(0, 0) == 1.0);
  CHECK(c.coefficients(0, 2) == doctest::Approx(-1.0).epsilon(1e-15));

  // Oracle: r = sum(dx dy) / sqrt(sum dx^2 sum dy^2), written out directly.
  const double x[] = {1, 2, 3, 4};
  const double y[] = {2, 4, 6, 9};
  const double mx = 2.5;
  const double my = 21.0 / 4.0;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double expected = sxy / std::sqrt(sxx * syy);
  CHECK(std::abs(c.coefficients(0, 1) - expected) <= 1e-12);
  CHECK(std::abs(c.coefficients(1, 0) - expected) <= 1e-12);
  CHECK(c.zero_variance.empty());
}

TEST_CASE("pearson: symmetry, range, zero-variance flag and affine invariance") {
  Rng rng(21);
  Eigen::MatrixXd d(50, 5);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double z = rng.normal();
    d(i, 0) = z + 0.3 * rng.normal();
    d(i, 1) = -z + rng.normal();
    d(i, 2) = rng.normal();
    d(i, 3) = 7.0;
    d(i, 4) = 0.5 * z + rng.normal();
  }
  const auto c = pearson_correlation(d, {"a", "b", "c", "constant", "e"});
  CHECK(c.zero_variance == std::vector<std::string>{"constant"});
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(c.coefficients(i, i) == 1.0);
    for (Eigen::Index j = 0; j < 5; ++j) {
      CHECK(c.coefficients(i, j) == c.coefficients(j, i));
      CHECK(std::abs(c.coefficients(i, j)) <= 1.0);
      if (i != j && (i == 3 || j == 3)) CHECK(c.coefficients(i, j) == 0.0);
    }
  }

  Eigen::MatrixXd t = d;
  t.col(1) = 3.5 * t.col(1).array() + 100.0;
  const auto ct = pearson_correlation(t);
  CHECK((ct.coefficients - c.coefficients).cwiseAbs().maxCoeff() <= 1e-9);

  CHECK_THROWS(pearson_correlation(Eigen::MatrixXd(1, 3)));
  CHECK_THROWS(pearson_correlation(d, {"too", "few"}));
}

TEST_CASE("pearson is templated on the scalar type") {
  Eigen::MatrixXf d(3, 2);
  d << 1, 3, 2, 2, 3, 1;
  const auto c = pearson_correlation(d);
  static_assert(std::is_same_v<decltype(c.coefficients)::Scalar, float>);
  CHECK(c.coefficients(0, 1) == doctest::Approx(-1.0f));
}

TEST_CASE("correlation CSV carries the feature names") {
  Eigen::MatrixXd d(3, 2);
  d << 1, 3, 2, 2, 3, 1;
  std::ostringstream out;
  write_correlation_csv(out, pearson_correlation(d, {"x", "y"}));
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "feature,x,y");
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("x,1,", 0) == 0);
}

#include "windloss/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "windloss/rng.hpp"
#include "windloss/stats.hpp"

namespace windloss {

std::string_view to_string(LossLevel level) {
  switch (level) {
    case LossLevel::level1: return "Level1";
    case LossLevel::level2: return "Level2";
    case LossLevel::level3: return "Level3";
  }
  return "?";
}

std::string_view description(LossLevel level) {
  switch (level) {
    case LossLevel::level1: return "moderate";
    case LossLevel::level2: return "severe";
    case LossLevel::level3: return "catastrophic";
  }
  return "?";
}

std::vector<std::string> loss_level_names() {
  return {std::string(to_string(LossLevel::level1)), std::string(to_string(LossLevel::level2)),
          std::string(to_string(LossLevel::level3))};
}

namespace {

std::vector<double> losses_of(std::span<const JoinedEvent> events) {
  std::vector<double> losses;
  losses.reserve(events.size());
  for (const auto& e : events) losses.push_back(e.event.loss_eur);
  return losses;
}

}  // namespace

std::vector<JoinedEvent> filter_massive_losses(std::span<const JoinedEvent> joined) {
  if (joined.size() < 4) throw std::invalid_argument("filter_massive_losses: need at least 4 events");
  const auto losses = losses_of(joined);
  const auto quartiles = equal_frequency_quartiles(losses);
  std::vector<JoinedEvent> out;
  for (std::size_t i = 0; i < joined.size(); ++i) {
    if (quartiles.assignment[i] == 3) out.push_back(joined[i]);
  }
  return out;
}

LabeledDataset assign_loss_levels(std::span<const JoinedEvent> massive) {
  if (massive.size() < 3) throw std::invalid_argument("assign_loss_levels: need at least 3 events");
  const auto losses = losses_of(massive);
  const auto tertiles = equal_frequency_bins(std::span<const double>(losses), kLossLevelCount);
  LabeledDataset out;
  out.features = vectorize(massive);
  out.labels = tertiles.assignment;
  for (std::size_t k = 0; k < out.boundaries.size(); ++k) {
    const auto& b = tertiles.blocks[k];
    out.boundaries[k] = {b.min, b.max, b.mean, b.count};
  }
  return out;
}

SplitDataset split(std::span<const int> labels, int n_classes, const SplitOptions& options) {
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
  }
  const std::size_t n = labels.size();
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) throw std::invalid_argument("split: label out of range");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].size() < 2) {
      throw std::invalid_argument("split: class " + std::to_string(c) + " has fewer than 2 members");
    }
  }
  const auto test_total = static_cast<std::size_t>(std::llround(static_cast<double>(n) * options.test_fraction));

  SplitDataset out;
  out.seed = options.seed;
  out.test_fraction = options.test_fraction;
  out.stratified = options.stratified;
  Rng rng(options.seed);

  if (options.stratified) {
    // Largest-remainder apportionment of test_total across classes.
    std::vector<std::size_t> quota(members.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < members.size(); ++c) {
      const double exact = static_cast<double>(members[c].size()) * options.test_fraction;
      quota[c] = static_cast<std::size_t>(std::floor(exact));
      assigned += quota[c];
      remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < test_total && k < remainders.size(); ++k, ++assigned) {
      ++quota[remainders[k].second];
    }
    for (std::size_t c = 0; c < members.size(); ++c) {
      auto idx = members[c];
      rng.shuffle(idx.begin(), idx.end());
      out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota[c]));
      out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(quota[c]), idx.end());
    }
  } else {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx.begin(), idx.end());
    out.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(test_total));
    out.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(test_total), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitDataset split(const LabeledDataset& dataset, const SplitOptions& options) {
  return split(dataset.labels, kLossLevelCount, options);
}

Partition take_rows(const Eigen::MatrixXd& features, std::span<const int> labels,
                    std::span<const std::size_t> rows) {
  Partition p;
  p.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  p.labels.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    p.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(rows[k]));
    p.labels.push_back(labels[rows[k]]);
  }
  return p;
}

void write_labeled_csv(std::ostream& out, const LabeledDataset& dataset) {
  auto header = dataset.features.columns;
  header.emplace_back("loss_level");
  write_csv_row(out, header);
  const auto& x = dataset.features.values;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < x.cols(); ++j) row.push_back(format_double(x(i, j)));
    row.push_back(std::to_string(dataset.labels[static_cast<std::size_t>(i)] + 1));
    write_csv_row(out, row);
  }
}

LabeledDataset read_labeled_csv(const CsvTable& table) {
  if (table.header.empty() || table.header.back() != "loss_level") {
    throw DataError("labeled dataset: last column must be loss_level");
  }
  LabeledDataset out;
  out.features.columns.assign(table.header.begin(), table.header.end() - 1);
  const auto cols = static_cast<Eigen::Index>(out.features.columns.size());
  out.features.values.resize(static_cast<Eigen::Index>(table.rows.size()), cols);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto where = "labeled dataset row " + std::to_string(r + 1);
    if (row.size() != table.header.size()) throw DataError(where + ": column count mismatch");
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto v = parse_double(row[static_cast<std::size_t>(j)]);
      if (!v) throw DataError(where + ": unparseable " + table.header[static_cast<std::size_t>(j)]);
      out.features.values(static_cast<Eigen::Index>(r), j) = *v;
    }
    const auto level = parse_integer(row.back());
    if (!level || *level < 1 || *level > kLossLevelCount) throw DataError(where + ": loss_level must be 1, 2 or 3");
    out.labels.push_back(static_cast<int>(*level - 1));
  }
  for (int label : out.labels) ++out.boundaries[static_cast<std::size_t>(label)].count;
  return out;
}

nlohmann::json boundaries_to_json(const std::array<LevelBoundary, kLossLevelCount>& boundaries) {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    const auto level = static_cast<LossLevel>(k);
    const auto& b = boundaries[k];
    levels.push_back({{"level", to_string(level)},
                      {"description", description(level)},
                      {"min_eur", b.min},
                      {"max_eur", b.max},
                      {"mean_eur", b.mean},
                      {"count", b.count}});
  }
  return levels;
}

nlohmann::json to_json(const SplitDataset& s) {
  return {{"seed", s.seed},
          {"test_fraction", s.test_fraction},
          {"stratified", s.stratified},
          {"train", s.train},
          {"test", s.test}};
}

SplitDataset split_from_json(const nlohmann::json& j) {
  SplitDataset s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.test_fraction = j.at("test_fraction").get<double>();
  s.stratified = j.at("stratified").get<bool>();
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

}  // namespace windloss

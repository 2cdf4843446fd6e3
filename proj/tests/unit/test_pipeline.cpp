#include <doctest.h>

#include <fstream>
#include <sstream>

#include "windloss/app/config.hpp"
#include "windloss/app/pipeline.hpp"
#include "windloss/csv.hpp"

using namespace windloss;
using namespace windloss::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("windloss_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(slurp(path)); }

// A small but complete run: 240 synthetic events, a four-combination grid.
RunConfig small_run(const fs::path& dir) {
  const auto j = nlohmann::json::parse(R"({
    "inputs": {"events": "out/events.csv", "meteo": "out/meteo.csv", "resilience": "out/resilience.csv"},
    "synth": {"n_events": 240},
    "tuning": {
      "grid": {"n_estimators": [10, 30], "min_samples_split": [2], "min_samples_leaf": [1, 4],
               "max_features": ["sqrt"], "max_depth": [null], "criterion": ["gini"]},
      "folds": 3
    },
    "model": "tuned",
    "seed": 7
  })");
  return config_from_json(j, dir);
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = config_from_json(nlohmann::json::object(), "/base");
  CHECK(c.seed == 42);
  CHECK(c.cv_folds == 5);
  CHECK(c.grid.size() == 24);
  CHECK(c.model.source == ModelChoice::Source::defaults);
  CHECK(c.output() == fs::path("/base/out"));

  bool has_reference = false;
  for (const auto& p : default_grid().combinations(0)) {
    auto q = reference_tuned_params();
    q.seed = p.seed;
    has_reference = has_reference || p == q;
  }
  CHECK(has_reference);

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"sed", 1}}, "."), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"split", {{"fraction", 0.3}}}}, "."), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"synth", {{"seed", 3}}}}, "."), ConfigError);
  CHECK_THROWS(config_from_json(nlohmann::json{{"tuning", {{"metric", "auc"}}}}, "."));

  const auto explicit_model = config_from_json(
      nlohmann::json::parse(R"({"model": {"n_estimators": 7, "max_depth": 3, "criterion": "entropy"}})"), ".");
  CHECK(explicit_model.model.source == ModelChoice::Source::explicit_params);
  CHECK(explicit_model.model.params.n_estimators == 7);
  CHECK(explicit_model.model.params.tree.max_depth == 3);
  CHECK(explicit_model.model.params.tree.criterion == Criterion::entropy);

  auto bad = c;
  bad.test_fraction = 1.5;
  CHECK_THROWS_AS(validate(bad), ConfigError);

  auto round = config_from_json(to_json(c), "/base");
  CHECK(to_json(round) == to_json(c));
}

TEST_CASE("config hash ignores output location and threads only") {
  auto a = config_from_json(nlohmann::json::object(), ".");
  auto b = a;
  b.output_dir = "elsewhere";
  b.threads = 8;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 43;
  CHECK(config_hash(a) != config_hash(b));

  apply(b, Overrides{std::uint64_t{5}, 2, std::nullopt});
  CHECK(b.seed == 5);
  CHECK(b.threads == 2);
}

TEST_CASE("missing inputs and artifacts are named") {
  const auto dir = scratch("missing");
  auto config = small_run(dir);
  try {
    require_inputs(config);
    FAIL("expected a missing-input error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("events.csv") != std::string::npos);
  }
  try {
    run_label(config);
    FAIL("expected a missing-artifact error");
  } catch (const StageError& e) {
    CHECK(std::string(e.what()).find(artifacts::joined) != std::string::npos);
  }
  CHECK_THROWS_AS(run_stage("plot", config), StageError);
}

TEST_CASE("all stages run, carry provenance and rerun identically") {
  const auto dir = scratch("stages");
  const auto config = small_run(dir);
  run_synth(config);
  require_inputs(config);

  const std::vector<std::string> order{"ingest", "label", "tune", "train", "evaluate", "importance", "report"};
  std::map<std::string, std::string> first;
  for (const auto& stage : order) {
    const auto result = run_stage(stage, config);
    CHECK(result.stage == stage);
    for (const auto& path : result.outputs) {
      REQUIRE(fs::exists(path));
      first[path.filename().string()] =
          path.extension() == ".json" ? without_timestamp(read_json(path)).dump() : slurp(path);
    }
  }

  const auto levels = read_json(config.output() / artifacts::levels);
  CHECK(levels["schema_version"] == kSchemaVersion);
  CHECK(levels["config_hash"] == config_hash(config));
  CHECK(levels["seed"] == 7);
  CHECK(levels.contains("generated_at"));
  CHECK(levels["massive_events"] == 60);

  const auto evaluation = read_json(config.output() / artifacts::evaluation);
  CHECK(evaluation.contains("accuracy"));
  CHECK(evaluation["macro"].contains("f1"));
  CHECK(evaluation["weighted"].contains("f1"));
  CHECK(evaluation["per_class"].size() == 3);

  const auto joined = read_csv_file(config.output() / artifacts::joined);
  CHECK(joined.header.size() == 4 + kFeatureCount);
  CHECK(joined.header[0] == "event_id");

  const auto importance = read_csv_file(config.output() / artifacts::importance_table);
  double total = 0;
  for (const auto& row : importance.rows) total += *parse_double(row[3]);
  CHECK(std::abs(total - 1.0) <= 1e-9);

  const auto model = read_json(config.output() / artifacts::model);
  const auto tuning = read_json(config.output() / artifacts::tuning);
  CHECK(model["hyperparams"]["n_estimators"] == tuning["best_params"]["n_estimators"]);

  for (const auto& stage : order) {
    for (const auto& path : run_stage(stage, config).outputs) {
      const auto again = path.extension() == ".json" ? without_timestamp(read_json(path)).dump() : slurp(path);
      CHECK_MESSAGE(again == first[path.filename().string()], path.filename().string());
    }
  }
  fs::remove_all(dir);
}

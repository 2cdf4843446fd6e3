#include "windloss/app/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "windloss/csv.hpp"
#include "windloss/stats.hpp"

namespace windloss::app {

namespace fs = std::filesystem;

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path output_dir(const RunConfig& config) {
  const auto dir = config.output();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StageError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

fs::path upstream(const RunConfig& config, const char* name, std::string_view producer) {
  const auto path = config.output() / name;
  if (!fs::is_regular_file(path)) {
    throw StageError("missing artifact " + path.string() + " (run `" + std::string(producer) + "` first)");
  }
  return path;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw StageError(path.string() + ": " + e.what());
  }
}

template <typename Writer>
fs::path write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError("cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw StageError("write failed: " + path.string());
  return path;
}

fs::path write_json(const fs::path& path, const nlohmann::json& j) {
  return write_file(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

/// Provenance header followed by the payload's keys.
nlohmann::json envelope(std::string_view artifact, const RunConfig& config, const nlohmann::json& payload) {
  auto j = provenance(artifact, config);
  for (const auto& item : payload.items()) j[item.key()] = item.value();
  return j;
}

nlohmann::json rejects_json(const std::vector<Reject>& rejects) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rejects) out.push_back({{"row", r.row}, {"reason", r.reason}});
  return out;
}

struct LabeledSplit {
  LabeledDataset dataset;
  SplitDataset split;
  Partition train;
  Partition test;
};

LabeledSplit load_labeled(const RunConfig& config) {
  LabeledSplit s;
  s.dataset = read_labeled_csv(read_csv_file(upstream(config, artifacts::labeled, "label")));
  s.split = split_from_json(read_json(upstream(config, artifacts::split, "label")));
  const auto& x = s.dataset.features.values;
  for (const auto* rows : {&s.split.train, &s.split.test}) {
    for (const auto r : *rows) {
      if (r >= s.dataset.size()) throw StageError("split.json refers to row " + std::to_string(r) + " beyond labeled.csv");
    }
  }
  s.train = take_rows(x, s.dataset.labels, s.split.train);
  s.test = take_rows(x, s.dataset.labels, s.split.test);
  return s;
}

Forest load_model(const RunConfig& config) {
  try {
    return forest_from_json(read_json(upstream(config, artifacts::model, "train")));
  } catch (const std::invalid_argument& e) {
    throw StageError(std::string(artifacts::model) + ": " + e.what());
  }
}

ForestHyperparams chosen_params(const RunConfig& config) {
  ForestHyperparams p;
  switch (config.model.source) {
    case ModelChoice::Source::defaults:
      p = default_params();
      p.seed = config.seed;
      break;
    case ModelChoice::Source::reference_tuned:
      p = reference_tuned_params();
      p.seed = config.seed;
      break;
    case ModelChoice::Source::explicit_params:
      p = config.model.params;
      p.seed = config.seed;
      break;
    case ModelChoice::Source::tuned: {
      const auto tuning = read_json(upstream(config, artifacts::tuning, "tune"));
      p = forest_params_from_json(tuning.at("best_params"));
      break;
    }
  }
  return p;
}

}  // namespace

nlohmann::json provenance(std::string_view artifact, const RunConfig& config) {
  return {{"schema_version", kSchemaVersion},
          {"artifact", artifact},
          {"config_hash", config_hash(config)},
          {"seed", config.seed},
          {"generated_at", utc_timestamp()}};
}

nlohmann::json without_timestamp(nlohmann::json artifact) {
  if (artifact.is_object()) artifact.erase("generated_at");
  return artifact;
}

StageResult run_ingest(const RunConfig& config) {
  require_inputs(config);
  const auto events = ingest_events(config.resolve(config.events_path), config.events_columns, config.window);
  const auto meteo = ingest_meteo(config.resolve(config.meteo_path), config.meteo_columns);
  const auto resilience = ingest_resilience(config.resolve(config.resilience_path), config.resilience_columns);
  const auto join = clean_and_join(events.records, meteo.records, resilience.records, config.window);
  if (join.joined.empty()) throw StageError("ingest: no event survived cleaning and joining");

  const auto dir = output_dir(config);
  StageResult result{"ingest", {}, {}};
  result.outputs.push_back(
      write_file(dir / artifacts::joined, [&](std::ostream& out) { write_joined_csv(out, join.joined); }));
  if (join.joined.size() >= 2) {
    const auto table = vectorize(join.joined);
    const auto correlation = pearson_correlation(table.values, table.columns);
    result.outputs.push_back(
        write_file(dir / artifacts::correlation, [&](std::ostream& out) { write_correlation_csv(out, correlation); }));
  }
  auto report = to_json(join.report);
  report["rejects"] = {{"events", rejects_json(events.rejects)},
                       {"meteo", rejects_json(meteo.rejects)},
                       {"resilience", rejects_json(resilience.rejects)}};
  report["outputs"] = {artifacts::joined, artifacts::correlation};
  result.outputs.push_back(write_json(dir / artifacts::drop_report, envelope("drop_report", config, report)));

  std::ostringstream summary;
  summary << "ingest: " << events.records.size() + events.rejects.size() << " event rows, "
          << events.rejects.size() + meteo.rejects.size() + resilience.rejects.size() << " rejected rows, "
          << join.joined.size() << " joined, " << join.report.input_events - join.report.joined_events
          << " dropped";
  result.summary = summary.str();
  return result;
}

StageResult run_label(const RunConfig& config) {
  const auto joined = read_joined_csv(read_csv_file(upstream(config, artifacts::joined, "ingest")));
  if (joined.size() < 4) throw StageError("label: need at least 4 joined events, have " + std::to_string(joined.size()));
  const auto massive = filter_massive_losses(joined);
  if (massive.size() < config.min_massive_events) {
    throw StageError("label: too few massive-loss events (" + std::to_string(massive.size()) + " < " +
                     std::to_string(config.min_massive_events) + ")");
  }
  const auto dataset = assign_loss_levels(massive);
  const auto partition = split(dataset, config.split_options());

  std::vector<double> losses;
  losses.reserve(joined.size());
  for (const auto& j : joined) losses.push_back(j.event.loss_eur);
  const auto quartiles = equal_frequency_quartiles(losses).summary;
  nlohmann::json quartile_json = nlohmann::json::array();
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& b = quartiles.quartiles[q];
    quartile_json.push_back(
        {{"quartile", "Q" + std::to_string(q + 1)}, {"min_eur", b.min}, {"max_eur", b.max}, {"mean_eur", b.mean},
         {"count", b.count}});
  }

  const auto dir = output_dir(config);
  StageResult result{"label", {}, {}};
  result.outputs.push_back(
      write_file(dir / artifacts::labeled, [&](std::ostream& out) { write_labeled_csv(out, dataset); }));
  result.outputs.push_back(write_json(dir / artifacts::levels,
                                      envelope("levels", config,
                                               {{"joined_events", joined.size()},
                                                {"massive_events", massive.size()},
                                                {"quartiles", quartile_json},
                                                {"levels", boundaries_to_json(dataset.boundaries)},
                                                {"outputs", {artifacts::labeled}}})));
  result.outputs.push_back(write_json(dir / artifacts::split, envelope("split", config, to_json(partition))));

  std::ostringstream summary;
  summary << "label: " << massive.size() << " massive-loss events of " << joined.size() << "; levels";
  for (const auto& b : dataset.boundaries) summary << ' ' << b.count;
  summary << "; " << partition.train.size() << " train / " << partition.test.size() << " test";
  result.summary = summary.str();
  return result;
}

StageResult run_train(const RunConfig& config) {
  const auto data = load_labeled(config);
  const auto params = chosen_params(config);
  const auto forest = fit_forest(data.train.features, data.train.labels, kLossLevelCount, params,
                                 data.dataset.features.columns, loss_level_names(), config.threads);
  const auto dir = output_dir(config);
  StageResult result{"train", {}, {}};
  result.outputs.push_back(write_json(dir / artifacts::model, envelope("model", config, to_json(forest))));
  result.summary = "train: " + std::to_string(forest.trees().size()) + " trees on " +
                   std::to_string(data.train.labels.size()) + " rows";
  return result;
}

StageResult run_tune(const RunConfig& config) {
  const auto data = load_labeled(config);
  SealedTestSet test(data.test);
  TuningOptions options;
  options.folds = config.cv_folds;
  options.metric = config.selection_metric;
  options.seed = config.seed;
  options.threads = config.threads;
  const auto names = loss_level_names();
  const auto tuning = grid_search(data.train, test, config.grid, options, data.dataset.features.columns, names);

  const auto reference = reference_tuned_params();
  bool has_reference = false;
  for (const auto& row : tuning.table) {
    auto p = row.params;
    p.seed = reference.seed;
    has_reference = has_reference || p == reference;
  }
  auto payload = to_json(tuning, names);
  payload["contains_reference_tuned"] = has_reference;
  payload["outputs"] = {artifacts::tuning_table};

  const auto dir = output_dir(config);
  StageResult result{"tune", {}, {}};
  result.outputs.push_back(
      write_file(dir / artifacts::tuning_table, [&](std::ostream& out) { write_tuning_csv(out, tuning); }));
  result.outputs.push_back(write_json(dir / artifacts::tuning, envelope("tuning", config, payload)));
  std::ostringstream summary;
  summary << "tune: " << tuning.table.size() << " combinations x " << tuning.folds << " folds; best "
          << to_string(tuning.metric) << ' ' << format_fixed(tuning.table[tuning.best_index].mean_score, 4)
          << " (cv), test macro F1 " << format_fixed(tuning.test_report.macro.f1, 4);
  result.summary = summary.str();
  return result;
}

StageResult run_evaluate(const RunConfig& config) {
  const auto data = load_labeled(config);
  const auto forest = load_model(config);
  if (forest.columns() != data.dataset.features.columns) {
    throw StageError("model.json feature columns do not match labeled.csv");
  }
  const auto predicted = predict(forest, data.test.features, config.threads);
  const auto report = evaluate(confusion(data.test.labels, predicted, {0, 1, 2}));
  const auto names = loss_level_names();

  const auto dir = output_dir(config);
  StageResult result{"evaluate", {}, {}};
  result.outputs.push_back(write_file(dir / artifacts::confusion, [&](std::ostream& out) {
    write_confusion_csv(out, report.confusion, names);
  }));
  auto payload = to_json(report, names);
  payload["partition"] = "test";
  payload["model_params"] = to_json(forest.params());
  payload["outputs"] = {artifacts::confusion};
  result.outputs.push_back(write_json(dir / artifacts::evaluation, envelope("evaluation", config, payload)));
  result.summary = "evaluate: accuracy " + format_fixed(report.accuracy, 4) + ", macro F1 " +
                   format_fixed(report.macro.f1, 4) + " on " + std::to_string(data.test.labels.size()) +
                   " test rows";
  return result;
}

StageResult run_importance(const RunConfig& config) {
  const auto forest = load_model(config);
  const auto report = feature_importance(forest, forest.columns(), feature_categories());
  const auto dir = output_dir(config);
  StageResult result{"importance", {}, {}};
  result.outputs.push_back(
      write_file(dir / artifacts::importance_table, [&](std::ostream& out) { write_importance_csv(out, report); }));
  auto payload = to_json(report);
  payload["total"] = report.total();
  payload["outputs"] = {artifacts::importance_table};
  result.outputs.push_back(write_json(dir / artifacts::importance, envelope("importance", config, payload)));
  result.summary = "importance: top feature " + (report.features.empty() ? std::string("-") : report.features[0].name);
  return result;
}

namespace {

void write_text_report(std::ostream& out, const nlohmann::json& levels, const nlohmann::json& evaluation,
                       const nlohmann::json& importance, const nlohmann::json* tuning) {
  out << "Loss levels (" << levels.at("massive_events").get<std::size_t>() << " massive-loss events of "
      << levels.at("joined_events").get<std::size_t>() << ")\n";
  out << std::left << std::setw(8) << "level" << std::setw(14) << "description" << std::right << std::setw(16)
      << "min_eur" << std::setw(16) << "max_eur" << std::setw(16) << "mean_eur" << std::setw(8) << "count" << '\n';
  for (const auto& l : levels.at("levels")) {
    out << std::left << std::setw(8) << l.at("level").get<std::string>() << std::setw(14)
        << l.at("description").get<std::string>() << std::right << std::setw(16)
        << format_fixed(l.at("min_eur").get<double>(), 2) << std::setw(16)
        << format_fixed(l.at("max_eur").get<double>(), 2) << std::setw(16)
        << format_fixed(l.at("mean_eur").get<double>(), 2) << std::setw(8) << l.at("count").get<std::size_t>()
        << '\n';
  }

  out << "\nTest evaluation (" << evaluation.at("samples").get<long long>() << " rows)\n";
  out << std::left << std::setw(14) << "class" << std::right << std::setw(11) << "precision" << std::setw(11)
      << "recall" << std::setw(11) << "f1" << std::setw(9) << "support" << '\n';
  for (const auto& c : evaluation.at("per_class")) {
    out << std::left << std::setw(14) << c.at("class").get<std::string>() << std::right << std::setw(11)
        << format_fixed(c.at("precision").get<double>(), 4) << std::setw(11)
        << format_fixed(c.at("recall").get<double>(), 4) << std::setw(11) << format_fixed(c.at("f1").get<double>(), 4)
        << std::setw(9) << c.at("support").get<long long>() << '\n';
  }
  for (const char* family : {"macro", "weighted"}) {
    const auto& a = evaluation.at(family);
    out << std::left << std::setw(14) << (std::string(family) + " avg") << std::right << std::setw(11)
        << format_fixed(a.at("precision").get<double>(), 4) << std::setw(11)
        << format_fixed(a.at("recall").get<double>(), 4) << std::setw(11) << format_fixed(a.at("f1").get<double>(), 4)
        << '\n';
  }
  out << std::left << std::setw(14) << "accuracy" << std::right << std::setw(33)
      << format_fixed(evaluation.at("accuracy").get<double>(), 4) << '\n';

  if (tuning != nullptr) {
    out << "\nGrid search: " << tuning->at("grid_size").get<std::size_t>() << " combinations, "
        << tuning->at("folds").get<int>() << "-fold CV on "
        << tuning->at("selection_metric").get<std::string>() << "\n  best cv score "
        << format_fixed(tuning->at("best_mean_score").get<double>(), 4) << ", default-params cv score "
        << format_fixed(tuning->at("default_reference").at("mean_score").get<double>(), 4)
        << ", tuned test macro F1 "
        << format_fixed(tuning->at("test_evaluation").at("macro").at("f1").get<double>(), 4) << '\n';
  }

  out << "\nFeature importance (top 10)\n";
  std::size_t rank = 0;
  for (const auto& f : importance.at("features")) {
    if (++rank > 10) break;
    out << std::right << std::setw(3) << rank << "  " << std::left << std::setw(26) << f.at("name").get<std::string>()
        << std::setw(16) << f.at("category").get<std::string>() << std::right
        << format_fixed(f.at("importance").get<double>(), 4) << '\n';
  }
}

}  // namespace

StageResult run_report(const RunConfig& config) {
  const auto levels = read_json(upstream(config, artifacts::levels, "label"));
  const auto evaluation = read_json(upstream(config, artifacts::evaluation, "evaluate"));
  const auto importance = read_json(upstream(config, artifacts::importance, "importance"));
  const auto tuning_path = config.output() / artifacts::tuning;
  const auto drop_path = config.output() / artifacts::drop_report;
  std::optional<nlohmann::json> tuning;
  if (fs::is_regular_file(tuning_path)) tuning = read_json(tuning_path);

  nlohmann::json payload{{"levels", levels.at("levels")},
                         {"quartiles", levels.at("quartiles")},
                         {"evaluation", without_timestamp(evaluation)},
                         {"importance", importance.at("features")},
                         {"importance_by_category", importance.at("by_category")}};
  if (fs::is_regular_file(drop_path)) {
    const auto drops = read_json(drop_path);
    payload["ingest"] = {{"input_events", drops.at("input_events")}, {"joined_events", drops.at("joined_events")}};
  }
  if (tuning) {
    payload["tuning"] = {{"best_params", tuning->at("best_params")},
                         {"best_mean_score", tuning->at("best_mean_score")},
                         {"default_reference", tuning->at("default_reference")},
                         {"test_evaluation", tuning->at("test_evaluation")}};
  }
  payload["outputs"] = {artifacts::report_text};

  const auto dir = output_dir(config);
  StageResult result{"report", {}, {}};
  result.outputs.push_back(write_file(dir / artifacts::report_text, [&](std::ostream& out) {
    write_text_report(out, levels, evaluation, importance, tuning ? &*tuning : nullptr);
  }));
  result.outputs.push_back(write_json(dir / artifacts::report, envelope("report", config, payload)));
  result.summary = "report: written to " + (dir / artifacts::report_text).string();
  return result;
}

StageResult run_synth(const RunConfig& config) {
  auto synth = config.synth;
  synth.seed = config.seed;
  const auto files = generate(synth);
  const auto dir = output_dir(config);
  write_files(files, dir);
  StageResult result{"synth", {dir / kEventsFile, dir / kMeteoFile, dir / kResilienceFile}, {}};
  result.outputs.push_back(write_json(
      dir / artifacts::synth,
      envelope("synth", config,
               {{"synth", to_json(synth)}, {"outputs", {kEventsFile, kMeteoFile, kResilienceFile}}})));
  result.summary = "synth: " + std::to_string(synth.n_events) + " events written to " + dir.string();
  return result;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest",   "label",      "train",  "tune",
                                              "evaluate", "importance", "report", "synth"};
  return names;
}

StageResult run_stage(std::string_view name, const RunConfig& config) {
  if (name == "ingest") return run_ingest(config);
  if (name == "label") return run_label(config);
  if (name == "train") return run_train(config);
  if (name == "tune") return run_tune(config);
  if (name == "evaluate") return run_evaluate(config);
  if (name == "importance") return run_importance(config);
  if (name == "report") return run_report(config);
  if (name == "synth") return run_synth(config);
  throw StageError("unknown stage: " + std::string(name));
}

}  // namespace windloss::app

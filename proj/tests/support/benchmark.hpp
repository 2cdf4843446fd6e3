#pragma once

// The synthetic benchmark: generated CSV text pushed through ingestion, join,
// the massive-loss filter, level assignment and the stratified split.

#include <sstream>

#include "windloss/csv.hpp"
#include "windloss/data_model.hpp"
#include "windloss/labeling.hpp"
#include "windloss/synth.hpp"

namespace bench {

struct Benchmark {
  windloss::LabeledDataset data;
  windloss::SplitDataset split;
  windloss::Partition train;
  windloss::Partition test;
};

inline windloss::CsvTable parse(const std::string& text, const char* name) {
  std::istringstream in(text);
  return windloss::read_csv(in, name);
}

inline Benchmark make(const windloss::SynthConfig& config, std::uint64_t split_seed) {
  using namespace windloss;
  const auto files = generate(config);
  const auto events = ingest_events(parse(files.events_csv, "events"));
  const auto meteo = ingest_meteo(parse(files.meteo_csv, "meteo"));
  const auto resilience = ingest_resilience(parse(files.resilience_csv, "resilience"));
  const auto joined = clean_and_join(events.records, meteo.records, resilience.records,
                                     StudyWindow{config.first_year, config.last_year});
  Benchmark b;
  b.data = assign_loss_levels(filter_massive_losses(joined.joined));
  b.split = split(b.data, SplitOptions{0.25, split_seed, true});
  b.train = take_rows(b.data.features.values, b.data.labels, b.split.train);
  b.test = take_rows(b.data.features.values, b.data.labels, b.split.test);
  return b;
}

inline Benchmark make(std::uint64_t seed = 42) {
  windloss::SynthConfig config;
  config.seed = seed;
  return make(config, seed);
}

}  // namespace bench

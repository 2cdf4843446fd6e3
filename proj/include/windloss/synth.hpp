#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "windloss/data_model.hpp"

namespace windloss {

/// Generator for event / meteorology / resilience CSVs with the ingestion schemas.
struct SynthConfig {
  std::uint64_t seed = 42;
  int n_events = 756;
  int provinces = 50;
  int first_year = 2013;
  int last_year = 2022;
  /// 0: loss independent of the features. 1: log-loss fully determined by
  /// affected_systems and max_wind.
  double signal_strength = 0.8;
  /// Latent-factor loadings behind the inter-feature correlation structure.
  double social_coupling = 0.9;
  double economic_coupling = 0.85;
  double temp_wind_coupling = 0.5;
  /// Probability that a row gets one non-key field blanked out.
  double null_fraction = 0.0;
  bool include_season = true;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthTables {
  std::vector<EventRecord> events;
  std::vector<std::pair<std::string, MeteoFeatures>> meteo;
  std::vector<std::pair<ResilienceKey, ResilienceFeatures>> resilience;
};

/// Clean tables; every row satisfies the ingestion invariants. Deterministic per seed.
SynthTables generate_tables(const SynthConfig& config);

struct SynthFiles {
  std::string events_csv;
  std::string meteo_csv;
  std::string resilience_csv;
};

/// CSV text for the three inputs, with null injection applied.
SynthFiles generate(const SynthConfig& config);
void write_files(const SynthFiles& files, const std::filesystem::path& dir);

/// Names of the generated files inside a directory.
inline constexpr const char* kEventsFile = "events.csv";
inline constexpr const char* kMeteoFile = "meteo.csv";
inline constexpr const char* kResilienceFile = "resilience.csv";

// --- loss fixtures -------------------------------------------------------------

struct BlockSpec {
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Values whose consecutive rank blocks reproduce each spec's count, exact
/// min/max and mean; returned in shuffled order.
std::vector<double> block_fixture(std::span<const BlockSpec> blocks, std::uint64_t seed);

/// 816 losses whose equal-frequency quartiles match the published quartile table
/// (Q4: 45,076 - 19,298,377, mean 851,468.14).
std::vector<double> quartile_fixture_losses();

/// 816 losses with the same Q1-Q3 blocks, and a top quartile made of three
/// 68-event levels matching the published level table.
std::vector<double> level_fixture_losses();

/// Synthetic joined events carrying the given losses (one event per loss).
std::vector<JoinedEvent> joined_with_losses(std::span<const double> losses, std::uint64_t seed);

}  // namespace windloss

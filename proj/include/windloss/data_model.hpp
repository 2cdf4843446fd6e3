#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "windloss/csv.hpp"

namespace windloss {

using Date = std::chrono::year_month_day;

/// Strict YYYY-MM-DD.
std::optional<Date> parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& date);

enum class Season : std::uint8_t { winter, spring, summer, autumn };

inline constexpr std::size_t kSeasonCount = 4;

std::string_view to_string(Season season);
/// Case-insensitive; accepts the four English season names.
std::optional<Season> parse_season(std::string_view text);
/// Meteorological seasons: Dec-Feb winter, Mar-May spring, Jun-Aug summer, Sep-Nov autumn.
Season season_of(const Date& date);

struct StudyWindow {
  int first_year = 2013;
  int last_year = 2022;

  bool contains(const Date& date) const;
};

struct EventRecord {
  std::string event_id;
  std::string province;
  Date start_date{};
  int duration_days = 1;
  double loss_eur = 0.0;
  /// Event-scoped count that the resilience taxonomy files under infrastructure.
  double affected_systems = 0.0;
};

struct MeteoFeatures {
  double avg_wind_kmh = 0.0;
  double max_wind_kmh = 0.0;
  double precipitation_mm = 0.0;
  double avg_temp_c = 0.0;
  double max_temp_c = 0.0;
  double min_temp_c = 0.0;
  /// Absent when the source has no season column; derived from the event date at join time.
  std::optional<Season> season;
};

enum class ResilienceDomain : std::uint8_t { social, economic, infrastructure, environmental };

std::string_view to_string(ResilienceDomain domain);

struct ResilienceFeatures {
  // social
  double median_age = 0.0;
  double total_population = 0.0;
  double pop_over_65 = 0.0;
  double pop_under_15 = 0.0;
  double pop_16_64 = 0.0;
  double pop_spanish = 0.0;
  double pop_foreign = 0.0;
  // economic
  double employment_rate = 0.0;
  double unemployment_rate = 0.0;
  double gdp_per_capita = 0.0;
  double spending_household = 0.0;
  double income_household = 0.0;
  double avg_salary = 0.0;
  // infrastructure
  double affected_systems = 0.0;
  double road_km = 0.0;
  // environmental
  double total_surface_km2 = 0.0;
  double agricultural_surface_ha = 0.0;
  double coast_km = 0.0;

  bool operator==(const ResilienceFeatures&) const = default;
};

/// Static description of one resilience column.
struct ResilienceField {
  std::string_view name;
  double ResilienceFeatures::*member;
  ResilienceDomain domain;
  bool percent;
  /// True for the one field resolved per event rather than per (province, year).
  bool per_event;
};

/// All 18 resilience fields in feature-column order.
std::span<const ResilienceField> resilience_fields();

struct MeteoField {
  std::string_view name;
  double MeteoFeatures::*member;
};

/// The six numeric meteorological fields in feature-column order.
std::span<const MeteoField> meteo_fields();

struct ResilienceKey {
  std::string province;
  int year = 0;

  auto operator<=>(const ResilienceKey&) const = default;
};

struct JoinedEvent {
  EventRecord event;
  MeteoFeatures meteo;
  ResilienceFeatures resilience;
};

using MeteoTable = std::map<std::string, MeteoFeatures>;
using ResilienceTable = std::map<ResilienceKey, ResilienceFeatures>;

/// Canonical field name -> CSV header name. Fields without an entry use their own name.
using ColumnMapping = std::map<std::string, std::string>;

struct Reject {
  std::size_t row = 0;  ///< 1-based data-row number (header excluded)
  std::string reason;
};

template <typename Records>
struct Ingested {
  Records records;
  std::vector<Reject> rejects;
};

// First violated invariant, or nullopt.
std::optional<std::string> check_invariants(const EventRecord& record, const StudyWindow& window);
std::optional<std::string> check_invariants(const MeteoFeatures& meteo);
std::optional<std::string> check_invariants(const ResilienceFeatures& resilience);

/// Every data row yields exactly one record or one reject.
/// Throws DataError on a missing file, unparseable header or unmapped column.
Ingested<std::vector<EventRecord>> ingest_events(const CsvTable& table, const ColumnMapping& columns = {},
                                                 const StudyWindow& window = {});
Ingested<std::vector<EventRecord>> ingest_events(const std::filesystem::path& path,
                                                 const ColumnMapping& columns = {},
                                                 const StudyWindow& window = {});

/// The season column is optional; every other mapped column is required.
Ingested<MeteoTable> ingest_meteo(const CsvTable& table, const ColumnMapping& columns = {});
Ingested<MeteoTable> ingest_meteo(const std::filesystem::path& path, const ColumnMapping& columns = {});

/// A repeated (province, year) is a DataError, not a reject.
Ingested<ResilienceTable> ingest_resilience(const CsvTable& table, const ColumnMapping& columns = {});
Ingested<ResilienceTable> ingest_resilience(const std::filesystem::path& path,
                                            const ColumnMapping& columns = {});

enum class DropReason : std::uint8_t { no_meteo, no_resilience, invariant_violation };

std::string_view to_string(DropReason reason);

struct DropReport {
  std::size_t input_events = 0;
  std::size_t joined_events = 0;
  std::map<DropReason, std::vector<std::string>> dropped;  ///< event ids per reason

  std::size_t count(DropReason reason) const;
};

nlohmann::json to_json(const DropReport& report);

struct JoinResult {
  std::vector<JoinedEvent> joined;
  DropReport report;
};

/// Joins each event with its meteorology (by event id) and the resilience row of
/// (province, start year). Output is sorted by (start_date, province, event_id).
JoinResult clean_and_join(std::span<const EventRecord> events, const MeteoTable& meteo,
                          const ResilienceTable& resilience, const StudyWindow& window = {});

struct RawTables {
  std::vector<EventRecord> events;
  MeteoTable meteo;
  ResilienceTable resilience;
};

/// Inverse of clean_and_join for already-joined data.
RawTables decompose(std::span<const JoinedEvent> joined);

// --- canonical CSV layouts -------------------------------------------------

std::vector<std::string> events_header();
std::vector<std::string> to_row(const EventRecord& record);
std::vector<std::string> meteo_header();
std::vector<std::string> to_row(const std::string& event_id, const MeteoFeatures& meteo);
/// Yearly resilience columns (affected_systems excluded).
std::vector<std::string> resilience_header();
std::vector<std::string> to_row(const ResilienceKey& key, const ResilienceFeatures& resilience);

// --- feature encoding --------------------------------------------------------

inline constexpr std::size_t kFeatureCount = 29;

/// Fixed column order: duration, six meteorological numerics, season one-hot
/// (winter, spring, summer, autumn), then the 18 resilience fields.
const std::vector<std::string>& feature_columns();

/// Category used when grouping importances: meteorological, social, economic,
/// infrastructure, environmental or disaster.
const std::map<std::string, std::string>& feature_categories();

struct FeatureTable {
  Eigen::MatrixXd values;  ///< one row per event
  std::vector<std::string> columns;

  std::size_t column_index(std::string_view name) const;
  auto column(std::string_view name) const { return values.col(static_cast<Eigen::Index>(column_index(name))); }
};

FeatureTable vectorize(std::span<const JoinedEvent> joined);

// --- joined dataset file -----------------------------------------------------

/// event_id, province, start_date, loss_eur, then the 29 feature columns.
void write_joined_csv(std::ostream& out, std::span<const JoinedEvent> joined);
std::vector<JoinedEvent> read_joined_csv(const CsvTable& table);

}  // namespace windloss

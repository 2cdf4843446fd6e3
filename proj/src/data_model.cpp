#include "windloss/data_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <ostream>
#include <set>
#include <stdexcept>

namespace windloss {

// --- dates and seasons ------------------------------------------------------

std::optional<Date> parse_iso_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
  }
  const auto y = parse_integer(text.substr(0, 4));
  const auto m = parse_integer(text.substr(5, 2));
  const auto d = parse_integer(text.substr(8, 2));
  const Date date{std::chrono::year{static_cast<int>(*y)}, std::chrono::month{static_cast<unsigned>(*m)},
                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_iso_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::string_view to_string(Season season) {
  switch (season) {
    case Season::winter: return "winter";
    case Season::spring: return "spring";
    case Season::summer: return "summer";
    case Season::autumn: return "autumn";
  }
  return "?";
}

std::optional<Season> parse_season(std::string_view text) {
  text = trim(text);
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto s : {Season::winter, Season::spring, Season::summer, Season::autumn}) {
    if (lower == to_string(s)) return s;
  }
  return std::nullopt;
}

Season season_of(const Date& date) {
  const auto m = static_cast<unsigned>(date.month());
  if (m == 12 || m <= 2) return Season::winter;
  if (m <= 5) return Season::spring;
  if (m <= 8) return Season::summer;
  return Season::autumn;
}

bool StudyWindow::contains(const Date& date) const {
  const int y = static_cast<int>(date.year());
  return y >= first_year && y <= last_year;
}

// --- field tables -------------------------------------------------------------

std::string_view to_string(ResilienceDomain domain) {
  switch (domain) {
    case ResilienceDomain::social: return "social";
    case ResilienceDomain::economic: return "economic";
    case ResilienceDomain::infrastructure: return "infrastructure";
    case ResilienceDomain::environmental: return "environmental";
  }
  return "?";
}

std::span<const ResilienceField> resilience_fields() {
  using R = ResilienceFeatures;
  using D = ResilienceDomain;
  static constexpr std::array<ResilienceField, 18> fields{{
      {"median_age", &R::median_age, D::social, false, false},
      {"total_population", &R::total_population, D::social, false, false},
      {"pop_over_65", &R::pop_over_65, D::social, true, false},
      {"pop_under_15", &R::pop_under_15, D::social, true, false},
      {"pop_16_64", &R::pop_16_64, D::social, true, false},
      {"pop_spanish", &R::pop_spanish, D::social, true, false},
      {"pop_foreign", &R::pop_foreign, D::social, true, false},
      {"employment_rate", &R::employment_rate, D::economic, true, false},
      {"unemployment_rate", &R::unemployment_rate, D::economic, true, false},
      {"gdp_per_capita", &R::gdp_per_capita, D::economic, false, false},
      {"spending_household", &R::spending_household, D::economic, false, false},
      {"income_household", &R::income_household, D::economic, false, false},
      {"avg_salary", &R::avg_salary, D::economic, false, false},
      {"affected_systems", &R::affected_systems, D::infrastructure, false, true},
      {"road_km", &R::road_km, D::infrastructure, false, false},
      {"total_surface_km2", &R::total_surface_km2, D::environmental, false, false},
      {"agricultural_surface_ha", &R::agricultural_surface_ha, D::environmental, false, false},
      {"coast_km", &R::coast_km, D::environmental, false, false},
  }};
  return fields;
}

std::span<const MeteoField> meteo_fields() {
  using M = MeteoFeatures;
  static constexpr std::array<MeteoField, 6> fields{{
      {"avg_wind_kmh", &M::avg_wind_kmh},
      {"max_wind_kmh", &M::max_wind_kmh},
      {"precipitation_mm", &M::precipitation_mm},
      {"avg_temp_c", &M::avg_temp_c},
      {"max_temp_c", &M::max_temp_c},
      {"min_temp_c", &M::min_temp_c},
  }};
  return fields;
}

// --- invariants -----------------------------------------------------------------

std::optional<std::string> check_invariants(const EventRecord& record, const StudyWindow& window) {
  if (trim(record.event_id).empty()) return "missing event_id";
  if (trim(record.province).empty()) return "missing province";
  if (!record.start_date.ok()) return "invalid start_date";
  if (!window.contains(record.start_date)) return "start_date outside study window";
  if (record.duration_days < 1) return "duration below 1 day";
  if (!(record.loss_eur >= 0.0)) return "negative loss";
  if (!(record.affected_systems >= 0.0)) return "negative affected_systems";
  return std::nullopt;
}

std::optional<std::string> check_invariants(const MeteoFeatures& m) {
  if (!(m.avg_wind_kmh >= 0.0) || !(m.max_wind_kmh >= m.avg_wind_kmh)) return "wind ordering";
  if (!(m.precipitation_mm >= 0.0)) return "negative precipitation";
  if (!(m.min_temp_c <= m.avg_temp_c && m.avg_temp_c <= m.max_temp_c)) return "temperature ordering";
  return std::nullopt;
}

std::optional<std::string> check_invariants(const ResilienceFeatures& r) {
  for (const auto& field : resilience_fields()) {
    const double v = r.*field.member;
    if (field.percent) {
      if (!(v >= 0.0 && v <= 100.0)) return "percent out of range";
    } else if (!(v >= 0.0)) {
      return "negative " + std::string(field.name);
    }
  }
  const double share = r.pop_spanish + r.pop_foreign;
  if (!(share >= 99.0 && share <= 101.0)) return "population share sum";
  return std::nullopt;
}

// --- ingestion ---------------------------------------------------------------------

namespace {

class ColumnResolver {
 public:
  ColumnResolver(const CsvTable& table, const ColumnMapping& mapping, std::string_view source)
      : table_(table), mapping_(mapping), source_(source) {}

  std::size_t required(std::string_view field) const {
    const auto name = header_name(field);
    if (auto index = table_.find_column(name)) return *index;
    throw DataError(std::string(source_) + ": missing column '" + name + "' (field " + std::string(field) + ")");
  }

  std::optional<std::size_t> optional(std::string_view field) const {
    return table_.find_column(header_name(field));
  }

 private:
  std::string header_name(std::string_view field) const {
    const auto it = mapping_.find(std::string(field));
    return it == mapping_.end() ? std::string(field) : it->second;
  }

  const CsvTable& table_;
  const ColumnMapping& mapping_;
  std::string_view source_;
};

// Row-level parse failure; carries the reject reason.
struct RowError {
  std::string reason;
};

std::string_view cell(const std::vector<std::string>& row, std::size_t index) { return trim(row[index]); }

double number_at(const std::vector<std::string>& row, std::size_t index, std::string_view label) {
  const auto text = cell(row, index);
  if (text.empty()) throw RowError{"missing " + std::string(label)};
  const auto value = parse_double(text);
  if (!value) throw RowError{"unparseable " + std::string(label)};
  return *value;
}

void check_width(const CsvTable& table, const std::vector<std::string>& row) {
  if (row.size() != table.header.size()) throw RowError{"column count mismatch"};
}

Ingested<std::vector<EventRecord>> ingest_events_impl(const CsvTable& table, const ColumnMapping& columns,
                                                      const StudyWindow& window, std::string_view source) {
  const ColumnResolver resolve(table, columns, source);
  const auto c_id = resolve.required("event_id");
  const auto c_province = resolve.required("province");
  const auto c_date = resolve.required("start_date");
  const auto c_duration = resolve.required("duration_days");
  const auto c_loss = resolve.required("loss_eur");
  const auto c_affected = resolve.required("affected_systems");

  Ingested<std::vector<EventRecord>> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      check_width(table, row);
      EventRecord rec;
      rec.event_id = std::string(cell(row, c_id));
      if (rec.event_id.empty()) throw RowError{"missing event_id"};
      rec.province = std::string(cell(row, c_province));
      if (rec.province.empty()) throw RowError{"missing province"};
      const auto date_text = cell(row, c_date);
      if (date_text.empty()) throw RowError{"missing start_date"};
      const auto date = parse_iso_date(date_text);
      if (!date) throw RowError{"unparseable start_date"};
      rec.start_date = *date;
      const auto duration_text = cell(row, c_duration);
      if (duration_text.empty()) throw RowError{"missing duration"};
      const auto duration = parse_integer(duration_text);
      if (!duration) throw RowError{"unparseable duration"};
      rec.duration_days = static_cast<int>(*duration);
      rec.loss_eur = number_at(row, c_loss, "loss");
      rec.affected_systems = number_at(row, c_affected, "affected_systems");
      if (auto violation = check_invariants(rec, window)) throw RowError{*violation};
      if (!seen.insert(rec.event_id).second) throw RowError{"duplicate event_id"};
      out.records.push_back(std::move(rec));
    } catch (const RowError& e) {
      out.rejects.push_back({r + 1, e.reason});
    }
  }
  return out;
}

Ingested<MeteoTable> ingest_meteo_impl(const CsvTable& table, const ColumnMapping& columns,
                                       std::string_view source) {
  const ColumnResolver resolve(table, columns, source);
  const auto c_id = resolve.required("event_id");
  std::vector<std::size_t> c_fields;
  for (const auto& field : meteo_fields()) c_fields.push_back(resolve.required(field.name));
  const auto c_season = resolve.optional("season");

  Ingested<MeteoTable> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      check_width(table, row);
      const std::string id(cell(row, c_id));
      if (id.empty()) throw RowError{"missing event_id"};
      MeteoFeatures m;
      const auto fields = meteo_fields();
      for (std::size_t f = 0; f < fields.size(); ++f) m.*fields[f].member = number_at(row, c_fields[f], fields[f].name);
      if (c_season) {
        const auto text = cell(row, *c_season);
        if (text.empty()) throw RowError{"missing season"};
        m.season = parse_season(text);
        if (!m.season) throw RowError{"unparseable season"};
      }
      if (auto violation = check_invariants(m)) throw RowError{*violation};
      if (out.records.contains(id)) throw RowError{"duplicate event_id"};
      out.records.emplace(id, m);
    } catch (const RowError& e) {
      out.rejects.push_back({r + 1, e.reason});
    }
  }
  return out;
}

Ingested<ResilienceTable> ingest_resilience_impl(const CsvTable& table, const ColumnMapping& columns,
                                                 std::string_view source) {
  const ColumnResolver resolve(table, columns, source);
  const auto c_province = resolve.required("province");
  const auto c_year = resolve.required("year");
  std::vector<std::pair<const ResilienceField*, std::size_t>> c_fields;
  for (const auto& field : resilience_fields()) {
    if (!field.per_event) c_fields.emplace_back(&field, resolve.required(field.name));
  }

  // Duplicate keys are fatal, so detect them before any row-level validation.
  std::map<ResilienceKey, std::size_t> first_seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) continue;
    const auto year = parse_integer(cell(row, c_year));
    const std::string province(cell(row, c_province));
    if (!year || province.empty()) continue;
    ResilienceKey key{province, static_cast<int>(*year)};
    if (auto [it, inserted] = first_seen.emplace(key, r + 1); !inserted) {
      throw DataError(std::string(source) + ": duplicate resilience key (" + province + ", " +
                      std::to_string(*year) + ") at rows " + std::to_string(it->second) + " and " +
                      std::to_string(r + 1));
    }
  }

  Ingested<ResilienceTable> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      check_width(table, row);
      ResilienceKey key;
      key.province = std::string(cell(row, c_province));
      if (key.province.empty()) throw RowError{"missing province"};
      const auto year_text = cell(row, c_year);
      if (year_text.empty()) throw RowError{"missing year"};
      const auto year = parse_integer(year_text);
      if (!year) throw RowError{"unparseable year"};
      key.year = static_cast<int>(*year);
      ResilienceFeatures res;
      for (const auto& [field, index] : c_fields) res.*field->member = number_at(row, index, field->name);
      if (auto violation = check_invariants(res)) throw RowError{*violation};
      out.records.emplace(std::move(key), res);
    } catch (const RowError& e) {
      out.rejects.push_back({r + 1, e.reason});
    }
  }
  return out;
}

}  // namespace

Ingested<std::vector<EventRecord>> ingest_events(const CsvTable& table, const ColumnMapping& columns,
                                                 const StudyWindow& window) {
  return ingest_events_impl(table, columns, window, "<events>");
}

Ingested<std::vector<EventRecord>> ingest_events(const std::filesystem::path& path, const ColumnMapping& columns,
                                                 const StudyWindow& window) {
  return ingest_events_impl(read_csv_file(path), columns, window, path.string());
}

Ingested<MeteoTable> ingest_meteo(const CsvTable& table, const ColumnMapping& columns) {
  return ingest_meteo_impl(table, columns, "<meteo>");
}

Ingested<MeteoTable> ingest_meteo(const std::filesystem::path& path, const ColumnMapping& columns) {
  return ingest_meteo_impl(read_csv_file(path), columns, path.string());
}

Ingested<ResilienceTable> ingest_resilience(const CsvTable& table, const ColumnMapping& columns) {
  return ingest_resilience_impl(table, columns, "<resilience>");
}

Ingested<ResilienceTable> ingest_resilience(const std::filesystem::path& path, const ColumnMapping& columns) {
  return ingest_resilience_impl(read_csv_file(path), columns, path.string());
}

// --- join ----------------------------------------------------------------------------

std::string_view to_string(DropReason reason) {
  switch (reason) {
    case DropReason::no_meteo: return "no-meteo";
    case DropReason::no_resilience: return "no-resilience";
    case DropReason::invariant_violation: return "invariant-violation";
  }
  return "?";
}

std::size_t DropReport::count(DropReason reason) const {
  const auto it = dropped.find(reason);
  return it == dropped.end() ? 0 : it->second.size();
}

nlohmann::json to_json(const DropReport& report) {
  nlohmann::json counts = nlohmann::json::object();
  nlohmann::json ids = nlohmann::json::object();
  for (auto reason : {DropReason::no_meteo, DropReason::no_resilience, DropReason::invariant_violation}) {
    const std::string key(to_string(reason));
    counts[key] = report.count(reason);
    const auto it = report.dropped.find(reason);
    ids[key] = it == report.dropped.end() ? std::vector<std::string>{} : it->second;
  }
  return {{"input_events", report.input_events},
          {"joined_events", report.joined_events},
          {"dropped", counts},
          {"dropped_event_ids", ids}};
}

JoinResult clean_and_join(std::span<const EventRecord> events, const MeteoTable& meteo,
                          const ResilienceTable& resilience, const StudyWindow& window) {
  JoinResult result;
  result.report.input_events = events.size();
  for (const auto& event : events) {
    const auto m = meteo.find(event.event_id);
    if (m == meteo.end()) {
      result.report.dropped[DropReason::no_meteo].push_back(event.event_id);
      continue;
    }
    const auto r = resilience.find({event.province, static_cast<int>(event.start_date.year())});
    if (r == resilience.end()) {
      result.report.dropped[DropReason::no_resilience].push_back(event.event_id);
      continue;
    }
    JoinedEvent joined{event, m->second, r->second};
    if (!joined.meteo.season) joined.meteo.season = season_of(event.start_date);
    joined.resilience.affected_systems = event.affected_systems;
    if (check_invariants(joined.event, window) || check_invariants(joined.meteo) ||
        check_invariants(joined.resilience)) {
      result.report.dropped[DropReason::invariant_violation].push_back(event.event_id);
      continue;
    }
    result.joined.push_back(std::move(joined));
  }
  std::sort(result.joined.begin(), result.joined.end(), [](const JoinedEvent& a, const JoinedEvent& b) {
    const auto& x = a.event;
    const auto& y = b.event;
    if (x.start_date != y.start_date) return x.start_date < y.start_date;
    if (x.province != y.province) return x.province < y.province;
    return x.event_id < y.event_id;
  });
  result.report.joined_events = result.joined.size();
  return result;
}

RawTables decompose(std::span<const JoinedEvent> joined) {
  RawTables raw;
  for (const auto& j : joined) {
    raw.events.push_back(j.event);
    raw.meteo.emplace(j.event.event_id, j.meteo);
    auto res = j.resilience;
    res.affected_systems = 0.0;
    raw.resilience.emplace(ResilienceKey{j.event.province, static_cast<int>(j.event.start_date.year())}, res);
  }
  return raw;
}

// --- canonical CSV rows ----------------------------------------------------------------

std::vector<std::string> events_header() {
  return {"event_id", "province", "start_date", "duration_days", "loss_eur", "affected_systems"};
}

std::vector<std::string> to_row(const EventRecord& e) {
  return {e.event_id,
          e.province,
          format_iso_date(e.start_date),
          std::to_string(e.duration_days),
          format_fixed(e.loss_eur, 2),
          format_double(e.affected_systems)};
}

std::vector<std::string> meteo_header() {
  std::vector<std::string> header{"event_id"};
  for (const auto& f : meteo_fields()) header.emplace_back(f.name);
  header.emplace_back("season");
  return header;
}

std::vector<std::string> to_row(const std::string& event_id, const MeteoFeatures& m) {
  std::vector<std::string> row{event_id};
  for (const auto& f : meteo_fields()) row.push_back(format_double(m.*f.member));
  row.emplace_back(m.season ? std::string(to_string(*m.season)) : std::string());
  return row;
}

std::vector<std::string> resilience_header() {
  std::vector<std::string> header{"province", "year"};
  for (const auto& f : resilience_fields()) {
    if (!f.per_event) header.emplace_back(f.name);
  }
  return header;
}

std::vector<std::string> to_row(const ResilienceKey& key, const ResilienceFeatures& r) {
  std::vector<std::string> row{key.province, std::to_string(key.year)};
  for (const auto& f : resilience_fields()) {
    if (!f.per_event) row.push_back(format_double(r.*f.member));
  }
  return row;
}

// --- features ------------------------------------------------------------------------------

const std::vector<std::string>& feature_columns() {
  static const std::vector<std::string> columns = [] {
    std::vector<std::string> c{"duration_days"};
    for (const auto& f : meteo_fields()) c.emplace_back(f.name);
    for (auto s : {Season::winter, Season::spring, Season::summer, Season::autumn}) {
      c.push_back("season_" + std::string(to_string(s)));
    }
    for (const auto& f : resilience_fields()) c.emplace_back(f.name);
    return c;
  }();
  return columns;
}

const std::map<std::string, std::string>& feature_categories() {
  static const std::map<std::string, std::string> categories = [] {
    std::map<std::string, std::string> m;
    m["duration_days"] = "disaster";
    for (const auto& f : meteo_fields()) m[std::string(f.name)] = "meteorological";
    for (auto s : {Season::winter, Season::spring, Season::summer, Season::autumn}) {
      m["season_" + std::string(to_string(s))] = "meteorological";
    }
    for (const auto& f : resilience_fields()) m[std::string(f.name)] = std::string(to_string(f.domain));
    return m;
  }();
  return categories;
}

std::size_t FeatureTable::column_index(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("unknown feature column: " + std::string(name));
  return static_cast<std::size_t>(it - columns.begin());
}

namespace {

void encode_row(const JoinedEvent& j, Eigen::Ref<Eigen::RowVectorXd> row) {
  Eigen::Index c = 0;
  row(c++) = j.event.duration_days;
  for (const auto& f : meteo_fields()) row(c++) = j.meteo.*f.member;
  const auto season = j.meteo.season.value_or(season_of(j.event.start_date));
  for (std::size_t s = 0; s < kSeasonCount; ++s) row(c++) = static_cast<std::size_t>(season) == s ? 1.0 : 0.0;
  for (const auto& f : resilience_fields()) row(c++) = j.resilience.*f.member;
}

}  // namespace

FeatureTable vectorize(std::span<const JoinedEvent> joined) {
  if (joined.empty()) throw std::invalid_argument("vectorize: empty input");
  FeatureTable table;
  table.columns = feature_columns();
  table.values.resize(static_cast<Eigen::Index>(joined.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < joined.size(); ++i) {
    Eigen::RowVectorXd row(kFeatureCount);
    encode_row(joined[i], row);
    table.values.row(static_cast<Eigen::Index>(i)) = row;
  }
  return table;
}

// --- joined dataset file ---------------------------------------------------------------------

void write_joined_csv(std::ostream& out, std::span<const JoinedEvent> joined) {
  std::vector<std::string> header{"event_id", "province", "start_date", "loss_eur"};
  for (const auto& c : feature_columns()) header.push_back(c);
  write_csv_row(out, header);
  Eigen::RowVectorXd values(kFeatureCount);
  for (const auto& j : joined) {
    encode_row(j, values);
    std::vector<std::string> row{j.event.event_id, j.event.province, format_iso_date(j.event.start_date),
                                 format_double(j.event.loss_eur)};
    for (Eigen::Index c = 0; c < values.size(); ++c) row.push_back(format_double(values(c)));
    write_csv_row(out, row);
  }
}

std::vector<JoinedEvent> read_joined_csv(const CsvTable& table) {
  const auto& columns = feature_columns();
  if (table.header.size() != 4 + columns.size() || table.header[0] != "event_id" ||
      table.header[1] != "province" || table.header[2] != "start_date" || table.header[3] != "loss_eur" ||
      !std::equal(columns.begin(), columns.end(), table.header.begin() + 4)) {
    throw DataError("joined dataset: header does not match the feature column contract");
  }
  std::vector<JoinedEvent> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto fail = [r](const std::string& what) {
      return DataError("joined dataset row " + std::to_string(r + 1) + ": " + what);
    };
    if (row.size() != table.header.size()) throw fail("column count mismatch");
    std::vector<double> v;
    for (std::size_t c = 3; c < row.size(); ++c) {
      const auto x = parse_double(row[c]);
      if (!x) throw fail("unparseable " + table.header[c]);
      v.push_back(*x);
    }
    JoinedEvent j;
    j.event.event_id = row[0];
    j.event.province = row[1];
    const auto date = parse_iso_date(row[2]);
    if (!date) throw fail("unparseable start_date");
    j.event.start_date = *date;
    j.event.loss_eur = v[0];
    std::size_t c = 1;
    j.event.duration_days = static_cast<int>(v[c++]);
    for (const auto& f : meteo_fields()) j.meteo.*f.member = v[c++];
    int hot = -1;
    for (std::size_t s = 0; s < kSeasonCount; ++s, ++c) {
      if (v[c] == 1.0) {
        if (hot >= 0) throw fail("season one-hot has several bits set");
        hot = static_cast<int>(s);
      } else if (v[c] != 0.0) {
        throw fail("season one-hot is not 0/1");
      }
    }
    if (hot < 0) throw fail("season one-hot has no bit set");
    j.meteo.season = static_cast<Season>(hot);
    for (const auto& f : resilience_fields()) j.resilience.*f.member = v[c++];
    j.event.affected_systems = j.resilience.affected_systems;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace windloss

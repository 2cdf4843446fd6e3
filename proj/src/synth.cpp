#include "windloss/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "windloss/rng.hpp"

namespace windloss {

namespace {

constexpr std::array<const char*, 50> kProvinceNames{
    "A Coruna",  "Alava",     "Albacete",   "Alicante",  "Almeria",    "Asturias",  "Avila",
    "Badajoz",   "Baleares",  "Barcelona",  "Burgos",    "Caceres",    "Cadiz",     "Cantabria",
    "Castellon", "Ciudad Real", "Cordoba",  "Cuenca",    "Girona",     "Granada",   "Guadalajara",
    "Gipuzkoa",  "Huelva",    "Huesca",     "Jaen",      "La Rioja",   "Las Palmas", "Leon",
    "Lleida",    "Lugo",      "Madrid",     "Malaga",    "Murcia",     "Navarra",   "Ourense",
    "Palencia",  "Pontevedra", "Salamanca", "Santa Cruz de Tenerife", "Segovia", "Sevilla",
    "Soria",     "Tarragona", "Teruel",     "Toledo",    "Valencia",   "Valladolid", "Bizkaia",
    "Zamora",    "Zaragoza"};

// Moments of min(X, Y) for independent standard normals: -1/sqrt(pi), sqrt(1 - 1/pi).
constexpr double kMinOfNormalsMean = 0.5641895835477563;
constexpr double kMinOfNormalsSd = 0.8256452711765563;

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

std::string province_name(int index) {
  if (index < static_cast<int>(kProvinceNames.size())) return kProvinceNames[static_cast<std::size_t>(index)];
  return "Province " + std::to_string(index + 1);
}

// Mean temperature offset by season, degrees C.
double seasonal_temperature(Season s) {
  switch (s) {
    case Season::winter: return 8.0;
    case Season::spring: return 14.0;
    case Season::summer: return 23.0;
    case Season::autumn: return 16.0;
  }
  return 15.0;
}

struct ProvinceProfile {
  double aging = 0.0;   // social latent factor
  double wealth = 0.0;  // economic latent factor
  double size = 0.0;
  double coast_km = 0.0;
  double surface_km2 = 0.0;
  double agri_share = 0.0;
};

}  // namespace

void SynthConfig::validate() const {
  if (n_events < 8) throw std::invalid_argument("synth: n_events must be at least 8");
  if (provinces < 1) throw std::invalid_argument("synth: provinces must be at least 1");
  if (first_year > last_year) throw std::invalid_argument("synth: empty year range");
  const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(signal_strength)) throw std::invalid_argument("synth: signal_strength must lie in [0, 1]");
  if (!unit(social_coupling) || !unit(economic_coupling) || !unit(temp_wind_coupling)) {
    throw std::invalid_argument("synth: coupling knobs must lie in [0, 1]");
  }
  if (!unit(null_fraction)) throw std::invalid_argument("synth: null_fraction must lie in [0, 1]");
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"seed", c.seed},
          {"n_events", c.n_events},
          {"provinces", c.provinces},
          {"first_year", c.first_year},
          {"last_year", c.last_year},
          {"signal_strength", c.signal_strength},
          {"social_coupling", c.social_coupling},
          {"economic_coupling", c.economic_coupling},
          {"temp_wind_coupling", c.temp_wind_coupling},
          {"null_fraction", c.null_fraction},
          {"include_season", c.include_season}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.seed = j.value("seed", c.seed);
  c.n_events = j.value("n_events", c.n_events);
  c.provinces = j.value("provinces", c.provinces);
  c.first_year = j.value("first_year", c.first_year);
  c.last_year = j.value("last_year", c.last_year);
  c.signal_strength = j.value("signal_strength", c.signal_strength);
  c.social_coupling = j.value("social_coupling", c.social_coupling);
  c.economic_coupling = j.value("economic_coupling", c.economic_coupling);
  c.temp_wind_coupling = j.value("temp_wind_coupling", c.temp_wind_coupling);
  c.null_fraction = j.value("null_fraction", c.null_fraction);
  c.include_season = j.value("include_season", c.include_season);
  c.validate();
  return c;
}

SynthTables generate_tables(const SynthConfig& config) {
  config.validate();
  Rng province_rng(derive_seed(config.seed, 1));
  Rng year_rng(derive_seed(config.seed, 2));
  Rng event_rng(derive_seed(config.seed, 3));

  std::vector<ProvinceProfile> profiles(static_cast<std::size_t>(config.provinces));
  for (auto& p : profiles) {
    p.aging = province_rng.normal();
    p.wealth = province_rng.normal();
    p.size = province_rng.normal();
    p.coast_km = province_rng.bernoulli(0.45) ? round_to(province_rng.uniform(40.0, 600.0), 1) : 0.0;
    p.surface_km2 = round_to(10000.0 * std::exp(0.45 * province_rng.normal()), 1);
    p.agri_share = province_rng.uniform(0.25, 0.6);
  }

  SynthTables tables;
  const double cs = config.social_coupling;
  const double ns = std::sqrt(1.0 - cs * cs);
  const double ce = config.economic_coupling;
  const double ne = std::sqrt(1.0 - ce * ce);
  for (int p = 0; p < config.provinces; ++p) {
    const auto& prof = profiles[static_cast<std::size_t>(p)];
    for (int year = config.first_year; year <= config.last_year; ++year) {
      const double drift = 0.04 * (year - config.first_year);
      const double a = prof.aging + drift;
      const double w = prof.wealth + drift;
      const auto social = [&] { return cs * a + ns * year_rng.normal(); };
      const auto economic = [&] { return ce * w + ne * year_rng.normal(); };
      ResilienceFeatures r;
      r.median_age = round_to(43.5 + 2.8 * social(), 1);
      r.total_population = std::round(std::exp(13.2 + 0.8 * prof.size + 0.01 * year_rng.normal()));
      r.pop_over_65 = round_to(std::clamp(20.0 + 3.5 * social(), 5.0, 40.0), 1);
      r.pop_under_15 = round_to(std::clamp(14.5 - 2.0 * social(), 5.0, 30.0), 1);
      r.pop_16_64 = round_to(std::clamp(65.0 - 2.5 * social(), 40.0, 80.0), 1);
      r.pop_foreign = round_to(std::clamp(10.0 - 3.0 * social(), 0.5, 35.0), 1);
      r.pop_spanish = round_to(100.0 - r.pop_foreign, 1);
      r.employment_rate = round_to(std::clamp(50.0 + 5.0 * economic(), 20.0, 80.0), 1);
      r.unemployment_rate = round_to(std::clamp(15.0 - 4.5 * economic(), 2.0, 45.0), 1);
      r.gdp_per_capita = std::round(std::max(8000.0, 24000.0 + 5000.0 * economic()));
      r.spending_household = std::round(std::max(12000.0, 30000.0 + 3000.0 * economic()));
      r.income_household = std::round(std::max(12000.0, 31000.0 + 4000.0 * economic()));
      r.avg_salary = std::round(std::max(10000.0, 22000.0 + 3000.0 * economic()));
      r.road_km = round_to(std::max(200.0, 3000.0 + 1200.0 * prof.size + 50.0 * year_rng.normal()), 1);
      r.total_surface_km2 = prof.surface_km2;
      r.agricultural_surface_ha = std::round(prof.surface_km2 * 100.0 * prof.agri_share);
      r.coast_km = prof.coast_km;
      tables.resilience.emplace_back(ResilienceKey{province_name(p), year}, r);
    }
  }

  using namespace std::chrono;
  const sys_days first{year{config.first_year} / January / 1};
  const sys_days last{year{config.last_year} / December / 31};
  const auto span_days = static_cast<std::uint64_t>((last - first).count()) + 1;
  const double s = config.signal_strength;
  const double loss_scale = 2.3 / std::hypot(s, (1.0 - s) * (1.0 - s));
  for (int i = 0; i < config.n_events; ++i) {
    EventRecord e;
    char id[16];
    std::snprintf(id, sizeof id, "EV%05d", i + 1);
    e.event_id = id;
    e.province = province_name(static_cast<int>(event_rng.uniform_index(static_cast<std::uint64_t>(config.provinces))));
    e.start_date = year_month_day{first + days{static_cast<int>(event_rng.uniform_index(span_days))}};
    e.duration_days = 1 + static_cast<int>(std::min(9.0, std::floor(-1.6 * std::log(1.0 - event_rng.uniform01()))));

    const double z_affected = event_rng.normal();
    const double z_wind = event_rng.normal();
    const double noise = event_rng.normal();
    e.affected_systems = std::round(std::exp(3.0 + 1.1 * z_affected));

    MeteoFeatures m;
    m.max_wind_kmh = round_to(std::max(25.0, 80.0 + 18.0 * z_wind), 1);
    m.avg_wind_kmh = round_to(m.max_wind_kmh * event_rng.uniform(0.4, 0.65), 1);
    m.precipitation_mm = round_to(std::exp(2.0 + event_rng.normal()), 1);
    const auto season = season_of(e.start_date);
    const double tw = config.temp_wind_coupling;
    m.avg_temp_c = round_to(seasonal_temperature(season) - 6.0 * tw * z_wind +
                                4.0 * std::sqrt(1.0 - tw * tw) * event_rng.normal(), 1);
    m.max_temp_c = round_to(m.avg_temp_c + event_rng.uniform(2.0, 7.0), 1);
    m.min_temp_c = round_to(m.avg_temp_c - event_rng.uniform(2.0, 7.0), 1);
    if (config.include_season) m.season = season;

    // Loss needs both exposure and hazard: the composite is the smaller of the two
    // standardised drivers, rescaled to zero mean and unit variance.
    const double exposure = (std::log(std::max(1.0, e.affected_systems)) - 3.0) / 1.1;
    const double hazard = (m.max_wind_kmh - 80.0) / 18.0;
    const double driver = (std::min(exposure, hazard) + kMinOfNormalsMean) / kMinOfNormalsSd;
    const double noise_weight = (1.0 - s) * (1.0 - s);
    const double log_loss = std::log(6000.0) + loss_scale * (s * driver + noise_weight * noise);
    e.loss_eur = round_to(std::exp(log_loss), 2);

    tables.meteo.emplace_back(e.event_id, m);
    tables.events.push_back(std::move(e));
  }
  return tables;
}

namespace {

// Blanks one non-key field (first `keys` columns are keys) with probability p.
void maybe_blank(std::vector<std::string>& row, std::size_t keys, double p, Rng& rng) {
  if (p <= 0.0 || !rng.bernoulli(p)) return;
  row[keys + rng.uniform_index(row.size() - keys)].clear();
}

}  // namespace

SynthFiles generate(const SynthConfig& config) {
  const auto tables = generate_tables(config);
  Rng null_rng(derive_seed(config.seed, 4));
  std::ostringstream events;
  std::ostringstream meteo;
  std::ostringstream resilience;

  write_csv_row(events, events_header());
  for (const auto& e : tables.events) {
    auto row = to_row(e);
    maybe_blank(row, 1, config.null_fraction, null_rng);
    write_csv_row(events, row);
  }

  auto header = meteo_header();
  if (!config.include_season) header.pop_back();
  write_csv_row(meteo, header);
  for (const auto& [id, m] : tables.meteo) {
    auto row = to_row(id, m);
    if (!config.include_season) row.pop_back();
    maybe_blank(row, 1, config.null_fraction, null_rng);
    write_csv_row(meteo, row);
  }

  write_csv_row(resilience, resilience_header());
  for (const auto& [key, r] : tables.resilience) {
    auto row = to_row(key, r);
    maybe_blank(row, 2, config.null_fraction, null_rng);
    write_csv_row(resilience, row);
  }
  return {events.str(), meteo.str(), resilience.str()};
}

void write_files(const SynthFiles& files, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out << text;
  };
  put(kEventsFile, files.events_csv);
  put(kMeteoFile, files.meteo_csv);
  put(kResilienceFile, files.resilience_csv);
}

// --- loss fixtures -----------------------------------------------------------------

std::vector<double> block_fixture(std::span<const BlockSpec> blocks, std::uint64_t seed) {
  std::vector<double> values;
  for (const auto& b : blocks) {
    if (b.count < 3 || !(b.min < b.mean && b.mean < b.max)) {
      throw std::invalid_argument("block_fixture: need count >= 3 and min < mean < max");
    }
    const auto inner = b.count - 2;
    const double centre = (static_cast<double>(b.count) * b.mean - b.min - b.max) / static_cast<double>(inner);
    if (!(centre > b.min && centre < b.max)) throw std::invalid_argument("block_fixture: mean not attainable");
    const double spread = 0.9 * std::min(centre - b.min, b.max - centre);
    values.push_back(b.min);
    values.push_back(b.max);
    // Symmetric offsets around the centre; they sum to zero.
    for (std::size_t i = 0; i < inner; ++i) {
      const double t = (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(inner) - 1.0;
      values.push_back(centre + spread * t);
    }
  }
  Rng rng(seed);
  rng.shuffle(values.begin(), values.end());
  return values;
}

namespace {

constexpr BlockSpec kQ1{204, 42.0, 987.0, 492.22};
constexpr BlockSpec kQ2{204, 1014.0, 5860.0, 2700.58};
constexpr BlockSpec kQ3{204, 6008.0, 44864.0, 17626.69};

}  // namespace

std::vector<double> quartile_fixture_losses() {
  const std::array<BlockSpec, 4> blocks{kQ1, kQ2, kQ3, BlockSpec{204, 45076.0, 19298377.0, 851468.14}};
  return block_fixture(blocks, 2013);
}

std::vector<double> level_fixture_losses() {
  const std::array<BlockSpec, 6> blocks{kQ1,
                                        kQ2,
                                        kQ3,
                                        BlockSpec{68, 45076.0, 110451.0, 71233.98},
                                        BlockSpec{68, 112089.0, 575431.0, 256001.41},
                                        BlockSpec{68, 630242.0, 19298377.0, 2227168.98}};
  return block_fixture(blocks, 2022);
}

std::vector<JoinedEvent> joined_with_losses(std::span<const double> losses, std::uint64_t seed) {
  SynthConfig config;
  config.seed = seed;
  config.n_events = static_cast<int>(std::max<std::size_t>(losses.size(), 8));
  const auto tables = generate_tables(config);
  std::vector<JoinedEvent> out;
  std::map<ResilienceKey, ResilienceFeatures> resilience(tables.resilience.begin(), tables.resilience.end());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    JoinedEvent j{tables.events[i], tables.meteo[i].second, {}};
    j.event.loss_eur = losses[i];
    j.resilience = resilience.at({j.event.province, static_cast<int>(j.event.start_date.year())});
    j.resilience.affected_systems = j.event.affected_systems;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace windloss

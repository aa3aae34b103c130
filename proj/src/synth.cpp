#include "fcu/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "fcu/textio.hpp"

namespace fcu {

using nlohmann::json;

namespace {

constexpr std::array<Terrain, 4> kTerrains{Terrain::farmland, Terrain::forest, Terrain::offshore, Terrain::none};
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLatitude = 51.0 * std::numbers::pi / 180.0;

// Sub-stream salts.
constexpr std::uint64_t kPlanSalt = 0x706c616e;
constexpr std::uint64_t kWeatherSalt = 1;
constexpr std::uint64_t kNoiseSalt = 2;
constexpr std::uint64_t kForecastSalt = 3;
constexpr std::uint64_t kOutageSalt = 4;

Timestamp ymd(int y, unsigned m, unsigned d) {
  return Timestamp{std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}}};
}

int season_index(unsigned month) {
  if (month == 12 || month <= 2) return 0;
  if (month <= 5) return 1;
  if (month <= 8) return 2;
  return 3;
}

double annual_phase(int doy) { return kTwoPi * (doy - 15) / 365.25; }

// Sine of the solar elevation at a fractional UTC hour, solar noon at 12:00.
double sin_elevation(int doy, double hour) {
  const double decl = 23.44 * std::numbers::pi / 180.0 * std::sin(kTwoPi * (284 + doy + 1) / 365.0);
  const double hour_angle = (hour - 12.0) * std::numbers::pi / 12.0;
  return std::sin(kLatitude) * std::sin(decl) + std::cos(kLatitude) * std::cos(decl) * std::cos(hour_angle);
}

double power_curve(double v) {
  const double v3 = v * v * v;
  return v3 / (v3 + 1331.0);
}

struct FeatureSpec {
  const char* name;
  double forecast_sigma;
};

const std::vector<FeatureSpec>& wind_features() {
  static const std::vector<FeatureSpec> specs{
      {"wind_speed_100m", 1.0}, {"wind_speed_10m", 0.8}, {"wind_dir_sin", 0.12}, {"wind_dir_cos", 0.12},
      {"temperature", 1.0},     {"pressure", 1.5},       {"air_density", 0.01}};
  return specs;
}

const std::vector<FeatureSpec>& pv_features() {
  static const std::vector<FeatureSpec> specs{{"clear_sky", 0.0},
                                              {"sun_elevation", 0.0},
                                              {"cloud_cover_fc", 0.12},
                                              {"radiation_fc", 0.05},
                                              {"temperature_fc", 1.0}};
  return specs;
}

// Forecast issued at 12:00 UTC the previous day: horizon 12..35 h.
double horizon_factor(int hour) { return 0.4 + 0.6 * (12.0 + hour) / 24.0; }

std::vector<bool> outage_mask(std::size_t n, std::size_t keep, std::mt19937_64& rng) {
  std::vector<bool> removed(n, false);
  std::size_t to_remove = n - std::min(keep, n);
  std::uniform_int_distribution<std::size_t> start_dist(0, n - 1);
  std::geometric_distribution<int> length_dist(1.0 / 12.0);
  while (to_remove > 0) {
    std::size_t i = start_dist(rng);
    const int len = 1 + length_dist(rng);
    for (int k = 0; k < len && i < n && to_remove > 0; ++k, ++i) {
      if (!removed[i]) {
        removed[i] = true;
        --to_remove;
      }
    }
  }
  return removed;
}

} // namespace

std::string_view to_string(SynthKind k) { return k == SynthKind::wind ? "wind" : "pv"; }

SynthKind parse_synth_kind(std::string_view text) {
  if (text == "wind") return SynthKind::wind;
  if (text == "pv" || text == "PV") return SynthKind::pv;
  throw std::invalid_argument("unknown synth kind: " + std::string(text));
}

SynthConfig SynthConfig::wind_defaults() {
  SynthConfig c;
  c.kind = SynthKind::wind;
  c.farms_per_terrain = {{Terrain::farmland, 37}, {Terrain::forest, 11}, {Terrain::offshore, 4}};
  c.period_start = ymd(2016, 1, 1);
  c.period_end = ymd(2018, 1, 1);
  c.resolution_hours = 1;
  c.coverage_min = 0.5;
  c.coverage_max = 1.0;
  c.base_noise = 1.0;
  c.terrain_noise = {{Terrain::farmland, 1.0}, {Terrain::forest, 1.6}, {Terrain::offshore, 1.35}, {Terrain::none, 1.0}};
  c.season_noise = {1.5, 1.15, 0.8, 1.3};
  c.hour_noise.fill(1.0);
  c.coverage_noise_strength = 0.6;
  return c;
}

SynthConfig SynthConfig::pv_defaults() {
  SynthConfig c;
  c.kind = SynthKind::pv;
  c.farms_per_terrain = {{Terrain::none, 114}};
  c.period_start = ymd(2016, 1, 1);
  c.period_end = ymd(2017, 5, 1);
  c.resolution_hours = 3;
  c.coverage_min = 0.9;
  c.coverage_max = 1.0;
  c.base_noise = 0.12;
  c.terrain_noise = {{Terrain::farmland, 1.0}, {Terrain::forest, 1.0}, {Terrain::offshore, 1.0}, {Terrain::none, 1.0}};
  c.season_noise = {0.9, 1.0, 1.2, 0.95};
  c.hour_noise.fill(1.0);
  c.coverage_noise_strength = 0.0;
  return c;
}

std::size_t SynthConfig::n_farms() const {
  std::size_t n = 0;
  for (const auto& [t, count] : farms_per_terrain) {
    (void)t;
    n += static_cast<std::size_t>(std::max(count, 0));
  }
  return n;
}

void SynthConfig::validate() const {
  if (n_farms() == 0) throw std::invalid_argument("synth config has no farms");
  for (const auto& [t, count] : farms_per_terrain) {
    if (count < 0) throw std::invalid_argument("negative farm count for " + std::string(to_string(t)));
  }
  if (resolution_hours < 1 || 24 % resolution_hours != 0) {
    throw std::invalid_argument("resolution_hours must divide 24");
  }
  if (period_end <= period_start) throw std::invalid_argument("synth period is empty");
  if (!(coverage_min >= 0.0 && coverage_min <= coverage_max && coverage_max <= 1.0) || coverage_max <= 0.0) {
    throw std::invalid_argument("coverage range must lie within [0, 1]");
  }
  if (!(base_noise > 0.0) || !(forecast_noise >= 0.0) || !(coverage_noise_strength >= 0.0) ||
      !(farm_noise_spread >= 0.0 && farm_noise_spread < 1.0)) {
    throw std::invalid_argument("synth noise settings out of range");
  }
  for (const auto& [t, count] : farms_per_terrain) {
    if (count == 0) continue;
    const auto it = terrain_noise.find(t);
    if (it == terrain_noise.end() || !(it->second > 0.0)) {
      throw std::invalid_argument("terrain noise for " + std::string(to_string(t)) + " must be > 0");
    }
  }
  for (double s : season_noise) {
    if (!(s > 0.0)) throw std::invalid_argument("season noise scales must be > 0");
  }
  for (double s : hour_noise) {
    if (!(s > 0.0)) throw std::invalid_argument("hour noise scales must be > 0");
  }
}

SynthConfig synth_config_from_json(std::string_view json_text) {
  const json j = json::parse(json_text);
  const SynthKind kind = parse_synth_kind(j.value("kind", std::string("wind")));
  SynthConfig c = kind == SynthKind::wind ? SynthConfig::wind_defaults() : SynthConfig::pv_defaults();
  if (j.contains("farms_per_terrain")) {
    c.farms_per_terrain.clear();
    for (const auto& [key, value] : j.at("farms_per_terrain").items()) {
      c.farms_per_terrain[parse_terrain(key)] = value.get<int>();
    }
  }
  if (j.contains("period_start")) c.period_start = parse_timestamp(j.at("period_start").get<std::string>());
  if (j.contains("period_end")) c.period_end = parse_timestamp(j.at("period_end").get<std::string>());
  c.resolution_hours = j.value("resolution_hours", c.resolution_hours);
  if (j.contains("coverage_range")) {
    const auto& r = j.at("coverage_range");
    if (!r.is_array() || r.size() != 2) throw std::invalid_argument("coverage_range must be [lo, hi]");
    c.coverage_min = r[0].get<double>();
    c.coverage_max = r[1].get<double>();
  }
  c.base_noise = j.value("base_noise", c.base_noise);
  if (j.contains("terrain_noise")) {
    for (const auto& [key, value] : j.at("terrain_noise").items()) {
      c.terrain_noise[parse_terrain(key)] = value.get<double>();
    }
  }
  if (j.contains("season_noise")) {
    const auto v = j.at("season_noise").get<std::vector<double>>();
    if (v.size() != 4) throw std::invalid_argument("season_noise needs 4 entries");
    std::copy(v.begin(), v.end(), c.season_noise.begin());
  }
  if (j.contains("hour_noise")) {
    const auto v = j.at("hour_noise").get<std::vector<double>>();
    if (v.size() != 24) throw std::invalid_argument("hour_noise needs 24 entries");
    std::copy(v.begin(), v.end(), c.hour_noise.begin());
  }
  c.coverage_noise_strength = j.value("coverage_noise_strength", c.coverage_noise_strength);
  c.farm_noise_spread = j.value("farm_noise_spread", c.farm_noise_spread);
  c.forecast_noise = j.value("forecast_noise", c.forecast_noise);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::string synth_config_to_json(const SynthConfig& c) {
  json j;
  j["kind"] = std::string(to_string(c.kind));
  json farms = json::object();
  for (const auto& [t, n] : c.farms_per_terrain) farms[std::string(to_string(t))] = n;
  j["farms_per_terrain"] = farms;
  j["period_start"] = format_timestamp(c.period_start);
  j["period_end"] = format_timestamp(c.period_end);
  j["resolution_hours"] = c.resolution_hours;
  j["coverage_range"] = {c.coverage_min, c.coverage_max};
  j["base_noise"] = c.base_noise;
  json tn = json::object();
  for (const auto& [t, s] : c.terrain_noise) tn[std::string(to_string(t))] = s;
  j["terrain_noise"] = tn;
  j["season_noise"] = c.season_noise;
  j["hour_noise"] = c.hour_noise;
  j["coverage_noise_strength"] = c.coverage_noise_strength;
  j["farm_noise_spread"] = c.farm_noise_spread;
  j["forecast_noise"] = c.forecast_noise;
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

std::vector<SynthFarmPlan> plan_farms(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthFarmPlan> plans;
  for (std::size_t ti = 0; ti < kTerrains.size(); ++ti) {
    const Terrain terrain = kTerrains[ti];
    const auto it = cfg.farms_per_terrain.find(terrain);
    if (it == cfg.farms_per_terrain.end() || it->second == 0) continue;
    const auto m = static_cast<std::size_t>(it->second);
    std::mt19937_64 rng(mix_seed(cfg.seed, kPlanSalt + ti));
    std::vector<std::size_t> strata(m);
    for (std::size_t i = 0; i < m; ++i) strata[i] = i;
    std::shuffle(strata.begin(), strata.end(), rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
      SynthFarmPlan p;
      char id[64];
      if (cfg.kind == SynthKind::wind) {
        std::snprintf(id, sizeof id, "wind_%s_%03zu", std::string(to_string(terrain)).c_str(), i);
      } else {
        std::snprintf(id, sizeof id, "pv_%03zu", plans.size());
      }
      p.farm_id = id;
      p.terrain = terrain;
      const double u = (static_cast<double>(strata[i]) + unit(rng)) / static_cast<double>(m);
      p.target_coverage = cfg.coverage_min + u * (cfg.coverage_max - cfg.coverage_min);
      p.installed_power_kw = std::round(cfg.kind == SynthKind::wind ? 2000.0 + 28000.0 * unit(rng)
                                                                      : 100.0 + 4900.0 * unit(rng));
      p.noise_factor = 1.0 + cfg.farm_noise_spread * (2.0 * unit(rng) - 1.0);
      plans.push_back(std::move(p));
    }
  }
  return plans;
}

SynthFarm generate_farm_detailed(const SynthConfig& cfg, std::size_t farm_index) {
  const auto plans = plan_farms(cfg);
  if (farm_index >= plans.size()) throw std::invalid_argument("farm index out of range");
  const SynthFarmPlan& plan = plans[farm_index];
  const std::uint64_t farm_seed = mix_seed(cfg.seed, 0x1000 + farm_index);
  std::mt19937_64 weather_rng(mix_seed(farm_seed, kWeatherSalt));
  std::mt19937_64 noise_rng(mix_seed(farm_seed, kNoiseSalt));
  std::mt19937_64 forecast_rng(mix_seed(farm_seed, kForecastSalt));
  std::mt19937_64 outage_rng(mix_seed(farm_seed, kOutageSalt));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  FarmMeta meta;
  meta.farm_id = plan.farm_id;
  meta.terrain = plan.terrain;
  meta.installed_power_kw = plan.installed_power_kw;
  meta.resolution_hours = cfg.resolution_hours;
  meta.period_start = cfg.period_start;
  meta.period_end = cfg.period_end;
  const std::size_t n = meta.max_samples();
  const double res = cfg.resolution_hours;

  const auto& specs = cfg.kind == SynthKind::wind ? wind_features() : pv_features();
  const std::size_t nf = specs.size();
  Matrix truth(n, nf);
  Matrix forecast(n, nf);
  std::vector<double> power(n);
  std::vector<Timestamp> stamps(n);

  const double coverage_factor =
      1.0 + cfg.coverage_noise_strength * std::max(0.0, 0.7 - plan.target_coverage) / 0.2;
  const double noise_scale = cfg.base_noise * cfg.terrain_noise.at(plan.terrain) * coverage_factor * plan.noise_factor;

  // Farm climate.
  const double mean_speed = 7.25 + (plan.terrain == Terrain::offshore ? 1.0 : 0.0) + 0.5 * (2.0 * unit(weather_rng) - 1.0);
  const double speed_phi = std::exp(-res / 30.0);
  const double cloud_phi = std::exp(-res / 18.0);
  const double slow_phi = std::exp(-res / 72.0);
  double speed_dev = 2.2 * normal(weather_rng);
  double direction = kTwoPi * unit(weather_rng);
  double cloud_dev = normal(weather_rng);
  double pressure_dev = 8.0 * normal(weather_rng);
  double temp_dev = 2.0 * normal(weather_rng);

  std::vector<double> day_errors(nf);
  std::int64_t current_day = std::numeric_limits<std::int64_t>::min();
  const std::int64_t start_s = seconds_since_epoch(cfg.period_start);

  for (std::size_t i = 0; i < n; ++i) {
    const Timestamp t = from_epoch_seconds(start_s + static_cast<std::int64_t>(i) * hours_to_seconds(cfg.resolution_hours));
    stamps[i] = t;
    const int hour = hour_of_day(t);
    const int doy = day_of_year(t);
    const double phase = annual_phase(doy);
    const int season = season_index(month_of(t));
    const double scale = noise_scale * cfg.season_noise[season] * cfg.hour_noise[hour];

    const std::int64_t day = seconds_since_epoch(t) / 86400;
    if (day != current_day) {
      current_day = day;
      for (auto& e : day_errors) e = normal(forecast_rng);
    }

    pressure_dev = slow_phi * pressure_dev + std::sqrt(1 - slow_phi * slow_phi) * 8.0 * normal(weather_rng);
    temp_dev = slow_phi * temp_dev + std::sqrt(1 - slow_phi * slow_phi) * 2.0 * normal(weather_rng);
    const double temperature = 10.0 - 8.0 * std::cos(phase) + 3.0 * std::sin(kTwoPi * (hour - 9) / 24.0) + temp_dev;
    auto row = truth.row(i);

    if (cfg.kind == SynthKind::wind) {
      speed_dev = speed_phi * speed_dev + std::sqrt(1 - speed_phi * speed_phi) * 2.2 * normal(weather_rng);
      direction += 0.15 * std::sqrt(res) * normal(weather_rng);
      const double mu = mean_speed + 1.25 * std::cos(phase) + 0.4 * std::sin(kTwoPi * (hour - 9) / 24.0);
      const double v = std::max(0.3, mu + speed_dev);
      const double pressure = 1013.0 + pressure_dev;
      row[0] = v;
      row[1] = 0.78 * v;
      row[2] = std::sin(direction);
      row[3] = std::cos(direction);
      row[4] = temperature;
      row[5] = pressure;
      row[6] = pressure * 100.0 / (287.05 * (temperature + 273.15));
      const double disturbed = std::max(0.05, v + scale * normal(noise_rng));
      power[i] = plan.installed_power_kw * power_curve(disturbed);
    } else {
      constexpr int kSub = 12;
      double clear = 0.0, elevation = 0.0;
      const double h0 = hour + 0.5 * res;
      for (int k = 0; k < kSub; ++k) {
        const double hk = h0 - res + res * (k + 0.5) / kSub;
        const double se = sin_elevation(doy, hk);
        elevation += se;
        clear += se > 0.0 ? std::pow(se, 1.2) : 0.0;
      }
      clear /= kSub;
      elevation /= kSub;
      const double amplitude = 1.5 - 0.5 * std::cos(phase);
      cloud_dev = cloud_phi * cloud_dev + std::sqrt(1 - cloud_phi * cloud_phi) * normal(weather_rng);
      const double cloud = 1.0 / (1.0 + std::exp(-(0.3 + amplitude * cloud_dev)));
      const double radiation = clear * (1.0 - 0.7 * cloud);
      row[0] = clear;
      row[1] = elevation;
      row[2] = cloud;
      row[3] = radiation;
      row[4] = temperature;
      const double disturbed = std::max(0.0, 1.0 + scale * normal(noise_rng));
      power[i] = clear > 0.0 ? std::min(plan.installed_power_kw, plan.installed_power_kw * radiation * disturbed) : 0.0;
    }

    const double factor = horizon_factor(hour) * cfg.forecast_noise;
    for (std::size_t f = 0; f < nf; ++f) {
      forecast(i, f) = row[f] + factor * specs[f].forecast_sigma * day_errors[f];
    }
  }

  const auto keep = static_cast<std::size_t>(std::llround(plan.target_coverage * static_cast<double>(n)));
  const auto removed = outage_mask(n, keep, outage_rng);

  SynthFarm out;
  out.plan = plan;
  out.data.meta = meta;
  for (const auto& s : specs) out.data.feature_names.emplace_back(s.name);
  out.data.features = Matrix(0, nf);
  out.truth = Matrix(0, nf);
  for (std::size_t i = 0; i < n; ++i) {
    if (removed[i]) continue;
    out.data.timestamps.push_back(stamps[i]);
    out.data.features.append_row(forecast.row(i));
    out.truth.append_row(truth.row(i));
    out.data.power.push_back(power[i]);
  }
  out.data.validate();
  return out;
}

FarmDataset generate_farm(const SynthConfig& cfg, std::size_t farm_index) {
  return generate_farm_detailed(cfg, farm_index).data;
}

std::vector<std::string> synth_shift_features(SynthKind kind) {
  if (kind == SynthKind::wind) return {"wind_speed_100m", "wind_speed_10m", "wind_dir_sin", "wind_dir_cos"};
  return {"radiation_fc", "cloud_cover_fc"};
}

std::vector<SynthSummaryRow> write_synth_dataset(const SynthConfig& cfg, const std::filesystem::path& dir) {
  const auto plans = plan_farms(cfg);
  std::vector<SynthSummaryRow> rows;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto ds = generate_farm(cfg, i);
    write_farm_files(ds, dir);
    rows.push_back({ds.meta.farm_id, ds.meta.terrain, plans[i].target_coverage, compute_data_coverage(ds), ds.size()});
  }
  return rows;
}

} // namespace fcu

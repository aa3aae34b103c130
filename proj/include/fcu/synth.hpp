#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fcu/dataset.hpp"

namespace fcu {

enum class SynthKind { wind, pv };

std::string_view to_string(SynthKind k);
SynthKind parse_synth_kind(std::string_view text);

struct SynthConfig {
  SynthKind kind = SynthKind::wind;
  std::map<Terrain, int> farms_per_terrain;
  Timestamp period_start{};
  Timestamp period_end{};
  int resolution_hours = 1;
  double coverage_min = 0.5;
  double coverage_max = 1.0;
  /// Wind: std of the speed disturbance in m/s. PV: relative std of the output disturbance.
  double base_noise = 1.0;
  std::map<Terrain, double> terrain_noise;
  /// Multipliers for seasons 1..4.
  std::array<double, 4> season_noise{1.0, 1.0, 1.0, 1.0};
  /// Multipliers per UTC hour.
  std::array<double, 24> hour_noise{};
  /// Noise grows by this fraction per 0.2 of coverage below 0.7.
  double coverage_noise_strength = 0.0;
  /// Per-farm noise multiplier is drawn from [1 - spread, 1 + spread].
  double farm_noise_spread = 0.1;
  /// Scales every forecast-feature error.
  double forecast_noise = 1.0;
  std::uint64_t seed = 0;

  static SynthConfig wind_defaults();
  static SynthConfig pv_defaults();
  std::size_t n_farms() const;
  void validate() const;
};

/// Missing keys fall back to the defaults of the configured kind.
SynthConfig synth_config_from_json(std::string_view json_text);
std::string synth_config_to_json(const SynthConfig& cfg);

struct SynthFarmPlan {
  std::string farm_id;
  Terrain terrain = Terrain::none;
  double target_coverage = 1.0;
  double installed_power_kw = 0.0;
  double noise_factor = 1.0;
};

/// Farms in terrain order; coverage targets are stratified within each terrain.
std::vector<SynthFarmPlan> plan_farms(const SynthConfig& cfg);

struct SynthFarm {
  FarmDataset data;
  /// Latent weather behind each feature column, row-aligned with data.
  Matrix truth;
  SynthFarmPlan plan;
};

SynthFarm generate_farm_detailed(const SynthConfig& cfg, std::size_t farm_index);
FarmDataset generate_farm(const SynthConfig& cfg, std::size_t farm_index);

/// Features worth shifting for the configured kind.
std::vector<std::string> synth_shift_features(SynthKind kind);

struct SynthSummaryRow {
  std::string farm_id;
  Terrain terrain = Terrain::none;
  double target_coverage = 0.0;
  double coverage = 0.0;
  std::size_t samples = 0;
};

/// Generates every farm and writes `<id>.csv` / `<id>.json` into dir.
std::vector<SynthSummaryRow> write_synth_dataset(const SynthConfig& cfg, const std::filesystem::path& dir);

} // namespace fcu

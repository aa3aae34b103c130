#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcu/matrix.hpp"
#include "fcu/timeutil.hpp"

namespace fcu {

enum class Terrain { farmland, forest, offshore, none };

std::string_view to_string(Terrain t);
/// Accepts `farmland`, `flatland`, `flatland/farmland`, `forest`, `offshore`, `none`.
Terrain parse_terrain(std::string_view text);

struct FarmMeta {
  std::string farm_id;
  Terrain terrain = Terrain::none;
  double installed_power_kw = 0.0;
  int resolution_hours = 1;
  Timestamp period_start{};
  /// Exclusive.
  Timestamp period_end{};
  /// Divisor applied by normalize_power; absent while power is still in kW.
  std::optional<double> power_scale_kw;

  void validate() const;
  /// Number of grid slots in [period_start, period_end).
  std::size_t max_samples() const;
};

FarmMeta farm_meta_from_json(std::string_view json_text);
std::string farm_meta_to_json(const FarmMeta& meta);

/// One farm's aligned time series: NWP features and generated power per timestamp.
struct FarmDataset {
  FarmMeta meta;
  std::vector<Timestamp> timestamps;
  Matrix features;
  std::vector<std::string> feature_names;
  std::vector<double> power;
  /// Rows rejected during ingestion (unparseable, non-finite, outside the period).
  std::size_t dropped_rows = 0;
  std::size_t duplicate_rows = 0;

  std::size_t size() const { return timestamps.size(); }
  std::optional<std::size_t> feature_index(std::string_view name) const;
  /// Throws std::invalid_argument when any structural invariant is broken.
  void validate() const;
  /// Row subset in the given order, metadata unchanged.
  FarmDataset subset(std::span<const std::size_t> rows) const;
};

FarmDataset load_farm_timeseries(const std::filesystem::path& csv_path,
                                 const std::filesystem::path& meta_path);
std::string farm_timeseries_to_csv(const FarmDataset& ds);
/// Writes `<dir>/<farm_id>.csv` and `<dir>/<farm_id>.json`.
void write_farm_files(const FarmDataset& ds, const std::filesystem::path& dir);

struct OutlierPolicy {
  /// Constant power over at least this many consecutive grid slots is suspect.
  int max_constant_run = 24;
  bool allow_negative = false;
  /// Upper bound as a multiple of installed power.
  double max_power_factor = 1.1;
  /// Features whose variation marks a constant power run as an outage; empty means all.
  std::vector<std::string> reference_features;

  void validate() const;
};

/// Rule-based outlier removal. Gaps are kept as gaps; nothing is imputed.
FarmDataset filter_outliers(const FarmDataset& ds, const OutlierPolicy& policy);

/// Available samples over grid slots in the recorded period, clamped to [0, 1].
double compute_data_coverage(const FarmDataset& ds);

/// Adds `<f>_lead_<k>` and `<f>_lag_<k>` columns for k = resolution, 2*resolution, ...,
/// shift_hours. Rows whose shifted neighbours are not recorded are dropped.
FarmDataset shift_features(const FarmDataset& ds, std::span<const std::string> feature_subset,
                           int shift_hours);

/// Divides power by its historical maximum and records the divisor in the metadata.
FarmDataset normalize_power(const FarmDataset& ds);

/// Per-column affine scaling to zero mean and unit (population) variance.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  Matrix apply(const Matrix& features) const;
  Matrix invert(const Matrix& standardized) const;
};

Standardizer fit_standardizer(const Matrix& features);
inline Matrix apply_standardizer(const Standardizer& s, const Matrix& features) {
  return s.apply(features);
}

} // namespace fcu

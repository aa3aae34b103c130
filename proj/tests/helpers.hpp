#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fcu/dataset.hpp"
#include "fcu/matrix.hpp"

namespace fcu::test {

inline Timestamp at(const char* iso) { return parse_timestamp(iso); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fcu_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = n(rng);
  }
  return m;
}

/// Hourly farm with a full grid, one feature `wind_speed` and power = 10 * speed + 5.
inline FarmDataset hourly_farm(const std::string& id, int hours, const char* start = "2016-01-01T00:00:00Z") {
  FarmDataset ds;
  ds.meta.farm_id = id;
  ds.meta.terrain = Terrain::farmland;
  ds.meta.installed_power_kw = 1000.0;
  ds.meta.resolution_hours = 1;
  ds.meta.period_start = parse_timestamp(start);
  ds.meta.period_end = ds.meta.period_start + std::chrono::hours(hours);
  ds.feature_names = {"wind_speed"};
  ds.features = Matrix(0, 1);
  for (int h = 0; h < hours; ++h) {
    ds.timestamps.push_back(ds.meta.period_start + std::chrono::hours(h));
    const double v = 5.0 + 3.0 * std::sin(0.3 * h) + 0.01 * h;
    ds.features.append_row(std::vector<double>{v});
    ds.power.push_back(10.0 * v + 5.0);
  }
  return ds;
}

} // namespace fcu::test

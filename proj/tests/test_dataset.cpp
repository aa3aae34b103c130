#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "fcu/dataset.hpp"
#include "fcu/textio.hpp"
#include "helpers.hpp"

using namespace fcu;
using fcu::test::at;

namespace {

FarmMeta meta_for(int hours, int resolution = 1) {
  FarmMeta m;
  m.farm_id = "f1";
  m.terrain = Terrain::forest;
  m.installed_power_kw = 500.0;
  m.resolution_hours = resolution;
  m.period_start = at("2016-01-01T00:00:00Z");
  m.period_end = m.period_start + std::chrono::hours(hours);
  return m;
}

std::filesystem::path write_pair(const std::string& name, const std::string& csv, const FarmMeta& meta) {
  const auto dir = fcu::test::scratch_dir(name);
  write_file(dir / "f1.csv", csv);
  write_file(dir / "f1.json", farm_meta_to_json(meta));
  return dir;
}

// Hourly farm whose power holds `level` for `run` samples in the middle and varies elsewhere.
FarmDataset with_constant_run(int total, int run_start, int run, double level) {
  auto ds = fcu::test::hourly_farm("c", total);
  for (int i = 0; i < total; ++i) {
    ds.power[i] = (i >= run_start && i < run_start + run) ? level : 100.0 + 7.0 * std::sin(0.7 * i);
  }
  return ds;
}

} // namespace

TEST_SUITE("dataset") {
  TEST_CASE("three valid rows load as three samples") {
    const auto dir = write_pair("load3",
                                "timestamp,wind_speed,power\n"
                                "2016-01-01T00:00:00Z,3.5,10\n"
                                "2016-01-01T01:00:00Z,4.5,20\n"
                                "2016-01-01T02:00:00Z,5.5,30\n",
                                meta_for(3));
    const auto ds = load_farm_timeseries(dir / "f1.csv", dir / "f1.json");
    CHECK(ds.size() == 3);
    CHECK(ds.feature_names == std::vector<std::string>{"wind_speed"});
    CHECK(ds.power[2] == 30.0);
    CHECK(ds.dropped_rows == 0);
  }

  TEST_CASE("non-finite and unparseable rows are dropped and counted") {
    const auto dir = write_pair("dropnan",
                                "timestamp,wind_speed,power\n"
                                "2016-01-01T00:00:00Z,3.5,10\n"
                                "2016-01-01T01:00:00Z,4.5,NaN\n"
                                "2016-01-01T02:00:00Z,abc,30\n"
                                "2016-01-01T03:00:00Z,5.5,40\n",
                                meta_for(4));
    const auto ds = load_farm_timeseries(dir / "f1.csv", dir / "f1.json");
    CHECK(ds.size() == 2);
    CHECK(ds.dropped_rows == 2);
  }

  TEST_CASE("duplicate timestamps keep the first row and unsorted input is sorted") {
    const auto dir = write_pair("dups",
                                "timestamp,wind_speed,power\n"
                                "2016-01-01T01:00:00Z,4.5,20\n"
                                "2016-01-01T00:00:00Z,3.5,10\n"
                                "2016-01-01T01:00:00Z,9.9,99\n",
                                meta_for(2));
    const auto ds = load_farm_timeseries(dir / "f1.csv", dir / "f1.json");
    REQUIRE(ds.size() == 2);
    CHECK(ds.timestamps[0] < ds.timestamps[1]);
    CHECK(ds.power[1] == 20.0);
    CHECK(ds.duplicate_rows == 1);
  }

  TEST_CASE("two years of hourly data without gaps give 17520 samples") {
    // 730 days; the 17520 figure counts two 365-day years.
    const int hours = 730 * 24;
    const auto ds = fcu::test::hourly_farm("f1", hours);
    const auto dir = fcu::test::scratch_dir("full");
    write_farm_files(ds, dir);
    const auto back = load_farm_timeseries(dir / "f1.csv", dir / "f1.json");
    CHECK(back.size() == 17520);
    CHECK(back.meta.max_samples() == 17520);
    CHECK(compute_data_coverage(back) == 1.0);
    CHECK(back.timestamps == ds.timestamps);
    CHECK(back.power == ds.power);
    CHECK(back.features == ds.features);
  }

  TEST_CASE("load errors") {
    const auto meta = meta_for(3);
    SUBCASE("missing file") {
      const auto dir = fcu::test::scratch_dir("missing");
      write_file(dir / "f1.json", farm_meta_to_json(meta));
      CHECK_THROWS(load_farm_timeseries(dir / "f1.csv", dir / "f1.json"));
    }
    SUBCASE("header mismatch") {
      const auto dir = write_pair("hdr", "time,wind_speed,power\n2016-01-01T00:00:00Z,1,2\n", meta);
      CHECK_THROWS_AS(load_farm_timeseries(dir / "f1.csv", dir / "f1.json"), std::runtime_error);
    }
    SUBCASE("misaligned timestamp") {
      const auto dir = write_pair("align", "timestamp,wind_speed,power\n2016-01-01T00:30:00Z,1,2\n", meta);
      CHECK_THROWS_AS(load_farm_timeseries(dir / "f1.csv", dir / "f1.json"), std::runtime_error);
    }
    SUBCASE("nothing valid") {
      const auto dir = write_pair("empty", "timestamp,wind_speed,power\n2016-01-01T00:00:00Z,1,inf\n", meta);
      CHECK_THROWS(load_farm_timeseries(dir / "f1.csv", dir / "f1.json"));
    }
  }

  TEST_CASE("metadata invariants") {
    auto m = meta_for(10);
    CHECK_NOTHROW(m.validate());
    m.installed_power_kw = 0.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = meta_for(10);
    m.resolution_hours = 5;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m = meta_for(10);
    m.period_end = m.period_start;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    CHECK(parse_terrain("flatland") == Terrain::farmland);
    CHECK(parse_terrain("flatland/farmland") == Terrain::farmland);
    const auto back = farm_meta_from_json(farm_meta_to_json(meta_for(10)));
    CHECK(back.period_end == meta_for(10).period_end);
    CHECK(back.terrain == Terrain::forest);
  }

  TEST_CASE("constant run with varying wind speed is removed entirely") {
    const auto ds = with_constant_run(100, 30, 48, 0.2);
    const auto out = filter_outliers(ds, OutlierPolicy{});
    CHECK(out.size() == 52);
    for (double p : out.power) CHECK(p != 0.2);
  }

  TEST_CASE("constant run shorter than the limit survives") {
    const auto ds = with_constant_run(100, 30, 23, 0.2);
    CHECK(filter_outliers(ds, OutlierPolicy{}).size() == 100);
  }

  TEST_CASE("power above the installed limit is removed") {
    auto ds = fcu::test::hourly_farm("c", 10);
    ds.meta.installed_power_kw = 100.0;
    ds.power.assign(10, 50.0);
    for (int i = 0; i < 10; ++i) ds.power[i] = 40.0 + i;
    ds.power[4] = 150.0;
    const auto out = filter_outliers(ds, OutlierPolicy{});
    CHECK(out.size() == 9);
    CHECK(std::find(out.power.begin(), out.power.end(), 150.0) == out.power.end());
  }

  TEST_CASE("negative power is removed unless allowed") {
    auto ds = fcu::test::hourly_farm("c", 10);
    ds.power[3] = -1.0;
    CHECK(filter_outliers(ds, OutlierPolicy{}).size() == 9);
    OutlierPolicy allow;
    allow.allow_negative = true;
    CHECK(filter_outliers(ds, allow).size() == 10);
  }

  TEST_CASE("clean dataset passes through unchanged") {
    const auto ds = fcu::test::hourly_farm("c", 200);
    const auto out = filter_outliers(ds, OutlierPolicy{});
    CHECK(out.timestamps == ds.timestamps);
    CHECK(out.power == ds.power);
    CHECK(out.features == ds.features);
  }

  TEST_CASE("filtering everything is an error") {
    auto ds = fcu::test::hourly_farm("c", 30);
    ds.power.assign(30, 3.0);
    CHECK_THROWS(filter_outliers(ds, OutlierPolicy{}));
  }

  TEST_CASE("filter_outliers is idempotent on random data with planted runs") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      auto ds = fcu::test::hourly_farm("c", 400);
      std::uniform_int_distribution<int> pos(0, 399), len(2, 40);
      std::uniform_real_distribution<double> u(0.0, 1200.0);
      for (auto& p : ds.power) p = u(rng);
      for (int k = 0; k < 6; ++k) {
        const int s = pos(rng), l = len(rng);
        for (int i = s; i < std::min(400, s + l); ++i) ds.power[i] = 77.0;
      }
      // Random gaps make contiguity matter.
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (pos(rng) > 40) keep.push_back(i);
      }
      ds = ds.subset(keep);
      OutlierPolicy policy;
      policy.max_constant_run = 8;
      const auto once = filter_outliers(ds, policy);
      const auto twice = filter_outliers(once, policy);
      CHECK(twice.timestamps == once.timestamps);
      CHECK(twice.power == once.power);
    }
  }

  TEST_CASE("coverage arithmetic") {
    auto full = fcu::test::hourly_farm("c", 17520);
    std::vector<std::size_t> half, three_quarters;
    for (std::size_t i = 0; i < 17520; ++i) {
      if (i % 2 == 0) half.push_back(i);
      if (i % 4 != 0) three_quarters.push_back(i);
    }
    CHECK(compute_data_coverage(full) == 1.0);
    CHECK(compute_data_coverage(full.subset(half)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(compute_data_coverage(full.subset(three_quarters)) == doctest::Approx(0.75).epsilon(1e-15));
  }

  TEST_CASE("removing samples never increases coverage") {
    auto ds = fcu::test::hourly_farm("c", 300);
    std::mt19937_64 rng(3);
    double prev = compute_data_coverage(ds);
    while (ds.size() > 1) {
      std::vector<std::size_t> keep;
      std::uniform_int_distribution<std::size_t> drop(0, ds.size() - 1);
      const auto d = drop(rng);
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (i != d) keep.push_back(i);
      }
      ds = ds.subset(keep);
      const double c = compute_data_coverage(ds);
      CHECK(c <= prev);
      prev = c;
    }
  }

  TEST_CASE("two-hour shift on hourly data adds four columns and trims two rows per side") {
    const auto ds = fcu::test::hourly_farm("c", 50);
    const std::vector<std::string> names{"wind_speed"};
    const auto out = shift_features(ds, names, 2);
    CHECK(out.feature_names ==
          std::vector<std::string>{"wind_speed", "wind_speed_lead_1", "wind_speed_lead_2", "wind_speed_lag_1",
                                   "wind_speed_lag_2"});
    CHECK(out.size() == 46);
    CHECK(out.timestamps.front() == ds.timestamps[2]);
    CHECK(out.timestamps.back() == ds.timestamps[47]);
    CHECK(out.features(0, 1) == ds.features(3, 0));
    CHECK(out.features(0, 2) == ds.features(4, 0));
    CHECK(out.features(0, 3) == ds.features(1, 0));
    CHECK(out.features(0, 4) == ds.features(0, 0));
  }

  TEST_CASE("three-hour shift on 3-hourly data adds lead 3 and lag 3") {
    FarmDataset ds;
    ds.meta = meta_for(3 * 20, 3);
    ds.feature_names = {"radiation", "temp"};
    ds.features = Matrix(0, 2);
    for (int i = 0; i < 20; ++i) {
      ds.timestamps.push_back(ds.meta.period_start + std::chrono::hours(3 * i));
      ds.features.append_row(std::vector<double>{double(i), 1.0});
      ds.power.push_back(i);
    }
    const std::vector<std::string> names{"radiation"};
    const auto out = shift_features(ds, names, 3);
    CHECK(out.feature_names == std::vector<std::string>{"radiation", "temp", "radiation_lead_3", "radiation_lag_3"});
    CHECK(out.size() == 18);
    const std::vector<std::string> bad{"nope"};
    CHECK_THROWS_AS(shift_features(ds, bad, 3), std::invalid_argument);
    CHECK_THROWS_AS(shift_features(ds, names, 2), std::invalid_argument);
  }

  TEST_CASE("shift of zero is the identity") {
    const auto ds = fcu::test::hourly_farm("c", 20);
    const std::vector<std::string> names{"wind_speed"};
    const auto out = shift_features(ds, names, 0);
    CHECK(out.features == ds.features);
    CHECK(out.timestamps == ds.timestamps);
  }

  TEST_CASE("shift then dropping added columns and restoring rows recovers the original") {
    auto ds = fcu::test::hourly_farm("c", 120);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (i % 17 != 5 && i % 23 != 7) keep.push_back(i);
    }
    ds = ds.subset(keep);
    const std::vector<std::string> names{"wind_speed"};
    const auto out = shift_features(ds, names, 2);
    REQUIRE(out.size() > 0);
    std::size_t j = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (j < out.size() && out.timestamps[j] == ds.timestamps[i]) {
        CHECK(out.features(j, 0) == ds.features(i, 0));
        CHECK(out.power[j] == ds.power[i]);
        ++j;
      }
    }
    CHECK(j == out.size());
  }

  TEST_CASE("normalization divides by the historical maximum") {
    auto ds = fcu::test::hourly_farm("c", 3);
    ds.power = {100.0, 500.0, 1000.0};
    const auto out = normalize_power(ds);
    CHECK(out.power == std::vector<double>{0.1, 0.5, 1.0});
    REQUIRE(out.meta.power_scale_kw);
    CHECK(*out.meta.power_scale_kw == 1000.0);
    ds.power = {2.0, 4.0, 1.0};
    CHECK(normalize_power(ds).power == std::vector<double>{0.5, 1.0, 0.25});
    const auto again = normalize_power(out);
    CHECK(again.power == out.power);
    ds.power = {0.0, 0.0, 0.0};
    CHECK_THROWS(normalize_power(ds));
  }

  TEST_CASE("normalization preserves the argmax") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 900.0);
    auto ds = fcu::test::hourly_farm("c", 97);
    for (auto& p : ds.power) p = u(rng);
    const auto out = normalize_power(ds);
    CHECK(std::max_element(out.power.begin(), out.power.end()) - out.power.begin() ==
          std::max_element(ds.power.begin(), ds.power.end()) - ds.power.begin());
    for (double p : out.power) CHECK((p >= 0.0 && p <= 1.0));
  }

  TEST_CASE("standardizer arithmetic") {
    const Matrix m(2, 2, std::vector<double>{1.0, 5.0, 3.0, 5.0});
    const auto s = fit_standardizer(m);
    CHECK(s.mean[0] == 2.0);
    CHECK(s.stddev[0] == 1.0);
    CHECK(s.stddev[1] == 1.0);
    const auto t = s.apply(m);
    CHECK(t(0, 0) == -1.0);
    CHECK(t(1, 0) == 1.0);
    CHECK(t(0, 1) == 0.0);
    CHECK(t(1, 1) == 0.0);
    CHECK_THROWS(fit_standardizer(Matrix(0, 3)));
  }

  TEST_CASE("standardizing the fit data gives zero mean and unit std; invert restores inputs") {
    std::mt19937_64 rng(9);
    auto m = fcu::test::random_matrix(300, 5, rng);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      m(r, 1) = 1000.0 + 50.0 * m(r, 1);
      m(r, 3) = 1e-3 * m(r, 3);
    }
    const auto s = fit_standardizer(m);
    const auto t = apply_standardizer(s, m);
    for (std::size_t c = 0; c < 5; ++c) {
      const auto col = t.column(c);
      double mean = 0.0, var = 0.0;
      for (double v : col) mean += v;
      mean /= col.size();
      for (double v : col) var += (v - mean) * (v - mean);
      var /= col.size();
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }
    const auto back = s.invert(t);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        CHECK(std::abs(back(r, c) - m(r, c)) <= 1e-12 * std::max(1.0, std::abs(m(r, c))));
      }
    }
  }
}

#include "fcu/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fcu/textio.hpp"

namespace fcu {

using nlohmann::json;

std::string_view to_string(Terrain t) {
  switch (t) {
  case Terrain::farmland: return "farmland";
  case Terrain::forest: return "forest";
  case Terrain::offshore: return "offshore";
  case Terrain::none: return "none";
  }
  return "none";
}

Terrain parse_terrain(std::string_view text) {
  if (text == "farmland" || text == "flatland" || text == "flatland/farmland") return Terrain::farmland;
  if (text == "forest") return Terrain::forest;
  if (text == "offshore") return Terrain::offshore;
  if (text == "none" || text.empty()) return Terrain::none;
  throw std::invalid_argument("unknown terrain: " + std::string(text));
}

void FarmMeta::validate() const {
  if (farm_id.empty()) throw std::invalid_argument("farm_id is empty");
  if (!(installed_power_kw > 0.0) || !std::isfinite(installed_power_kw)) {
    throw std::invalid_argument("installed_power_kw must be positive for farm " + farm_id);
  }
  if (resolution_hours <= 0 || 24 % resolution_hours != 0) {
    throw std::invalid_argument("resolution_hours must divide 24 for farm " + farm_id);
  }
  if (!(period_start < period_end)) {
    throw std::invalid_argument("period_start must precede period_end for farm " + farm_id);
  }
}

std::size_t FarmMeta::max_samples() const {
  const auto span = seconds_since_epoch(period_end) - seconds_since_epoch(period_start);
  return static_cast<std::size_t>(span / hours_to_seconds(resolution_hours));
}

FarmMeta farm_meta_from_json(std::string_view json_text) {
  const json j = json::parse(json_text);
  FarmMeta m;
  m.farm_id = j.at("farm_id").get<std::string>();
  m.terrain = parse_terrain(j.value("terrain", std::string("none")));
  m.installed_power_kw = j.at("installed_power_kw").get<double>();
  m.resolution_hours = j.at("resolution_hours").get<int>();
  m.period_start = parse_timestamp(j.at("period_start").get<std::string>());
  m.period_end = parse_timestamp(j.at("period_end").get<std::string>());
  if (j.contains("power_scale_kw") && !j["power_scale_kw"].is_null()) {
    m.power_scale_kw = j["power_scale_kw"].get<double>();
  }
  m.validate();
  return m;
}

std::string farm_meta_to_json(const FarmMeta& meta) {
  json j;
  j["farm_id"] = meta.farm_id;
  j["terrain"] = std::string(to_string(meta.terrain));
  j["installed_power_kw"] = meta.installed_power_kw;
  j["resolution_hours"] = meta.resolution_hours;
  j["period_start"] = format_timestamp(meta.period_start);
  j["period_end"] = format_timestamp(meta.period_end);
  if (meta.power_scale_kw) j["power_scale_kw"] = *meta.power_scale_kw;
  return j.dump(2) + "\n";
}

std::optional<std::size_t> FarmDataset::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return i;
  }
  return std::nullopt;
}

void FarmDataset::validate() const {
  meta.validate();
  const auto n = timestamps.size();
  if (features.rows() != n || power.size() != n) {
    throw std::invalid_argument("row counts disagree in farm " + meta.farm_id);
  }
  if (features.cols() != feature_names.size()) {
    throw std::invalid_argument("feature names disagree with columns in farm " + meta.farm_id);
  }
  const auto step = hours_to_seconds(meta.resolution_hours);
  for (std::size_t i = 0; i < n; ++i) {
    if (seconds_since_epoch(timestamps[i]) % step != 0) {
      throw std::invalid_argument("timestamp " + format_timestamp(timestamps[i]) +
                                  " is not aligned to the resolution grid");
    }
    if (i > 0 && !(timestamps[i - 1] < timestamps[i])) {
      throw std::invalid_argument("timestamps are not strictly increasing in farm " + meta.farm_id);
    }
    if (!std::isfinite(power[i])) throw std::invalid_argument("non-finite power value");
  }
  for (double v : features.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
  }
}

FarmDataset FarmDataset::subset(std::span<const std::size_t> rows) const {
  FarmDataset out;
  out.meta = meta;
  out.feature_names = feature_names;
  out.features = features.select_rows(rows);
  out.timestamps = select(std::span<const Timestamp>(timestamps), rows);
  out.power = select(std::span<const double>(power), rows);
  out.dropped_rows = dropped_rows;
  out.duplicate_rows = duplicate_rows;
  return out;
}

FarmDataset load_farm_timeseries(const std::filesystem::path& csv_path,
                                 const std::filesystem::path& meta_path) {
  if (!std::filesystem::exists(csv_path)) {
    throw std::runtime_error("missing time-series file " + csv_path.string());
  }
  if (!std::filesystem::exists(meta_path)) {
    throw std::runtime_error("missing metadata file " + meta_path.string());
  }
  FarmDataset ds;
  ds.meta = farm_meta_from_json(read_file(meta_path));

  const std::string text = read_file(csv_path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file " + csv_path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "timestamp" || header.back() != "power") {
    throw std::runtime_error("header must be `timestamp,<features...>,power` in " + csv_path.string());
  }
  for (std::size_t i = 1; i + 1 < header.size(); ++i) ds.feature_names.emplace_back(header[i]);
  const std::size_t n_features = ds.feature_names.size();

  struct Row {
    Timestamp t;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  const auto step = hours_to_seconds(ds.meta.resolution_hours);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      ++ds.dropped_rows;
      continue;
    }
    Row row;
    try {
      row.t = parse_timestamp(fields[0]);
    } catch (const std::invalid_argument&) {
      ++ds.dropped_rows;
      continue;
    }
    row.values.resize(n_features + 1);
    bool ok = true;
    for (std::size_t i = 1; i < fields.size() && ok; ++i) {
      ok = parse_double(fields[i], row.values[i - 1]) && std::isfinite(row.values[i - 1]);
    }
    if (!ok || row.t < ds.meta.period_start || !(row.t < ds.meta.period_end)) {
      ++ds.dropped_rows;
      continue;
    }
    if (seconds_since_epoch(row.t) % step != 0) {
      throw std::runtime_error("timestamp " + format_timestamp(row.t) + " in " + csv_path.string() +
                               " is not aligned to the " + std::to_string(ds.meta.resolution_hours) +
                               " h grid");
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!ds.timestamps.empty() && ds.timestamps.back() == rows[i].t) {
      ++ds.duplicate_rows;
      continue;
    }
    ds.timestamps.push_back(rows[i].t);
    ds.features.append_row(std::span<const double>(rows[i].values).first(n_features));
    ds.power.push_back(rows[i].values[n_features]);
  }
  if (ds.timestamps.empty()) {
    throw std::runtime_error("no valid rows in " + csv_path.string());
  }
  ds.validate();
  return ds;
}

std::string farm_timeseries_to_csv(const FarmDataset& ds) {
  std::string out = "timestamp";
  for (const auto& name : ds.feature_names) out += "," + name;
  out += ",power\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += format_timestamp(ds.timestamps[i]);
    for (double v : ds.features.row(i)) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    out += format_double(ds.power[i]);
    out += '\n';
  }
  return out;
}

void write_farm_files(const FarmDataset& ds, const std::filesystem::path& dir) {
  write_file(dir / (ds.meta.farm_id + ".csv"), farm_timeseries_to_csv(ds));
  write_file(dir / (ds.meta.farm_id + ".json"), farm_meta_to_json(ds.meta));
}

void OutlierPolicy::validate() const {
  if (max_constant_run < 2) throw std::invalid_argument("max_constant_run must be >= 2");
  if (!(max_power_factor >= 1.0)) throw std::invalid_argument("max_power_factor must be >= 1");
}

FarmDataset filter_outliers(const FarmDataset& ds, const OutlierPolicy& policy) {
  policy.validate();
  const double upper = policy.max_power_factor * ds.meta.installed_power_kw;

  std::vector<std::size_t> kept;
  kept.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double p = ds.power[i];
    if ((!policy.allow_negative && p < 0.0) || p > upper) continue;
    kept.push_back(i);
  }

  std::vector<std::size_t> reference;
  if (policy.reference_features.empty()) {
    reference.resize(ds.features.cols());
    std::iota(reference.begin(), reference.end(), std::size_t{0});
  } else {
    for (const auto& name : policy.reference_features) {
      const auto idx = ds.feature_index(name);
      if (!idx) throw std::invalid_argument("unknown reference feature " + name);
      reference.push_back(*idx);
    }
  }

  // Runs of equal power over contiguous grid slots. Removed samples leave gaps, so a
  // second pass sees the same maximal runs and the filter is idempotent.
  const auto step = hours_to_seconds(ds.meta.resolution_hours);
  std::vector<char> drop(kept.size(), 0);
  std::size_t begin = 0;
  while (begin < kept.size()) {
    std::size_t end = begin + 1;
    while (end < kept.size() && ds.power[kept[end]] == ds.power[kept[begin]] &&
           seconds_since_epoch(ds.timestamps[kept[end]]) -
                   seconds_since_epoch(ds.timestamps[kept[end - 1]]) ==
               step) {
      ++end;
    }
    if (end - begin >= static_cast<std::size_t>(policy.max_constant_run)) {
      bool varies = false;
      for (auto f : reference) {
        const double first = ds.features(kept[begin], f);
        for (std::size_t k = begin + 1; k < end && !varies; ++k) {
          varies = ds.features(kept[k], f) != first;
        }
        if (varies) break;
      }
      if (varies) std::fill(drop.begin() + begin, drop.begin() + end, 1);
    }
    begin = end;
  }

  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    if (!drop[k]) rows.push_back(kept[k]);
  }
  if (rows.empty()) throw std::runtime_error("outlier filter removed every sample of farm " + ds.meta.farm_id);
  return ds.subset(rows);
}

double compute_data_coverage(const FarmDataset& ds) {
  const auto slots = ds.meta.max_samples();
  if (slots == 0) throw std::invalid_argument("zero-length recording period for farm " + ds.meta.farm_id);
  return std::clamp(static_cast<double>(ds.size()) / static_cast<double>(slots), 0.0, 1.0);
}

FarmDataset shift_features(const FarmDataset& ds, std::span<const std::string> feature_subset,
                           int shift_hours) {
  if (shift_hours < 0) throw std::invalid_argument("shift_hours must be non-negative");
  if (shift_hours % ds.meta.resolution_hours != 0) {
    throw std::invalid_argument("shift of " + std::to_string(shift_hours) +
                                " h is not a multiple of the resolution");
  }
  std::vector<std::size_t> columns;
  for (const auto& name : feature_subset) {
    const auto idx = ds.feature_index(name);
    if (!idx) throw std::invalid_argument("unknown feature " + name);
    columns.push_back(*idx);
  }
  if (shift_hours == 0 || columns.empty()) return ds;

  const int steps = shift_hours / ds.meta.resolution_hours;
  const auto step = hours_to_seconds(ds.meta.resolution_hours);
  auto find_row = [&](std::int64_t t) -> std::optional<std::size_t> {
    const auto it = std::lower_bound(ds.timestamps.begin(), ds.timestamps.end(), from_epoch_seconds(t));
    if (it == ds.timestamps.end() || seconds_since_epoch(*it) != t) return std::nullopt;
    return static_cast<std::size_t>(it - ds.timestamps.begin());
  };

  FarmDataset out;
  out.meta = ds.meta;
  out.dropped_rows = ds.dropped_rows;
  out.duplicate_rows = ds.duplicate_rows;
  out.feature_names = ds.feature_names;
  for (auto c : columns) {
    for (int k = 1; k <= steps; ++k) {
      out.feature_names.push_back(ds.feature_names[c] + "_lead_" + std::to_string(k * ds.meta.resolution_hours));
    }
    for (int k = 1; k <= steps; ++k) {
      out.feature_names.push_back(ds.feature_names[c] + "_lag_" + std::to_string(k * ds.meta.resolution_hours));
    }
  }

  std::vector<double> row;
  std::vector<std::size_t> leads(steps), lags(steps);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto t = seconds_since_epoch(ds.timestamps[i]);
    bool complete = true;
    for (int k = 1; k <= steps && complete; ++k) {
      const auto lead = find_row(t + k * step);
      const auto lag = find_row(t - k * step);
      complete = lead && lag;
      if (complete) {
        leads[k - 1] = *lead;
        lags[k - 1] = *lag;
      }
    }
    if (!complete) continue;
    const auto base = ds.features.row(i);
    row.assign(base.begin(), base.end());
    for (auto c : columns) {
      for (int k = 0; k < steps; ++k) row.push_back(ds.features(leads[k], c));
      for (int k = 0; k < steps; ++k) row.push_back(ds.features(lags[k], c));
    }
    out.features.append_row(row);
    out.timestamps.push_back(ds.timestamps[i]);
    out.power.push_back(ds.power[i]);
  }
  if (out.timestamps.empty()) {
    out.features = Matrix(0, out.feature_names.size());
  }
  return out;
}

FarmDataset normalize_power(const FarmDataset& ds) {
  if (ds.power.empty()) throw std::invalid_argument("empty power series");
  const double peak = *std::max_element(ds.power.begin(), ds.power.end());
  if (!(peak > 0.0)) throw std::invalid_argument("power series of farm " + ds.meta.farm_id + " is all zero");
  FarmDataset out = ds;
  for (double& p : out.power) p /= peak;
  out.meta.power_scale_kw = ds.meta.power_scale_kw.value_or(1.0) * peak;
  return out;
}

Standardizer fit_standardizer(const Matrix& features) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw std::invalid_argument("cannot fit a standardizer on an empty matrix");
  }
  const auto n = static_cast<double>(features.rows());
  Standardizer s;
  s.mean.assign(features.cols(), 0.0);
  s.stddev.assign(features.cols(), 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) s.mean[c] += features(r, c);
  }
  for (auto& m : s.mean) m /= n;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) {
      const double d = features(r, c) - s.mean[c];
      s.stddev[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < features.cols(); ++c) {
    const double sd = std::sqrt(s.stddev[c] / n);
    s.stddev[c] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[c])) ? sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) throw std::invalid_argument("standardizer width mismatch");
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) {
      out(r, c) = (features(r, c) - mean[c]) / stddev[c];
    }
  }
  return out;
}

Matrix Standardizer::invert(const Matrix& standardized) const {
  if (standardized.cols() != mean.size()) throw std::invalid_argument("standardizer width mismatch");
  Matrix out(standardized.rows(), standardized.cols());
  for (std::size_t r = 0; r < standardized.rows(); ++r) {
    for (std::size_t c = 0; c < standardized.cols(); ++c) {
      out(r, c) = standardized(r, c) * stddev[c] + mean[c];
    }
  }
  return out;
}

} // namespace fcu

#include "fcu/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "fcu/textio.hpp"

namespace fcu {

using nlohmann::json;

std::string_view to_string(FacetKind k) {
  switch (k) {
  case FacetKind::coverage_decile: return "coverage_decile";
  case FacetKind::hour_of_day: return "hour_of_day";
  case FacetKind::season: return "season";
  case FacetKind::terrain: return "terrain";
  case FacetKind::model_family: return "model_family";
  }
  return "model_family";
}

FacetKind parse_facet(std::string_view text) {
  if (text == "coverage" || text == "coverage_decile") return FacetKind::coverage_decile;
  if (text == "hour" || text == "hour_of_day") return FacetKind::hour_of_day;
  if (text == "season") return FacetKind::season;
  if (text == "terrain") return FacetKind::terrain;
  if (text == "model" || text == "model_family" || text == "family") return FacetKind::model_family;
  throw std::invalid_argument("unknown facet: " + std::string(text));
}

std::string farm_table_to_json(const FarmTable& farms) {
  json arr = json::array();
  for (const auto& [id, info] : farms) {
    json j = json::parse(farm_meta_to_json(info.meta));
    j["coverage"] = info.coverage;
    arr.push_back(std::move(j));
  }
  return json{{"farms", arr}}.dump(2) + "\n";
}

FarmTable farm_table_from_json(std::string_view text) {
  const json doc = json::parse(text);
  FarmTable table;
  for (const auto& j : doc.at("farms")) {
    FarmInfo info;
    info.meta = farm_meta_from_json(j.dump());
    info.coverage = j.at("coverage").get<double>();
    table[info.meta.farm_id] = std::move(info);
  }
  return table;
}

int season_of(Timestamp t) {
  const unsigned m = month_of(t);
  if (m == 12 || m <= 2) return 1;
  if (m <= 5) return 2;
  if (m <= 8) return 3;
  return 4;
}

std::optional<int> coverage_bin(double coverage) {
  if (coverage < kCoverageFloor) return std::nullopt;
  const int decile = static_cast<int>(std::floor(coverage * 10.0 + 1e-9));
  return std::clamp(decile - 5, 0, 4);
}

namespace {

const FarmInfo& farm_info(const FarmTable& farms, const std::string& id) {
  const auto it = farms.find(id);
  if (it == farms.end()) throw std::invalid_argument("no farm metadata for farm " + id);
  return it->second;
}

int gcd_resolution(const EvaluationDataset& ev, const FarmTable& farms) {
  int step = 0;
  for (const auto& [id, info] : farms) {
    (void)id;
    step = std::gcd(step, info.meta.resolution_hours);
  }
  if (step == 0) step = 1;
  (void)ev;
  return step;
}

} // namespace

bool FacetFilter::matches(const EvaluationRecord& r, const FarmTable& table) const {
  if (family && r.family != *family) return false;
  if (!farms.empty() && std::find(farms.begin(), farms.end(), r.farm_id) == farms.end()) return false;
  if (season && season_of(r.timestamp) != *season) return false;
  if (hour && hour_of_day(r.timestamp) != *hour) return false;
  if (terrain || coverage) {
    const auto& info = farm_info(table, r.farm_id);
    if (terrain && info.meta.terrain != *terrain) return false;
    if (coverage && (info.coverage < coverage->first || info.coverage > coverage->second)) return false;
  }
  return true;
}

std::string FacetFilter::describe() const {
  std::vector<std::string> terms;
  if (terrain) terms.push_back("terrain=" + std::string(to_string(*terrain)));
  if (coverage) terms.push_back("coverage=" + format_double(coverage->first) + "-" + format_double(coverage->second));
  if (family) terms.push_back("family=" + std::string(to_string(*family)));
  for (const auto& f : farms) terms.push_back("farm=" + f);
  if (season) terms.push_back("season=" + std::to_string(*season));
  if (hour) terms.push_back("hour=" + std::to_string(*hour));
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) out += (i ? "," : "") + terms[i];
  return out;
}

FacetFilter parse_filter(std::span<const std::string> terms) {
  FacetFilter f;
  for (const auto& term : terms) {
    const auto eq = term.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("filter term must be key=value: " + term);
    const std::string key = term.substr(0, eq);
    const std::string value = term.substr(eq + 1);
    if (key == "terrain") {
      f.terrain = parse_terrain(value);
    } else if (key == "coverage") {
      const auto dash = value.find('-', 1);
      double lo = 0.0, hi = 0.0;
      if (dash == std::string::npos || !parse_double(value.substr(0, dash), lo) ||
          !parse_double(value.substr(dash + 1), hi) || lo > hi) {
        throw std::invalid_argument("coverage filter must look like 0.9-1.0: " + value);
      }
      f.coverage = std::make_pair(lo, hi);
    } else if (key == "family" || key == "model") {
      f.family = parse_family(value);
    } else if (key == "farm") {
      f.farms.push_back(value);
    } else if (key == "season" || key == "hour") {
      double v = 0.0;
      if (!parse_double(value, v)) throw std::invalid_argument("bad " + key + " filter: " + value);
      (key == "season" ? f.season : f.hour) = static_cast<int>(v);
    } else {
      throw std::invalid_argument("unknown filter key: " + key);
    }
  }
  return f;
}

BinnedRecords bin_records(const EvaluationDataset& ev, const Facet& facet, const FarmTable& farms) {
  BinnedRecords out;
  std::vector<std::string> labels;
  int hour_step = 1;
  switch (facet.kind) {
  case FacetKind::coverage_decile:
    labels = {"50-60%", "60-70%", "70-80%", "80-90%", "90-100%"};
    break;
  case FacetKind::hour_of_day:
    hour_step = gcd_resolution(ev, farms);
    for (int h = 0; h < 24; h += hour_step) labels.push_back(std::to_string(h));
    break;
  case FacetKind::season:
    labels = {"1", "2", "3", "4"};
    break;
  case FacetKind::terrain:
    for (auto t : {Terrain::farmland, Terrain::forest, Terrain::offshore, Terrain::none}) {
      labels.emplace_back(to_string(t));
    }
    break;
  case FacetKind::model_family:
    for (auto f : kAllFamilies) labels.emplace_back(to_string(f));
    break;
  }
  for (auto& l : labels) out.bins.push_back(ErrorSample{l, {}});

  std::set<std::string> low_coverage;
  for (const auto& r : ev.records) {
    if (!facet.filter.matches(r, farms)) {
      ++out.excluded;
      continue;
    }
    std::optional<std::size_t> bin;
    switch (facet.kind) {
    case FacetKind::coverage_decile: {
      const auto b = coverage_bin(farm_info(farms, r.farm_id).coverage);
      if (b) {
        bin = static_cast<std::size_t>(*b);
      } else {
        low_coverage.insert(r.farm_id);
      }
      break;
    }
    case FacetKind::hour_of_day: {
      const int h = hour_of_day(r.timestamp);
      if (h % hour_step == 0) bin = static_cast<std::size_t>(h / hour_step);
      break;
    }
    case FacetKind::season:
      bin = static_cast<std::size_t>(season_of(r.timestamp) - 1);
      break;
    case FacetKind::terrain:
      bin = static_cast<std::size_t>(farm_info(farms, r.farm_id).meta.terrain);
      break;
    case FacetKind::model_family:
      bin = static_cast<std::size_t>(r.family);
      break;
    }
    if (bin) {
      out.bins[*bin].values.push_back(r.squared_error);
    } else {
      ++out.excluded;
    }
  }
  for (const auto& id : low_coverage) {
    out.warnings.push_back("farm " + id + " excluded: coverage below " + format_double(kCoverageFloor));
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BinSummary boxplot_summary(const ErrorSample& sample) {
  if (sample.values.empty()) throw std::invalid_argument("boxplot of empty bin '" + sample.label + "'");
  std::vector<double> v(sample.values);
  std::sort(v.begin(), v.end());
  BinSummary s;
  s.label = sample.label;
  s.n = v.size();
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.max;
  s.whisker_high = s.min;
  for (double x : v) {
    if (x < lo_fence || x > hi_fence) {
      ++s.n_outliers;
      continue;
    }
    s.whisker_low = std::min(s.whisker_low, x);
    s.whisker_high = std::max(s.whisker_high, x);
  }
  s.low_sample = s.n < kLowSampleThreshold;
  return s;
}

AnalysisReport compare_bins(std::vector<ErrorSample> bins, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  AnalysisReport report;
  report.alpha = alpha;
  std::vector<ErrorSample> used;
  for (auto& b : bins) {
    if (b.values.empty()) {
      report.warnings.push_back("bin " + b.label + " is empty and was dropped");
    } else {
      validate(b);
      used.push_back(std::move(b));
    }
  }
  if (used.size() < 2) throw std::invalid_argument("need at least two non-empty bins to compare");

  const std::size_t k = used.size();
  for (const auto& b : used) {
    report.bins.push_back(boxplot_summary(b));
    if (report.bins.back().low_sample) {
      report.warnings.push_back("bin " + b.label + " has only " + std::to_string(b.values.size()) + " samples");
    }
    try {
      report.fits.emplace_back(fit_gamma(b, FitMethod::mle));
    } catch (const std::invalid_argument& e) {
      report.fits.emplace_back(std::nullopt);
      report.warnings.push_back("no gamma fit for bin " + b.label + ": " + e.what());
    }
  }
  report.kld.assign(k, std::vector<std::optional<double>>(k));
  report.kw_pvalues.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) {
        if (report.fits[i]) report.kld[i][j] = 0.0;
        continue;
      }
      if (report.fits[i] && report.fits[j]) report.kld[i][j] = kld_gamma(*report.fits[i], *report.fits[j]);
      if (j > i) {
        const std::vector<double> pair[2] = {used[i].values, used[j].values};
        if (used[i].values.size() + used[j].values.size() >= 3) {
          const auto kw = kruskal_wallis(std::span<const std::vector<double>>(pair, 2), alpha);
          if (kw) {
            report.kw_pvalues[i][j] = kw->p_value;
            report.kw_pvalues[j][i] = kw->p_value;
          }
        }
      }
    }
  }
  std::size_t pooled = 0;
  for (const auto& b : used) pooled += b.values.size();
  if (pooled >= 3) report.global_kw = kruskal_wallis(std::span<const ErrorSample>(used), alpha);
  if (!report.global_kw) report.warnings.push_back("global Kruskal-Wallis undefined (all values tied)");
  return report;
}

AnalysisReport facet_report(const EvaluationDataset& ev, const Facet& facet, const FarmTable& farms, double alpha) {
  if (ev.records.empty()) throw std::invalid_argument("evaluation dataset is empty");
  auto binned = bin_records(ev, facet, farms);
  auto report = compare_bins(std::move(binned.bins), alpha);
  report.facet = std::string(to_string(facet.kind));
  report.filter = facet.filter.describe();
  report.record_count = ev.records.size();
  report.excluded_count = binned.excluded;
  report.warnings.insert(report.warnings.begin(), binned.warnings.begin(), binned.warnings.end());
  return report;
}

AnalysisReport model_comparison_report(const EvaluationDataset& ev, const FacetFilter& filter,
                                       const FarmTable& farms, double alpha) {
  return facet_report(ev, Facet{FacetKind::model_family, filter}, farms, alpha);
}

namespace {

json optional_matrix(const std::vector<std::vector<std::optional<double>>>& m) {
  json rows = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (const auto& v : row) r.push_back(v ? json(*v) : json(nullptr));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string matrix_csv(const AnalysisReport& report, const std::vector<std::vector<std::optional<double>>>& m) {
  std::string out = "bin";
  for (const auto& b : report.bins) out += "," + b.label;
  out += "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += report.bins[i].label;
    for (const auto& v : m[i]) out += "," + (v ? format_double(*v) : std::string());
    out += "\n";
  }
  return out;
}

} // namespace

std::string report_to_json(const AnalysisReport& report) {
  json j;
  j["facet"] = report.facet;
  j["filter"] = report.filter;
  j["alpha"] = report.alpha;
  j["record_count"] = report.record_count;
  j["excluded_count"] = report.excluded_count;
  j["kld_direction"] = "KL(row || col)";
  json bins = json::array();
  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    const auto& b = report.bins[i];
    json jb{{"label", b.label},   {"n", b.n},           {"min", b.min},
            {"q1", b.q1},         {"median", b.median}, {"q3", b.q3},
            {"max", b.max},       {"mean", b.mean},     {"whisker_low", b.whisker_low},
            {"whisker_high", b.whisker_high},           {"n_outliers", b.n_outliers},
            {"low_sample", b.low_sample}};
    if (report.fits[i]) {
      jb["gamma_fit"] = {{"shape", report.fits[i]->shape},
                         {"scale", report.fits[i]->scale},
                         {"n", report.fits[i]->n},
                         {"method", std::string(to_string(report.fits[i]->method))}};
    } else {
      jb["gamma_fit"] = nullptr;
    }
    bins.push_back(std::move(jb));
  }
  j["bins"] = bins;
  j["kld"] = optional_matrix(report.kld);
  j["kw_pairwise_p"] = optional_matrix(report.kw_pvalues);
  if (report.global_kw) {
    j["kw_global"] = {{"h", report.global_kw->h},
                      {"dof", report.global_kw->dof},
                      {"p_value", report.global_kw->p_value},
                      {"tie_correction", report.global_kw->tie_correction},
                      {"significant", report.global_kw->significant}};
  } else {
    j["kw_global"] = nullptr;
  }
  std::size_t significant_pairs = 0, pairs = 0;
  for (std::size_t i = 0; i < report.kw_pvalues.size(); ++i) {
    for (std::size_t k = i + 1; k < report.kw_pvalues.size(); ++k) {
      if (!report.kw_pvalues[i][k]) continue;
      ++pairs;
      if (*report.kw_pvalues[i][k] < report.alpha) ++significant_pairs;
    }
  }
  j["kw_pairs_tested"] = pairs;
  j["kw_pairs_significant"] = significant_pairs;
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

std::string kld_matrix_csv(const AnalysisReport& report) { return matrix_csv(report, report.kld); }

std::string kw_pvalue_matrix_csv(const AnalysisReport& report) { return matrix_csv(report, report.kw_pvalues); }

std::string boxplot_csv(const AnalysisReport& report) {
  std::string out = "label,n,min,whisker_low,q1,median,q3,whisker_high,max,mean,n_outliers,low_sample\n";
  for (const auto& b : report.bins) {
    out += b.label + "," + std::to_string(b.n) + "," + format_double(b.min) + "," + format_double(b.whisker_low) +
           "," + format_double(b.q1) + "," + format_double(b.median) + "," + format_double(b.q3) + "," +
           format_double(b.whisker_high) + "," + format_double(b.max) + "," + format_double(b.mean) + "," +
           std::to_string(b.n_outliers) + "," + (b.low_sample ? "1" : "0") + "\n";
  }
  return out;
}

} // namespace fcu

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fcu/dataset.hpp"
#include "fcu/pipeline.hpp"
#include "fcu/stats.hpp"

namespace fcu {

enum class FacetKind { coverage_decile, hour_of_day, season, terrain, model_family };

std::string_view to_string(FacetKind k);
/// Accepts the enum spelling or the short forms coverage, hour, season, terrain, model.
FacetKind parse_facet(std::string_view text);

/// Farm-level facts the evaluation records do not carry.
struct FarmInfo {
  FarmMeta meta;
  double coverage = 0.0;
};
using FarmTable = std::map<std::string, FarmInfo>;

std::string farm_table_to_json(const FarmTable& farms);
FarmTable farm_table_from_json(std::string_view text);

/// Record predicate; unset fields match everything.
struct FacetFilter {
  std::optional<Terrain> terrain;
  /// Closed interval on farm coverage.
  std::optional<std::pair<double, double>> coverage;
  std::optional<ModelFamily> family;
  std::vector<std::string> farms;
  std::optional<int> season;
  std::optional<int> hour;

  bool needs_farm_table() const { return terrain.has_value() || coverage.has_value(); }
  bool matches(const EvaluationRecord& r, const FarmTable& farms) const;
  std::string describe() const;
};

/// Parses `key=value` terms: terrain=farmland, coverage=0.9-1.0, family=GBRT, farm=<id>,
/// season=3, hour=12.
FacetFilter parse_filter(std::span<const std::string> terms);

struct Facet {
  FacetKind kind = FacetKind::model_family;
  FacetFilter filter;
};

/// Meteorological quarter: 1 = Dec-Feb, 2 = Mar-May, 3 = Jun-Aug, 4 = Sep-Nov.
int season_of(Timestamp t);

/// Lower edge of the first coverage bin; farms between this and 0.5 fold into bin 0.
inline constexpr double kCoverageFloor = 0.49;

/// Bin index 0..4 for [50,60) ... [90,100]; nullopt below kCoverageFloor.
std::optional<int> coverage_bin(double coverage);

struct BinnedRecords {
  /// Every bin of the facet in canonical order; some may be empty.
  std::vector<ErrorSample> bins;
  /// Filtered out or outside every bin.
  std::size_t excluded = 0;
  std::vector<std::string> warnings;
};

/// Throws std::invalid_argument when the facet needs farm metadata that is missing.
BinnedRecords bin_records(const EvaluationDataset& ev, const Facet& facet, const FarmTable& farms);

struct BinSummary {
  std::string label;
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  /// Most extreme data points within 1.5 IQR of the quartiles.
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::size_t n_outliers = 0;
  bool low_sample = false;
};

/// Bins with fewer samples than this are flagged, not dropped.
inline constexpr std::size_t kLowSampleThreshold = 30;

/// Quartiles by linear interpolation between order statistics.
BinSummary boxplot_summary(const ErrorSample& sample);

double quantile_sorted(std::span<const double> sorted, double p);

struct AnalysisReport {
  std::string facet;
  std::string filter;
  double alpha = 0.05;
  std::size_t record_count = 0;
  std::size_t excluded_count = 0;
  std::vector<BinSummary> bins;
  std::vector<std::optional<GammaFit>> fits;
  /// kld[i][j] = KL(fit_i || fit_j); the upper triangle mirrors the usual triangular tables.
  std::vector<std::vector<std::optional<double>>> kld;
  std::optional<KwResult> global_kw;
  /// Symmetric pairwise Kruskal-Wallis p-values; the diagonal is empty.
  std::vector<std::vector<std::optional<double>>> kw_pvalues;
  std::vector<std::string> warnings;
};

/// Gamma fit per bin, pairwise KLD, global and pairwise Kruskal-Wallis on given samples.
/// Needs at least two non-empty bins; empty bins are dropped with a warning.
AnalysisReport compare_bins(std::vector<ErrorSample> bins, double alpha);

AnalysisReport facet_report(const EvaluationDataset& ev, const Facet& facet, const FarmTable& farms,
                            double alpha = 0.05);

/// Bins are model families under the given filter.
AnalysisReport model_comparison_report(const EvaluationDataset& ev, const FacetFilter& filter,
                                       const FarmTable& farms, double alpha = 0.05);

std::string report_to_json(const AnalysisReport& report);
std::string kld_matrix_csv(const AnalysisReport& report);
std::string kw_pvalue_matrix_csv(const AnalysisReport& report);
std::string boxplot_csv(const AnalysisReport& report);

} // namespace fcu

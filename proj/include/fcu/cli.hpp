#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fcu/analysis.hpp"
#include "fcu/pipeline.hpp"
#include "fcu/synth.hpp"

namespace fcu {

struct RunConfig {
  /// Directory of `<farm>.csv` + `<farm>.json` pairs; ignored when synth is set.
  std::filesystem::path input_dir;
  /// Generate farms in memory instead of reading input_dir.
  std::optional<SynthConfig> synth;
  /// Restrict to these farm ids; empty means every farm found.
  std::vector<std::string> farms;
  std::vector<ModelFamily> families{kAllFamilies.begin(), kAllFamilies.end()};
  HyperGrid grid = HyperGrid::defaults();
  /// 0 picks 6 months for hourly farms and 4 months for coarser ones.
  int test_window_months = 0;
  double val_fraction = 0.2;
  double alpha = 0.05;
  /// Required; there is no clock-based default.
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir;
  int jobs = 1;
  /// Empty means the synthetic wind and PV shift targets.
  std::vector<std::string> shift_features;
  /// 0 picks 2 h for hourly farms and one step otherwise.
  int shift_hours = 0;
  OutlierPolicy outliers;
  TrainingSettings training;

  void validate() const;
};

/// Missing keys keep their defaults.
RunConfig run_config_from_json(std::string_view json_text);
std::string run_config_to_json(const RunConfig& cfg);

/// Writes every synthetic farm into out_dir and prints a coverage table.
std::vector<SynthSummaryRow> cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                                       std::ostream& log);

/// Loads farm files sorted by id. Throws naming the farm when its metadata file is missing.
std::vector<FarmDataset> load_farm_directory(const std::filesystem::path& dir,
                                             const std::vector<std::string>& only = {});

struct RunSummary {
  bool resumed = false;
  std::size_t records = 0;
  std::size_t jobs = 0;
  std::vector<std::string> warnings;
};

/// Writes evaluation.csv, farms.json, models/, grid/, run_config.json and the completion
/// marker. With resume, a marker matching the configuration skips all work.
RunSummary cmd_run(const RunConfig& cfg, bool resume, std::ostream& log);

struct AnalyzeOptions {
  std::filesystem::path evaluation_csv;
  std::filesystem::path farms_json;
  FacetKind facet = FacetKind::coverage_decile;
  std::vector<std::string> filter_terms;
  double alpha = 0.05;
  std::filesystem::path out_dir;
};

/// Writes `<facet>_report.json`, `<facet>_kld.csv`, `<facet>_kw_pvalues.csv`, `<facet>_boxplot.csv`.
AnalysisReport cmd_analyze(const AnalyzeOptions& opts, std::ostream& log);

/// Every facet that has at least two non-empty bins, plus per farm/family metrics.
std::vector<std::string> cmd_report(const AnalyzeOptions& opts, std::ostream& log);

/// CLI entry point; returns the process exit code.
int run_cli(int argc, char** argv);

} // namespace fcu

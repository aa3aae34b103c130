#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcu/dataset.hpp"
#include "fcu/predictor.hpp"

namespace fcu {

/// One run of the rolling-window design: a contiguous test window plus a seeded
/// train/validation split of everything outside it. Indices are dataset rows, ascending.
struct RollingSplit {
  int run_index = 0;
  Timestamp test_start{};
  Timestamp test_end{};
  std::vector<std::size_t> test;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Runs = ceil(period / test window); windows are consecutive calendar-month blocks from
/// period_start, the last one truncated at period_end.
std::vector<RollingSplit> make_rolling_splits(const FarmDataset& ds, int test_window_months,
                                              double val_fraction, std::uint64_t seed);

struct HyperGrid {
  std::vector<double> lasso_lambda;
  std::vector<double> svr_C;
  std::vector<double> svr_epsilon;
  std::vector<double> svr_gamma;
  std::vector<std::vector<int>> mlp_hidden_sizes;
  std::vector<double> mlp_learning_rate;
  std::vector<int> gbrt_n_trees;
  std::vector<int> gbrt_max_depth;
  std::vector<double> gbrt_learning_rate;

  /// Artifact defaults; none of these values come from measured tuning.
  static HyperGrid defaults();
  /// Cartesian product in declaration order, first-listed dimension outermost.
  std::vector<Hyperparams> candidates(ModelFamily family) const;
  void validate(std::span<const ModelFamily> families) const;
};

/// Missing keys keep their default lists.
HyperGrid hypergrid_from_json(std::string_view json_text);
std::string hypergrid_to_json(const HyperGrid& grid);

struct GridScore {
  Hyperparams params;
  /// Absent when training failed or the score was not finite.
  std::optional<double> validation_mse;
  std::string note;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  Hyperparams best;
  double best_score = 0.0;
  std::vector<GridScore> table;
};

/// Picks the candidate with the lowest validation MSE of clipped predictions; ties keep the
/// earliest candidate. Every candidate is trained with the same seed.
GridSearchResult grid_search(ModelFamily family, const HyperGrid& grid, const Matrix& X_train,
                             std::span<const double> y_train, const Matrix& X_val,
                             std::span<const double> y_val, const TrainingSettings& settings,
                             std::uint64_t seed);

std::string grid_table_to_csv(const GridSearchResult& result);

inline double clip_unit(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

struct EvaluationRecord {
  Timestamp timestamp{};
  std::string farm_id;
  ModelFamily family = ModelFamily::lasso;
  int run_index = 0;
  double actual = 0.0;
  double predicted = 0.0;
  double squared_error = 0.0;
};

/// Out-of-sample predictions over the full recorded period, one per (timestamp, farm, family).
struct EvaluationDataset {
  std::vector<EvaluationRecord> records;

  /// Orders by (farm, family, run, timestamp).
  void sort();
  /// Throws std::invalid_argument on duplicates or inconsistent squared errors.
  void validate() const;
};

/// Clips predictions to [0, 1] and computes squared errors for the test rows of one run.
std::vector<EvaluationRecord> make_records(const FarmDataset& ds, ModelFamily family, int run_index,
                                           std::span<const std::size_t> test_rows,
                                           std::span<const double> raw_predictions);

/// Header: timestamp,farm_id,family,run_index,actual,predicted,squared_error
std::string evaluation_to_csv(const EvaluationDataset& ev);
EvaluationDataset evaluation_from_csv(std::string_view text);

struct PreprocessConfig {
  OutlierPolicy outliers;
  std::vector<std::string> shift_features;
  int shift_hours = 0;
};

struct PreparedFarm {
  FarmDataset data;
  /// Measured after outlier filtering, before boundary rows are lost to shifting.
  double coverage = 0.0;
};

/// filter_outliers -> compute_data_coverage -> shift_features -> normalize_power.
PreparedFarm prepare_farm(const FarmDataset& raw, const PreprocessConfig& config);

struct ExperimentConfig {
  int test_window_months = 6;
  double val_fraction = 0.2;
  TrainingSettings training;
  /// Worker threads for the farm x family x run jobs.
  int jobs = 1;
};

/// Row sets each stage of a job touched, kept so leakage can be checked after the fact.
struct JobAudit {
  std::vector<std::size_t> standardizer_rows;
  std::vector<std::size_t> grid_train_rows;
  std::vector<std::size_t> grid_validation_rows;
  std::vector<std::size_t> final_train_rows;
  std::vector<std::size_t> test_rows;
};

struct JobResult {
  std::string farm_id;
  ModelFamily family = ModelFamily::lasso;
  int run_index = 0;
  std::optional<GridSearchResult> grid;
  std::optional<Predictor> model;
  JobAudit audit;
  std::vector<EvaluationRecord> records;
  std::string error;
};

struct ExperimentResult {
  EvaluationDataset evaluation;
  /// Ordered by (farm, family, run).
  std::vector<JobResult> jobs;
  std::vector<std::string> warnings;
  std::vector<std::string> failed_farms;
};

/// For each farm x family x run: standardizer fit on the training rows, grid search on the
/// validation rows, best candidate retrained on train + validation, test window predicted.
/// Farms that fail are reported as warnings; throws only if no farm succeeds.
ExperimentResult run_experiment(std::span<const FarmDataset> farms, std::span<const ModelFamily> families,
                                const HyperGrid& grid, const ExperimentConfig& config, std::uint64_t seed);

/// Stable 64-bit FNV-1a, used to derive per-farm seeds.
std::uint64_t stable_hash(std::string_view text);

} // namespace fcu

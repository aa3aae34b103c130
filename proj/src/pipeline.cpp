#include "fcu/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "fcu/textio.hpp"

namespace fcu {

using nlohmann::json;

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<RollingSplit> make_rolling_splits(const FarmDataset& ds, int test_window_months,
                                              double val_fraction, std::uint64_t seed) {
  if (test_window_months < 1) throw std::invalid_argument("test window must be at least one month");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must lie in (0, 1)");
  const auto start = ds.meta.period_start;
  const auto end = ds.meta.period_end;
  if (end < add_months(start, test_window_months)) {
    throw std::invalid_argument("recorded period of farm " + ds.meta.farm_id + " is shorter than one test window");
  }

  std::vector<RollingSplit> splits;
  for (int r = 0;; ++r) {
    const auto w_start = add_months(start, r * test_window_months);
    if (!(w_start < end)) break;
    auto w_end = add_months(start, (r + 1) * test_window_months);
    if (end < w_end) w_end = end;

    RollingSplit split;
    split.run_index = r;
    split.test_start = w_start;
    split.test_end = w_end;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto t = ds.timestamps[i];
      if (!(t < w_start) && t < w_end) {
        split.test.push_back(i);
      } else {
        rest.push_back(i);
      }
    }
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    std::shuffle(rest.begin(), rest.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(rest.size())));
    split.validation.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.train.begin(), split.train.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

HyperGrid HyperGrid::defaults() {
  HyperGrid g;
  g.lasso_lambda = {1e-4, 1e-3, 1e-2, 1e-1};
  g.svr_C = {1.0, 10.0};
  g.svr_epsilon = {0.01, 0.05};
  g.svr_gamma = {0.1, 1.0};
  g.mlp_hidden_sizes = {{16}, {32, 16}};
  g.mlp_learning_rate = {1e-3, 1e-2};
  g.gbrt_n_trees = {100, 300};
  g.gbrt_max_depth = {3, 5};
  g.gbrt_learning_rate = {0.05, 0.1};
  return g;
}

std::vector<Hyperparams> HyperGrid::candidates(ModelFamily family) const {
  std::vector<Hyperparams> out;
  switch (family) {
  case ModelFamily::lasso:
    for (double l : lasso_lambda) out.emplace_back(LassoParams{l});
    break;
  case ModelFamily::svr:
    for (double c : svr_C)
      for (double e : svr_epsilon)
        for (double g : svr_gamma) out.emplace_back(SvrParams{c, e, g});
    break;
  case ModelFamily::mlp:
    for (const auto& h : mlp_hidden_sizes)
      for (double lr : mlp_learning_rate) out.emplace_back(MlpParams{h, lr});
    break;
  case ModelFamily::gbrt:
    for (int n : gbrt_n_trees)
      for (int d : gbrt_max_depth)
        for (double lr : gbrt_learning_rate) out.emplace_back(GbrtParams{n, d, lr});
    break;
  }
  return out;
}

void HyperGrid::validate(std::span<const ModelFamily> families) const {
  for (auto f : families) {
    if (candidates(f).empty()) {
      throw std::invalid_argument("hyperparameter grid for " + std::string(to_string(f)) + " is empty");
    }
  }
}

HyperGrid hypergrid_from_json(std::string_view json_text) {
  const json j = json::parse(json_text);
  HyperGrid g = HyperGrid::defaults();
  auto read = [&](const char* family, const char* key, auto& target) {
    if (j.contains(family) && j[family].contains(key)) {
      target = j[family][key].get<std::decay_t<decltype(target)>>();
    }
  };
  read("lasso", "lambda", g.lasso_lambda);
  read("svr", "C", g.svr_C);
  read("svr", "epsilon", g.svr_epsilon);
  read("svr", "gamma", g.svr_gamma);
  read("mlp", "hidden_sizes", g.mlp_hidden_sizes);
  read("mlp", "learning_rate", g.mlp_learning_rate);
  read("gbrt", "n_trees", g.gbrt_n_trees);
  read("gbrt", "max_depth", g.gbrt_max_depth);
  read("gbrt", "learning_rate", g.gbrt_learning_rate);
  return g;
}

std::string hypergrid_to_json(const HyperGrid& g) {
  json j;
  j["lasso"] = {{"lambda", g.lasso_lambda}};
  j["svr"] = {{"C", g.svr_C}, {"epsilon", g.svr_epsilon}, {"gamma", g.svr_gamma}};
  j["mlp"] = {{"hidden_sizes", g.mlp_hidden_sizes}, {"learning_rate", g.mlp_learning_rate}};
  j["gbrt"] = {{"n_trees", g.gbrt_n_trees}, {"max_depth", g.gbrt_max_depth}, {"learning_rate", g.gbrt_learning_rate}};
  return j.dump(2) + "\n";
}

GridSearchResult grid_search(ModelFamily family, const HyperGrid& grid, const Matrix& X_train,
                             std::span<const double> y_train, const Matrix& X_val,
                             std::span<const double> y_val, const TrainingSettings& settings,
                             std::uint64_t seed) {
  if (X_val.rows() == 0) throw std::invalid_argument("grid search needs validation samples");
  GridSearchResult result;
  std::optional<std::size_t> best;
  const auto candidates = grid.candidates(family);
  // Boosting is sequential, so a shorter ensemble is a prefix of a longer one with the same
  // depth and rate; each (depth, rate) pair is trained once at its largest tree count.
  std::map<std::pair<int, double>, GbrtModel> boosted;
  auto fit_candidate = [&](const Hyperparams& params) -> Predictor {
    const auto* g = std::get_if<GbrtParams>(&params);
    if (!g || g->n_trees < 1) return train_model(params, X_train, y_train, settings, seed);
    const auto key = std::make_pair(g->max_depth, g->learning_rate);
    auto it = boosted.find(key);
    if (it == boosted.end()) {
      GbrtParams longest = *g;
      for (const auto& c : candidates) {
        const auto& o = std::get<GbrtParams>(c);
        if (o.max_depth == g->max_depth && o.learning_rate == g->learning_rate) {
          longest.n_trees = std::max(longest.n_trees, o.n_trees);
        }
      }
      auto full = train_model(longest, X_train, y_train, settings, seed);
      it = boosted.emplace(key, std::get<GbrtModel>(full.model())).first;
    }
    GbrtModel prefix = it->second;
    prefix.trees.resize(static_cast<std::size_t>(g->n_trees));
    return Predictor(std::move(prefix), TrainingInfo{describe(params), g->n_trees, true, 0.0});
  };
  for (auto& params : candidates) {
    GridScore score{params, std::nullopt, {}};
    try {
      const auto model = fit_candidate(params);
      const auto pred = model.predict(X_val);
      double sse = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = y_val[i] - clip_unit(pred[i]);
        sse += e * e;
      }
      const double mse = sse / static_cast<double>(pred.size());
      if (std::isfinite(mse) && std::all_of(pred.begin(), pred.end(), [](double v) { return std::isfinite(v); })) {
        score.validation_mse = mse;
      } else {
        score.note = "non-finite validation score";
      }
    } catch (const std::exception& e) {
      score.note = e.what();
    }
    if (score.validation_mse && (!best || *score.validation_mse < *result.table[*best].validation_mse)) {
      best = result.table.size();
    }
    result.table.push_back(std::move(score));
  }
  if (!best) {
    throw std::runtime_error("every " + std::string(to_string(family)) + " grid candidate failed");
  }
  result.best_index = *best;
  result.best = result.table[*best].params;
  result.best_score = *result.table[*best].validation_mse;
  return result;
}

std::string grid_table_to_csv(const GridSearchResult& result) {
  std::string out = "candidate,hyperparameters,validation_mse,selected,note\n";
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const auto& row = result.table[i];
    std::string note = row.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    out += std::to_string(i) + "," + describe(row.params) + "," +
           (row.validation_mse ? format_double(*row.validation_mse) : std::string("nan")) + "," +
           (i == result.best_index ? "1" : "0") + "," + note + "\n";
  }
  return out;
}

void EvaluationDataset::sort() {
  std::sort(records.begin(), records.end(), [](const EvaluationRecord& a, const EvaluationRecord& b) {
    return std::tie(a.farm_id, a.family, a.run_index, a.timestamp) <
           std::tie(b.farm_id, b.family, b.run_index, b.timestamp);
  });
}

void EvaluationDataset::validate() const {
  std::set<std::tuple<std::string, ModelFamily, std::int64_t>> seen;
  for (const auto& r : records) {
    if (!seen.emplace(r.farm_id, r.family, seconds_since_epoch(r.timestamp)).second) {
      throw std::invalid_argument("duplicate evaluation record for farm " + r.farm_id + " at " +
                                  format_timestamp(r.timestamp));
    }
    const double e = r.actual - r.predicted;
    if (r.squared_error != e * e) {
      throw std::invalid_argument("inconsistent squared error for farm " + r.farm_id);
    }
  }
}

std::vector<EvaluationRecord> make_records(const FarmDataset& ds, ModelFamily family, int run_index,
                                           std::span<const std::size_t> test_rows,
                                           std::span<const double> raw_predictions) {
  if (test_rows.size() != raw_predictions.size()) throw std::invalid_argument("prediction count mismatch");
  std::vector<EvaluationRecord> out;
  out.reserve(test_rows.size());
  for (std::size_t k = 0; k < test_rows.size(); ++k) {
    const auto row = test_rows[k];
    EvaluationRecord r;
    r.timestamp = ds.timestamps[row];
    r.farm_id = ds.meta.farm_id;
    r.family = family;
    r.run_index = run_index;
    r.actual = ds.power[row];
    r.predicted = clip_unit(raw_predictions[k]);
    const double e = r.actual - r.predicted;
    r.squared_error = e * e;
    out.push_back(std::move(r));
  }
  return out;
}

std::string evaluation_to_csv(const EvaluationDataset& ev) {
  std::string out = "timestamp,farm_id,family,run_index,actual,predicted,squared_error\n";
  for (const auto& r : ev.records) {
    out += format_timestamp(r.timestamp);
    out += ',';
    out += r.farm_id;
    out += ',';
    out += to_string(r.family);
    out += ',';
    out += std::to_string(r.run_index);
    out += ',';
    out += format_double(r.actual);
    out += ',';
    out += format_double(r.predicted);
    out += ',';
    out += format_double(r.squared_error);
    out += '\n';
  }
  return out;
}

EvaluationDataset evaluation_from_csv(std::string_view text) {
  EvaluationDataset ev;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (line_no == 1) {
      if (f.size() != 7 || f[0] != "timestamp" || f[6] != "squared_error") {
        throw std::runtime_error("evaluation CSV has an unexpected header");
      }
      continue;
    }
    if (f.size() != 7) throw std::runtime_error("evaluation CSV line " + std::to_string(line_no) + " is malformed");
    EvaluationRecord r;
    r.timestamp = parse_timestamp(f[0]);
    r.farm_id = std::string(f[1]);
    r.family = parse_family(f[2]);
    double run = 0.0;
    if (!parse_double(f[3], run) || !parse_double(f[4], r.actual) || !parse_double(f[5], r.predicted)) {
      throw std::runtime_error("evaluation CSV line " + std::to_string(line_no) + " has a bad number");
    }
    r.run_index = static_cast<int>(run);
    const double e = r.actual - r.predicted;
    r.squared_error = e * e;
    ev.records.push_back(std::move(r));
  }
  return ev;
}

PreparedFarm prepare_farm(const FarmDataset& raw, const PreprocessConfig& config) {
  PreparedFarm out;
  auto filtered = filter_outliers(raw, config.outliers);
  out.coverage = compute_data_coverage(filtered);
  std::vector<std::string> present;
  for (const auto& name : config.shift_features) {
    if (filtered.feature_index(name)) present.push_back(name);
  }
  auto shifted = config.shift_hours > 0 ? shift_features(filtered, present, config.shift_hours) : filtered;
  if (shifted.size() == 0) throw std::runtime_error("no rows left after shifting farm " + raw.meta.farm_id);
  out.data = normalize_power(shifted);
  return out;
}

namespace {

JobResult run_job(const FarmDataset& ds, const RollingSplit& split, ModelFamily family, const HyperGrid& grid,
                  const ExperimentConfig& config, std::uint64_t seed) {
  JobResult job;
  job.farm_id = ds.meta.farm_id;
  job.family = family;
  job.run_index = split.run_index;
  job.audit.test_rows = split.test;
  if (split.test.empty()) return job;
  if (split.train.size() < 2 || split.validation.empty()) {
    throw std::runtime_error("run " + std::to_string(split.run_index) + " of farm " + ds.meta.farm_id +
                             " has too few non-test samples");
  }

  const Matrix X_train_raw = ds.features.select_rows(split.train);
  const Standardizer scaler = fit_standardizer(X_train_raw);
  job.audit.standardizer_rows = split.train;

  const Matrix X_train = scaler.apply(X_train_raw);
  const Matrix X_val = scaler.apply(ds.features.select_rows(split.validation));
  const auto y_train = select(std::span<const double>(ds.power), std::span<const std::size_t>(split.train));
  const auto y_val = select(std::span<const double>(ds.power), std::span<const std::size_t>(split.validation));
  job.grid = grid_search(family, grid, X_train, y_train, X_val, y_val, config.training, seed);
  job.audit.grid_train_rows = split.train;
  job.audit.grid_validation_rows = split.validation;

  std::vector<std::size_t> final_rows = split.train;
  final_rows.insert(final_rows.end(), split.validation.begin(), split.validation.end());
  std::sort(final_rows.begin(), final_rows.end());
  const Matrix X_final = scaler.apply(ds.features.select_rows(final_rows));
  const auto y_final = select(std::span<const double>(ds.power), std::span<const std::size_t>(final_rows));
  job.model = train_model(job.grid->best, X_final, y_final, config.training, seed);
  job.audit.final_train_rows = std::move(final_rows);

  const Matrix X_test = scaler.apply(ds.features.select_rows(split.test));
  const auto raw = job.model->predict(X_test);
  job.records = make_records(ds, family, split.run_index, split.test, raw);
  return job;
}

} // namespace

ExperimentResult run_experiment(std::span<const FarmDataset> farms, std::span<const ModelFamily> families,
                                const HyperGrid& grid, const ExperimentConfig& config, std::uint64_t seed) {
  if (farms.empty()) throw std::invalid_argument("no farms to run");
  if (families.empty()) throw std::invalid_argument("no model families selected");
  grid.validate(families);

  ExperimentResult result;
  struct Task {
    std::size_t farm;
    ModelFamily family;
    std::size_t split;
    std::uint64_t seed;
  };
  std::vector<std::vector<RollingSplit>> splits(farms.size());
  std::vector<char> farm_failed(farms.size(), 0);
  std::vector<std::string> farm_error(farms.size());
  std::vector<Task> tasks;
  for (std::size_t f = 0; f < farms.size(); ++f) {
    const auto farm_seed = mix_seed(seed, stable_hash(farms[f].meta.farm_id));
    try {
      farms[f].validate();
      splits[f] = make_rolling_splits(farms[f], config.test_window_months, config.val_fraction, farm_seed);
    } catch (const std::exception& e) {
      farm_failed[f] = 1;
      farm_error[f] = e.what();
      continue;
    }
    for (auto family : families) {
      for (std::size_t s = 0; s < splits[f].size(); ++s) {
        const auto job_seed = mix_seed(farm_seed, 16 * static_cast<std::uint64_t>(family) + s + 1);
        tasks.push_back({f, family, s, job_seed});
      }
    }
  }

  std::vector<JobResult> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const auto& t = tasks[k];
      const auto& ds = farms[t.farm];
      try {
        slots[k] = run_job(ds, splits[t.farm][t.split], t.family, grid, config, t.seed);
      } catch (const std::exception& e) {
        slots[k].farm_id = ds.meta.farm_id;
        slots[k].family = t.family;
        slots[k].run_index = static_cast<int>(t.split);
        slots[k].error = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (!slots[k].error.empty() && !farm_failed[tasks[k].farm]) {
      farm_failed[tasks[k].farm] = 1;
      farm_error[tasks[k].farm] = std::string(to_string(slots[k].family)) + " run " +
                                  std::to_string(slots[k].run_index) + ": " + slots[k].error;
    }
  }
  for (std::size_t f = 0; f < farms.size(); ++f) {
    if (farm_failed[f]) {
      result.failed_farms.push_back(farms[f].meta.farm_id);
      result.warnings.push_back("farm " + farms[f].meta.farm_id + " skipped: " + farm_error[f]);
    }
  }
  if (result.failed_farms.size() == farms.size()) {
    throw std::runtime_error("experiment failed for every farm; first error: " + farm_error.front());
  }

  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (farm_failed[tasks[k].farm]) continue;
    auto& job = slots[k];
    result.evaluation.records.insert(result.evaluation.records.end(), job.records.begin(), job.records.end());
    result.jobs.push_back(std::move(job));
  }
  std::sort(result.jobs.begin(), result.jobs.end(), [](const JobResult& a, const JobResult& b) {
    return std::tie(a.farm_id, a.family, a.run_index) < std::tie(b.farm_id, b.family, b.run_index);
  });
  result.evaluation.sort();
  return result;
}

} // namespace fcu

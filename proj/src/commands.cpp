#include "fcu/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcu/textio.hpp"

namespace fcu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMarkerName = "run_complete.json";

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

json training_to_json(const TrainingSettings& t) {
  return {{"lasso_tol", t.lasso_tol},
          {"lasso_max_iter", t.lasso_max_iter},
          {"svr_tol", t.svr_tol},
          {"svr_max_sweeps", t.svr_max_sweeps},
          {"svr_max_samples", t.svr_max_samples},
          {"mlp_activation", std::string(to_string(t.mlp_activation))},
          {"mlp_epochs", t.mlp_epochs},
          {"mlp_batch_size", t.mlp_batch_size},
          {"mlp_momentum", t.mlp_momentum},
          {"gbrt_min_leaf", t.gbrt_min_leaf}};
}

TrainingSettings training_from_json(const json& j) {
  TrainingSettings t;
  t.lasso_tol = j.value("lasso_tol", t.lasso_tol);
  t.lasso_max_iter = j.value("lasso_max_iter", t.lasso_max_iter);
  t.svr_tol = j.value("svr_tol", t.svr_tol);
  t.svr_max_sweeps = j.value("svr_max_sweeps", t.svr_max_sweeps);
  t.svr_max_samples = j.value("svr_max_samples", t.svr_max_samples);
  if (j.contains("mlp_activation")) t.mlp_activation = parse_activation(j.at("mlp_activation").get<std::string>());
  t.mlp_epochs = j.value("mlp_epochs", t.mlp_epochs);
  t.mlp_batch_size = j.value("mlp_batch_size", t.mlp_batch_size);
  t.mlp_momentum = j.value("mlp_momentum", t.mlp_momentum);
  t.gbrt_min_leaf = j.value("gbrt_min_leaf", t.gbrt_min_leaf);
  return t;
}

std::vector<ModelFamily> parse_family_list(const std::vector<std::string>& names) {
  std::vector<ModelFamily> out;
  for (const auto& n : names) {
    const auto f = parse_family(n);
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string artifact_stem(const JobResult& job) {
  return job.farm_id + "_" + std::string(to_string(job.family)) + "_run" + std::to_string(job.run_index);
}

// Marker fingerprint: everything that changes results, so the worker count is left out.
std::string fingerprint(const RunConfig& cfg) {
  RunConfig copy = cfg;
  copy.jobs = 1;
  return run_config_to_json(copy);
}

FarmTable load_farm_table(const fs::path& path) { return farm_table_from_json(read_file(path)); }

} // namespace

void RunConfig::validate() const {
  if (!seed) throw std::invalid_argument("a seed is required (config, FCU_SEED or --seed)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (out_dir.empty()) throw std::invalid_argument("an output directory is required");
  if (!synth && input_dir.empty()) throw std::invalid_argument("an input directory or a synth config is required");
  if (synth) synth->validate();
  if (families.empty()) throw std::invalid_argument("no model families selected");
  if (test_window_months < 0) throw std::invalid_argument("test_window_months must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must lie in (0, 1)");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  if (shift_hours < 0) throw std::invalid_argument("shift_hours must be >= 0");
  outliers.validate();
  grid.validate(families);
}

RunConfig run_config_from_json(std::string_view json_text) {
  const json j = json::parse(json_text);
  RunConfig c;
  if (j.contains("input_dir")) c.input_dir = j.at("input_dir").get<std::string>();
  if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth").dump());
  c.farms = j.value("farms", c.farms);
  if (j.contains("families")) c.families = parse_family_list(j.at("families").get<std::vector<std::string>>());
  if (j.contains("grid")) c.grid = hypergrid_from_json(j.at("grid").dump());
  c.test_window_months = j.value("test_window_months", c.test_window_months);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.alpha = j.value("alpha", c.alpha);
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  c.jobs = j.value("jobs", c.jobs);
  c.shift_features = j.value("shift_features", c.shift_features);
  c.shift_hours = j.value("shift_hours", c.shift_hours);
  if (j.contains("outliers")) {
    const auto& o = j.at("outliers");
    c.outliers.max_constant_run = o.value("max_constant_run", c.outliers.max_constant_run);
    c.outliers.allow_negative = o.value("allow_negative", c.outliers.allow_negative);
    c.outliers.max_power_factor = o.value("max_power_factor", c.outliers.max_power_factor);
    c.outliers.reference_features = o.value("reference_features", c.outliers.reference_features);
  }
  if (j.contains("training")) c.training = training_from_json(j.at("training"));
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["input_dir"] = c.input_dir.string();
  if (c.synth) j["synth"] = json::parse(synth_config_to_json(*c.synth));
  j["farms"] = c.farms;
  std::vector<std::string> fams;
  for (auto f : c.families) fams.emplace_back(to_string(f));
  j["families"] = fams;
  j["grid"] = json::parse(hypergrid_to_json(c.grid));
  j["test_window_months"] = c.test_window_months;
  j["val_fraction"] = c.val_fraction;
  j["alpha"] = c.alpha;
  if (c.seed) j["seed"] = *c.seed;
  j["out_dir"] = c.out_dir.string();
  j["jobs"] = c.jobs;
  j["shift_features"] = c.shift_features;
  j["shift_hours"] = c.shift_hours;
  j["outliers"] = {{"max_constant_run", c.outliers.max_constant_run},
                   {"allow_negative", c.outliers.allow_negative},
                   {"max_power_factor", c.outliers.max_power_factor},
                   {"reference_features", c.outliers.reference_features}};
  j["training"] = training_to_json(c.training);
  return j.dump(2) + "\n";
}

std::vector<SynthSummaryRow> cmd_synth(const SynthConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw std::runtime_error("cannot create output directory " + out_dir.string());
  const auto rows = write_synth_dataset(cfg, out_dir);
  log << "farm_id,terrain,target_coverage,coverage,samples\n";
  for (const auto& r : rows) {
    log << r.farm_id << ',' << to_string(r.terrain) << ',' << percent(r.target_coverage) << ','
        << percent(r.coverage) << ',' << r.samples << '\n';
  }
  log << "wrote " << rows.size() << " farms to " << out_dir.string() << '\n';
  return rows;
}

std::vector<FarmDataset> load_farm_directory(const fs::path& dir, const std::vector<std::string>& only) {
  if (!fs::is_directory(dir)) throw std::runtime_error("input directory not found: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  if (!only.empty()) {
    for (const auto& want : only) {
      if (!std::binary_search(ids.begin(), ids.end(), want)) {
        throw std::runtime_error("farm " + want + ": no time series file in " + dir.string());
      }
    }
    std::vector<std::string> kept;
    for (const auto& id : ids) {
      if (std::find(only.begin(), only.end(), id) != only.end()) kept.push_back(id);
    }
    ids = std::move(kept);
  }
  if (ids.empty()) throw std::runtime_error("no farm time series found in " + dir.string());
  std::vector<FarmDataset> farms;
  for (const auto& id : ids) {
    const auto meta_path = dir / (id + ".json");
    if (!fs::exists(meta_path)) {
      throw std::runtime_error("farm " + id + ": metadata file " + meta_path.string() + " is missing");
    }
    try {
      farms.push_back(load_farm_timeseries(dir / (id + ".csv"), meta_path));
    } catch (const std::exception& e) {
      throw std::runtime_error("farm " + id + ": " + e.what());
    }
  }
  return farms;
}

RunSummary cmd_run(const RunConfig& cfg, bool resume, std::ostream& log) {
  cfg.validate();
  RunSummary summary;
  const fs::path marker = cfg.out_dir / kMarkerName;
  const std::string print = fingerprint(cfg);
  if (resume && fs::exists(marker) && fs::exists(cfg.out_dir / "evaluation.csv")) {
    const json m = json::parse(read_file(marker));
    if (m.value("config", std::string()) == print) {
      summary.resumed = true;
      summary.records = m.value("records", std::size_t{0});
      summary.jobs = m.value("jobs", std::size_t{0});
      log << "outputs in " << cfg.out_dir.string() << " are complete; nothing to do\n";
      return summary;
    }
    log << "existing outputs were produced with a different configuration; rerunning\n";
  }
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir)) {
    throw std::runtime_error("cannot create output directory " + cfg.out_dir.string());
  }
  fs::remove(marker, ec);

  std::vector<FarmDataset> raw;
  if (cfg.synth) {
    const auto plans = plan_farms(*cfg.synth);
    for (std::size_t i = 0; i < plans.size(); ++i) {
      if (!cfg.farms.empty() && std::find(cfg.farms.begin(), cfg.farms.end(), plans[i].farm_id) == cfg.farms.end()) {
        continue;
      }
      raw.push_back(generate_farm(*cfg.synth, i));
    }
    if (raw.empty()) throw std::runtime_error("farm selection matched no synthetic farm");
  } else {
    raw = load_farm_directory(cfg.input_dir, cfg.farms);
  }

  std::vector<std::string> shift_names = cfg.shift_features;
  if (shift_names.empty()) {
    for (auto kind : {SynthKind::wind, SynthKind::pv}) {
      for (auto& n : synth_shift_features(kind)) shift_names.push_back(n);
    }
  }

  std::vector<FarmDataset> prepared;
  FarmTable table;
  for (const auto& farm : raw) {
    PreprocessConfig pc;
    pc.outliers = cfg.outliers;
    pc.shift_features = shift_names;
    const int res = farm.meta.resolution_hours;
    pc.shift_hours = cfg.shift_hours > 0 ? cfg.shift_hours : (res == 1 ? 2 : res);
    try {
      auto p = prepare_farm(farm, pc);
      table[farm.meta.farm_id] = FarmInfo{p.data.meta, p.coverage};
      prepared.push_back(std::move(p.data));
    } catch (const std::exception& e) {
      summary.warnings.push_back("farm " + farm.meta.farm_id + " skipped during preprocessing: " + e.what());
    }
  }
  if (prepared.empty()) throw std::runtime_error("no farm survived preprocessing");

  ExperimentConfig ec_cfg;
  ec_cfg.test_window_months = cfg.test_window_months;
  if (ec_cfg.test_window_months == 0) {
    const bool hourly = prepared.front().meta.resolution_hours == 1;
    for (const auto& f : prepared) {
      if ((f.meta.resolution_hours == 1) != hourly) {
        throw std::invalid_argument("farms mix hourly and coarser resolutions; set test_window_months explicitly");
      }
    }
    ec_cfg.test_window_months = hourly ? 6 : 4;
  }
  ec_cfg.val_fraction = cfg.val_fraction;
  ec_cfg.training = cfg.training;
  ec_cfg.jobs = cfg.jobs;
  log << "running " << prepared.size() << " farms x " << cfg.families.size() << " families with " << cfg.jobs
      << " worker(s)\n";
  auto result = run_experiment(prepared, cfg.families, cfg.grid, ec_cfg, *cfg.seed);
  summary.warnings.insert(summary.warnings.end(), result.warnings.begin(), result.warnings.end());
  for (const auto& id : result.failed_farms) table.erase(id);

  const fs::path models_dir = cfg.out_dir / "models";
  const fs::path grid_dir = cfg.out_dir / "grid";
  for (const auto& job : result.jobs) {
    const auto stem = artifact_stem(job);
    if (job.model) write_file(models_dir / (stem + ".json"), predictor_to_json(*job.model));
    if (job.grid) write_file(grid_dir / (stem + ".csv"), grid_table_to_csv(*job.grid));
  }
  write_file(cfg.out_dir / "farms.json", farm_table_to_json(table));
  write_file(cfg.out_dir / "evaluation.csv", evaluation_to_csv(result.evaluation));
  write_file(cfg.out_dir / "run_config.json", run_config_to_json(cfg));
  json warnings = summary.warnings;
  write_file(cfg.out_dir / "warnings.json", warnings.dump(2) + "\n");

  summary.records = result.evaluation.records.size();
  summary.jobs = result.jobs.size();
  json m{{"config", print}, {"records", summary.records}, {"jobs", summary.jobs}};
  write_file(marker, m.dump(2) + "\n");
  for (const auto& w : summary.warnings) log << "warning: " << w << '\n';
  log << "wrote " << summary.records << " evaluation records from " << summary.jobs << " jobs to "
      << cfg.out_dir.string() << '\n';
  return summary;
}

namespace {

struct LoadedEvaluation {
  EvaluationDataset ev;
  FarmTable farms;
};

LoadedEvaluation load_evaluation(const AnalyzeOptions& opts, bool need_farms) {
  if (opts.evaluation_csv.empty()) throw std::invalid_argument("an evaluation CSV is required");
  LoadedEvaluation out;
  out.ev = evaluation_from_csv(read_file(opts.evaluation_csv));
  fs::path farms_path = opts.farms_json;
  if (farms_path.empty()) farms_path = opts.evaluation_csv.parent_path() / "farms.json";
  if (fs::exists(farms_path)) {
    out.farms = load_farm_table(farms_path);
  } else if (need_farms) {
    throw std::runtime_error("farm metadata table not found: " + farms_path.string());
  }
  return out;
}

void write_report_files(const AnalysisReport& report, const fs::path& dir, const std::string& prefix,
                        std::vector<std::string>& written) {
  const std::pair<std::string, std::string> files[] = {
      {prefix + "_report.json", report_to_json(report)},
      {prefix + "_kld.csv", kld_matrix_csv(report)},
      {prefix + "_kw_pvalues.csv", kw_pvalue_matrix_csv(report)},
      {prefix + "_boxplot.csv", boxplot_csv(report)}};
  for (const auto& [name, content] : files) {
    write_file(dir / name, content);
    written.push_back((dir / name).string());
  }
}

} // namespace

AnalysisReport cmd_analyze(const AnalyzeOptions& opts, std::ostream& log) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (opts.out_dir.empty()) throw std::invalid_argument("an output directory is required");
  Facet facet{opts.facet, parse_filter(opts.filter_terms)};
  const bool need_farms = facet.filter.needs_farm_table() || facet.kind == FacetKind::coverage_decile ||
                          facet.kind == FacetKind::terrain;
  const auto loaded = load_evaluation(opts, need_farms);
  const auto report = facet_report(loaded.ev, facet, loaded.farms, opts.alpha);
  std::vector<std::string> written;
  write_report_files(report, opts.out_dir, std::string(to_string(opts.facet)), written);
  log << "facet " << report.facet << ": " << report.bins.size() << " bins, " << report.record_count - report.excluded_count
      << " of " << report.record_count << " records";
  if (report.global_kw) log << ", Kruskal-Wallis p=" << format_double(report.global_kw->p_value);
  log << '\n';
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  return report;
}

std::vector<std::string> cmd_report(const AnalyzeOptions& opts, std::ostream& log) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (opts.out_dir.empty()) throw std::invalid_argument("an output directory is required");
  const FacetFilter filter = parse_filter(opts.filter_terms);
  const auto loaded = load_evaluation(opts, filter.needs_farm_table());
  std::vector<std::string> written;

  std::map<std::pair<std::string, ModelFamily>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : loaded.ev.records) {
    if (!filter.matches(r, loaded.farms)) continue;
    auto& g = groups[{r.farm_id, r.family}];
    g.first.push_back(r.actual);
    g.second.push_back(r.predicted);
  }
  std::string csv = "farm_id,family,n,mse,mae,r2\n";
  for (const auto& [key, g] : groups) {
    const auto m = error_measures(g.first, g.second);
    csv += key.first + "," + std::string(to_string(key.second)) + "," + std::to_string(g.first.size()) + "," +
           format_double(m.mse) + "," + format_double(m.mae) + "," + (m.r2 ? format_double(*m.r2) : "") + "\n";
  }
  write_file(opts.out_dir / "summary.csv", csv);
  written.push_back((opts.out_dir / "summary.csv").string());

  for (auto kind : {FacetKind::coverage_decile, FacetKind::hour_of_day, FacetKind::season, FacetKind::terrain,
                    FacetKind::model_family}) {
    const bool needs_table = kind == FacetKind::coverage_decile || kind == FacetKind::terrain;
    if (needs_table && loaded.farms.empty()) {
      log << "skipping " << to_string(kind) << ": no farm metadata table\n";
      continue;
    }
    try {
      const auto report = facet_report(loaded.ev, Facet{kind, filter}, loaded.farms, opts.alpha);
      write_report_files(report, opts.out_dir, std::string(to_string(kind)), written);
      log << "facet " << report.facet << ": " << report.bins.size() << " bins\n";
    } catch (const std::invalid_argument& e) {
      log << "skipping " << to_string(kind) << ": " << e.what() << '\n';
    }
  }
  return written;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Forecast error analysis for wind and PV farms"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic farm dataset");
  std::string synth_config, synth_kind, synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--config", synth_config, "Synth config JSON")->envname("FCU_SYNTH_CONFIG");
  auto* synth_kind_opt = synth->add_option("--kind", synth_kind, "wind or pv");
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Random seed")->envname("FCU_SEED");
  synth->add_option("--out", synth_out, "Output directory")->envname("FCU_OUT")->required();

  // run
  auto* run = app.add_subcommand("run", "Train and evaluate every farm x family x rolling window");
  std::string run_config_path, run_input, run_out;
  std::uint64_t run_seed = 0;
  int run_jobs = 1, run_months = 0;
  double run_alpha = 0.05;
  std::vector<std::string> run_families, run_farms;
  bool run_resume = false;
  run->add_option("--config", run_config_path, "Run config JSON")->envname("FCU_CONFIG");
  auto* run_input_opt = run->add_option("--input", run_input, "Directory of farm CSV/JSON files")->envname("FCU_INPUT");
  auto* run_seed_opt = run->add_option("--seed", run_seed, "Random seed")->envname("FCU_SEED");
  auto* run_jobs_opt = run->add_option("--jobs", run_jobs, "Worker threads")->envname("FCU_JOBS");
  auto* run_months_opt = run->add_option("--window-months", run_months, "Test window length in months");
  auto* run_alpha_opt = run->add_option("--alpha", run_alpha, "Significance level")->envname("FCU_ALPHA");
  auto* run_families_opt = run->add_option("--families", run_families, "Model families")->delimiter(',');
  auto* run_farms_opt = run->add_option("--farms", run_farms, "Farm ids to include")->delimiter(',');
  auto* run_out_opt = run->add_option("--out", run_out, "Output directory")->envname("FCU_OUT");
  run->add_flag("--resume", run_resume, "Skip work when complete outputs already exist");

  // analyze / report share options
  AnalyzeOptions an;
  std::string an_eval, an_farms, an_out, an_facet = "coverage";
  auto add_analysis_options = [&](CLI::App* cmd) {
    cmd->add_option("--eval", an_eval, "Evaluation CSV")->envname("FCU_EVAL")->required();
    cmd->add_option("--farms", an_farms, "Farm table JSON (default: farms.json beside the evaluation)");
    cmd->add_option("--filter", an.filter_terms, "key=value record filter (repeatable)");
    cmd->add_option("--alpha", an.alpha, "Significance level")->envname("FCU_ALPHA");
    cmd->add_option("--out", an_out, "Output directory")->envname("FCU_OUT")->required();
  };
  auto* analyze = app.add_subcommand("analyze", "Facet report: gamma fits, KLD and Kruskal-Wallis");
  add_analysis_options(analyze);
  analyze->add_option("--facet", an_facet, "coverage, hour, season, terrain or model")->envname("FCU_FACET");
  auto* report = app.add_subcommand("report", "All facet reports plus per-farm metrics");
  add_analysis_options(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) {
      SynthConfig cfg;
      if (!synth_config.empty()) {
        cfg = synth_config_from_json(read_file(synth_config));
        if (synth_kind_opt->count() && parse_synth_kind(synth_kind) != cfg.kind) {
          throw std::invalid_argument("--kind disagrees with the kind in " + synth_config);
        }
      } else {
        const bool pv = synth_kind_opt->count() && parse_synth_kind(synth_kind) == SynthKind::pv;
        cfg = pv ? SynthConfig::pv_defaults() : SynthConfig::wind_defaults();
      }
      if (synth_seed_opt->count()) cfg.seed = synth_seed;
      cmd_synth(cfg, synth_out, std::cout);
    } else if (run->parsed()) {
      RunConfig cfg;
      if (!run_config_path.empty()) cfg = run_config_from_json(read_file(run_config_path));
      if (run_input_opt->count()) cfg.input_dir = run_input;
      if (run_seed_opt->count()) cfg.seed = run_seed;
      if (run_jobs_opt->count()) cfg.jobs = run_jobs;
      if (run_months_opt->count()) cfg.test_window_months = run_months;
      if (run_alpha_opt->count()) cfg.alpha = run_alpha;
      if (run_families_opt->count()) cfg.families = parse_family_list(run_families);
      if (run_farms_opt->count()) cfg.farms = run_farms;
      if (run_out_opt->count()) cfg.out_dir = run_out;
      cmd_run(cfg, run_resume, std::cout);
    } else {
      an.evaluation_csv = an_eval;
      an.farms_json = an_farms;
      an.out_dir = an_out;
      if (analyze->parsed()) {
        an.facet = parse_facet(an_facet);
        cmd_analyze(an, std::cout);
      } else {
        for (const auto& f : cmd_report(an, std::cout)) std::cout << "wrote " << f << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

} // namespace fcu

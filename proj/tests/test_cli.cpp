#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fcu/cli.hpp"
#include "helpers.hpp"

using namespace fcu;
namespace fs = std::filesystem;

namespace {

int sh(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli() { return std::string("\"") + FCU_CLI_PATH + "\""; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

const char* kSynthJson = R"({
  "kind": "wind",
  "farms_per_terrain": {"farmland": 2},
  "period_start": "2016-01-01T00:00:00Z",
  "period_end": "2016-05-01T00:00:00Z",
  "coverage_range": [0.8, 1.0],
  "seed": 21
})";

const char* kRunJson = R"({
  "grid": {
    "lasso": {"lambda": [0.001, 0.01]},
    "svr": {"C": [1.0], "epsilon": [0.05], "gamma": [0.1]},
    "mlp": {"hidden_sizes": [[4]], "learning_rate": [0.01]},
    "gbrt": {"n_trees": [20], "max_depth": [2], "learning_rate": [0.1]}
  },
  "training": {"mlp_epochs": 3, "svr_max_samples": 300},
  "seed": 1
})";

// One synthetic dataset shared by the CLI cases.
const fs::path& dataset_dir() {
  static const fs::path dir = [] {
    auto root = test::scratch_dir("cli_data");
    spit(root / "synth.json", kSynthJson);
    spit(root / "run.json", kRunJson);
    REQUIRE(sh(cli() + " synth --config " + (root / "synth.json").string() + " --out " + (root / "farms").string() +
               " > /dev/null") == 0);
    return root;
  }();
  return dir;
}

} // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth writes a csv/json pair per farm") {
    const auto& root = dataset_dir();
    CHECK(fs::exists(root / "farms" / "wind_farmland_000.csv"));
    CHECK(fs::exists(root / "farms" / "wind_farmland_001.json"));
    CHECK(count_files(root / "farms") == 4);
  }

  TEST_CASE("run writes one grid log and model per farm x family x run") {
    const auto& root = dataset_dir();
    const auto out = root / "run_all";
    REQUIRE(sh(cli() + " run --config " + (root / "run.json").string() + " --input " + (root / "farms").string() +
               " --window-months 1 --out " + out.string() + " > /dev/null") == 0);
    CHECK(count_files(out / "grid") == 2 * 4 * 4);
    CHECK(count_files(out / "models") == 2 * 4 * 4);
    CHECK(fs::exists(out / "grid" / "wind_farmland_000_GBRT_run3.csv"));
    CHECK(fs::exists(out / "evaluation.csv"));
    CHECK(fs::exists(out / "farms.json"));
    CHECK(fs::exists(out / "run_complete.json"));
    const auto ev = evaluation_from_csv(slurp(out / "evaluation.csv"));
    CHECK_NOTHROW(ev.validate());
    CHECK(!ev.records.empty());

    // Model files load back.
    const auto model = predictor_from_json(slurp(out / "models" / "wind_farmland_001_LASSO_run0.json"));
    CHECK(model.family() == ModelFamily::lasso);

    SUBCASE("analyze writes the four facet files") {
      const auto an = root / "analysis";
      REQUIRE(sh(cli() + " analyze --eval " + (out / "evaluation.csv").string() + " --facet season --out " +
                 an.string() + " > /dev/null") == 0);
      for (const char* suffix : {"_report.json", "_kld.csv", "_kw_pvalues.csv", "_boxplot.csv"}) {
        CHECK(fs::exists(an / (std::string("season") + suffix)));
      }
      const auto j = nlohmann::json::parse(slurp(an / "season_report.json"));
      CHECK(j["bins"].size() == 2);
      CHECK(j["kld"].size() == 2);

      REQUIRE(sh(cli() + " analyze --eval " + (out / "evaluation.csv").string() +
                 " --facet model --filter terrain=farmland --out " + an.string() + " > /dev/null") == 0);
      const auto m = nlohmann::json::parse(slurp(an / "model_family_report.json"));
      CHECK(m["bins"].size() == 4);
      CHECK(m["filter"] == "terrain=farmland");
    }

    SUBCASE("report writes the summary and facet reports") {
      const auto rep = root / "report";
      REQUIRE(sh(cli() + " report --eval " + (out / "evaluation.csv").string() + " --out " + rep.string() +
                 " > /dev/null") == 0);
      const auto summary = slurp(rep / "summary.csv");
      CHECK(summary.rfind("farm_id,family,n,mse,mae,r2\n", 0) == 0);
      CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 2 * 4);
      CHECK(fs::exists(rep / "season_report.json"));
      CHECK(fs::exists(rep / "model_family_report.json"));
    }
  }

  TEST_CASE("resume skips completed work and reruns after a config change") {
    const auto& root = dataset_dir();
    auto cfg = run_config_from_json(kRunJson);
    cfg.input_dir = root / "farms";
    cfg.out_dir = root / "run_resume";
    cfg.families = {ModelFamily::lasso};
    cfg.test_window_months = 2;
    std::ostringstream log;
    const auto first = cmd_run(cfg, true, log);
    CHECK_FALSE(first.resumed);
    const auto eval_text = slurp(cfg.out_dir / "evaluation.csv");
    const auto second = cmd_run(cfg, true, log);
    CHECK(second.resumed);
    CHECK(second.records == first.records);
    CHECK(slurp(cfg.out_dir / "evaluation.csv") == eval_text);

    // Worker count does not change the fingerprint.
    cfg.jobs = 2;
    CHECK(cmd_run(cfg, true, log).resumed);

    cfg.seed = 99;
    CHECK_FALSE(cmd_run(cfg, true, log).resumed);
  }

  TEST_CASE("missing metadata names the farm and fails") {
    const auto& root = dataset_dir();
    const auto broken = test::scratch_dir("cli_broken");
    for (const auto& e : fs::directory_iterator(root / "farms")) fs::copy(e.path(), broken / e.path().filename());
    fs::remove(broken / "wind_farmland_001.json");
    const auto err = broken / "stderr.txt";
    const int code = sh(cli() + " run --config " + (root / "run.json").string() + " --input " + broken.string() +
                        " --families LASSO --out " + (broken / "out").string() + " > /dev/null 2> " + err.string());
    CHECK(code != 0);
    CHECK(slurp(err).find("wind_farmland_001") != std::string::npos);
    CHECK_THROWS_WITH(load_farm_directory(broken), doctest::Contains("wind_farmland_001"));
  }

  TEST_CASE("seed is required") {
    const auto& root = dataset_dir();
    const auto dir = test::scratch_dir("cli_noseed");
    spit(dir / "run.json", R"({"families": ["LASSO"]})");
    const auto err = dir / "stderr.txt";
    CHECK(sh("env -u FCU_SEED " + cli() + " run --config " + (dir / "run.json").string() + " --input " +
             (root / "farms").string() + " --out " + (dir / "out").string() + " > /dev/null 2> " + err.string()) == 1);
    CHECK(slurp(err).find("seed") != std::string::npos);
  }

  TEST_CASE("flags override the environment, which overrides the config file") {
    const auto& root = dataset_dir();
    const auto dir = test::scratch_dir("cli_precedence");
    spit(dir / "run.json", R"({"families": ["LASSO"], "seed": 1, "alpha": 0.1, "test_window_months": 2,
                               "grid": {"lasso": {"lambda": [0.01]}}})");
    const std::string base = cli() + " run --config " + (dir / "run.json").string() + " --input " +
                             (root / "farms").string();
    auto seed_of = [&](const fs::path& out) {
      return nlohmann::json::parse(slurp(out / "run_config.json"))["seed"].get<std::uint64_t>();
    };
    auto alpha_of = [&](const fs::path& out) {
      return nlohmann::json::parse(slurp(out / "run_config.json"))["alpha"].get<double>();
    };
    REQUIRE(sh("env -u FCU_SEED -u FCU_ALPHA " + base + " --out " + (dir / "a").string() + " > /dev/null") == 0);
    CHECK(seed_of(dir / "a") == 1);
    CHECK(alpha_of(dir / "a") == 0.1);
    REQUIRE(sh("env FCU_SEED=2 FCU_ALPHA=0.01 " + base + " --out " + (dir / "b").string() + " > /dev/null") == 0);
    CHECK(seed_of(dir / "b") == 2);
    CHECK(alpha_of(dir / "b") == 0.01);
    REQUIRE(sh("env FCU_SEED=2 " + base + " --seed 3 --out " + (dir / "c").string() + " > /dev/null") == 0);
    CHECK(seed_of(dir / "c") == 3);
  }

  TEST_CASE("bad arguments exit nonzero") {
    CHECK(sh(cli() + " > /dev/null 2>&1") != 0);
    CHECK(sh(cli() + " analyze --eval /nonexistent.csv --out /tmp/fcu_none > /dev/null 2>&1") == 1);
    CHECK(sh(cli() + " run --families XGB --seed 1 --out /tmp/fcu_none > /dev/null 2>&1") != 0);
  }

  TEST_CASE("run config JSON round trip") {
    auto cfg = run_config_from_json(kRunJson);
    cfg.families = {ModelFamily::svr, ModelFamily::gbrt};
    cfg.shift_hours = 3;
    const auto back = run_config_from_json(run_config_to_json(cfg));
    CHECK(run_config_to_json(back) == run_config_to_json(cfg));
    CHECK(back.training.mlp_epochs == 3);
    CHECK(back.grid.gbrt_n_trees == std::vector<int>{20});
  }
}

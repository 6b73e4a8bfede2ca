#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pslab/experiment.hpp"

using namespace pslab;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << body;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.setup = "setup1";
  cfg.n_list = {250};
  cfg.n_replicates = 3;
  cfg.tuners = {Tuner::cv, Tuner::max_smd};
  cfg.schemes = {WeightScheme::IPW, WeightScheme::OW};
  cfg.n_folds = 4;
  cfg.n_lambda = 8;
  cfg.lambda_min_ratio = 1e-2;
  cfg.master_seed = 42;
  cfg.synthetic_mode = SyntheticMode::off;
  return cfg;
}

}  // namespace

TEST_CASE("load_config parses key = value text with comments and sections") {
  const std::string path = write_temp("pslab_cfg_ok.toml",
                                      "# comment line\n"
                                      "[experiment]\n"
                                      "setup = setup1\n"
                                      "n_list = 500, 1000\n"
                                      "n_replicates = 7   # trailing comment\n"
                                      "tuners = cv, mean_smd\n"
                                      "schemes = MW\n"
                                      "k_synthetic = 9\n"
                                      "synthetic_mode = alignment_only\n"
                                      "master_seed = 1234\n"
                                      "parallelism = 2\n"
                                      "n_folds = 5\n"
                                      "n_lambda = 20\n"
                                      "lambda_min_ratio = 0.01\n");
  const ExperimentConfig cfg = load_config(path);
  CHECK(cfg.setup == "setup1");
  REQUIRE(cfg.n_list.size() == 2);
  CHECK(cfg.n_list[0] == 500);
  CHECK(cfg.n_list[1] == 1000);
  CHECK(cfg.n_replicates == 7);
  REQUIRE(cfg.tuners.size() == 2);
  CHECK(cfg.tuners[1] == Tuner::mean_smd);
  REQUIRE(cfg.schemes.size() == 1);
  CHECK(cfg.schemes[0] == WeightScheme::MW);
  CHECK(cfg.k_synthetic == 9);
  CHECK(cfg.synthetic_mode == SyntheticMode::alignment_only);
  CHECK(cfg.master_seed == 1234);
  CHECK(cfg.parallelism == 2);
  CHECK(cfg.n_folds == 5);
  CHECK(cfg.n_lambda == 20);
  CHECK(cfg.lambda_min_ratio == 0.01);
  fs::remove(path);
}

TEST_CASE("load_config rejects malformed input with line diagnostics") {
  const std::string bad_line =
      write_temp("pslab_cfg_badline.toml", "setup = setup1\nnot a pair\n");
  CHECK_THROWS_WITH_AS(load_config(bad_line), doctest::Contains("line 2"),
                       std::invalid_argument);
  fs::remove(bad_line);

  const std::string bad_key =
      write_temp("pslab_cfg_badkey.toml", "setup = setup1\nn_lamda = 10\n");
  CHECK_THROWS_WITH_AS(load_config(bad_key), doctest::Contains("n_lamda"),
                       std::invalid_argument);
  fs::remove(bad_key);

  CHECK_THROWS_AS(load_config("/nonexistent/pslab.toml"),
                  std::invalid_argument);
}

TEST_CASE("validate_and_normalize enforces invariants") {
  ExperimentConfig cfg = tiny_config();
  cfg.setup = "setup3";
  CHECK_THROWS_AS(cfg.validate_and_normalize(), std::invalid_argument);

  cfg = tiny_config();
  cfg.n_list.clear();
  CHECK_THROWS_AS(cfg.validate_and_normalize(), std::invalid_argument);

  cfg = tiny_config();
  cfg.tuners.clear();
  CHECK_THROWS_AS(cfg.validate_and_normalize(), std::invalid_argument);

  // setup2 forces the hal basis
  cfg = tiny_config();
  cfg.setup = "setup2";
  cfg.basis = Basis::raw;
  cfg.validate_and_normalize();
  CHECK(cfg.basis == Basis::hal);

  cfg = tiny_config();
  cfg.synthetic_mode = SyntheticMode::full;
  cfg.k_synthetic = 0;
  CHECK_THROWS_AS(cfg.validate_and_normalize(), std::invalid_argument);
}

TEST_CASE("config echo round-trips through the parser") {
  ExperimentConfig cfg = tiny_config();
  cfg.synthetic_mode = SyntheticMode::full;
  cfg.k_synthetic = 5;
  cfg.lambda_min_ratio = 0.037;
  const std::string path = write_temp("pslab_cfg_echo.toml", config_echo(cfg));
  const ExperimentConfig back = load_config(path);
  CHECK(config_echo(back) == config_echo(cfg));
  fs::remove(path);
}

TEST_CASE("run_replicate fills one analysis per tuner-scheme cell") {
  const ExperimentConfig cfg = tiny_config();
  const ReplicateResult r = run_replicate(cfg, 250, 1, 991);
  CHECK(r.n == 250);
  CHECK(r.rep == 1);
  REQUIRE(r.analyses.size() == 4);  // 2 tuners x 2 schemes
  CHECK(r.lambda_cv > 0.0);
  for (const AnalysisResult& ar : r.analyses) {
    REQUIRE(ar.ok);
    CHECK(ar.se > 0.0);
    CHECK(ar.ci_low < ar.estimate);
    CHECK(ar.estimate < ar.ci_high);
    CHECK(ar.chosen_lambda > 0.0);
    CHECK(ar.max_weight > 0.0);
    CHECK(ar.lambda_below_cv == (ar.chosen_lambda < r.lambda_cv));
  }
  // the cv-tuned cells share the cv lambda
  CHECK(r.analyses[0].chosen_lambda == r.lambda_cv);
  CHECK(r.analyses[1].chosen_lambda == r.lambda_cv);
  // cells 0 and 1 differ only in scheme, so their tuned index agrees
  CHECK(r.analyses[0].chosen_index == r.analyses[1].chosen_index);

  // deterministic in the seed
  const ReplicateResult r2 = run_replicate(cfg, 250, 1, 991);
  CHECK(r2.analyses[0].estimate == r.analyses[0].estimate);
  CHECK(r2.analyses[3].estimate == r.analyses[3].estimate);
  const ReplicateResult r3 = run_replicate(cfg, 250, 1, 992);
  CHECK(r3.analyses[0].estimate != r.analyses[0].estimate);
}

TEST_CASE("run_experiment is reproducible and parallelism-invariant") {
  ExperimentConfig cfg = tiny_config();
  cfg.parallelism = 1;
  const ExperimentResult serial = run_experiment(cfg);
  cfg.parallelism = 3;
  const ExperimentResult parallel = run_experiment(cfg);

  REQUIRE(serial.replicates.size() == 3);
  REQUIRE(parallel.replicates.size() == 3);
  for (std::size_t j = 0; j < serial.replicates.size(); ++j) {
    CHECK(serial.replicates[j].seed == parallel.replicates[j].seed);
    CHECK(serial.replicates[j].unadjusted == parallel.replicates[j].unadjusted);
    for (std::size_t a = 0; a < serial.replicates[j].analyses.size(); ++a)
      CHECK(serial.replicates[j].analyses[a].estimate ==
            parallel.replicates[j].analyses[a].estimate);
  }
  REQUIRE(serial.table.size() == parallel.table.size());
  for (std::size_t t = 0; t < serial.table.size(); ++t) {
    CHECK(serial.table[t].bias == parallel.table[t].bias);
    CHECK(serial.table[t].sd == parallel.table[t].sd);
  }
}

TEST_CASE("aggregate conserves replicates and matches brute force") {
  const ExperimentConfig cfg = tiny_config();
  const ExperimentResult result = run_experiment(cfg);
  // one unadjusted row plus one row per tuner-scheme cell
  REQUIRE(result.table.size() == 1 + 4);
  CHECK(result.table[0].scheme == "unadjusted");
  CHECK(result.table[0].n_replicates_ok == 3);

  // row 1 is the first (tuner, scheme) cell: brute-force the mean estimate
  double s = 0.0;
  for (const auto& r : result.replicates) s += r.analyses[0].estimate;
  CHECK(result.table[1].bias == doctest::Approx(s / 3.0).epsilon(1e-15));
  CHECK(result.table[1].n_replicates_ok == 3);
  CHECK(result.table[1].bias_mc_se ==
        doctest::Approx(result.table[1].sd / std::sqrt(3.0)).epsilon(1e-12));

  // percent bias is the ratio of mean estimate to mean unadjusted, in percent
  double su = 0.0;
  for (const auto& r : result.replicates) su += r.unadjusted;
  CHECK(result.table[1].percent_bias ==
        doctest::Approx(100.0 * (s / 3.0) / (su / 3.0)).epsilon(1e-12));
}

TEST_CASE("emit_results writes the full artifact set, byte-identical on rerun") {
  ExperimentConfig cfg = tiny_config();
  cfg.synthetic_mode = SyntheticMode::alignment_only;
  cfg.k_synthetic = 3;
  const fs::path dir1 = fs::temp_directory_path() / "pslab_emit_1";
  const fs::path dir2 = fs::temp_directory_path() / "pslab_emit_2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  const ExperimentResult a = run_experiment(cfg);
  emit_results(a, dir1.string());
  cfg.parallelism = 2;
  const ExperimentResult b = run_experiment(cfg);
  emit_results(b, dir2.string());

  for (const char* f : {"metrics.csv", "balance_smd.csv", "alignment.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(dir1 / f));
    CHECK(slurp(dir1 / f) == slurp(dir2 / f));
  }
  REQUIRE(fs::exists(dir1 / "run_meta.json"));

  // metrics.csv: header plus one line per table row
  {
    std::ifstream in(dir1 / "metrics.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("setup,n,tuner,scheme,basis,", 0) == 0);
    int rows = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == static_cast<int>(a.table.size()));
  }

  // balance_smd.csv: replicate 0 dumps one row per covariate
  {
    std::ifstream in(dir1 / "balance_smd.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "setup,n,covariate,smd_unadjusted,smd_weighted");
    int rows = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 1000);  // setup1 has 1000 covariates
  }

  // alignment.csv has a row for the replicate-0 alignment statistic
  {
    std::ifstream in(dir1 / "alignment.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "setup,n,slope,r2");
    int rows = 0;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 1);
  }

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

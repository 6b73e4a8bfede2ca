// pslab command line front end; talks to the core through the C API only.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "pslab/pslab.h"

namespace {

int fail(int code) {
  std::fprintf(stderr, "pslab: %s\n", pslab_last_error());
  return code;
}

struct DatasetGuard {
  pslab_dataset* ds = nullptr;
  ~DatasetGuard() { pslab_dataset_free(ds); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Undersmoothed lasso propensity-score weighting with "
               "synthetic negative-control bias detection"};
  app.require_subcommand(1);

  // shared fitting options
  pslab_fit_options fopt;
  pslab_fit_options_init(&fopt);
  std::string data_path, outcome = "Y", exposure = "A", out_dir = ".";
  std::uint64_t seed = 1;
  const auto add_fit_flags = [&](CLI::App* cmd) {
    cmd->add_option("--data", data_path, "input dataset CSV")->required();
    cmd->add_option("--outcome", outcome, "outcome column name");
    cmd->add_option("--exposure", exposure, "exposure column name");
    cmd->add_option("--n-lambda", fopt.n_lambda, "lambda grid length");
    cmd->add_option("--lambda-min-ratio", fopt.lambda_min_ratio,
                    "grid tail ratio");
    cmd->add_option("--folds", fopt.n_folds, "cross-validation folds");
    cmd->add_flag("--hal", fopt.use_hal,
                  "expand covariates into indicator basis functions");
    cmd->add_option("--hal-max-degree", fopt.hal_max_degree,
                    "interaction order of the indicator basis");
    cmd->add_option("--hal-knots", fopt.hal_knots_per_cov,
                    "quantile knots per continuous covariate");
    cmd->add_option("--seed", seed, "seed for fold assignment");
    cmd->add_option("--out", out_dir, "output directory");
  };

  auto* sim = app.add_subcommand("simulate", "generate a simulation dataset");
  std::string setup = "setup1";
  std::int64_t sim_n = 5000;
  sim->add_option("--setup", setup, "setup1 or setup2");
  sim->add_option("--n", sim_n, "sample size")->required();
  sim->add_option("--seed", seed, "generator seed");
  sim->add_option("--out", out_dir, "output directory");

  auto* fit = app.add_subcommand("fit", "fit the lasso regularization path");
  add_fit_flags(fit);
  fit->add_flag("--dump-coefs", fopt.dump_coefs, "wide coefficient dump");

  auto* est = app.add_subcommand("estimate", "tuned PS-weighted estimate");
  add_fit_flags(est);
  std::string tuner = "cv", scheme = "IPW";
  est->add_option("--tuner", tuner, "cv | max_smd | mean_smd");
  est->add_option("--scheme", scheme, "IPW | MW | OW");

  auto* snc = app.add_subcommand("synthetic-nc",
                                 "synthetic negative-control bias detection");
  add_fit_flags(snc);
  std::string analyses = "cv:IPW,max_smd:IPW,mean_smd:IPW";
  std::string target_formula = "text";
  int k_cohorts = 100;
  bool cohort_dump = false;
  snc->add_option("--analyses", analyses,
                  "comma-separated tuner:scheme pairs");
  snc->add_option("--k", k_cohorts, "number of synthetic cohorts");
  snc->add_option("--target-sum-formula", target_formula, "text | printed");
  snc->add_flag("--cohort-dump", cohort_dump, "per-cohort estimate dump");

  auto* exp = app.add_subcommand("experiment", "Monte Carlo experiment grid");
  std::string config_path;
  std::uint64_t exp_seed = 0;
  int threads = 0;
  exp->add_option("--config", config_path, "experiment config file")->required();
  exp->add_option("--seed", exp_seed, "master seed override");
  exp->add_option("--threads", threads, "replicate parallelism override");
  exp->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : PSLAB_ERR_CONFIG;
  }

  if (sim->parsed()) {
    const int rc = pslab_simulate(setup.c_str(), sim_n, seed, out_dir.c_str());
    if (rc != PSLAB_OK) return fail(rc);
    std::printf("wrote %s/data.csv and %s/truth.csv\n", out_dir.c_str(),
                out_dir.c_str());
    return 0;
  }

  if (exp->parsed()) {
    const int rc = pslab_run_experiment(config_path.c_str(), out_dir.c_str(),
                                        exp_seed, threads);
    if (rc != PSLAB_OK) return fail(rc);
    std::printf("wrote metrics.csv, balance_smd.csv, alignment.csv, "
                "run_meta.json under %s\n",
                out_dir.c_str());
    return 0;
  }

  DatasetGuard guard;
  fopt.fold_seed = seed;
  int rc = pslab_dataset_load(data_path.c_str(), outcome.c_str(),
                              exposure.c_str(), &guard.ds);
  if (rc != PSLAB_OK) return fail(rc);

  if (fit->parsed()) {
    rc = pslab_fit(guard.ds, &fopt, out_dir.c_str());
    if (rc != PSLAB_OK) return fail(rc);
    std::printf("wrote %s/path.csv\n", out_dir.c_str());
    return 0;
  }

  if (est->parsed()) {
    pslab_estimate_result result;
    rc = pslab_estimate(guard.ds, tuner.c_str(), scheme.c_str(), &fopt,
                        out_dir.c_str(), &result);
    if (rc != PSLAB_OK) return fail(rc);
    std::printf("estimate %.6g  se %.6g  ci [%.6g, %.6g]  lambda %.6g "
                "(lambda_cv %.6g)\n",
                result.estimate, result.se, result.ci_low, result.ci_high,
                result.chosen_lambda, result.lambda_cv);
    return 0;
  }

  if (snc->parsed()) {
    rc = pslab_synthetic_nc(guard.ds, analyses.c_str(), k_cohorts, seed,
                            target_formula.c_str(), &fopt, out_dir.c_str(),
                            cohort_dump ? 1 : 0);
    if (rc != PSLAB_OK) return fail(rc);
    std::printf("wrote %s/synthetic_report.csv\n", out_dir.c_str());
    return 0;
  }

  return PSLAB_ERR_CONFIG;
}

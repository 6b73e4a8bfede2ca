#include "pslab/pslab.h"

#include <exception>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "pslab/balance.hpp"
#include "pslab/dataset.hpp"
#include "pslab/experiment.hpp"
#include "pslab/hal_basis.hpp"
#include "pslab/lasso.hpp"
#include "pslab/rng.hpp"
#include "pslab/simulation.hpp"
#include "pslab/synthetic_nc.hpp"
#include "pslab/weighting.hpp"

struct pslab_dataset {
  pslab::Dataset ds;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return PSLAB_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return PSLAB_ERR_RUNTIME;
  } catch (const std::exception& e) {
    set_error(e.what());
    return PSLAB_ERR_RUNTIME;
  }
}

pslab::BasisSpec basis_spec_from(const pslab_fit_options& opt) {
  pslab::BasisSpec spec;
  spec.max_degree = opt.hal_max_degree;
  spec.knots_per_cov = opt.hal_knots_per_cov;
  return spec;
}

// lasso design plus balance columns for the requested basis
struct Prepared {
  pslab::Dataset wds;
  pslab::BasisExpansion expansion;
  bool hal = false;
};

Prepared prepare(const pslab::Dataset& ds, const pslab_fit_options& opt) {
  Prepared prep;
  prep.hal = opt.use_hal != 0;
  if (prep.hal) {
    prep.expansion = pslab::expand_basis(ds, basis_spec_from(opt));
    prep.wds.y = ds.y;
    prep.wds.a = ds.a;
    prep.wds.x = prep.expansion.w;
    prep.wds.col_kind.assign(prep.expansion.w.cols(),
                             pslab::ColKind::binary);
  } else {
    prep.wds = ds;
  }
  return prep;
}

pslab::LassoPath fit_prepared(const Prepared& prep,
                              const pslab_fit_options& opt) {
  const auto folds =
      pslab::assign_folds(prep.wds, opt.n_folds, opt.fold_seed);
  const auto grid = pslab::make_lambda_grid(pslab::lambda_max(prep.wds),
                                            opt.n_lambda, opt.lambda_min_ratio);
  return pslab::fit_path(prep.wds, grid, folds);
}

}  // namespace

extern "C" {

const char* pslab_last_error(void) { return g_last_error.c_str(); }

int pslab_dataset_load(const char* csv_path, const char* outcome_col,
                       const char* exposure_col, pslab_dataset** out) {
  return guarded([&] {
    if (!csv_path || !outcome_col || !exposure_col || !out)
      throw std::invalid_argument("pslab_dataset_load: null argument");
    auto* handle = new pslab_dataset{
        pslab::load_csv(csv_path, outcome_col, exposure_col)};
    *out = handle;
    return PSLAB_OK;
  });
}

void pslab_dataset_free(pslab_dataset* ds) { delete ds; }

int pslab_dataset_dims(const pslab_dataset* ds, int64_t* n, int64_t* d) {
  return guarded([&] {
    if (!ds) throw std::invalid_argument("pslab_dataset_dims: null dataset");
    if (n) *n = ds->ds.n();
    if (d) *d = ds->ds.d();
    return PSLAB_OK;
  });
}

int pslab_dataset_n_exposed(const pslab_dataset* ds, int64_t* n_exposed) {
  return guarded([&] {
    if (!ds || !n_exposed)
      throw std::invalid_argument("pslab_dataset_n_exposed: null argument");
    *n_exposed = ds->ds.n_exposed();
    return PSLAB_OK;
  });
}

int pslab_simulate(const char* setup, int64_t n, uint64_t seed,
                   const char* out_dir) {
  return guarded([&] {
    if (!setup || !out_dir)
      throw std::invalid_argument("pslab_simulate: null argument");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string s = setup;
    pslab::Dataset ds;
    pslab::GroundTruth truth;
    if (s == "setup1") {
      pslab::Setup1Config cfg;
      cfg.n = n;
      cfg.seed = seed;
      std::tie(ds, truth) = pslab::generate_setup1(cfg);
    } else if (s == "setup2") {
      pslab::Setup2Config cfg;
      cfg.n = n;
      cfg.seed = seed;
      std::tie(ds, truth) = pslab::generate_setup2(cfg);
    } else {
      throw std::invalid_argument("pslab_simulate: setup must be setup1 or setup2");
    }
    pslab::write_csv(ds, (fs::path(out_dir) / "data.csv").string());
    pslab::write_truth_csv(truth, (fs::path(out_dir) / "truth.csv").string());
    return PSLAB_OK;
  });
}

void pslab_fit_options_init(pslab_fit_options* opt) {
  if (!opt) return;
  opt->n_lambda = 100;
  opt->lambda_min_ratio = 1e-4;
  opt->n_folds = 10;
  opt->fold_seed = 1;
  opt->use_hal = 0;
  opt->hal_max_degree = 2;
  opt->hal_knots_per_cov = 10;
  opt->dump_coefs = 0;
}

int pslab_fit(const pslab_dataset* ds, const pslab_fit_options* opt,
              const char* out_dir) {
  return guarded([&] {
    if (!ds || !opt || !out_dir)
      throw std::invalid_argument("pslab_fit: null argument");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const Prepared prep = prepare(ds->ds, *opt);
    const pslab::LassoPath path = fit_prepared(prep, *opt);
    pslab::export_path_csv(path, (fs::path(out_dir) / "path.csv").string(),
                           opt->dump_coefs != 0);
    if (prep.hal)
      pslab::export_terms_csv(prep.expansion,
                              (fs::path(out_dir) / "terms.csv").string());
    return PSLAB_OK;
  });
}

int pslab_estimate(const pslab_dataset* ds, const char* tuner,
                   const char* scheme, const pslab_fit_options* opt,
                   const char* out_dir, pslab_estimate_result* result) {
  return guarded([&] {
    if (!ds || !tuner || !scheme || !opt)
      throw std::invalid_argument("pslab_estimate: null argument");
    const pslab::Tuner tu = pslab::parse_tuner(tuner);
    const pslab::WeightScheme sc = pslab::parse_scheme(scheme);
    const Prepared prep = prepare(ds->ds, *opt);
    const pslab::LassoPath path = fit_prepared(prep, *opt);
    pslab::Index idx;
    pslab::TunerChoice choice;
    bool have_curve = false;
    if (tu == pslab::Tuner::cv) {
      idx = path.lambda_cv_index;
    } else {
      const auto crit = tu == pslab::Tuner::max_smd
                            ? pslab::BalanceCriterion::max_smd
                            : pslab::BalanceCriterion::mean_smd;
      choice = pslab::tune_by_balance(path, prep.wds, sc, crit, prep.wds.x,
                                      prep.wds.col_kind);
      idx = choice.chosen_index;
      have_curve = true;
    }
    const pslab::WeightedEstimate est =
        pslab::estimate_effect(path, idx, prep.wds, sc);
    if (result) {
      result->estimate = est.estimate;
      result->se = est.se;
      result->ci_low = est.ci_low;
      result->ci_high = est.ci_high;
      result->chosen_lambda = path.lambdas[idx];
      result->lambda_cv = path.lambdas[path.lambda_cv_index];
      result->chosen_index = idx;
      result->max_weight = est.max_weight;
    }
    if (out_dir) {
      namespace fs = std::filesystem;
      fs::create_directories(out_dir);
      std::ofstream out(fs::path(out_dir) / "estimate.csv");
      if (!out) throw std::runtime_error("cannot write estimate.csv");
      char buf[512];
      std::snprintf(buf, sizeof buf,
                    "tuner,scheme,estimate,se,ci_low,ci_high,chosen_lambda,"
                    "lambda_cv,max_weight\n"
                    "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    tuner, scheme, est.estimate, est.se, est.ci_low,
                    est.ci_high, path.lambdas[idx],
                    path.lambdas[path.lambda_cv_index], est.max_weight);
      out << buf;

      if (have_curve) {
        // per-lambda criterion curve supporting balance-vs-penalty plots
        std::ofstream curve(fs::path(out_dir) / "balance_curve.csv");
        if (!curve) throw std::runtime_error("cannot write balance_curve.csv");
        curve << "lambda,criterion,value,chosen\n";
        for (std::size_t l = 0; l < choice.per_lambda.size(); ++l) {
          std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%d\n",
                        path.lambdas[l],
                        pslab::criterion_name(choice.criterion).c_str(),
                        choice.per_lambda[l],
                        static_cast<pslab::Index>(l) == idx ? 1 : 0);
          curve << buf;
        }
      }

      // per-covariate standardized differences, unadjusted vs weighted
      const Eigen::VectorXd unit = Eigen::VectorXd::Ones(prep.wds.n());
      const auto rep_u = pslab::balance_report(prep.wds.x, prep.wds.col_kind,
                                               prep.wds.a, unit);
      const Eigen::VectorXd w_chosen = pslab::compute_weights(
          path.oof_pred.col(idx), prep.wds.a, sc);
      const auto rep_w = pslab::balance_report(prep.wds.x, prep.wds.col_kind,
                                               prep.wds.a, w_chosen);
      std::ofstream smd(fs::path(out_dir) / "smd.csv");
      if (!smd) throw std::runtime_error("cannot write smd.csv");
      smd << "covariate,smd_unadjusted,smd_weighted\n";
      for (pslab::Index k = 0; k < rep_u.smd.size(); ++k) {
        const std::string name =
            static_cast<std::size_t>(k) < prep.wds.col_names.size()
                ? prep.wds.col_names[k]
                : "C" + std::to_string(k + 1);
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g\n", name.c_str(),
                      rep_u.smd[k], rep_w.smd[k]);
        smd << buf;
      }
    }
    return PSLAB_OK;
  });
}

int pslab_synthetic_nc(const pslab_dataset* ds, const char* analyses,
                       int k_cohorts, uint64_t seed,
                       const char* target_sum_formula,
                       const pslab_fit_options* opt, const char* out_dir,
                       int per_cohort_dump) {
  return guarded([&] {
    if (!ds || !analyses || !opt || !out_dir)
      throw std::invalid_argument("pslab_synthetic_nc: null argument");
    std::vector<pslab::AnalysisSpec> specs;
    std::stringstream ss(analyses);
    std::string item;
    const pslab::Basis basis =
        opt->use_hal ? pslab::Basis::hal : pslab::Basis::raw;
    while (std::getline(ss, item, ',')) {
      const std::size_t colon = item.find(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("analysis spec '" + item +
                                    "' is not tuner:scheme");
      pslab::AnalysisSpec spec;
      spec.tuner = pslab::parse_tuner(item.substr(0, colon));
      spec.scheme = pslab::parse_scheme(item.substr(colon + 1));
      spec.basis = basis;
      specs.push_back(spec);
    }
    if (specs.empty())
      throw std::invalid_argument("pslab_synthetic_nc: no analyses given");
    bool printed = false;
    if (target_sum_formula) {
      const std::string f = target_sum_formula;
      if (f == "printed")
        printed = true;
      else if (f != "text")
        throw std::invalid_argument("target_sum_formula must be text or printed");
    }

    const pslab::Dataset& data = ds->ds;
    const Prepared prep = prepare(data, *opt);
    const pslab::LassoPath path = fit_prepared(prep, *opt);
    const Eigen::VectorXd fitted =
        pslab::predict(path.fits[path.lambda_cv_index], prep.wds.x);
    const pslab::Dataset ds_u = pslab::subset_unexposed(data);
    const pslab::Index nu = ds_u.n();
    Eigen::VectorXd theta(nu);
    {
      pslab::Index k = 0;
      for (pslab::Index i = 0; i < data.n(); ++i)
        if (data.a[i] == 0.0) theta[k++] = pslab::logit(fitted[i]);
    }
    const double target =
        printed ? (static_cast<double>(nu) / data.n()) * nu
                : (static_cast<double>(data.n() - nu) / data.n()) * nu;
    const auto model = pslab::make_assignment_model(
        theta, target, path.lambdas[path.lambda_cv_index]);
    const auto cohorts = pslab::generate_cohorts(
        ds_u, model, k_cohorts, data.n(), pslab::derive_seed(seed, 0x5ca1eULL));
    pslab::PipelineConfig pipe;
    pipe.n_folds = opt->n_folds;
    pipe.n_lambda = opt->n_lambda;
    pipe.lambda_min_ratio = opt->lambda_min_ratio;
    pipe.basis_spec = basis_spec_from(*opt);
    const auto report = pslab::run_bias_detection(cohorts, ds_u, specs, pipe);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    pslab::export_synthetic_report_csv(
        report, (fs::path(out_dir) / "synthetic_report.csv").string(),
        per_cohort_dump != 0);
    return PSLAB_OK;
  });
}

int pslab_run_experiment(const char* config_path, const char* out_dir,
                         uint64_t seed_override, int threads_override) {
  return guarded([&] {
    if (!config_path || !out_dir)
      throw std::invalid_argument("pslab_run_experiment: null argument");
    pslab::ExperimentConfig cfg = pslab::load_config(config_path);
    if (seed_override > 0) cfg.master_seed = seed_override;
    if (threads_override > 0) cfg.parallelism = threads_override;
    const pslab::ExperimentResult result = pslab::run_experiment(cfg);
    pslab::emit_results(result, out_dir);
    return PSLAB_OK;
  });
}

}  // extern "C"

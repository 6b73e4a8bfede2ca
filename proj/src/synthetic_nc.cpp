#include "pslab/synthetic_nc.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "pslab/rng.hpp"

namespace pslab {

Tuner parse_tuner(const std::string& name) {
  if (name == "cv") return Tuner::cv;
  if (name == "max_smd") return Tuner::max_smd;
  if (name == "mean_smd") return Tuner::mean_smd;
  throw std::invalid_argument("unknown tuner '" + name + "'");
}

std::string tuner_name(Tuner t) {
  switch (t) {
    case Tuner::cv: return "cv";
    case Tuner::max_smd: return "max_smd";
    case Tuner::mean_smd: return "mean_smd";
  }
  return "?";
}

Basis parse_basis(const std::string& name) {
  if (name == "raw") return Basis::raw;
  if (name == "hal") return Basis::hal;
  throw std::invalid_argument("unknown basis '" + name + "'");
}

std::string basis_name(Basis b) { return b == Basis::raw ? "raw" : "hal"; }

std::string AnalysisSpec::label() const {
  return tuner_name(tuner) + ":" + scheme_name(scheme) + ":" +
         basis_name(basis);
}

ReferencePS fit_reference_ps(const Dataset& ds, const FoldAssignment& folds,
                             const PipelineConfig& cfg) {
  ReferencePS ref;
  const double lmax = lambda_max(ds);
  const auto grid = make_lambda_grid(lmax, cfg.n_lambda, cfg.lambda_min_ratio);
  ref.path = fit_path(ds, grid, folds, cfg.solver);
  ref.cv_index = ref.path.lambda_cv_index;
  ref.fitted = predict(ref.path.fits[ref.cv_index], ds.x);
  return ref;
}

double calibrate_offset(const Eigen::VectorXd& theta, double target_sum) {
  const double nu = static_cast<double>(theta.size());
  if (!(target_sum > 0.0 && target_sum < nu))
    throw std::invalid_argument("calibrate_offset: target_sum must be in (0, n_u)");
  for (Index i = 0; i < theta.size(); ++i)
    if (!std::isfinite(theta[i]))
      throw std::invalid_argument("calibrate_offset: non-finite theta");
  const auto sum_at = [&](double c) {
    double s = 0.0;
    for (Index i = 0; i < theta.size(); ++i) s += expit(c + theta[i]);
    return s;
  };
  double lo = -1.0, hi = 1.0;
  while (sum_at(lo) > target_sum) lo *= 2.0;
  while (sum_at(hi) < target_sum) hi *= 2.0;
  const double tol = 1e-8 * nu;
  double c = 0.0;
  for (int it = 0; it < 200; ++it) {
    c = 0.5 * (lo + hi);
    const double s = sum_at(c);
    if (std::abs(s - target_sum) < tol) break;
    if (s < target_sum)
      lo = c;
    else
      hi = c;
  }
  return c;
}

SyntheticAssignmentModel make_assignment_model(const Eigen::VectorXd& theta,
                                               double target_sum,
                                               double reference_lambda) {
  SyntheticAssignmentModel model;
  model.theta = theta;
  model.target_sum = target_sum;
  model.reference_lambda = reference_lambda;
  model.c = calibrate_offset(theta, target_sum);
  model.pi.resize(theta.size());
  for (Index i = 0; i < theta.size(); ++i)
    model.pi[i] = expit(model.c + theta[i]);
  return model;
}

std::vector<SyntheticCohort> generate_cohorts(
    const Dataset& ds_unexposed, const SyntheticAssignmentModel& model,
    int k, Index n_out, std::uint64_t master_seed) {
  if (k < 1) throw std::invalid_argument("generate_cohorts: k must be >= 1");
  if (n_out < 1) throw std::invalid_argument("generate_cohorts: n_out must be >= 1");
  const Index nu = ds_unexposed.n();
  if (model.pi.size() != nu)
    throw std::invalid_argument("generate_cohorts: model size mismatch");
  std::vector<SyntheticCohort> cohorts(k);
  for (int j = 0; j < k; ++j) {
    SyntheticCohort& co = cohorts[j];
    co.seed = derive_seed(master_seed, static_cast<std::uint64_t>(j));
    Rng rng(co.seed);
    co.rows.resize(n_out);
    co.z.resize(n_out);
    for (Index i = 0; i < n_out; ++i)
      co.rows[i] = static_cast<Index>(rng.uniform_index(nu));
    for (Index i = 0; i < n_out; ++i)
      co.z[i] = rng.bernoulli(model.pi[co.rows[i]]) ? 1.0 : 0.0;
  }
  return cohorts;
}

SyntheticBiasReport run_bias_detection(
    const std::vector<SyntheticCohort>& cohorts, const Dataset& ds_unexposed,
    const std::vector<AnalysisSpec>& analyses, const PipelineConfig& cfg) {
  SyntheticBiasReport report;
  report.k = static_cast<int>(cohorts.size());
  report.analyses.resize(analyses.size());
  for (std::size_t a = 0; a < analyses.size(); ++a)
    report.analyses[a].spec = analyses[a];

  bool need_raw = false, need_hal = false;
  for (const auto& an : analyses)
    (an.basis == Basis::raw ? need_raw : need_hal) = true;

  double sum_unadjusted = 0.0;
  int n_unadjusted = 0;

  for (const SyntheticCohort& co : cohorts) {
    // materialize {Y, Z, X} with Z as the exposure
    Dataset cds = subset_rows(ds_unexposed, co.rows);
    cds.a = co.z;

    double unadjusted = 0.0;
    bool cohort_ok = true;
    try {
      unadjusted = weighted_mean_difference(
                       cds.y, cds.a, Eigen::VectorXd::Ones(cds.n()))
                       .estimate;
    } catch (const std::exception&) {
      cohort_ok = false;  // degenerate cohort (single exposure class)
    }
    if (cohort_ok) {
      sum_unadjusted += unadjusted;
      ++n_unadjusted;
    }

    // one path per basis, shared across tuners and schemes
    LassoPath raw_path, hal_path;
    Eigen::MatrixXd hal_w;
    std::vector<ColKind> hal_kinds;
    bool raw_ok = false, hal_ok = false;
    if (cohort_ok && need_raw) {
      try {
        const FoldAssignment folds =
            assign_folds(cds, cfg.n_folds, derive_seed(co.seed, 0xf01dULL));
        const auto grid = make_lambda_grid(lambda_max(cds), cfg.n_lambda,
                                           cfg.lambda_min_ratio);
        raw_path = fit_path(cds, grid, folds, cfg.solver);
        raw_ok = true;
      } catch (const std::exception&) {
      }
    }
    if (cohort_ok && need_hal) {
      try {
        const BasisExpansion exp = expand_basis(cds, cfg.basis_spec);
        Dataset wds;
        wds.y = cds.y;
        wds.a = cds.a;
        wds.x = exp.w;
        wds.col_kind.assign(exp.w.cols(), ColKind::binary);
        const FoldAssignment folds =
            assign_folds(wds, cfg.n_folds, derive_seed(co.seed, 0xf01dULL));
        const auto grid = make_lambda_grid(lambda_max(wds), cfg.n_lambda,
                                           cfg.lambda_min_ratio);
        hal_path = fit_path(wds, grid, folds, cfg.solver);
        hal_w = std::move(wds.x);
        hal_kinds = std::move(wds.col_kind);
        hal_ok = true;
      } catch (const std::exception&) {
      }
    }

    for (std::size_t a = 0; a < analyses.size(); ++a) {
      const AnalysisSpec& an = analyses[a];
      AnalysisBias& out = report.analyses[a];
      const bool path_ok = an.basis == Basis::raw ? raw_ok : hal_ok;
      if (!cohort_ok || !path_ok) {
        ++out.k_failed;
        continue;
      }
      const LassoPath& path = an.basis == Basis::raw ? raw_path : hal_path;
      try {
        Index idx;
        if (an.tuner == Tuner::cv) {
          idx = path.lambda_cv_index;
        } else {
          const BalanceCriterion crit = an.tuner == Tuner::max_smd
                                            ? BalanceCriterion::max_smd
                                            : BalanceCriterion::mean_smd;
          if (an.basis == Basis::raw) {
            idx = tune_by_balance(path, cds, an.scheme, crit, cds.x,
                                  cds.col_kind)
                      .chosen_index;
          } else {
            idx = tune_by_balance(path, cds, an.scheme, crit, hal_w, hal_kinds)
                      .chosen_index;
          }
        }
        const WeightedEstimate est = estimate_effect(path, idx, cds, an.scheme);
        out.per_cohort.emplace_back(est.estimate, unadjusted);
        ++out.k_ok;
      } catch (const std::exception&) {
        ++out.k_failed;
      }
    }
  }

  report.mean_unadjusted =
      n_unadjusted > 0 ? sum_unadjusted / n_unadjusted : 0.0;
  for (AnalysisBias& out : report.analyses) {
    if (out.k_ok > 0) {
      double s = 0.0, su = 0.0;
      for (const auto& [est, unadj] : out.per_cohort) {
        s += est;
        su += unadj;
      }
      out.mean_bias = s / out.k_ok;
      const double mu = su / out.k_ok;
      out.mean_percent_bias = mu != 0.0 ? 100.0 * out.mean_bias / mu : 0.0;
      double v = 0.0;
      for (const auto& [est, unadj] : out.per_cohort)
        v += (est - out.mean_bias) * (est - out.mean_bias);
      out.sd_bias = out.k_ok > 1 ? std::sqrt(v / (out.k_ok - 1)) : 0.0;
    }
    out.high_failure = out.k_failed > 0.05 * report.k;
  }
  return report;
}

Eigen::VectorXd synthetic_column_differences(
    const std::vector<SyntheticCohort>& cohorts, const Eigen::MatrixXd& cols) {
  const Index K = cols.cols();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(K);
  int used = 0;
  for (const SyntheticCohort& co : cohorts) {
    const Index m = static_cast<Index>(co.rows.size());
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(K), s0 = Eigen::VectorXd::Zero(K);
    double c1 = 0.0, c0 = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (co.z[i] == 1.0) {
        s1 += cols.row(co.rows[i]).transpose();
        c1 += 1.0;
      } else {
        s0 += cols.row(co.rows[i]).transpose();
        c0 += 1.0;
      }
    }
    if (c1 == 0.0 || c0 == 0.0) continue;
    acc += s1 / c1 - s0 / c0;
    ++used;
  }
  if (used == 0)
    throw std::runtime_error(
        "synthetic_column_differences: no cohort had both Z groups");
  return acc / static_cast<double>(used);
}

void export_synthetic_report_csv(const SyntheticBiasReport& report,
                                 const std::string& file,
                                 bool per_cohort_dump) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write '" + file + "'");
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  out << "analysis_label,tuner,scheme,basis,k_ok,mean_bias,"
         "mean_percent_bias,sd_bias\n";
  for (const AnalysisBias& an : report.analyses) {
    out << an.spec.label() << ',' << tuner_name(an.spec.tuner) << ','
        << scheme_name(an.spec.scheme) << ',' << basis_name(an.spec.basis)
        << ',' << an.k_ok << ',';
    put(an.mean_bias);
    out << ',';
    put(an.mean_percent_bias);
    out << ',';
    put(an.sd_bias);
    out << '\n';
  }
  if (per_cohort_dump) {
    out << "analysis_label,cohort,estimate,unadjusted\n";
    for (const AnalysisBias& an : report.analyses)
      for (std::size_t j = 0; j < an.per_cohort.size(); ++j) {
        out << an.spec.label() << ',' << j << ',';
        put(an.per_cohort[j].first);
        out << ',';
        put(an.per_cohort[j].second);
        out << '\n';
      }
  }
}

}  // namespace pslab

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pslab/balance.hpp"
#include "pslab/dataset.hpp"
#include "pslab/hal_basis.hpp"
#include "pslab/lasso.hpp"
#include "pslab/weighting.hpp"

namespace pslab {

enum class Tuner { cv, max_smd, mean_smd };
enum class Basis { raw, hal };

Tuner parse_tuner(const std::string& name);
std::string tuner_name(Tuner t);
Basis parse_basis(const std::string& name);
std::string basis_name(Basis b);

struct AnalysisSpec {
  Tuner tuner = Tuner::cv;
  WeightScheme scheme = WeightScheme::IPW;
  Basis basis = Basis::raw;
  std::string label() const;
};

struct PipelineConfig {
  int n_folds = 10;
  int n_lambda = 100;
  double lambda_min_ratio = 1e-4;
  SolverOptions solver;
  BasisSpec basis_spec;  // used for Basis::hal
};

// Reference propensity model: CV-tuned LASSO on the full population, with
// full-data fitted probabilities at lambda_cv (this model generates data,
// it does not build weights).
struct ReferencePS {
  LassoPath path;
  Index cv_index = 0;
  Eigen::VectorXd fitted;  // full-data e-hat at lambda_cv, one per row
};

ReferencePS fit_reference_ps(const Dataset& ds, const FoldAssignment& folds,
                             const PipelineConfig& cfg = {});

// Unique c with sum_i expit(c + theta_i) = target_sum, by bisection on the
// strictly monotone sum; tolerance 1e-8 * n_u.
double calibrate_offset(const Eigen::VectorXd& theta, double target_sum);

struct SyntheticAssignmentModel {
  Eigen::VectorXd theta;  // logit of reference PS on unexposed rows
  double c = 0.0;
  Eigen::VectorXd pi;     // expit(c + theta)
  double target_sum = 0.0;
  double reference_lambda = 0.0;
};

SyntheticAssignmentModel make_assignment_model(const Eigen::VectorXd& theta,
                                               double target_sum,
                                               double reference_lambda = 0.0);

struct SyntheticCohort {
  std::vector<Index> rows;  // indices into the unexposed subset
  Eigen::VectorXd z;        // synthetic exposure
  std::uint64_t seed = 0;
};

std::vector<SyntheticCohort> generate_cohorts(
    const Dataset& ds_unexposed, const SyntheticAssignmentModel& model,
    int k, Index n_out, std::uint64_t master_seed);

struct AnalysisBias {
  AnalysisSpec spec;
  double mean_bias = 0.0;
  double mean_percent_bias = 0.0;  // 100 * mean(estimate) / mean(unadjusted)
  double sd_bias = 0.0;
  int k_ok = 0;
  int k_failed = 0;
  bool high_failure = false;  // more than 5% of cohorts failed
  std::vector<std::pair<double, double>> per_cohort;  // (estimate, unadjusted)
};

struct SyntheticBiasReport {
  std::vector<AnalysisBias> analyses;
  double mean_unadjusted = 0.0;
  int k = 0;
};

// Runs the full estimator pipeline (folds -> path -> tune -> estimate) on
// every cohort with Z as the exposure; the true synthetic effect is zero,
// so each estimate is itself the bias.
SyntheticBiasReport run_bias_detection(
    const std::vector<SyntheticCohort>& cohorts, const Dataset& ds_unexposed,
    const std::vector<AnalysisSpec>& analyses, const PipelineConfig& cfg = {});

// Mean over cohorts of the per-column mean difference across Z groups.
// `cols` holds the balance columns evaluated on the unexposed rows.
Eigen::VectorXd synthetic_column_differences(
    const std::vector<SyntheticCohort>& cohorts, const Eigen::MatrixXd& cols);

void export_synthetic_report_csv(const SyntheticBiasReport& report,
                                 const std::string& file,
                                 bool per_cohort_dump = false);

}  // namespace pslab

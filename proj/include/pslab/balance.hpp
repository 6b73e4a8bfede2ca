#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pslab/dataset.hpp"
#include "pslab/lasso.hpp"
#include "pslab/weighting.hpp"

namespace pslab {

// Sentinel used when the pooled-variance denominator collapses to zero
// while the group means differ.
inline constexpr double kSmdSentinel = 1e6;

struct BalanceReport {
  Eigen::VectorXd smd;   // signed, per balance column
  double max_abs = 0.0;
  double mean_abs = 0.0;
  Index n_undefined = 0;  // columns that hit the zero-denominator rule
};

enum class BalanceCriterion { max_smd, mean_smd };

BalanceCriterion parse_criterion(const std::string& name);
std::string criterion_name(BalanceCriterion c);

// Search range for the balance tuner. The balance criteria pick the degree
// of undersmoothing: by default the search runs over lambdas strictly below
// the cross-validation choice (an unrestricted search degenerates toward the
// CV choice, because out-of-fold weight noise is itself minimized there).
// full_grid performs the unrestricted argmin.
enum class BalanceSearch { undersmooth_only, full_grid };

struct TunerChoice {
  BalanceCriterion criterion;
  Index chosen_index = 0;
  double achieved = 0.0;
  std::vector<double> per_lambda;       // criterion value per lambda index
  std::vector<Index> skipped_indices;   // zero-group-weight indices
};

// Weighted standardized difference of one column across exposure groups.
// Binary columns use the prevalence variance p(1-p); continuous columns the
// weighted sample variance. Weighted quantities appear in numerator and
// denominator alike.
double standardized_difference(const Eigen::VectorXd& col,
                               const Eigen::VectorXd& a,
                               const Eigen::VectorXd& w, ColKind kind,
                               bool* undefined = nullptr);

BalanceReport balance_report(const Eigen::MatrixXd& balance_cols,
                             const std::vector<ColKind>& kinds,
                             const Eigen::VectorXd& a,
                             const Eigen::VectorXd& w);

// Selects the lambda index minimizing the balance criterion, with
// out-of-fold weights at each lambda. Ties break toward the larger lambda.
// Under the default undersmooth_only search the argmin runs over lambdas
// strictly below the cross-validation choice (falling back to the CV index
// when no smaller lambda exists); per_lambda is always populated for the
// whole grid. The tuner never sees the outcome.
TunerChoice tune_by_balance(const LassoPath& path, const Dataset& ds,
                            WeightScheme scheme, BalanceCriterion criterion,
                            const Eigen::MatrixXd& balance_cols,
                            const std::vector<ColKind>& balance_kinds,
                            BalanceSearch search = BalanceSearch::undersmooth_only);

}  // namespace pslab

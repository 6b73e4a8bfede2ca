#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "pslab/dataset.hpp"

namespace pslab {

// Standardized design for the penalized logistic problem. Continuous
// columns are centered and scaled to unit variance; binary columns are
// left as-is (center=0, scale=1). The loss is mean-scaled:
//   L(b0, b) = -(1/n) sum_i [a_i log p_i + (1-a_i) log(1-p_i)] + lambda*|b|_1
// with p_i = expit(b0 + z_i . b). Coefficients on the original covariate
// scale are recovered via scale/center.
struct Problem {
  Eigen::MatrixXd z;       // n x d standardized design
  Eigen::VectorXd a;       // exposure
  Eigen::VectorXd center;  // per column
  Eigen::VectorXd scale;   // per column (1 where not scaled)
  Index n = 0, d = 0;
  // 0/1 columns with density <= 1/2 keep their support as an index list;
  // the solver's per-coordinate work then scales with the support size.
  std::vector<std::vector<int>> support;  // empty vector = treat as dense

  static Problem from_dataset(const Dataset& ds);
  static Problem from_parts(const Eigen::MatrixXd& x, const Eigen::VectorXd& a,
                            const std::vector<ColKind>& kind);
};

struct SolverOptions {
  double tol_coef = 1e-7;     // max abs coefficient change, standardized scale
  double kkt_tol = 1e-6;
  int max_passes = 100000;    // coordinate passes
  int max_irls = 200;
  double prob_clip = 1e-12;   // inside IRLS/deviance only
  // When false, stop once the active set is stable at a loose tolerance
  // instead of tightening until the KKT certificate holds.
  bool kkt_polish = true;
  // Fold refits only feed held-out predictions, so they skip the polish
  // unless asked otherwise.
  bool polish_fold_fits = false;
};

struct LassoFit {
  double intercept = 0.0;         // original covariate scale
  Eigen::VectorXd coefs;          // original covariate scale
  double intercept_std = 0.0;     // standardized problem scale
  Eigen::VectorXd coefs_std;
  double lambda = 0.0;
  Index n_nonzero = 0;
  bool converged = false;
  bool separation_warning = false;
  int n_iter = 0;                 // coordinate passes used
};

// Smallest lambda whose solution has all slopes zero:
//   max_j |z_j . (a - abar)| / n  on the standardized design.
double lambda_max(const Problem& pr);
double lambda_max(const Dataset& ds);

// Geometric grid from lmax down to ratio*lmax, length L.
std::vector<double> make_lambda_grid(double lmax, int L, double ratio);

LassoFit fit_at_lambda(const Problem& pr, double lambda,
                       const LassoFit* warm = nullptr,
                       const SolverOptions& opt = {});
LassoFit fit_at_lambda(const Dataset& ds, double lambda,
                       const LassoFit* warm = nullptr,
                       const SolverOptions& opt = {});

// expit(b0 + x . b) on the original covariate scale.
double predict(const LassoFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& x_row);
Eigen::VectorXd predict(const LassoFit& fit, const Eigen::MatrixXd& x);

// Mean-scaled objective and unpenalized gradient on the standardized
// problem; shared by the solver, its KKT certificate, and test oracles.
double objective(const Problem& pr, double intercept_std,
                 const Eigen::VectorXd& coefs_std, double lambda,
                 double prob_clip = 1e-12);
Eigen::VectorXd loss_gradient(const Problem& pr, double intercept_std,
                              const Eigen::VectorXd& coefs_std,
                              double* intercept_grad = nullptr);
bool kkt_satisfied(const Problem& pr, const LassoFit& fit, double tol);

struct LassoPath {
  std::vector<double> lambdas;       // strictly decreasing, [0] = lambda_max
  std::vector<LassoFit> fits;        // full-data fits
  std::vector<double> cv_deviance;   // mean out-of-fold binomial deviance
  std::vector<double> cv_se;
  Index lambda_cv_index = 0;         // argmin cv_deviance, ties -> larger lambda
  Eigen::MatrixXd oof_pred;          // n x L out-of-fold probabilities
};

// Full-data fits with warm starts plus per-fold path refits that populate
// oof_pred for held-out rows at every lambda. n_threads > 1 parallelizes
// the fold loop; the result is identical at any thread count.
LassoPath fit_path(const Dataset& ds, const std::vector<double>& grid,
                   const FoldAssignment& folds, const SolverOptions& opt = {},
                   int n_threads = 1);

double binomial_deviance(double a, double p, double clip = 1e-12);

void export_path_csv(const LassoPath& path, const std::string& file,
                     bool dump_coefs = false);

}  // namespace pslab

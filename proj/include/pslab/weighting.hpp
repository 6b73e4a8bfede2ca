#pragma once

#include <Eigen/Dense>
#include <string>

#include "pslab/dataset.hpp"
#include "pslab/lasso.hpp"

namespace pslab {

enum class WeightScheme { IPW, MW, OW };

WeightScheme parse_scheme(const std::string& name);
std::string scheme_name(WeightScheme s);

struct WeightedEstimate {
  double estimate = 0.0;  // weighted mean difference, exposed minus unexposed
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double sum_w_exposed = 0.0;
  double sum_w_unexposed = 0.0;
  double max_weight = 0.0;
};

// Elementwise weight formulas:
//   IPW: a/e + (1-a)/(1-e)
//   MW : min(e, 1-e)/e for exposed, min(e, 1-e)/(1-e) for unexposed
//   OW : (1-e) for exposed, e for unexposed
Eigen::VectorXd compute_weights(const Eigen::VectorXd& ps,
                                const Eigen::VectorXd& a, WeightScheme scheme);

// Hajek contrast with a fixed-weight HC0-style variance:
//   Var_g = sum w_i^2 (y_i - ybar_g)^2 / (sum w_i)^2, summed over groups.
WeightedEstimate weighted_mean_difference(const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& a,
                                          const Eigen::VectorXd& w);

// Weights from the out-of-fold prediction column at lambda_index.
WeightedEstimate estimate_effect(const LassoPath& path, Index lambda_index,
                                 const Dataset& ds, WeightScheme scheme);

}  // namespace pslab

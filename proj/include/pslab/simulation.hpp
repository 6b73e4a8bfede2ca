#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "pslab/dataset.hpp"

namespace pslab {

struct Setup1Config {
  Index n = 5000;
  Index n_confounders = 100;
  Index n_spurious = 900;
  double coef_lo = 0.0;
  double coef_hi = 0.693;
  double cov_prevalence = 0.2;
  double target_exposure_prev = 0.30;
  double target_outcome_incidence = 0.05;
  std::uint64_t seed = 0;
};

struct Setup2Config {
  Index n = 1000;
  double noise_variance = 0.1;  // variance of the Gaussian outcome noise
  std::uint64_t seed = 0;
};

struct GroundTruth {
  Eigen::VectorXd true_ps;
  double true_effect = 0.0;  // both setups are null
  Eigen::VectorXd beta;      // exposure model coefficients (setup 1)
  Eigen::VectorXd alpha;     // outcome model coefficients (setup 1)
  double beta0 = 0.0;
  double alpha0 = 0.0;
  std::string formula_tag;   // setup 2 outcome formula identifier
};

// Intercept b with mean_i expit(b + lp_i) = target_mean, by bisection.
double calibrate_intercept(const Eigen::VectorXd& linear_predictor,
                           double target_mean, double tol = 1e-10);

std::pair<Dataset, GroundTruth> generate_setup1(const Setup1Config& cfg);
std::pair<Dataset, GroundTruth> generate_setup2(const Setup2Config& cfg);

void write_truth_csv(const GroundTruth& truth, const std::string& path);

}  // namespace pslab

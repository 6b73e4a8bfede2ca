#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pslab/dataset.hpp"

namespace pslab {

enum class KnotRule { all_observed, quantile };

struct BasisSpec {
  int max_degree = 2;          // interaction order
  int knots_per_cov = 10;      // quantile-rule limit for continuous columns
  KnotRule knot_rule = KnotRule::quantile;
  bool dedupe = true;
  Index column_cap = 50000;
};

// One indicator-product column: the pointwise product of 1(x_j >= knot)
// over the (covariate, knot) pairs.
struct BasisTerm {
  std::vector<std::pair<Index, double>> factors;  // sorted by covariate index
  int degree() const { return static_cast<int>(factors.size()); }
};

struct BasisExpansion {
  Eigen::MatrixXd w;              // n x m, {0,1}-valued
  std::vector<BasisTerm> terms;   // size m
  Index source_dims = 0;
};

// Binary columns get the single knot {1}; continuous columns get distinct
// observed values or deduplicated empirical quantiles at i/(k+1). A constant
// column yields an empty knot list and is dropped with a warning.
std::vector<std::vector<double>> enumerate_knots(const Dataset& ds,
                                                 const BasisSpec& spec,
                                                 std::vector<std::string>* warnings = nullptr);

BasisExpansion expand_basis(const Dataset& ds, const BasisSpec& spec,
                            std::vector<std::string>* warnings = nullptr);

// Applies stored term descriptors to new rows, same column order.
Eigen::MatrixXd transform_new(const BasisExpansion& expansion,
                              const Eigen::MatrixXd& x_new);

void export_terms_csv(const BasisExpansion& expansion, const std::string& file);

}  // namespace pslab

#include "pslab/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pslab {

WeightScheme parse_scheme(const std::string& name) {
  if (name == "IPW" || name == "ipw") return WeightScheme::IPW;
  if (name == "MW" || name == "mw") return WeightScheme::MW;
  if (name == "OW" || name == "ow") return WeightScheme::OW;
  throw std::invalid_argument("unknown weight scheme '" + name + "'");
}

std::string scheme_name(WeightScheme s) {
  switch (s) {
    case WeightScheme::IPW: return "IPW";
    case WeightScheme::MW: return "MW";
    case WeightScheme::OW: return "OW";
  }
  return "?";
}

Eigen::VectorXd compute_weights(const Eigen::VectorXd& ps,
                                const Eigen::VectorXd& a,
                                WeightScheme scheme) {
  if (ps.size() != a.size())
    throw std::invalid_argument("compute_weights: size mismatch");
  Eigen::VectorXd w(ps.size());
  for (Index i = 0; i < ps.size(); ++i) {
    const double e = ps[i];
    if (!(e > 0.0 && e < 1.0))
      throw std::invalid_argument(
          "compute_weights: propensity score outside (0,1) at row " +
          std::to_string(i + 1) + " (positivity violation)");
    const bool exposed = a[i] == 1.0;
    switch (scheme) {
      case WeightScheme::IPW:
        w[i] = exposed ? 1.0 / e : 1.0 / (1.0 - e);
        break;
      case WeightScheme::MW: {
        const double m = std::min(e, 1.0 - e);
        w[i] = exposed ? m / e : m / (1.0 - e);
        break;
      }
      case WeightScheme::OW:
        w[i] = exposed ? 1.0 - e : e;
        break;
    }
  }
  return w;
}

WeightedEstimate weighted_mean_difference(const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& a,
                                          const Eigen::VectorXd& w) {
  if (y.size() != a.size() || y.size() != w.size())
    throw std::invalid_argument("weighted_mean_difference: size mismatch");
  double sw1 = 0.0, sw0 = 0.0, swy1 = 0.0, swy0 = 0.0, maxw = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    if (w[i] < 0.0)
      throw std::invalid_argument("weighted_mean_difference: negative weight");
    if (a[i] == 1.0) {
      sw1 += w[i];
      swy1 += w[i] * y[i];
    } else {
      sw0 += w[i];
      swy0 += w[i] * y[i];
    }
    maxw = std::max(maxw, w[i]);
  }
  if (!(sw1 > 0.0) || !(sw0 > 0.0))
    throw std::invalid_argument(
        "weighted_mean_difference: a group has zero total weight");
  const double m1 = swy1 / sw1;
  const double m0 = swy0 / sw0;
  double v1 = 0.0, v0 = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    if (a[i] == 1.0)
      v1 += w[i] * w[i] * (y[i] - m1) * (y[i] - m1);
    else
      v0 += w[i] * w[i] * (y[i] - m0) * (y[i] - m0);
  }
  WeightedEstimate est;
  est.estimate = m1 - m0;
  est.se = std::sqrt(v1 / (sw1 * sw1) + v0 / (sw0 * sw0));
  est.ci_low = est.estimate - 1.96 * est.se;
  est.ci_high = est.estimate + 1.96 * est.se;
  est.sum_w_exposed = sw1;
  est.sum_w_unexposed = sw0;
  est.max_weight = maxw;
  return est;
}

WeightedEstimate estimate_effect(const LassoPath& path, Index lambda_index,
                                 const Dataset& ds, WeightScheme scheme) {
  if (lambda_index < 0 ||
      lambda_index >= static_cast<Index>(path.lambdas.size()))
    throw std::invalid_argument("estimate_effect: lambda index out of range");
  const Eigen::VectorXd ps = path.oof_pred.col(lambda_index);
  const Eigen::VectorXd w = compute_weights(ps, ds.a, scheme);
  return weighted_mean_difference(ds.y, ds.a, w);
}

}  // namespace pslab

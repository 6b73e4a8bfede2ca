#include "pslab/balance.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pslab {

BalanceCriterion parse_criterion(const std::string& name) {
  if (name == "max_smd") return BalanceCriterion::max_smd;
  if (name == "mean_smd") return BalanceCriterion::mean_smd;
  throw std::invalid_argument("unknown balance criterion '" + name + "'");
}

std::string criterion_name(BalanceCriterion c) {
  return c == BalanceCriterion::max_smd ? "max_smd" : "mean_smd";
}

namespace {

// smd from weighted group moments; the zero-denominator rule maps an exact
// tie to 0 and a genuine difference to the signed sentinel.
double smd_from_moments(double m1, double m0, double v1, double v0,
                        bool* undefined) {
  const double denom = std::sqrt(0.5 * (v1 + v0));
  if (denom > 0.0) return (m1 - m0) / denom;
  if (undefined) *undefined = true;
  if (m1 == m0) return 0.0;
  return (m1 > m0 ? 1.0 : -1.0) * kSmdSentinel;
}

}  // namespace

double standardized_difference(const Eigen::VectorXd& col,
                               const Eigen::VectorXd& a,
                               const Eigen::VectorXd& w, ColKind kind,
                               bool* undefined) {
  if (col.size() != a.size() || col.size() != w.size())
    throw std::invalid_argument("standardized_difference: size mismatch");
  double sw1 = 0.0, sw0 = 0.0, s1 = 0.0, s0 = 0.0, q1 = 0.0, q0 = 0.0;
  for (Index i = 0; i < col.size(); ++i) {
    if (a[i] == 1.0) {
      sw1 += w[i];
      s1 += w[i] * col[i];
      q1 += w[i] * col[i] * col[i];
    } else {
      sw0 += w[i];
      s0 += w[i] * col[i];
      q0 += w[i] * col[i] * col[i];
    }
  }
  if (!(sw1 > 0.0) || !(sw0 > 0.0))
    throw std::invalid_argument(
        "standardized_difference: a group has zero total weight");
  const double m1 = s1 / sw1;
  const double m0 = s0 / sw0;
  double v1, v0;
  if (kind == ColKind::binary) {
    v1 = m1 * (1.0 - m1);
    v0 = m0 * (1.0 - m0);
  } else {
    v1 = std::max(0.0, q1 / sw1 - m1 * m1);
    v0 = std::max(0.0, q0 / sw0 - m0 * m0);
  }
  return smd_from_moments(m1, m0, v1, v0, undefined);
}

BalanceReport balance_report(const Eigen::MatrixXd& balance_cols,
                             const std::vector<ColKind>& kinds,
                             const Eigen::VectorXd& a,
                             const Eigen::VectorXd& w) {
  const Index K = balance_cols.cols();
  if (K < 1) throw std::invalid_argument("balance_report: no columns");
  if (static_cast<Index>(kinds.size()) != K)
    throw std::invalid_argument("balance_report: kinds size mismatch");
  BalanceReport rep;
  rep.smd.resize(K);
  double sum_abs = 0.0;
  for (Index k = 0; k < K; ++k) {
    bool undef = false;
    rep.smd[k] =
        standardized_difference(balance_cols.col(k), a, w, kinds[k], &undef);
    if (undef) ++rep.n_undefined;
    const double ab = std::abs(rep.smd[k]);
    rep.max_abs = std::max(rep.max_abs, ab);
    sum_abs += ab;
  }
  rep.mean_abs = sum_abs / static_cast<double>(K);
  return rep;
}

TunerChoice tune_by_balance(const LassoPath& path, const Dataset& ds,
                            WeightScheme scheme, BalanceCriterion criterion,
                            const Eigen::MatrixXd& balance_cols,
                            const std::vector<ColKind>& balance_kinds,
                            BalanceSearch search) {
  const Index L = static_cast<Index>(path.lambdas.size());
  const Index K = balance_cols.cols();
  if (K < 1) throw std::invalid_argument("tune_by_balance: no balance columns");
  if (balance_cols.rows() != ds.n())
    throw std::invalid_argument("tune_by_balance: row count mismatch");
  if (path.oof_pred.rows() != ds.n() || path.oof_pred.cols() != L)
    throw std::invalid_argument("tune_by_balance: path lacks oof predictions");

  bool any_continuous = false;
  for (ColKind k : balance_kinds) any_continuous |= (k == ColKind::continuous);
  Eigen::MatrixXd cols_sq;
  if (any_continuous) cols_sq = balance_cols.array().square();

  TunerChoice choice;
  choice.criterion = criterion;
  choice.per_lambda.assign(L, std::numeric_limits<double>::quiet_NaN());

  // the balance criteria choose the degree of undersmoothing: by default
  // only lambdas strictly below the CV choice compete for the argmin
  const Index first_eligible = search == BalanceSearch::undersmooth_only
                                   ? path.lambda_cv_index + 1
                                   : 0;
  Index best = -1;
  double best_val = std::numeric_limits<double>::infinity();
  Index cv_fallback_ok = -1;  // cv index, if its criterion was computable
  const Eigen::ArrayXd amask = ds.a.array();
  for (Index l = 0; l < L; ++l) {
    const Eigen::VectorXd w =
        compute_weights(path.oof_pred.col(l), ds.a, scheme);
    const Eigen::VectorXd w1 = (w.array() * amask).matrix();
    const Eigen::VectorXd w0 = (w.array() * (1.0 - amask)).matrix();
    const double sw1 = w1.sum();
    const double sw0 = w0.sum();
    if (!(sw1 > 0.0) || !(sw0 > 0.0)) {
      choice.skipped_indices.push_back(l);
      continue;
    }
    const Eigen::VectorXd m1 = balance_cols.transpose() * w1 / sw1;
    const Eigen::VectorXd m0 = balance_cols.transpose() * w0 / sw0;
    Eigen::VectorXd q1, q0;
    if (any_continuous) {
      q1 = cols_sq.transpose() * w1 / sw1;
      q0 = cols_sq.transpose() * w0 / sw0;
    }
    double max_abs = 0.0, sum_abs = 0.0;
    for (Index k = 0; k < K; ++k) {
      double v1, v0;
      if (balance_kinds[k] == ColKind::binary) {
        v1 = m1[k] * (1.0 - m1[k]);
        v0 = m0[k] * (1.0 - m0[k]);
      } else {
        v1 = std::max(0.0, q1[k] - m1[k] * m1[k]);
        v0 = std::max(0.0, q0[k] - m0[k] * m0[k]);
      }
      const double s = std::abs(smd_from_moments(m1[k], m0[k], v1, v0, nullptr));
      max_abs = std::max(max_abs, s);
      sum_abs += s;
    }
    const double val = (criterion == BalanceCriterion::max_smd)
                           ? max_abs
                           : sum_abs / static_cast<double>(K);
    choice.per_lambda[l] = val;
    if (l == path.lambda_cv_index) cv_fallback_ok = l;
    if (l >= first_eligible && val < best_val) {
      // strict: ties keep the larger lambda
      best_val = val;
      best = l;
    }
  }
  if (best < 0 && cv_fallback_ok >= 0) {
    // no lambda below the CV choice exists (or all were skipped): zero
    // undersmoothing, i.e. the CV choice itself
    best = cv_fallback_ok;
    best_val = choice.per_lambda[best];
  }
  if (best < 0)
    throw std::runtime_error("tune_by_balance: every lambda index was skipped");
  choice.chosen_index = best;
  choice.achieved = best_val;
  return choice;
}

}  // namespace pslab

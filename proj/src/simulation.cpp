#include "pslab/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "pslab/rng.hpp"

namespace pslab {

double calibrate_intercept(const Eigen::VectorXd& lp, double target_mean,
                           double tol) {
  if (!(target_mean > 0.0 && target_mean < 1.0))
    throw std::invalid_argument("calibrate_intercept: target must be in (0,1)");
  const auto mean_at = [&](double b) {
    double s = 0.0;
    for (Index i = 0; i < lp.size(); ++i) s += expit(b + lp[i]);
    return s / static_cast<double>(lp.size());
  };
  double lo = -1.0, hi = 1.0;
  while (mean_at(lo) > target_mean) lo *= 2.0;
  while (mean_at(hi) < target_mean) hi *= 2.0;
  // mean_at is strictly increasing in b, so bisection is exact
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_at(mid) < target_mean)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < tol) break;
  }
  return 0.5 * (lo + hi);
}

std::pair<Dataset, GroundTruth> generate_setup1(const Setup1Config& cfg) {
  if (cfg.n < cfg.n_confounders)
    throw std::invalid_argument("setup1: n must be >= number of confounders");
  Rng rng(derive_seed(cfg.seed, 0x5e71ULL));
  const Index n = cfg.n;
  const Index d = cfg.n_confounders + cfg.n_spurious;

  Dataset ds;
  ds.x.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      ds.x(i, j) = rng.bernoulli(cfg.cov_prevalence) ? 1.0 : 0.0;

  GroundTruth truth;
  truth.beta.resize(cfg.n_confounders);
  truth.alpha.resize(cfg.n_confounders);
  for (Index j = 0; j < cfg.n_confounders; ++j)
    truth.beta[j] = rng.uniform(cfg.coef_lo, cfg.coef_hi);
  for (Index j = 0; j < cfg.n_confounders; ++j)
    truth.alpha[j] = rng.uniform(cfg.coef_lo, cfg.coef_hi);

  const Eigen::VectorXd lp_e =
      ds.x.leftCols(cfg.n_confounders) * truth.beta;
  const Eigen::VectorXd lp_y =
      ds.x.leftCols(cfg.n_confounders) * truth.alpha;
  truth.beta0 = calibrate_intercept(lp_e, cfg.target_exposure_prev);
  truth.alpha0 = calibrate_intercept(lp_y, cfg.target_outcome_incidence);

  // outcome is drawn before exposure: A never enters the outcome path
  ds.y.resize(n);
  for (Index i = 0; i < n; ++i)
    ds.y[i] = rng.bernoulli(expit(truth.alpha0 + lp_y[i])) ? 1.0 : 0.0;
  truth.true_ps.resize(n);
  ds.a.resize(n);
  for (Index i = 0; i < n; ++i) {
    truth.true_ps[i] = expit(truth.beta0 + lp_e[i]);
    ds.a[i] = rng.bernoulli(truth.true_ps[i]) ? 1.0 : 0.0;
  }

  ds.col_kind.assign(d, ColKind::binary);
  ds.col_names.resize(d);
  for (Index j = 0; j < d; ++j) ds.col_names[j] = "X" + std::to_string(j + 1);
  truth.formula_tag = "setup1";
  return {std::move(ds), std::move(truth)};
}

std::pair<Dataset, GroundTruth> generate_setup2(const Setup2Config& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("setup2: n must be >= 1");
  Rng rng(derive_seed(cfg.seed, 0x5e72ULL));
  const Index n = cfg.n;
  const Index d = 10;
  Dataset ds;
  ds.x.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 5; ++j) ds.x(i, j) = rng.uniform(-2.0, 2.0);
    for (Index j = 5; j < 10; ++j) ds.x(i, j) = rng.bernoulli(0.6) ? 1.0 : 0.0;
  }

  GroundTruth truth;
  truth.true_ps.resize(n);
  ds.y.resize(n);
  ds.a.resize(n);
  const double ex2 = 4.0 / 3.0;  // E[X^2] for X ~ unif(-2,2)
  const double sd = std::sqrt(cfg.noise_variance);
  for (Index i = 0; i < n; ++i) {
    const double x1 = ds.x(i, 0), x2 = ds.x(i, 1), x3 = ds.x(i, 2),
                 x4 = ds.x(i, 3), x5 = ds.x(i, 4), x6 = ds.x(i, 5),
                 x7 = ds.x(i, 6);
    truth.true_ps[i] = expit(x2 * x2 - std::exp(0.5 * x1) - x3 + x4 -
                             std::exp(0.5 * x5) + x6 + x7);
    // outcome first, exposure after: the outcome never sees A
    ds.y[i] = -2.0 * x2 * x2 + 2.0 * x1 + 2.0 * ex2 + x2 + x1 * x2 + x3 + x4 +
              2.0 * x5 * x5 - 2.0 * ex2 + rng.normal(0.0, sd);
  }
  for (Index i = 0; i < n; ++i)
    ds.a[i] = rng.bernoulli(truth.true_ps[i]) ? 1.0 : 0.0;

  ds.col_kind.assign(d, ColKind::continuous);
  for (Index j = 5; j < 10; ++j) ds.col_kind[j] = ColKind::binary;
  ds.col_names.resize(d);
  for (Index j = 0; j < d; ++j) ds.col_names[j] = "X" + std::to_string(j + 1);
  truth.formula_tag = "setup2";
  return {std::move(ds), std::move(truth)};
}

void write_truth_csv(const GroundTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  out << "row,true_ps,beta,alpha\n";
  const Index n = truth.true_ps.size();
  const Index nc = truth.beta.size();
  for (Index i = 0; i < std::max(n, nc); ++i) {
    out << (i + 1) << ',';
    if (i < n) put(truth.true_ps[i]);
    out << ',';
    if (i < nc) put(truth.beta[i]);
    out << ',';
    if (i < nc) put(truth.alpha[i]);
    out << '\n';
  }
}

}  // namespace pslab

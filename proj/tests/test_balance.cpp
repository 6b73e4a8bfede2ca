#include <doctest.h>

#include <cmath>

#include "pslab/balance.hpp"
#include "pslab/rng.hpp"
#include "pslab/simulation.hpp"

using namespace pslab;

TEST_CASE("standardized difference matches the hand-computed binary case") {
  // prevalences 0.25 vs 0.15: (0.25-0.15)/sqrt((0.1875+0.1275)/2)
  //   = 0.1/sqrt(0.1575) ... with equal weights
  Eigen::VectorXd col(8), a(8), w(8);
  a << 1, 1, 1, 1, 0, 0, 0, 0;
  w.setOnes();
  col << 1, 0, 0, 0, 1, 0, 0, 0;  // 0.25 vs 0.25
  CHECK(standardized_difference(col, a, w, ColKind::binary) == 0.0);

  // the frozen reference value: p1=0.3, p0=0.2 ->
  //   0.1 / sqrt((0.21 + 0.16)/2) = 0.1/sqrt(0.185)
  Eigen::VectorXd c2(20), a2(20), w2(20);
  a2.setZero();
  a2.head(10).setOnes();
  w2.setOnes();
  c2.setZero();
  c2[0] = c2[1] = c2[2] = 1;    // exposed prevalence 0.3
  c2[10] = c2[11] = 1;          // unexposed prevalence 0.2
  const double s = standardized_difference(c2, a2, w2, ColKind::binary);
  CHECK(s == doctest::Approx(0.23249527748763857).epsilon(1e-12));
}

TEST_CASE("weighted prevalences enter numerator and denominator") {
  Eigen::VectorXd col(4), a(4), w(4);
  a << 1, 1, 0, 0;
  col << 1, 0, 1, 0;
  w << 3, 1, 1, 1;
  // p1 = 3/4, p0 = 1/2
  const double expect =
      (0.75 - 0.5) / std::sqrt(0.5 * (0.75 * 0.25 + 0.5 * 0.5));
  CHECK(standardized_difference(col, a, w, ColKind::binary) ==
        doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("zero-denominator rule: tie gives 0, difference gives sentinel") {
  Eigen::VectorXd col(4), a(4), w(4);
  a << 1, 1, 0, 0;
  w.setOnes();
  col << 1, 1, 1, 1;  // both prevalences 1 -> variance 0, tie
  bool undef = false;
  CHECK(standardized_difference(col, a, w, ColKind::binary, &undef) == 0.0);
  CHECK(undef);

  col << 1, 1, 0, 0;  // prevalences 1 vs 0 -> variance 0, real difference
  undef = false;
  const double s = standardized_difference(col, a, w, ColKind::binary, &undef);
  CHECK(s == kSmdSentinel);
  CHECK(undef);
}

TEST_CASE("continuous columns use weighted variances") {
  Eigen::VectorXd col(6), a(6), w(6);
  a << 1, 1, 1, 0, 0, 0;
  w.setOnes();
  col << 1, 2, 3, 2, 4, 6;
  const double m1 = 2.0, m0 = 4.0;
  const double v1 = 2.0 / 3.0, v0 = 8.0 / 3.0;
  const double expect = (m1 - m0) / std::sqrt(0.5 * (v1 + v0));
  CHECK(standardized_difference(col, a, w, ColKind::continuous) ==
        doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("balance_report aggregates match brute force on random weights") {
  Rng rng(31);
  const Index n = 200, K = 12;
  Eigen::MatrixXd cols(n, K);
  Eigen::VectorXd a(n), w(n);
  std::vector<ColKind> kinds;
  for (Index k = 0; k < K; ++k)
    kinds.push_back(k % 2 == 0 ? ColKind::binary : ColKind::continuous);
  for (Index i = 0; i < n; ++i) {
    a[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    w[i] = 0.05 + rng.uniform(0.0, 3.0);
    for (Index k = 0; k < K; ++k)
      cols(i, k) = kinds[k] == ColKind::binary
                       ? (rng.bernoulli(0.3) ? 1.0 : 0.0)
                       : rng.normal();
  }
  const BalanceReport rep = balance_report(cols, kinds, a, w);
  double max_abs = 0.0, sum_abs = 0.0;
  for (Index k = 0; k < K; ++k) {
    const double s = standardized_difference(cols.col(k), a, w, kinds[k]);
    CHECK(rep.smd[k] == s);
    max_abs = std::max(max_abs, std::abs(s));
    sum_abs += std::abs(s);
  }
  CHECK(rep.max_abs == doctest::Approx(max_abs).epsilon(1e-14));
  CHECK(rep.mean_abs == doctest::Approx(sum_abs / K).epsilon(1e-14));
}

TEST_CASE("tune_by_balance minimizes the criterion with larger-lambda ties") {
  // small end-to-end path on a simulated dataset
  Setup1Config cfg;
  cfg.n = 400;
  cfg.n_confounders = 10;
  cfg.n_spurious = 10;
  cfg.seed = 5;
  const auto [ds, truth] = generate_setup1(cfg);
  const auto grid = make_lambda_grid(lambda_max(ds), 12, 1e-2);
  const auto folds = assign_folds(ds, 5, 3);
  const LassoPath path = fit_path(ds, grid, folds, {}, 1);

  for (auto crit : {BalanceCriterion::max_smd, BalanceCriterion::mean_smd}) {
    const TunerChoice full = tune_by_balance(path, ds, WeightScheme::IPW, crit,
                                             ds.x, ds.col_kind,
                                             BalanceSearch::full_grid);
    REQUIRE(full.chosen_index >= 0);
    REQUIRE(full.per_lambda.size() == grid.size());
    // brute-force recomputation of the criterion per lambda
    for (std::size_t l = 0; l < grid.size(); ++l) {
      const Eigen::VectorXd w =
          compute_weights(path.oof_pred.col(l), ds.a, WeightScheme::IPW);
      const BalanceReport rep = balance_report(ds.x, ds.col_kind, ds.a, w);
      const double v =
          crit == BalanceCriterion::max_smd ? rep.max_abs : rep.mean_abs;
      CHECK(full.per_lambda[l] == doctest::Approx(v).epsilon(1e-12));
      if (static_cast<Index>(l) < full.chosen_index)
        CHECK(v > full.achieved);  // strictly worse before the chosen index
      else
        CHECK(v >= full.achieved);
    }

    // default search: the criterion picks the degree of undersmoothing, so
    // only lambdas strictly below the CV choice compete
    const TunerChoice under =
        tune_by_balance(path, ds, WeightScheme::IPW, crit, ds.x, ds.col_kind);
    CHECK(under.per_lambda == full.per_lambda);
    if (path.lambda_cv_index + 1 < static_cast<Index>(grid.size())) {
      CHECK(under.chosen_index > path.lambda_cv_index);
      for (Index l = path.lambda_cv_index + 1;
           l < static_cast<Index>(grid.size()); ++l) {
        CHECK(under.per_lambda[l] >= under.achieved);
        if (l < under.chosen_index) CHECK(under.per_lambda[l] > under.achieved);
      }
    } else {
      CHECK(under.chosen_index == path.lambda_cv_index);
    }
  }
}

TEST_CASE("undersmooth search falls back to the CV index on a singleton path") {
  Setup1Config cfg;
  cfg.n = 200;
  cfg.n_confounders = 5;
  cfg.n_spurious = 5;
  cfg.seed = 9;
  const auto [ds, truth] = generate_setup1(cfg);
  const std::vector<double> grid = {lambda_max(ds)};
  const auto folds = assign_folds(ds, 4, 2);
  const LassoPath path = fit_path(ds, grid, folds, {}, 1);
  REQUIRE(path.lambda_cv_index == 0);
  const TunerChoice ch = tune_by_balance(
      path, ds, WeightScheme::IPW, BalanceCriterion::max_smd, ds.x, ds.col_kind);
  CHECK(ch.chosen_index == 0);
}

TEST_CASE("criterion names round trip") {
  CHECK(parse_criterion("max_smd") == BalanceCriterion::max_smd);
  CHECK(parse_criterion("mean_smd") == BalanceCriterion::mean_smd);
  CHECK(criterion_name(BalanceCriterion::mean_smd) == "mean_smd");
  CHECK_THROWS_AS(parse_criterion("median_smd"), std::invalid_argument);
}

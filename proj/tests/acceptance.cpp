// Acceptance suite: one pass/fail line per criterion. Long-running Monte
// Carlo experiments are shared across criteria and executed lazily.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pslab/balance.hpp"
#include "pslab/experiment.hpp"
#include "pslab/rng.hpp"
#include "pslab/simulation.hpp"
#include "pslab/synthetic_nc.hpp"

using namespace pslab;

namespace {

void report(int id, bool pass, const std::string& detail) {
  std::printf("[criterion %2d] %s  %s\n", id, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", id, ": ", detail);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared experiment configurations.
//
// The Monte Carlo experiments below use a 15-point lambda grid down to
// 0.03*lambda_max (about the same per-step spacing as the default
// 100-point/4-decade grid, truncated to the region that matters here: the
// cross-validated optimum sits at lambda/lambda_max ~ 0.1 on these designs
// and both tuners select within the covered range, verified interior at
// every n used below) and 5-fold cross-validation to keep the
// single-machine runtime within budget. All other semantics are the
// library defaults.
// ---------------------------------------------------------------------------

constexpr int kFolds = 5;
constexpr int kNLambda = 15;
constexpr double kRatio = 3e-2;

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.setup = "setup1";
  cfg.tuners = {Tuner::cv, Tuner::max_smd, Tuner::mean_smd};
  cfg.schemes = {WeightScheme::IPW, WeightScheme::MW, WeightScheme::OW};
  cfg.n_folds = kFolds;
  cfg.n_lambda = kNLambda;
  cfg.lambda_min_ratio = kRatio;
  cfg.master_seed = 20250825;
  cfg.synthetic_mode = SyntheticMode::off;
  cfg.parallelism = 1;
  return cfg;
}

// Criterion 6/9/13 share this config: Setup 1 at n=5000, 100 replicates,
// all nine tuner-scheme cells.
ExperimentConfig main5000_config() {
  ExperimentConfig cfg = base_config();
  cfg.n_list = {5000};
  cfg.n_replicates = 100;
  return cfg;
}

struct Main5000 {
  ExperimentResult run_a;   // parallelism 1
  std::string metrics_a, metrics_b;
};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const Main5000& main5000() {
  static const Main5000 shared = [] {
    namespace fs = std::filesystem;
    Main5000 out;
    ExperimentConfig cfg = main5000_config();
    cfg.parallelism = 1;
    out.run_a = run_experiment(cfg);
    const fs::path dir_a = fs::temp_directory_path() / "pslab_acc_main_a";
    fs::remove_all(dir_a);
    emit_results(out.run_a, dir_a.string());
    out.metrics_a = read_file(dir_a / "metrics.csv");

    cfg.parallelism = 3;  // different thread count, same config
    const ExperimentResult run_b = run_experiment(cfg);
    const fs::path dir_b = fs::temp_directory_path() / "pslab_acc_main_b";
    fs::remove_all(dir_b);
    emit_results(run_b, dir_b.string());
    out.metrics_b = read_file(dir_b / "metrics.csv");
    return out;
  }();
  return shared;
}

// Criteria 7/8: n = 2000 and 10000, 100 replicates, IPW only.
const ExperimentResult& scaling_run() {
  static const ExperimentResult shared = [] {
    ExperimentConfig cfg = base_config();
    cfg.n_list = {2000, 10000};
    cfg.n_replicates = 100;
    cfg.schemes = {WeightScheme::IPW};
    return run_experiment(cfg);
  }();
  return shared;
}

// Criterion 9: synthetic negative-control pipeline at n=5000 (small Monte
// Carlo: the synthetic side refits the full path on every cohort).
const ExperimentResult& synthetic_run() {
  static const ExperimentResult shared = [] {
    ExperimentConfig cfg = base_config();
    cfg.n_list = {5000};
    cfg.n_replicates = 8;
    cfg.synthetic_mode = SyntheticMode::full;
    cfg.k_synthetic = 16;
    return run_experiment(cfg);
  }();
  return shared;
}

// Criterion 10: alignment statistics across the desk-scale n grid.
const ExperimentResult& alignment_run() {
  static const ExperimentResult shared = [] {
    ExperimentConfig cfg = base_config();
    // The alignment statistic regresses synthetic-cohort covariate mean
    // differences on the actual exposure-group differences over all 1000
    // columns; 900 of those carry no signal, so the actual-data side is
    // noise-dominated (variance ~ 1/n) until n is fairly large. The grid
    // therefore extends to n=40000 for this criterion.
    cfg.n_list = {2000, 10000, 40000};
    cfg.n_replicates = 1;
    cfg.schemes = {WeightScheme::IPW};
    cfg.synthetic_mode = SyntheticMode::alignment_only;
    cfg.k_synthetic = 60;
    return run_experiment(cfg);
  }();
  return shared;
}

// Criterion 11: Setup 2 with the HAL basis.
const ExperimentResult& setup2_run() {
  static const ExperimentResult shared = [] {
    ExperimentConfig cfg = base_config();
    cfg.setup = "setup2";
    cfg.n_list = {1000};
    cfg.n_replicates = 50;
    return run_experiment(cfg);
  }();
  return shared;
}

const MetricsRow& find_row(const std::vector<MetricsRow>& table, Index n,
                           const std::string& tuner,
                           const std::string& scheme) {
  for (const MetricsRow& row : table)
    if (row.n == n && row.tuner == tuner && row.scheme == scheme) return row;
  throw std::logic_error("metrics row not found: " + tuner + "/" + scheme);
}

double spearman(std::vector<double> x, std::vector<double> y) {
  const auto ranks = [](const std::vector<double>& v) {
    const std::size_t m = v.size();
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(m);
    for (std::size_t pos = 0; pos < m;) {
      std::size_t end = pos;
      while (end + 1 < m && v[idx[end + 1]] == v[idx[pos]]) ++end;
      const double avg = 0.5 * (pos + end) + 1.0;
      for (std::size_t k = pos; k <= end; ++k) r[idx[k]] = avg;
      pos = end + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

Problem random_problem(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  std::vector<ColKind> kind;
  for (Index j = 0; j < d; ++j)
    kind.push_back(j % 2 == 0 ? ColKind::binary : ColKind::continuous);
  Eigen::VectorXd beta(d);
  for (Index j = 0; j < d; ++j) beta[j] = rng.uniform(-0.8, 0.8);
  Eigen::VectorXd a(n);
  for (Index i = 0; i < n; ++i) {
    double lp = -0.4;
    for (Index j = 0; j < d; ++j) {
      x(i, j) = kind[j] == ColKind::binary ? (rng.bernoulli(0.3) ? 1.0 : 0.0)
                                           : rng.normal();
      lp += beta[j] * x(i, j);
    }
    a[i] = rng.bernoulli(expit(lp)) ? 1.0 : 0.0;
  }
  return Problem::from_parts(x, a, kind);
}

}  // namespace

// --------------------------------------------------------------------------
// 1. Solver correctness: KKT certificate and proximal-gradient oracle.
// --------------------------------------------------------------------------
TEST_CASE("criterion 1: solver KKT + objective oracle") {
  int n_instances = 0, kkt_ok = 0, obj_ok = 0;
  double worst_rel = 0.0;
  int id = 0;
  for (Index d : {Index(5), Index(10), Index(50)}) {
    // 17+17+16 = 50 instances
    const int reps = d == 50 ? 16 : 17;
    for (int rep = 0; rep < reps; ++rep) {
      const Problem pr = random_problem(200, d, 9100 + 31 * id++);
      const double lmax = lambda_max(pr);
      const double lambda = (0.4 - 0.07 * (id % 5)) * lmax;
      const LassoFit fit = fit_at_lambda(pr, lambda);
      ++n_instances;
      if (kkt_satisfied(pr, fit, 1e-6)) ++kkt_ok;
      const double obj_cd =
          objective(pr, fit.intercept_std, fit.coefs_std, lambda);
      const double obj_prox = oracle::proximal_gradient_objective(pr, lambda);
      const double rel = std::abs(obj_cd - obj_prox) / std::abs(obj_prox);
      worst_rel = std::max(worst_rel, rel);
      if (rel <= 1e-8) ++obj_ok;
    }
  }
  report(1, n_instances == 50 && kkt_ok == 50 && obj_ok == 50,
         fmt("%d/50 instances pass KKT(1e-6); objective vs proximal oracle "
             "worst rel err %.2e (tol 1e-8)",
             kkt_ok, worst_rel));
}

// --------------------------------------------------------------------------
// 2. lambda_max anchor.
// --------------------------------------------------------------------------
TEST_CASE("criterion 2: lambda_max anchor") {
  const Index n = 300;
  Rng rng(17);
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd a(n);
  for (Index i = 0; i < n; ++i) {
    const double strong = rng.bernoulli(0.5) ? 1.0 : 0.0;
    x(i, 0) = strong;
    x(i, 1) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    x(i, 2) = rng.normal();
    a[i] = rng.bernoulli(0.15 + 0.7 * strong) ? 1.0 : 0.0;
  }
  const Problem pr = Problem::from_parts(
      x, a, {ColKind::binary, ColKind::binary, ColKind::continuous});
  const double lmax = lambda_max(pr);
  const LassoFit at_max = fit_at_lambda(pr, lmax);
  const LassoFit below = fit_at_lambda(pr, 0.99 * lmax, &at_max);
  report(2, at_max.n_nonzero == 0 && below.n_nonzero >= 1,
         fmt("n_nonzero at lambda_max = %ld, at 0.99*lambda_max = %ld",
             at_max.n_nonzero, below.n_nonzero));
}

// --------------------------------------------------------------------------
// 3. Weight formulas on a 99-point e-grid.
// --------------------------------------------------------------------------
TEST_CASE("criterion 3: weight formulas") {
  Eigen::VectorXd e(99), a1(99), a0(99);
  for (int i = 0; i < 99; ++i) e[i] = (i + 1) / 100.0;
  a1.setOnes();
  a0.setZero();
  double worst = 0.0;
  const auto check = [&](WeightScheme s, const Eigen::VectorXd& a,
                         auto formula) {
    const Eigen::VectorXd w = compute_weights(e, a, s);
    for (int i = 0; i < 99; ++i)
      worst = std::max(worst, std::abs(w[i] - formula(e[i])));
  };
  check(WeightScheme::IPW, a1, [](double ei) { return 1.0 / ei; });
  check(WeightScheme::IPW, a0, [](double ei) { return 1.0 / (1.0 - ei); });
  check(WeightScheme::MW, a1,
        [](double ei) { return std::min(ei, 1.0 - ei) / ei; });
  check(WeightScheme::MW, a0,
        [](double ei) { return std::min(ei, 1.0 - ei) / (1.0 - ei); });
  check(WeightScheme::OW, a1, [](double ei) { return 1.0 - ei; });
  check(WeightScheme::OW, a0, [](double ei) { return ei; });
  report(3, worst <= 1e-15,
         fmt("max |weight - printed formula| = %.2e over 99 e-points x "
             "both exposures x 3 schemes (tol 1e-15)",
             worst));
}

// --------------------------------------------------------------------------
// 4. Balance formula: frozen hand case + brute-force aggregates.
// --------------------------------------------------------------------------
TEST_CASE("criterion 4: balance formula") {
  Eigen::VectorXd c2(20), a2(20), w2(20);
  a2.setZero();
  a2.head(10).setOnes();
  w2.setOnes();
  c2.setZero();
  c2[0] = c2[1] = c2[2] = 1;
  c2[10] = c2[11] = 1;
  const double s = standardized_difference(c2, a2, w2, ColKind::binary);
  const double hand_err = std::abs(s - 0.23249527748763857);

  Rng rng(31);
  const Index n = 150, K = 10;
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
  double max_abs = 0.0, sum_abs = 0.0, col_err = 0.0;
  for (Index k = 0; k < K; ++k) {
    const double sk = standardized_difference(cols.col(k), a, w, kinds[k]);
    col_err = std::max(col_err, std::abs(rep.smd[k] - sk));
    max_abs = std::max(max_abs, std::abs(sk));
    sum_abs += std::abs(sk);
  }
  const double agg_err = std::max(std::abs(rep.max_abs - max_abs),
                                  std::abs(rep.mean_abs - sum_abs / K));
  report(4, hand_err <= 1e-12 && col_err <= 1e-12 && agg_err <= 1e-12,
         fmt("frozen-case err %.2e, per-column err %.2e, aggregate err %.2e "
             "(tol 1e-12)",
             hand_err, col_err, agg_err));
}

// --------------------------------------------------------------------------
// 5. Algorithm-1 calibration vs grid-scan oracle + proportional odds.
// --------------------------------------------------------------------------
TEST_CASE("criterion 5: synthetic assignment calibration") {
  Rng rng(77);
  double worst_c = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Index nu = 150 + 35 * rep;
    Eigen::VectorXd theta(nu);
    for (Index i = 0; i < nu; ++i) theta[i] = rng.normal(0.0, 1.2) - 0.8;
    const double target = rng.uniform(0.05, 0.6) * static_cast<double>(nu);
    const double c = calibrate_offset(theta, target);
    worst_c = std::max(worst_c,
                       std::abs(c - oracle::grid_scan_offset(theta, target)));
  }

  Eigen::VectorXd theta(400);
  for (Index i = 0; i < 400; ++i) theta[i] = rng.normal(-0.5, 1.0);
  const auto model = make_assignment_model(theta, 90.0);
  double worst_po = 0.0;
  const double k0 = std::exp(model.c);
  for (Index i = 0; i < 400; ++i) {
    const double k = (model.pi[i] / (1.0 - model.pi[i])) / std::exp(theta[i]);
    worst_po = std::max(worst_po, std::abs(k - k0) / k0);
  }
  report(5, worst_c <= 1e-6 && worst_po <= 1e-10,
         fmt("offset vs grid-scan oracle worst |dc| = %.2e (tol 1e-6); "
             "proportional-odds worst rel dev = %.2e (tol 1e-10)",
             worst_c, worst_po));
}

// --------------------------------------------------------------------------
// 6. Undersmoothing ordering at Setup 1, n=5000, 100 replicates.
// --------------------------------------------------------------------------
TEST_CASE("criterion 6: undersmoothing ordering") {
  const auto& res = main5000().run_a;
  const MetricsRow& cv = find_row(res.table, 5000, "cv", "IPW");
  const MetricsRow& mx = find_row(res.table, 5000, "max_smd", "IPW");
  const MetricsRow& mn = find_row(res.table, 5000, "mean_smd", "IPW");
  const bool bias_max = std::abs(mx.bias) < std::abs(cv.bias);
  const bool bias_mean = std::abs(mn.bias) < std::abs(cv.bias);
  const bool below_max = mx.frac_lambda_below_cv >= 0.80;
  const bool below_mean = mn.frac_lambda_below_cv >= 0.80;
  report(6, bias_max && bias_mean && below_max && below_mean,
         fmt("|bias| IPW: cv %.4f, max_smd %.4f, mean_smd %.4f; "
             "frac(lambda<lambda_cv): max_smd %.2f, mean_smd %.2f (need "
             ">=0.80)",
             std::abs(cv.bias), std::abs(mx.bias), std::abs(mn.bias),
             mx.frac_lambda_below_cv, mn.frac_lambda_below_cv));
}

// --------------------------------------------------------------------------
// 7. Bias shrinks with n for the balance-tuned IPW estimator.
// --------------------------------------------------------------------------
TEST_CASE("criterion 7: bias shrinks with n") {
  const auto& res = scaling_run();
  const MetricsRow& small_n = find_row(res.table, 2000, "max_smd", "IPW");
  const MetricsRow& large_n = find_row(res.table, 10000, "max_smd", "IPW");
  const bool pass = std::abs(large_n.bias) < std::abs(small_n.bias);
  report(7, pass,
         fmt("balance(max_smd)-IPW |bias|: n=2000 %.4f (MC SE %.4f), "
             "n=10000 %.4f (MC SE %.4f)",
             std::abs(small_n.bias), small_n.bias_mc_se,
             std::abs(large_n.bias), large_n.bias_mc_se));
}

// --------------------------------------------------------------------------
// 8. Coverage ordering at n=10000.
// --------------------------------------------------------------------------
TEST_CASE("criterion 8: coverage ordering") {
  const auto& res = scaling_run();
  const MetricsRow& cv = find_row(res.table, 10000, "cv", "IPW");
  const MetricsRow& bal = find_row(res.table, 10000, "max_smd", "IPW");
  const double d_cv = std::abs(cv.coverage95 - 0.95);
  const double d_bal = std::abs(bal.coverage95 - 0.95);
  report(8, d_bal <= d_cv,
         fmt("coverage95 at n=10000: cv %.3f, balance(max_smd) %.3f "
             "(|dev from 0.95|: %.3f vs %.3f)",
             cv.coverage95, bal.coverage95, d_cv, d_bal));
}

// --------------------------------------------------------------------------
// 9. Synthetic/actual bias alignment across the nine cells.
// --------------------------------------------------------------------------
TEST_CASE("criterion 9: synthetic bias alignment") {
  const auto& synth = synthetic_run();
  const auto& actual = main5000().run_a;
  int agree = 0, cells = 0;
  std::vector<double> syn_pct, act_pct;
  for (const std::string& tuner : {"cv", "max_smd", "mean_smd"}) {
    for (const std::string& scheme : {"IPW", "MW", "OW"}) {
      const MetricsRow& s = find_row(synth.table, 5000, tuner, scheme);
      const MetricsRow& a = find_row(actual.table, 5000, tuner, scheme);
      ++cells;
      if ((s.mean_synthetic_bias > 0) == (a.bias > 0)) ++agree;
      syn_pct.push_back(s.mean_synthetic_percent_bias);
      act_pct.push_back(a.percent_bias);
    }
  }
  const double rho = spearman(syn_pct, act_pct);
  report(9, agree == cells && rho >= 0.7,
         fmt("sign agreement %d/%d cells; Spearman(synthetic %%bias, actual "
             "%%bias) = %.3f (need >=0.7)",
             agree, cells, rho));
}

// --------------------------------------------------------------------------
// 10. Covariate-difference alignment trend over n.
// --------------------------------------------------------------------------
TEST_CASE("criterion 10: alignment trend") {
  const auto& res = alignment_run();
  std::vector<double> slope, r2;
  for (const ReplicateResult& r : res.replicates) {
    if (!r.has_alignment) continue;
    slope.push_back(r.align_slope);
    r2.push_back(r.align_r2);
  }
  REQUIRE(slope.size() == 3);
  int inversions = 0;
  for (int i = 0; i + 1 < 3; ++i) {
    if (slope[i + 1] <= slope[i]) ++inversions;
    if (r2[i + 1] <= r2[i]) ++inversions;
  }
  const bool pass = inversions <= 1 && r2.back() > 0.8;
  report(10, pass,
         fmt("slope by n: %.3f, %.3f, %.3f; R2 by n: %.3f, %.3f, %.3f; "
             "%d inversion(s) (allow 1), largest-n R2 %.3f (need >0.8)",
             slope[0], slope[1], slope[2], r2[0], r2[1], r2[2], inversions,
             r2.back()));
}

// --------------------------------------------------------------------------
// 11. Setup 2 / HAL end-to-end ordering.
// --------------------------------------------------------------------------
TEST_CASE("criterion 11: setup2 HAL ordering") {
  const auto& res = setup2_run();
  int schemes_better = 0;
  std::string detail;
  for (const std::string& scheme : {"IPW", "MW", "OW"}) {
    const MetricsRow& cv = find_row(res.table, 1000, "cv", scheme);
    const MetricsRow& mx = find_row(res.table, 1000, "max_smd", scheme);
    const MetricsRow& mn = find_row(res.table, 1000, "mean_smd", scheme);
    const bool better = std::abs(mx.bias) < std::abs(cv.bias) &&
                        std::abs(mn.bias) < std::abs(cv.bias);
    if (better) ++schemes_better;
    detail += fmt("%s|bias| %s: cv %.3f max %.3f mean %.3f",
                  detail.empty() ? "" : "; ", scheme.c_str(),
                  std::abs(cv.bias), std::abs(mx.bias), std::abs(mn.bias));
  }
  report(11, schemes_better >= 2,
         fmt("balance beats cv on %d/3 schemes (need >=2) -- %s",
             schemes_better, detail.c_str()));
}

// --------------------------------------------------------------------------
// 12. Null-oracle synthetic check: true-pi weighting is unbiased.
// --------------------------------------------------------------------------
TEST_CASE("criterion 12: null-oracle synthetic check") {
  Setup1Config cfg;
  cfg.n = 4000;
  cfg.seed = 17;
  const auto [ds, truth] = generate_setup1(cfg);
  const Dataset u = subset_unexposed(ds);
  Eigen::VectorXd theta(u.n());
  {
    Index r = 0;
    for (Index i = 0; i < ds.n(); ++i)
      if (ds.a[i] == 0.0) theta[r++] = logit(truth.true_ps[i]);
  }
  const auto model =
      make_assignment_model(theta, 0.25 * static_cast<double>(u.n()));
  const int k = 40;
  const auto cohorts = generate_cohorts(u, model, k, ds.n(), 7);
  double sum = 0.0, sumsq = 0.0;
  for (const auto& co : cohorts) {
    Eigen::VectorXd y(co.rows.size()), w(co.rows.size());
    for (std::size_t i = 0; i < co.rows.size(); ++i) {
      y[i] = u.y[co.rows[i]];
      const double pi = model.pi[co.rows[i]];
      w[i] = co.z[i] == 1.0 ? 1.0 / pi : 1.0 / (1.0 - pi);
    }
    const double est = weighted_mean_difference(y, co.z, w).estimate;
    sum += est;
    sumsq += est * est;
  }
  const double mean = sum / k;
  const double sd = std::sqrt((sumsq / k - mean * mean) * k / (k - 1.0));
  const double mc_se = sd / std::sqrt(static_cast<double>(k));
  report(12, std::abs(mean) < 3.0 * mc_se,
         fmt("|mean synthetic bias| with true-pi weights = %.5f, 3*MC SE = "
             "%.5f over %d cohorts",
             std::abs(mean), 3.0 * mc_se, k));
}

// --------------------------------------------------------------------------
// 13. Determinism: byte-identical metrics.csv across thread counts.
// --------------------------------------------------------------------------
TEST_CASE("criterion 13: determinism across thread counts") {
  const Main5000& shared = main5000();
  const bool pass = !shared.metrics_a.empty() &&
                    shared.metrics_a == shared.metrics_b;
  report(13, pass,
         fmt("metrics.csv bytes: run A (1 thread) %zu, run B (3 threads) "
             "%zu, identical: %s",
             shared.metrics_a.size(), shared.metrics_b.size(),
             pass ? "yes" : "no"));
}
